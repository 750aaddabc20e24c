"""Order-preserving key encoding: byte order must equal tuple order."""

import random

from mercury_mini import ColumnType
from mercury_mini import keys


def test_int64_sign_flip_order():
    values = [-(2**63), -1, 0, 1, 2**63 - 1]
    encoded = [keys.encode_int64(v) for v in values]
    assert encoded == sorted(encoded)


def test_int64_roundtrip():
    rng = random.Random(1)
    for _ in range(200):
        v = rng.randrange(-(2**63), 2**63)
        assert keys.decode_int64(keys.encode_int64(v)) == v


def test_float64_order_and_roundtrip():
    values = [-1e300, -2.5, -0.0, 0.0, 1e-9, 3.25, 1e300]
    encoded = [keys.encode_float64(v) for v in values]
    # -0.0 and 0.0 encode distinctly but order must be nondecreasing
    assert encoded == sorted(encoded)
    for v in values:
        assert keys.decode_float64(keys.encode_float64(v)) == v


def test_utf8_escaping_roundtrip():
    for s in ["", "a", "a\x00b", "\x00", "\x00\x00", "café", "￿"]:
        enc = keys.encode_value(ColumnType.UTF8, s)
        (out,) = keys.decode_tuple([ColumnType.UTF8], enc)
        assert out == s


def test_prefix_tuple_sorts_first():
    # ("a",) < ("a", "") < ("a", "b") under byte comparison
    one = keys.encode_tuple([ColumnType.UTF8], ("a",))
    two_empty = keys.encode_tuple([ColumnType.UTF8] * 2, ("a", ""))
    two_b = keys.encode_tuple([ColumnType.UTF8] * 2, ("a", "b"))
    assert one < two_empty < two_b


def test_nulls_sort_first():
    t = [ColumnType.INT64, ColumnType.UTF8]
    null_first = keys.encode_tuple(t, (None, "z"))
    low = keys.encode_tuple(t, (-(2**63), ""))
    assert null_first < low


def test_tuple_order_matches_lexicographic():
    rng = random.Random(2)
    types = [ColumnType.INT64, ColumnType.UTF8]
    alphabet = ["", "a", "ab", "b", "\x00", "z" * 5]
    tuples = [(rng.randrange(-50, 50), rng.choice(alphabet))
              for _ in range(300)]
    encoded = sorted(keys.encode_tuple(types, t) for t in tuples)
    by_value = [keys.encode_tuple(types, t) for t in sorted(tuples)]
    assert encoded == by_value


def test_distinct_tuples_never_collide():
    rng = random.Random(3)
    types = [ColumnType.INT64, ColumnType.UTF8]
    seen = {}
    for _ in range(2000):
        t = (rng.randrange(-20, 20), rng.choice(["", "x", "x\x00", "xy"]))
        enc = keys.encode_tuple(types, t)
        if enc in seen:
            assert seen[enc] == t
        seen[enc] = t
