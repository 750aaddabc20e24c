"""Mini query language: grammar coverage and byte-offset error reports."""

import pytest

from mercury_mini import CmpOp
from mercury_mini.errors import ParseError
from mercury_mini.minisql import parse
from mercury_mini.types import AggFunc


def test_plain_projection():
    q = parse("SELECT c1, c2 FROM t1")
    assert q.table == "t1"
    assert [(it.func, it.column) for it in q.items] == [(None, "c1"),
                                                        (None, "c2")]
    assert q.where == [] and q.group_by is None


def test_aggregates():
    q = parse("SELECT count(*), count(c1), sum(c2), min(c1), max(c1), avg(c2) "
              "FROM t1")
    assert [it.func for it in q.items] == [
        AggFunc.COUNT_STAR, AggFunc.COUNT, AggFunc.SUM, AggFunc.MIN,
        AggFunc.MAX, AggFunc.AVG]
    assert q.items[0].display == "count(*)"
    assert q.items[2].display == "sum(c2)"


def test_where_conjuncts():
    q = parse("SELECT c1 FROM t WHERE c1 > 5 AND c2 <= -3 AND tag = 'x''y'")
    assert [(p.column, p.op, p.literal) for p in q.where] == [
        ("c1", CmpOp.GT, 5), ("c2", CmpOp.LE, -3), ("tag", CmpOp.EQ, "x'y")]


def test_float_literal_variants():
    q = parse("SELECT c1 FROM t WHERE a = 1.5 AND b != 2e3 AND c <> 7")
    assert q.where[0].literal == 1.5
    assert q.where[1].op is CmpOp.NE and q.where[1].literal == 2000.0
    assert q.where[2].op is CmpOp.NE


def test_group_by():
    q = parse("select c2, count(*) from t1 where c1 >= 0 group by c2")
    assert q.group_by == "c2"


def test_parse_error_offsets():
    with pytest.raises(ParseError) as err:
        parse("SELECT FROM t1")
    assert err.value.offset == 7

    with pytest.raises(ParseError) as err:
        parse("SELECT c1 t1")
    assert err.value.offset == 10

    with pytest.raises(ParseError) as err:
        parse("SELECT c1 FROM t1 WHERE c1 ~ 3")
    assert err.value.offset == 27

    with pytest.raises(ParseError) as err:
        parse("SELECT c1 FROM t1 extra")
    assert err.value.offset == 18


def test_count_star_only_for_count():
    with pytest.raises(ParseError):
        parse("SELECT sum(*) FROM t1")


def test_unknown_aggregate():
    with pytest.raises(ParseError):
        parse("SELECT median(c1) FROM t1")


def test_trailing_garbage_offset_is_bytes():
    text = "SELECT c1 FROM t1 WHERE c1 = 'a' ,"
    with pytest.raises(ParseError) as err:
        parse(text)
    assert text[err.value.offset] == ","
