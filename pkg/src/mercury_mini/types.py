"""Column types, comparison predicates, and value coercion shared by every layer."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import TypeMismatch


class ColumnType(str, Enum):
    INT64 = "int64"
    FLOAT64 = "float64"
    UTF8 = "utf8"

    @property
    def is_numeric(self) -> bool:
        return self is not ColumnType.UTF8


class AggFunc(str, Enum):
    COUNT_STAR = "count_star"
    COUNT = "count_col"
    SUM = "sum"
    MIN = "min"
    MAX = "max"
    AVG = "avg"


class CmpOp(str, Enum):
    EQ = "="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="


@dataclass(frozen=True)
class Predicate:
    """Simple comparison `column <op> literal`; the pushdown unit."""

    column: str
    op: CmpOp
    literal: object

    def matches(self, value) -> bool:
        # SQL three-valued logic collapsed: null never matches.
        if value is None:
            return False
        op = self.op
        lit = self.literal
        if op is CmpOp.EQ:
            return value == lit
        if op is CmpOp.NE:
            return value != lit
        if op is CmpOp.LT:
            return value < lit
        if op is CmpOp.LE:
            return value <= lit
        if op is CmpOp.GT:
            return value > lit
        return value >= lit


def check_literal(col_type: ColumnType, literal) -> None:
    """Reject literals that cannot be compared against the column type."""
    if literal is None:
        raise TypeMismatch("null literal in comparison")
    if col_type is ColumnType.UTF8:
        if not isinstance(literal, str):
            raise TypeMismatch(f"expected utf8 literal, got {type(literal).__name__}")
    else:
        if isinstance(literal, bool) or not isinstance(literal, (int, float)):
            raise TypeMismatch(f"expected numeric literal, got {type(literal).__name__}")


def coerce_value(col_type: ColumnType, value):
    """Normalize a cell value to the column's Python representation."""
    if value is None:
        return None
    if col_type is ColumnType.INT64:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"expected int64, got {value!r}")
        return value
    if col_type is ColumnType.FLOAT64:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"expected float64, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise TypeMismatch(f"expected utf8, got {value!r}")
    return value
