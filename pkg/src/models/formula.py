from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict


class Notation(str, Enum):
    A1 = "A1"
    R1C1 = "R1C1"


class RefKind(str, Enum):
    CELL = "SingleCell"
    RANGE = "Range"
    NAME = "Name"


Span = Tuple[int, int]


@dataclass(frozen=True)
class Coord:
    """One reference endpoint.

    In A1 notation row/col are grid indices. In R1C1 notation an absolute
    component is a grid index and a relative one is an offset from the anchor.
    """
    row: int
    col: int
    row_abs: bool = False
    col_abs: bool = False

    @property
    def fully_absolute(self) -> bool:
        return self.row_abs and self.col_abs


@dataclass(frozen=True)
class Number:
    value: float
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Text:
    value: str
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Boolean:
    value: bool
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class ErrorLiteral:
    code: str
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Reference:
    kind: RefKind
    notation: Notation
    start: Optional[Coord] = None
    end: Optional[Coord] = None
    name: Optional[str] = None
    sheet: Optional[str] = None
    workbook: Optional[str] = None
    span: Span = field(default=(0, 0), compare=False)

    @property
    def endpoints(self) -> Tuple[Coord, ...]:
        if self.kind == RefKind.RANGE:
            return (self.start, self.end)
        if self.kind == RefKind.CELL:
            return (self.start,)
        return ()


@dataclass(frozen=True)
class FunctionCall:
    name: str
    args: Tuple["Node", ...] = ()
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: "Node"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Percent:
    operand: "Node"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Paren:
    inner: "Node"
    span: Span = field(default=(0, 0), compare=False)


Node = Union[Number, Text, Boolean, ErrorLiteral, Reference, FunctionCall, BinaryOp, UnaryOp, Percent, Paren]

LEAF_TYPES = (Number, Text, Boolean, ErrorLiteral, Reference)


class GenericFormula(BaseModel):
    """The R1C1 master formula shared by every cell of a formula area."""
    model_config = ConfigDict(frozen=True)

    r1c1_text: str

    @cached_property
    def ast(self) -> Node:
        from service.formula_parser import parse_cached
        return parse_cached(self.r1c1_text, Notation.R1C1)

    def __str__(self) -> str:
        return self.r1c1_text


class TraceRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    ref_type: str
    value_text: str
    nesting_level: int
    span: Tuple[int, int]
