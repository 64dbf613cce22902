"""Small formula evaluator used to confirm scenario arithmetic.

Only the functions the cost models use are available. Values are floats,
strings, booleans, `ErrorValue` or None for a blank cell.
"""
from dataclasses import dataclass
import math
from decimal import ROUND_UP, Decimal, localcontext
from graphlib import CycleError as GraphCycleError
from graphlib import TopologicalSorter
from typing import Any, Callable, Dict, Iterator, List, Optional, Set, Tuple, Union

from core.errors import CycleError, FormulaSyntaxError, ShapeMismatchError, SleuthError, UnsupportedFunctionError
from models.formula import (BinaryOp, Boolean, ErrorLiteral, FunctionCall, Node, Number, Paren, Percent,
                            Reference, Text, UnaryOp)
from models.grid import CellAddr, WorkbookSet, column_letters
from service.formula_parser import format_number, parse_cached
from service.references import Box, formula_boxes, resolve


@dataclass(frozen=True)
class ErrorValue:
    code: str

    def __str__(self) -> str:
        return self.code


DIV0 = ErrorValue("#DIV/0!")
VALUE = ErrorValue("#VALUE!")
REF = ErrorValue("#REF!")
NUM = ErrorValue("#NUM!")

Value = Union[float, str, bool, ErrorValue, None]


@dataclass(frozen=True)
class RangeValue:
    """Row-major values of a rectangle."""
    values: Tuple[Value, ...]
    rows: int
    cols: int

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)


Operand = Union[Value, RangeValue]
CellKey = Tuple[str, str, int, int]


def first_error(*values: Any) -> Optional[ErrorValue]:
    for v in values:
        if isinstance(v, ErrorValue):
            return v
    return None


def to_number(value: Value) -> Union[float, ErrorValue]:
    if value is None:
        return 0.0
    if isinstance(value, ErrorValue):
        return value
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, str):
        return VALUE
    return float(value)


def to_text(value: Value) -> Union[str, ErrorValue]:
    if value is None:
        return ""
    if isinstance(value, ErrorValue):
        return value
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, float):
        return format_number(value)
    return value


def to_bool(value: Value) -> Union[bool, ErrorValue]:
    if value is None:
        return False
    if isinstance(value, (bool, ErrorValue)):
        return value
    if isinstance(value, str):
        return VALUE
    return value != 0


def display(value: Value) -> str:
    """Text for the `eval` verb and the HTTP surface."""
    if value is None:
        return ""
    if isinstance(value, (str, ErrorValue)):
        return str(value)
    return to_text(value)


# --- builtins ---

def _numbers(args: List[Operand]) -> Union[List[float], ErrorValue]:
    """Range members contribute only their numbers; direct arguments are coerced."""
    numbers: List[float] = []
    for arg in args:
        if isinstance(arg, RangeValue):
            for v in arg.values:
                if isinstance(v, ErrorValue):
                    return v
                if isinstance(v, float):
                    numbers.append(v)
            continue
        n = to_number(arg)
        if isinstance(n, ErrorValue):
            return n
        numbers.append(n)
    return numbers


def _sum(args: List[Operand]) -> Value:
    numbers = _numbers(args)
    return numbers if isinstance(numbers, ErrorValue) else float(sum(numbers))


def _max(args: List[Operand]) -> Value:
    numbers = _numbers(args)
    if isinstance(numbers, ErrorValue):
        return numbers
    return max(numbers) if numbers else 0.0


def _min(args: List[Operand]) -> Value:
    numbers = _numbers(args)
    if isinstance(numbers, ErrorValue):
        return numbers
    return min(numbers) if numbers else 0.0


def _sumproduct(args: List[Operand]) -> Value:
    if not args:
        raise ValueError("SUMPRODUCT requires at least one argument")
    ranges = [a if isinstance(a, RangeValue) else RangeValue((a,), 1, 1) for a in args]
    shape = ranges[0].shape
    for r in ranges[1:]:
        if r.shape != shape:
            raise ShapeMismatchError(f"SUMPRODUCT ranges differ in shape: {shape} vs {r.shape}")
    error = first_error(*(v for r in ranges for v in r.values))
    if error is not None:
        return error
    total = 0.0
    for i in range(shape[0] * shape[1]):
        product = 1.0
        for r in ranges:
            v = r.values[i]
            product *= v if isinstance(v, float) else 0.0
        total += product
    return total


def roundup(x: float, digits: int) -> float:
    """Away from zero at `digits` decimals; negative digits round to tens, hundreds."""
    if not math.isfinite(x):
        return x
    # floats hold no digits beyond 1e+-400
    digits = max(-400, min(400, digits))
    value = Decimal(repr(x))
    if value.as_tuple().exponent >= -digits:
        return x
    with localcontext() as ctx:
        ctx.prec = 800
        return float(value.quantize(Decimal(1).scaleb(-digits), rounding=ROUND_UP))


def _roundup(args: List[Operand]) -> Value:
    if len(args) not in (1, 2):
        raise ValueError("ROUNDUP requires 1 or 2 arguments")
    x = to_number(_scalar(args[0]))
    digits = to_number(_scalar(args[1])) if len(args) == 2 else 0.0
    error = first_error(x, digits)
    if error is not None:
        return error
    if not math.isfinite(digits):
        return NUM
    return roundup(x, int(digits))


BUILTINS: Dict[str, Callable[[List[Operand]], Value]] = {
    "SUM": _sum,
    "SUMPRODUCT": _sumproduct,
    "ROUNDUP": _roundup,
    "MAX": _max,
    "MIN": _min,
}

SUPPORTED_FUNCTIONS = frozenset(BUILTINS) | {"IF"}


def _scalar(value: Operand) -> Value:
    """A multi-cell range used where one value is expected."""
    if isinstance(value, RangeValue):
        return value.values[0] if value.rows * value.cols == 1 else VALUE
    return value


# --- operators ---

def _arith(op: str, a: float, b: float) -> Value:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return DIV0 if b == 0 else a / b
    try:
        result = a ** b
    except (OverflowError, ZeroDivisionError):
        return DIV0 if a == 0 else NUM
    return NUM if isinstance(result, complex) else float(result)


_TYPE_RANK = {float: 0, str: 1, bool: 2}


def _compare(op: str, a: Value, b: Value) -> Value:
    error = first_error(a, b)
    if error is not None:
        return error
    # Blank takes the other side's type.
    if a is None:
        a = "" if isinstance(b, str) else (False if isinstance(b, bool) else 0.0)
    if b is None:
        b = "" if isinstance(a, str) else (False if isinstance(a, bool) else 0.0)
    ka, kb = _TYPE_RANK[type(a)], _TYPE_RANK[type(b)]
    if ka != kb:
        left, right = ka, kb
    elif isinstance(a, str):
        left, right = a.casefold(), b.casefold()
    else:
        left, right = a, b
    return {
        "=": left == right,
        "<>": left != right,
        "<": left < right,
        ">": left > right,
        "<=": left <= right,
        ">=": left >= right,
    }[op]


def _label(key: CellKey) -> str:
    _, sheet, row, col = key
    return f"{sheet}!{column_letters(col)}{row}"


class Evaluator:
    """Evaluation of one workbook set, recursing from the cell asked for.

    With `memo` on, each cell is computed once per evaluator and the formula
    cells a read depends on are computed ahead of it; without it every read
    recomputes through plain recursion, which is slow but shares no state
    between reads.
    """

    def __init__(self, workbooks: WorkbookSet, memo: bool = True):
        self.workbooks = workbooks
        self.memo = memo
        self._values: Dict[CellKey, Value] = {}
        self._active: List[CellKey] = []

    def evaluate(self, addr: CellAddr) -> Value:
        if self.memo and not self._active and addr.key() not in self._values:
            self._prime(addr)
        return self._compute(addr)

    def _formula_reads(self, addr: CellAddr) -> Iterator[CellAddr]:
        content = self.workbooks.get(addr)
        if not content.is_formula:
            return
        for box in formula_boxes(content.formula, addr.workbook, addr.sheet, self.workbooks):
            for row, col in box.cells():
                read = CellAddr(workbook=box.workbook, sheet=box.sheet, row=row, col=col)
                if self.workbooks.get(read).is_formula:
                    yield read

    def _prime(self, root: CellAddr) -> None:
        """Compute what `root` reads, precedents first, so no read nests deeply.

        Cells that fail here are left uncomputed; `root` meets the same
        failure again, with its own reference path, when it reaches them.
        """
        seen = {root.key()}
        order: List[CellAddr] = []
        stack = [(root, self._formula_reads(root))]
        while stack:
            addr, pending = stack[-1]
            read = next(pending, None)
            if read is None:
                stack.pop()
                order.append(addr)
                continue
            key = read.key()
            if key in seen or key in self._values:
                continue
            seen.add(key)
            stack.append((read, self._formula_reads(read)))
        for addr in order[:-1]:
            try:
                self._compute(addr)
            except (SleuthError, ValueError):
                continue

    def _compute(self, addr: CellAddr) -> Value:
        key = addr.key()
        if self.memo and key in self._values:
            return self._values[key]
        content = self.workbooks.get(addr)
        if not content.is_formula:
            if content.is_blank:
                return None
            return content.number if content.number is not None else content.text
        if key in self._active:
            cycle = self._active[self._active.index(key):] + [key]
            raise CycleError("reference cycle: " + " -> ".join(_label(k) for k in cycle))
        self._active.append(key)
        try:
            try:
                ast = parse_cached(content.formula)
            except FormulaSyntaxError:
                value: Value = ErrorValue("#NAME?")
            else:
                value = _scalar(self._node(ast, addr))
        finally:
            self._active.pop()
        # A formula that reads a blank shows 0.
        if value is None:
            value = 0.0
        if self.memo:
            self._values[key] = value
        return value

    def _box(self, box: Box) -> Operand:
        values = tuple(self.evaluate(CellAddr(workbook=box.workbook, sheet=box.sheet, row=r, col=c))
                       for r, c in box.cells())
        rows, cols = box.bottom - box.top + 1, box.right - box.left + 1
        if rows * cols == 1:
            return values[0]
        return RangeValue(values, rows, cols)

    def _node(self, node: Node, at: CellAddr) -> Operand:
        if isinstance(node, Number):
            return float(node.value)
        if isinstance(node, Text):
            return node.value
        if isinstance(node, Boolean):
            return node.value
        if isinstance(node, ErrorLiteral):
            return ErrorValue(node.code)
        if isinstance(node, Reference):
            box = resolve(node, at.workbook, at.sheet, self.workbooks)
            return REF if box is None else self._box(box)
        if isinstance(node, Paren):
            return self._node(node.inner, at)
        if isinstance(node, Percent):
            n = to_number(_scalar(self._node(node.operand, at)))
            return n if isinstance(n, ErrorValue) else n / 100.0
        if isinstance(node, UnaryOp):
            n = to_number(_scalar(self._node(node.operand, at)))
            if isinstance(n, ErrorValue):
                return n
            return -n if node.op == "-" else n
        if isinstance(node, BinaryOp):
            return self._binary(node, at)
        if isinstance(node, FunctionCall):
            return self._call(node, at)
        raise TypeError(f"not a formula node: {node!r}")

    def _binary(self, node: BinaryOp, at: CellAddr) -> Value:
        a = _scalar(self._node(node.left, at))
        b = _scalar(self._node(node.right, at))
        if node.op == "&":
            ta, tb = to_text(a), to_text(b)
            return first_error(ta, tb) or ta + tb
        if node.op in ("=", "<>", "<", ">", "<=", ">="):
            return _compare(node.op, a, b)
        na, nb = to_number(a), to_number(b)
        error = first_error(na, nb)
        if error is not None:
            return error
        return _arith(node.op, na, nb)

    def _call(self, node: FunctionCall, at: CellAddr) -> Value:
        name = node.name.upper()
        if name == "IF":
            # Only the chosen branch is evaluated.
            if len(node.args) not in (2, 3):
                raise ValueError("IF requires 2 or 3 arguments")
            condition = to_bool(_scalar(self._node(node.args[0], at)))
            if isinstance(condition, ErrorValue):
                return condition
            if condition:
                return _scalar(self._node(node.args[1], at))
            return _scalar(self._node(node.args[2], at)) if len(node.args) == 3 else False
        fn = BUILTINS.get(name)
        if fn is None:
            raise UnsupportedFunctionError(f"function {node.name} is not supported by the evaluator")
        return fn([self._node(arg, at) for arg in node.args])


def evaluate(workbooks: WorkbookSet, addr: CellAddr) -> Value:
    return Evaluator(workbooks).evaluate(addr)


def evaluation_order(workbooks: WorkbookSet) -> List[CellAddr]:
    """Formula cells ordered so every cell comes after the formula cells it reads."""
    cells: Dict[CellKey, CellAddr] = {}
    graph: Dict[CellKey, Set[CellKey]] = {}
    for addr, content in workbooks.formula_cells():
        cells[addr.key()] = addr
        reads: Set[CellKey] = set()
        for box in formula_boxes(content.formula, addr.workbook, addr.sheet, workbooks):
            for row, col in box.cells():
                reads.add(CellAddr(workbook=box.workbook, sheet=box.sheet, row=row, col=col).key())
        graph[addr.key()] = reads
    try:
        order = list(TopologicalSorter(graph).static_order())
    except GraphCycleError as e:
        raise CycleError(f"reference cycle among {len(e.args[1]) - 1} formula cells") from None
    return [cells[key] for key in order if key in cells]


def evaluate_all(workbooks: WorkbookSet) -> Dict[CellAddr, Value]:
    """Every formula cell, computed in dependency order."""
    evaluator = Evaluator(workbooks)
    return {addr: evaluator.evaluate(addr) for addr in evaluation_order(workbooks)}
