import math
import re
from dataclasses import replace
from functools import lru_cache
from typing import Callable, Iterator, List, NamedTuple, Optional, Tuple

from core.errors import FormulaSyntaxError
from models.formula import (
    Boolean, Coord, ErrorLiteral, FunctionCall, BinaryOp, Node, Notation, Number, Paren,
    Percent, RefKind, Reference, Text, UnaryOp,
)
from models.grid import MAX_COL, MAX_ROW, column_index, column_letters, quote_sheet

ERROR_CODES = ("#DIV/0!", "#VALUE!", "#NAME?", "#NULL!", "#REF!", "#NUM!", "#N/A")
COMPARISONS = ("=", "<>", "<=", ">=", "<", ">")

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_BARE_SHEET = re.compile(r"([A-Za-z_][A-Za-z0-9_.]*)!")
_QUOTED_SHEET = re.compile(r"'((?:[^']|'')+)'!")
_WORKBOOK = re.compile(r"\[([^\]\[]+)\]")
_A1_CELL = re.compile(r"(\$?)([A-Za-z]{1,3})(\$?)(\d+)")
_R1C1_CELL = re.compile(r"[Rr](\[-?\d+\]|\d+)?[Cc](\[-?\d+\]|\d+)?")
_IDENT_CHAR = re.compile(r"[A-Za-z0-9_.(\[$!]")


class Token(NamedTuple):
    type: str  # NUM STR BOOL ERR REF FUNC OP LPAREN RPAREN COMMA EOF
    value: object
    start: int
    end: int


class FormulaLexer:
    """Splits formula text into tokens; references come out as ready Reference leaves."""

    def __init__(self, source: str, notation: Notation):
        self.source = source
        self.notation = notation
        self.pos = 0

    def tokens(self) -> List[Token]:
        out: List[Token] = []
        src = self.source
        while True:
            while self.pos < len(src) and src[self.pos].isspace():
                self.pos += 1
            if self.pos >= len(src):
                out.append(Token("EOF", None, self.pos, self.pos))
                return out
            out.append(self._next())

    def _next(self) -> Token:
        src, i = self.source, self.pos
        ch = src[i]

        if ch == '"':
            return self._string()
        if ch == "#":
            for code in ERROR_CODES:
                if src.upper().startswith(code, i):
                    self.pos = i + len(code)
                    return Token("ERR", code, i, self.pos)
            raise FormulaSyntaxError(i, "unknown error literal")
        if ch.isdigit() or (ch == "." and i + 1 < len(src) and src[i + 1].isdigit()):
            m = _NUMBER.match(src, i)
            self.pos = m.end()
            return Token("NUM", float(m.group(0)), i, self.pos)
        if ch == "(":
            self.pos += 1
            return Token("LPAREN", "(", i, self.pos)
        if ch == ")":
            self.pos += 1
            return Token("RPAREN", ")", i, self.pos)
        if ch == ",":
            self.pos += 1
            return Token("COMMA", ",", i, self.pos)
        two = src[i:i + 2]
        if two in ("<>", "<=", ">="):
            self.pos += 2
            return Token("OP", two, i, self.pos)
        if ch in "+-*/^&=<>%":
            self.pos += 1
            return Token("OP", ch, i, self.pos)
        if ch in "['" or ch.isalpha() or ch in "_$":
            return self._reference_or_word()
        raise FormulaSyntaxError(i, f"unexpected character {ch!r}")

    def _string(self) -> Token:
        src, start = self.source, self.pos
        i = start + 1
        chars = []
        while True:
            if i >= len(src):
                raise FormulaSyntaxError(start, "unterminated string")
            if src[i] == '"':
                if src[i + 1:i + 2] == '"':
                    chars.append('"')
                    i += 2
                    continue
                break
            chars.append(src[i])
            i += 1
        self.pos = i + 1
        return Token("STR", "".join(chars), start, self.pos)

    def _reference_or_word(self) -> Token:
        src, start = self.source, self.pos
        workbook = sheet = None
        i = start

        m = _WORKBOOK.match(src, i)
        if m:
            workbook = m.group(1)
            i = m.end()
        m = _QUOTED_SHEET.match(src, i) or _BARE_SHEET.match(src, i)
        if m:
            sheet = m.group(1).replace("''", "'") if src[i] == "'" else m.group(1)
            i = m.end()
        qualified = workbook is not None or sheet is not None

        ref = self._reference_body(i, start, workbook, sheet)
        if ref is not None:
            return ref

        m = _IDENT.match(src, i)
        if not m:
            raise FormulaSyntaxError(i, "malformed reference")
        word = m.group(0)
        after = m.end()
        if not qualified and after < len(src) and src[after] == "(":
            self.pos = after + 1
            return Token("FUNC", word.upper(), start, after + 1)
        if not qualified and word.upper() in ("TRUE", "FALSE"):
            self.pos = after
            return Token("BOOL", word.upper() == "TRUE", start, after)
        self.pos = after
        ref = Reference(kind=RefKind.NAME, notation=self.notation, name=word, sheet=sheet,
                        workbook=workbook, span=(start, after))
        return Token("REF", ref, start, after)

    def _reference_body(self, i: int, start: int, workbook: Optional[str],
                        sheet: Optional[str]) -> Optional[Token]:
        src = self.source
        first = self._coord(i)
        if first is None:
            return None
        coord, j = first
        end_coord = None
        if j < len(src) and src[j] == ":":
            second = self._coord(j + 1)
            if second is None:
                raise FormulaSyntaxError(j + 1, "malformed range endpoint")
            end_coord, j = second
        if j < len(src) and _IDENT_CHAR.match(src[j]):
            if end_coord is not None:
                raise FormulaSyntaxError(j, "malformed reference")
            return None
        kind = RefKind.CELL if end_coord is None else RefKind.RANGE
        ref = Reference(kind=kind, notation=self.notation, start=coord, end=end_coord,
                        sheet=sheet, workbook=workbook, span=(start, j))
        self.pos = j
        return Token("REF", ref, start, j)

    def _coord(self, i: int) -> Optional[Tuple[Coord, int]]:
        src = self.source
        if self.notation == Notation.A1:
            m = _A1_CELL.match(src, i)
            if not m:
                return None
            col, row = column_index(m.group(2)), int(m.group(4))
            if not (1 <= row <= MAX_ROW and 1 <= col <= MAX_COL):
                return None
            return Coord(row=row, col=col, row_abs=bool(m.group(3)), col_abs=bool(m.group(1))), m.end()
        m = _R1C1_CELL.match(src, i)
        if not m:
            return None
        row, row_abs = _r1c1_part(m.group(1))
        col, col_abs = _r1c1_part(m.group(2))
        return Coord(row=row, col=col, row_abs=row_abs, col_abs=col_abs), m.end()


def _r1c1_part(text: Optional[str]) -> Tuple[int, bool]:
    if text is None:
        return 0, False
    if text.startswith("["):
        return int(text[1:-1]), False
    return int(text), True


class FormulaParser:
    """Recursive descent over the token list.

    Precedence, loosest first: comparisons, &, + -, * /, ^, prefix sign,
    postfix %, primaries. All binary operators are left-associative.
    """

    def __init__(self, source: str, notation: Notation = Notation.A1):
        self.source = source
        self.notation = notation
        self.tokens: List[Token] = []
        self.index = 0

    def parse(self) -> Node:
        src = self.source
        offset = len(src) - len(src.lstrip())
        if src[offset:offset + 1] == "=":
            offset += 1
        lexer = FormulaLexer(src, self.notation)
        lexer.pos = offset
        self.tokens = lexer.tokens()
        self.index = 0
        if self._peek().type == "EOF":
            raise FormulaSyntaxError(offset, "empty formula")
        node = self._comparison()
        tok = self._peek()
        if tok.type != "EOF":
            if tok.type == "RPAREN":
                raise FormulaSyntaxError(tok.start, "unbalanced parentheses")
            raise FormulaSyntaxError(tok.start, f"unexpected {tok.type.lower()} token")
        return node

    def _peek(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def _binary(self, operand: Callable[[], Node], ops: Tuple[str, ...]) -> Node:
        left = operand()
        while self._peek().type == "OP" and self._peek().value in ops:
            op = self._advance().value
            right = operand()
            left = BinaryOp(op=op, left=left, right=right, span=(left.span[0], right.span[1]))
        return left

    def _comparison(self) -> Node:
        return self._binary(self._concat, COMPARISONS)

    def _concat(self) -> Node:
        return self._binary(self._additive, ("&",))

    def _additive(self) -> Node:
        return self._binary(self._multiplicative, ("+", "-"))

    def _multiplicative(self) -> Node:
        return self._binary(self._power, ("*", "/"))

    def _power(self) -> Node:
        return self._binary(self._unary, ("^",))

    def _unary(self) -> Node:
        tok = self._peek()
        if tok.type == "OP" and tok.value in ("+", "-"):
            self._advance()
            operand = self._unary()
            return UnaryOp(op=tok.value, operand=operand, span=(tok.start, operand.span[1]))
        return self._postfix()

    def _postfix(self) -> Node:
        node = self._primary()
        while self._peek().type == "OP" and self._peek().value == "%":
            tok = self._advance()
            node = Percent(operand=node, span=(node.span[0], tok.end))
        return node

    def _primary(self) -> Node:
        tok = self._advance()
        span = (tok.start, tok.end)
        if tok.type == "NUM":
            return Number(value=tok.value, span=span)
        if tok.type == "STR":
            return Text(value=tok.value, span=span)
        if tok.type == "BOOL":
            return Boolean(value=tok.value, span=span)
        if tok.type == "ERR":
            return ErrorLiteral(code=tok.value, span=span)
        if tok.type == "REF":
            return tok.value
        if tok.type == "FUNC":
            return self._call(tok)
        if tok.type == "LPAREN":
            inner = self._comparison()
            close = self._advance()
            if close.type != "RPAREN":
                raise FormulaSyntaxError(close.start, "unbalanced parentheses")
            return Paren(inner=inner, span=(tok.start, close.end))
        if tok.type == "EOF":
            raise FormulaSyntaxError(tok.start, "unexpected end of formula")
        raise FormulaSyntaxError(tok.start, f"unexpected {tok.value!r}")

    def _call(self, head: Token) -> FunctionCall:
        args: List[Node] = []
        if self._peek().type == "RPAREN":
            close = self._advance()
            return FunctionCall(name=head.value, args=(), span=(head.start, close.end))
        while True:
            args.append(self._comparison())
            tok = self._advance()
            if tok.type == "COMMA":
                continue
            if tok.type == "RPAREN":
                return FunctionCall(name=head.value, args=tuple(args), span=(head.start, tok.end))
            if tok.type == "EOF":
                raise FormulaSyntaxError(tok.start, "unbalanced parentheses")
            raise FormulaSyntaxError(tok.start, f"expected ',' or ')' in {head.value}")


def parse(source: str, notation: Notation = Notation.A1) -> Node:
    return FormulaParser(source, notation).parse()


@lru_cache(maxsize=65536)
def parse_cached(source: str, notation: Notation = Notation.A1) -> Node:
    """Shared parse for hot paths; the returned tree is immutable."""
    return parse(source, notation)


# --- rendering ---

def format_number(value: float) -> str:
    if math.isnan(value):
        return "#NUM!"
    if math.isinf(value):
        return "1E+999" if value > 0 else "-1E+999"
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def render_coord(coord: Coord, notation: Notation) -> str:
    if notation == Notation.A1:
        return (("$" if coord.col_abs else "") + column_letters(coord.col)
                + ("$" if coord.row_abs else "") + str(coord.row))
    return "R" + _r1c1_render_part(coord.row, coord.row_abs) + "C" + _r1c1_render_part(coord.col, coord.col_abs)


def _r1c1_render_part(value: int, absolute: bool) -> str:
    if absolute:
        return str(value)
    return "" if value == 0 else f"[{value}]"


def render_reference(ref: Reference) -> str:
    prefix = ""
    if ref.workbook is not None:
        prefix += f"[{ref.workbook}]"
    if ref.sheet is not None:
        prefix += quote_sheet(ref.sheet) + "!"
    if ref.kind == RefKind.NAME:
        return prefix + ref.name
    body = render_coord(ref.start, ref.notation)
    if ref.kind == RefKind.RANGE:
        body += ":" + render_coord(ref.end, ref.notation)
    return prefix + body


def _render(node: Node) -> str:
    if isinstance(node, Number):
        return format_number(node.value)
    if isinstance(node, Text):
        return '"' + node.value.replace('"', '""') + '"'
    if isinstance(node, Boolean):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, ErrorLiteral):
        return node.code
    if isinstance(node, Reference):
        return render_reference(node)
    if isinstance(node, FunctionCall):
        return node.name + "(" + ",".join(_render(a) for a in node.args) + ")"
    if isinstance(node, BinaryOp):
        return _render(node.left) + node.op + _render(node.right)
    if isinstance(node, UnaryOp):
        return node.op + _render(node.operand)
    if isinstance(node, Percent):
        return _render(node.operand) + "%"
    if isinstance(node, Paren):
        return "(" + _render(node.inner) + ")"
    raise TypeError(f"not a formula node: {node!r}")


def render(node: Node, equals: bool = True) -> str:
    return ("=" if equals else "") + _render(node)


# --- traversal ---

def children(node: Node) -> Tuple[Node, ...]:
    if isinstance(node, FunctionCall):
        return node.args
    if isinstance(node, BinaryOp):
        return (node.left, node.right)
    if isinstance(node, (UnaryOp, Percent)):
        return (node.operand,)
    if isinstance(node, Paren):
        return (node.inner,)
    return ()


def walk(node: Node) -> Iterator[Node]:
    """Pre-order, which is source order for every node type we produce."""
    yield node
    for child in children(node):
        yield from walk(child)


def extract_references(node: Node) -> List[Reference]:
    return [n for n in walk(node) if isinstance(n, Reference)]


def map_references(node: Node, fn: Callable[[Reference], Node]) -> Node:
    """Rebuild the tree with every Reference leaf replaced by fn(ref)."""
    if isinstance(node, Reference):
        return fn(node)
    if isinstance(node, FunctionCall):
        return replace(node, args=tuple(map_references(a, fn) for a in node.args))
    if isinstance(node, BinaryOp):
        return replace(node, left=map_references(node.left, fn), right=map_references(node.right, fn))
    if isinstance(node, (UnaryOp, Percent)):
        return replace(node, operand=map_references(node.operand, fn))
    if isinstance(node, Paren):
        return replace(node, inner=map_references(node.inner, fn))
    return node


def map_calls(node: Node, fn: Callable[[FunctionCall], FunctionCall]) -> Node:
    """Rebuild the tree bottom-up, passing each FunctionCall through fn."""
    if isinstance(node, FunctionCall):
        return fn(replace(node, args=tuple(map_calls(a, fn) for a in node.args)))
    if isinstance(node, BinaryOp):
        return replace(node, left=map_calls(node.left, fn), right=map_calls(node.right, fn))
    if isinstance(node, (UnaryOp, Percent)):
        return replace(node, operand=map_calls(node.operand, fn))
    if isinstance(node, Paren):
        return replace(node, inner=map_calls(node.inner, fn))
    return node
