import sys
import os
import random
import unittest

# Add src to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from core.errors import FormulaSyntaxError
from models.formula import BinaryOp, Coord, FunctionCall, Notation, Number, Percent, RefKind, Reference, UnaryOp
from service.formula_parser import extract_references, format_number, parse, render, render_reference


class TestFormulaParser(unittest.TestCase):
    def test_card_formula(self):
        ast = parse("=ROUNDUP(H2/$D5,0)-SUM($G5:G5)")
        self.assertIsInstance(ast, BinaryOp)
        self.assertEqual(ast.op, "-")
        self.assertEqual(ast.left.name, "ROUNDUP")
        refs = extract_references(ast)
        self.assertEqual([render_reference(r) for r in refs], ["H2", "$D5", "$G5:G5"])
        self.assertEqual(refs[1].start, Coord(row=5, col=4, row_abs=False, col_abs=True))
        self.assertEqual(refs[2].kind, RefKind.RANGE)

    def test_precedence(self):
        ast = parse("=1+2*3")
        self.assertEqual(ast.op, "+")
        self.assertEqual(ast.right.op, "*")

        ast = parse("=2^3^2")
        self.assertEqual(ast.op, "^")
        self.assertIsInstance(ast.left, BinaryOp)
        self.assertEqual(ast.right, Number(2.0))

        ast = parse("=-A1^2")
        self.assertEqual(ast.op, "^")
        self.assertIsInstance(ast.left, UnaryOp)

        ast = parse("=A1&B1=C1")
        self.assertEqual(ast.op, "=")
        self.assertEqual(ast.left.op, "&")

        ast = parse("=50%*2")
        self.assertIsInstance(ast.left, Percent)

    def test_qualified_references(self):
        ref = parse("=[other]'Cost Model'!$A$1:B2")
        self.assertEqual(ref.workbook, "other")
        self.assertEqual(ref.sheet, "Cost Model")
        self.assertEqual(render(ref), "=[other]'Cost Model'!$A$1:B2")
        ref = parse("=Qty_Model_5!I7")
        self.assertEqual(ref.sheet, "Qty_Model_5")

    def test_names_and_functions(self):
        ast = parse("=sum(Ports)")
        self.assertIsInstance(ast, FunctionCall)
        self.assertEqual(ast.name, "SUM")
        self.assertEqual(ast.args[0].kind, RefKind.NAME)
        self.assertEqual(ast.args[0].name, "Ports")
        self.assertEqual(parse("=NOW()").args, ())

    def test_r1c1_references(self):
        ref = parse("=R[-3]C:RC4", Notation.R1C1)
        self.assertEqual(ref.start, Coord(row=-3, col=0))
        self.assertEqual(ref.end, Coord(row=0, col=4, col_abs=True))
        self.assertEqual(render(ref), "=R[-3]C:RC4")

    def test_spans_cover_source(self):
        source = "=MAX(0,J7-SUM($N7:P7))"
        ast = parse(source)
        self.assertEqual(source[ast.span[0]:ast.span[1]], "MAX(0,J7-SUM($N7:P7))")
        ref = extract_references(ast)[1]
        self.assertEqual(source[ref.span[0]:ref.span[1]], "$N7:P7")

    def test_syntax_errors(self):
        for source in ("=SUM(A1", "=1+", "=)", "=#FOO", '="abc', "=", "=A1 B1", "=SUM(A1,)", "=A1:"):
            with self.assertRaises(FormulaSyntaxError, msg=source):
                parse(source)

    def test_error_offset(self):
        with self.assertRaises(FormulaSyntaxError) as ctx:
            parse("=1+@")
        self.assertEqual(ctx.exception.offset, 3)

    def test_format_number(self):
        self.assertEqual(format_number(24.0), "24")
        self.assertEqual(format_number(0.1), "0.1")
        self.assertEqual(format_number(-3.0), "-3")

    def test_overflowing_literal(self):
        self.assertEqual(format_number(float("inf")), "1E+999")
        self.assertEqual(format_number(float("-inf")), "-1E+999")
        self.assertEqual(format_number(float("nan")), "#NUM!")
        self.assertEqual(render(parse("=1E+999")), "=1E+999")


# --- randomized round trips ---

_SHEETS = ("", "Qty!", "'Cost Model'!", "[other]Qty!")
_FUNCTIONS = ("SUM", "ROUNDUP", "MAX", "IF", "SUMPRODUCT")


def _random_cell(rng: random.Random) -> str:
    col = rng.choice(("A", "D", "H", "AB", "XFD"))
    return ("$" if rng.random() < 0.3 else "") + col + ("$" if rng.random() < 0.3 else "") + str(rng.randint(1, 200))


def _random_formula(rng: random.Random, depth: int = 0) -> str:
    roll = rng.random() if depth < 4 else rng.random() * 0.5
    if roll < 0.1:
        return format_number(rng.choice((0, 1, 24, 2.5, 1000, 0.1)))
    if roll < 0.15:
        return rng.choice(('"text"', '"say ""hi"""', "TRUE", "FALSE", "#REF!", "Ports"))
    if roll < 0.35:
        ref = rng.choice(_SHEETS) + _random_cell(rng)
        if rng.random() < 0.4:
            ref += ":" + _random_cell(rng)
        return ref
    if roll < 0.5:
        return "(" + _random_formula(rng, depth + 1) + ")"
    if roll < 0.6:
        return rng.choice("-+") + _random_formula(rng, depth + 1)
    if roll < 0.65:
        return "(" + _random_formula(rng, depth + 1) + ")%"
    if roll < 0.8:
        args = [_random_formula(rng, depth + 1) for _ in range(rng.randint(1, 3))]
        return rng.choice(_FUNCTIONS) + "(" + ",".join(args) + ")"
    op = rng.choice(("+", "-", "*", "/", "^", "&", "=", "<>", "<=", ">"))
    return _random_formula(rng, depth + 1) + op + _random_formula(rng, depth + 1)


class TestRoundTrips(unittest.TestCase):
    def test_render_of_parse_is_identity(self):
        rng = random.Random(20080122)
        for _ in range(1500):
            source = "=" + _random_formula(rng)
            ast = parse(source)
            self.assertEqual(render(ast), source)
            self.assertEqual(parse(render(ast)), ast)

    def test_reference_rendering_round_trips(self):
        rng = random.Random(7)
        for _ in range(1000):
            text = rng.choice(_SHEETS) + _random_cell(rng) + ":" + _random_cell(rng)
            ref = parse("=" + text)
            self.assertIsInstance(ref, Reference)
            self.assertEqual(render_reference(ref), text)


if __name__ == '__main__':
    unittest.main()
