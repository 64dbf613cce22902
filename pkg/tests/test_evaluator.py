import sys
import os
import random
import unittest

# Add src to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from core.errors import CycleError, ShapeMismatchError, UnsupportedFunctionError
from models.grid import CellAddr, CellContent, Workbook, WorkbookSet
from models.watch import GroupAxis
from service.evaluator import (
    DIV0, VALUE, ErrorValue, Evaluator, display, evaluate, evaluate_all, evaluation_order, roundup,
)
from service.references import formula_boxes
from scenario_models import COST_MODEL_SWT, GROUP_MODEL_SWT, cell, group_model, make_tools, workbook_set


def single(formula: str) -> WorkbookSet:
    wb = Workbook(id="model")
    sheet = wb.add_sheet("S")
    sheet.put(1, 1, CellContent.of_formula(formula))
    sheet.put(2, 1, CellContent.of_number(3))
    sheet.put(2, 2, CellContent.of_number(4))
    return WorkbookSet.of(wb)


def value_of(formula: str):
    return evaluate(single(formula), cell("S!A1"))


class TestRoundup(unittest.TestCase):
    def test_away_from_zero(self):
        self.assertEqual(roundup(10 / 24, 0), 1.0)
        self.assertEqual(roundup(6 / 8, 0), 1.0)
        self.assertEqual(roundup(3.0, 0), 3.0)
        self.assertEqual(roundup(-1.2, 0), -2.0)
        self.assertEqual(roundup(1234, -2), 1300.0)
        self.assertEqual(roundup(0.1234, 2), 0.13)

    def test_large_and_non_finite_values(self):
        self.assertEqual(roundup(1e27, 2), 1e27)
        self.assertEqual(roundup(1.5e300, -300), 2e300)
        self.assertEqual(roundup(0.5, 400), 0.5)
        self.assertEqual(roundup(float("inf"), 0), float("inf"))
        self.assertEqual(value_of("=ROUNDUP(1E+27,2)"), 1e27)
        self.assertEqual(value_of("=ROUNDUP(A2,1E+999)"), ErrorValue("#NUM!"))


class TestScalarFormulas(unittest.TestCase):
    def test_arithmetic(self):
        self.assertEqual(value_of("=A2*B2+1"), 13.0)
        self.assertEqual(value_of("=50%"), 0.5)
        self.assertEqual(value_of('="n="&A2'), "n=3")

    def test_blank_reads_as_zero(self):
        self.assertEqual(value_of("=Z9"), 0.0)
        self.assertEqual(value_of("=Z9+1"), 1.0)

    def test_functions(self):
        self.assertEqual(value_of("=SUM(A2:B2,10)"), 17.0)
        self.assertEqual(value_of("=MAX(0,A2-SUM(B2:B2))"), 0.0)
        self.assertEqual(value_of("=MIN(A2:B2)"), 3.0)
        self.assertEqual(value_of("=ROUNDUP(A2/B2,0)"), 1.0)
        self.assertEqual(value_of("=SUMPRODUCT(A2:B2,A2:B2)"), 25.0)

    def test_if_evaluates_one_branch(self):
        self.assertEqual(value_of("=IF(A2>B2,1/0,2)"), 2.0)
        self.assertEqual(value_of("=IF(TRUE,1,FOO(1))"), 1.0)
        self.assertEqual(value_of("=IF(FALSE,1)"), False)

    def test_error_values(self):
        self.assertEqual(value_of("=1/0"), DIV0)
        self.assertEqual(value_of('="a"+1'), VALUE)
        self.assertEqual(value_of("=#REF!+1"), ErrorValue("#REF!"))
        self.assertEqual(value_of("=SUM(1/0,2)"), DIV0)
        self.assertEqual(value_of("=A2:B2"), VALUE)

    def test_refusals(self):
        with self.assertRaises(UnsupportedFunctionError):
            value_of("=VLOOKUP(1,A2:B2,2)")
        with self.assertRaises(ShapeMismatchError):
            value_of("=SUMPRODUCT(A2:B2,A2:A3)")

    def test_display(self):
        self.assertEqual(display(1.0), "1")
        self.assertEqual(display(0.25), "0.25")
        self.assertEqual(display(None), "")
        self.assertEqual(display(True), "TRUE")
        self.assertEqual(display(DIV0), "#DIV/0!")


class TestCycles(unittest.TestCase):
    def setUp(self):
        wb = Workbook(id="model")
        sheet = wb.add_sheet("S")
        sheet.put(1, 1, CellContent.of_formula("=B1+1"))
        sheet.put(1, 2, CellContent.of_formula("=C1"))
        sheet.put(1, 3, CellContent.of_formula("=A1"))
        self.workbooks = WorkbookSet.of(wb)

    def test_evaluate(self):
        with self.assertRaises(CycleError) as ctx:
            evaluate(self.workbooks, cell("S!A1"))
        self.assertIn("S!A1 -> S!B1 -> S!C1 -> S!A1", str(ctx.exception))

    def test_order(self):
        with self.assertRaises(CycleError):
            evaluation_order(self.workbooks)


class TestLongChains(unittest.TestCase):
    def setUp(self):
        wb = Workbook(id="model")
        sheet = wb.add_sheet("S")
        sheet.put(1, 1, CellContent.of_number(0))
        for row in range(2, 3001):
            sheet.put(row, 1, CellContent.of_formula(f"=A{row - 1}+1"))
        self.workbooks = WorkbookSet.of(wb)

    def test_evaluate_the_end_of_the_chain(self):
        self.assertEqual(evaluate(self.workbooks, cell("S!A3000")), 2999.0)
        evaluator = Evaluator(self.workbooks)
        self.assertEqual(evaluator.evaluate(cell("S!A1500")), 1499.0)
        self.assertEqual(evaluator.evaluate(cell("S!A3000")), 2999.0)


class TestModels(unittest.TestCase):
    def test_cost_model(self):
        values = {addr.label(): v for addr, v in evaluate_all(workbook_set(COST_MODEL_SWT)).items()}
        self.assertEqual(values, {
            "Costs!$H$5": 1.0, "Costs!$I$5": 4.0, "Costs!$H$6": 1.0, "Costs!$I$6": 0.0,
            "Costs!$H$7": 3500.0, "Costs!$I$7": 4000.0,
        })

    def test_group_model_before_and_after_insert(self):
        workbooks = workbook_set(GROUP_MODEL_SWT)
        self.assertEqual([evaluate(workbooks, cell(a)) for a in ("Cards!C4", "Cards!D4", "Cards!C9", "Cards!D9")],
                         [5.0, 80.0, 9.0, 320.0])
        tools = make_tools()
        workbooks, reg = group_model(tools)
        after = tools.structural.insert_in_group(workbooks, reg, "CardRows", GroupAxis.ROW, 3).workbooks
        after.put(cell("Cards!B4"), CellContent.of_number(15))
        after.put(cell("Cards!B11"), CellContent.of_number(35))
        evaluator = Evaluator(after)
        self.assertEqual([evaluator.evaluate(cell(a)) for a in ("Cards!C6", "Cards!D6", "Cards!C13", "Cards!D13")],
                         [7.0, 110.0, 14.0, 495.0])


_COLS = "ABC"


def _random_grid(rng: random.Random) -> WorkbookSet:
    """Every formula reads only rows above it."""
    wb = Workbook(id="model")
    sheet = wb.add_sheet("S")
    for col in range(1, 4):
        sheet.put(1, col, CellContent.of_number(rng.randint(0, 9)))
    for row in range(2, 6):
        for col in range(1, 4):
            roll = rng.random()
            if roll < 0.15:
                continue
            if roll < 0.35:
                sheet.put(row, col, CellContent.of_number(rng.randint(0, 9)))
                continue
            a = f"{rng.choice(_COLS)}{rng.randint(1, row - 1)}"
            b = f"{rng.choice(_COLS)}{rng.randint(1, row - 1)}"
            c = rng.choice(_COLS)
            formula = rng.choice([
                f"={a}+{b}*2",
                f"=SUM({c}1:{c}{row - 1})",
                f"=ROUNDUP({a}/3,0)",
                f"=MAX({a},{b})-1",
                f"={a}/{b}",
                f"=IF({a}>5,{b},0)",
                f"=SUMPRODUCT({c}1:{c}{row - 1},{c}1:{c}{row - 1})",
            ])
            sheet.put(row, col, CellContent.of_formula(formula))
    return WorkbookSet.of(wb)


class TestEvaluationProperties(unittest.TestCase):
    def test_plain_recursion_matches_ordered_evaluation(self):
        rng = random.Random(1234)
        for _ in range(1000):
            workbooks = _random_grid(rng)
            plain = Evaluator(workbooks, memo=False)
            for addr, value in evaluate_all(workbooks).items():
                self.assertEqual(plain.evaluate(addr), value, addr.label())

    def test_order_puts_precedents_first(self):
        rng = random.Random(4321)
        for _ in range(1000):
            workbooks = _random_grid(rng)
            order = evaluation_order(workbooks)
            position = {addr.key(): i for i, addr in enumerate(order)}
            for addr in order:
                content = workbooks.get(addr)
                for box in formula_boxes(content.formula, addr.workbook, addr.sheet, workbooks):
                    for row, col in box.cells():
                        key = CellAddr(workbook=box.workbook, sheet=box.sheet, row=row, col=col).key()
                        if key in position:
                            self.assertLess(position[key], position[addr.key()])


if __name__ == '__main__':
    unittest.main()
