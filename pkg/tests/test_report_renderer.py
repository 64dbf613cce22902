import sys
import os
import unittest

# Add src to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from models.finding import Report, ReportRow
from models.grid import CellContent
from service.area_engine import infer_areas
from service.report_renderer import (
    COLUMNS, legend, render_annotated, render_areas, render_check_report, render_context, render_error_contexts,
    render_findings, render_grid,
)
from scenario_models import COST_MODEL_SWT, FIXED, cell, cost_model, extent, make_tools, workbook_set


def _two_indication_report() -> Report:
    return Report(generated_at=FIXED, rows=[
        ReportRow(entry_id="e1", modified_at=FIXED, error_found="ERROR", indications=["<a>", "<b>"],
                  change_detected="CHANGED", location="S!$A$1", formula="=B1"),
        ReportRow(entry_id="e2", modified_at=FIXED, error_found="OK", change_detected="OK",
                  location="S!$B$1", formula="----- Data Cell -----"),
    ])


class TestCheckReport(unittest.TestCase):
    def setUp(self):
        tools = make_tools()
        self.workbooks, reg = cost_model(tools)
        self.workbooks.put(cell("Costs!I6"), CellContent.of_formula("=1"))
        self.report = tools.checker.check_all(self.workbooks, reg)

    def test_table(self):
        lines = render_check_report(self.report).splitlines()
        self.assertEqual(lines[:len(legend())], legend())
        header = lines[len(legend())]
        for column in COLUMNS:
            self.assertIn(column, header)
        cards = [line for line in lines if "Costs!$H$5:$I$6" in line]
        self.assertEqual(len(cards), 1)
        self.assertIn("ERROR", cards[0])
        self.assertIn("<Error in Formula.>", cards[0])
        self.assertTrue(cards[0].endswith("=ROUNDUP(H2/$D5,0)-SUM($G5:G5)"))
        self.assertEqual(lines[-2], "# 1 error(s), 0 warning(s)")
        self.assertTrue(lines[-1].startswith("# Dependents match"))

    def test_legend_lists_only_extra_codes(self):
        text = "\n".join(legend())
        self.assertNotIn("DAMAGED_FORMULA", text)
        self.assertNotIn("DATA_UNREFERENCED", text)
        self.assertIn("<Data out of Bounds.> OUT_OF_BOUNDS (Error)", text)
        self.assertIn("CANDIDATE_FINAL_RESULT (Warning)", text)

    def test_extra_indications_take_their_own_line(self):
        lines = render_check_report(_two_indication_report()).splitlines()
        row = next(i for i, line in enumerate(lines) if "<a>" in line)
        self.assertTrue(lines[row + 1].startswith(" "))
        self.assertEqual(lines[row + 1].strip(), "<b>")

    def test_delimited(self):
        lines = render_check_report(_two_indication_report(), "delimited").splitlines()
        self.assertEqual(lines[0], "\t".join(COLUMNS))
        self.assertEqual(lines[1], "2008-01-22 06:00:00\tERROR\t<a> <b>\tCHANGED\tS!$A$1\t=B1")
        self.assertEqual(len(lines), 3)

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            render_check_report(self.report, "html")

    def test_findings_listing(self):
        text = render_findings(self.report)
        self.assertTrue(text.startswith("ERROR   e5"))
        self.assertIn("Costs!$I$6", text)
        self.assertIn("master: =ROUNDUP(R[-3]C/RC4,0)-SUM(RC7:RC[-1])", text)
        self.assertEqual(render_findings(Report(generated_at=FIXED)), "")


class TestGrids(unittest.TestCase):
    def setUp(self):
        self.workbooks = workbook_set(COST_MODEL_SWT)

    def test_grid(self):
        lines = render_grid(self.workbooks, "model", "Costs", 1, 7, 2, 9).splitlines()
        self.assertEqual([c.strip() for c in lines[0].split("|")], ["", "G", "H", "I"])
        self.assertEqual(lines[1], "1 | Year 0 | Year 1 | Year 2")
        self.assertEqual([c.strip() for c in lines[2].split("|")], ["2", "", "10", "100"])

    def test_context_marks_the_area(self):
        text = render_context(self.workbooks, extent("Costs!G5"), 1)
        self.assertIn("0*", text)
        self.assertIn("=ROUNDUP(H2/$D5,0)-SUM($G5:G5)", text)

    def test_error_contexts_and_annotation(self):
        tools = make_tools()
        workbooks, reg = cost_model(tools)
        workbooks.put(cell("Costs!I6"), CellContent.of_formula("=1"))
        report = tools.checker.check_all(workbooks, reg)
        contexts = render_error_contexts(workbooks, report, 1)
        self.assertTrue(contexts.startswith("Costs!$I$6  <Error in Formula.>"))
        self.assertIn("=1*", contexts)
        annotated = render_annotated(workbooks, report, [extent("Costs!H7:I7")])
        self.assertTrue(annotated.startswith("== Costs =="))
        self.assertIn("=1!err", annotated)
        self.assertIn("=SUMPRODUCT(H5:H6,$E$5:$E$6)~chg", annotated)

    def test_areas(self):
        text = render_areas(infer_areas(self.workbooks.workbook("model"), "Costs"))
        self.assertIn("Costs!$G$1:$I$1  (", text)
        self.assertIn("Costs!$H$5:$I$6  =ROUNDUP(R[-3]C/RC4,0)-SUM(RC7:RC[-1])", text)


if __name__ == '__main__':
    unittest.main()
