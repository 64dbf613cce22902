import sys
import os
import random
import unittest

# Add src to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from core.errors import ReferenceOutOfGridError
from models.grid import CellContent, Workbook, WorkbookSet
from models.watch import GroupAxis
from service.references import Box
from service.transforms import (
    BlockMove, GroupLineInsert, LineDelete, LineInsert, LineMove, apply_edit, move_extent, rewrite_formula,
)
from service.workbook_io import parse_swt
from scenario_models import COST_MODEL_SWT, GROUP_MODEL_SWT, cell, extent, workbook_set


def formula(workbooks: WorkbookSet, text: str) -> str:
    return workbooks.get(cell(text)).formula


class TestLineInsert(unittest.TestCase):
    def test_rows(self):
        workbooks = workbook_set(COST_MODEL_SWT)
        apply_edit(workbooks, LineInsert("model", "Costs", GroupAxis.ROW, 4, 1))
        self.assertEqual(formula(workbooks, "Costs!H6"), "=ROUNDUP(H2/$D6,0)-SUM($G6:G6)")
        self.assertEqual(formula(workbooks, "Costs!H8"), "=SUMPRODUCT(H6:H7,$E$6:$E$7)")
        self.assertEqual(workbooks.get(cell("Costs!H2")).number, 10.0)
        self.assertTrue(workbooks.get(cell("Costs!H5")).is_blank)

    def test_columns(self):
        workbooks = workbook_set(COST_MODEL_SWT)
        apply_edit(workbooks, LineInsert("model", "Costs", GroupAxis.COLUMN, 8, 1))
        self.assertEqual(formula(workbooks, "Costs!I5"), "=ROUNDUP(I2/$D5,0)-SUM($G5:G5)")
        self.assertEqual(formula(workbooks, "Costs!J5"), "=ROUNDUP(J2/$D5,0)-SUM($G5:I5)")

    def test_other_sheets_follow(self):
        wb = parse_swt(COST_MODEL_SWT + "Summary!A1 := =Costs!H7+Costs!$I$7\n", "model")
        workbooks = WorkbookSet.of(wb)
        apply_edit(workbooks, LineInsert("model", "Costs", GroupAxis.ROW, 1, 2))
        self.assertEqual(formula(workbooks, "Summary!A1"), "=Costs!H9+Costs!$I$9")


class TestLineDelete(unittest.TestCase):
    def test_deleted_cells_become_ref_errors(self):
        workbooks = workbook_set(COST_MODEL_SWT)
        apply_edit(workbooks, LineDelete("model", "Costs", GroupAxis.ROW, 3, 1))
        self.assertEqual(formula(workbooks, "Costs!H5"), "=ROUNDUP(#REF!/$D5,0)-SUM($G5:G5)")

    def test_ranges_shrink(self):
        workbooks = workbook_set(COST_MODEL_SWT)
        apply_edit(workbooks, LineDelete("model", "Costs", GroupAxis.ROW, 6, 1))
        self.assertEqual(formula(workbooks, "Costs!H6"), "=SUMPRODUCT(H5:H5,$E$5:$E$5)")

    def test_names_follow_and_vanish(self):
        wb = parse_swt(COST_MODEL_SWT + "@name Ports := Costs!$D$5:$D$6\n@name Spare := Costs!$J$2\n", "model")
        workbooks = WorkbookSet.of(wb)
        apply_edit(workbooks, LineDelete("model", "Costs", GroupAxis.ROW, 2, 1))
        names = {n.name: n.target for n in workbooks.workbook("model").names}
        self.assertEqual(names, {"Ports": extent("Costs!D4:D5")})


class TestLineMove(unittest.TestCase):
    def test_moving_a_column_right(self):
        workbooks = workbook_set(COST_MODEL_SWT)
        apply_edit(workbooks, LineMove("model", "Costs", GroupAxis.COLUMN, 7, 1, 10))
        self.assertEqual(workbooks.get(cell("Costs!J1")).text, "Year 0")
        self.assertEqual(workbooks.get(cell("Costs!G1")).text, "Year 1")
        self.assertEqual(formula(workbooks, "Costs!G5"), "=ROUNDUP(G2/$D5,0)-SUM($J5:J5)")
        self.assertEqual(formula(workbooks, "Costs!H5"), "=ROUNDUP(H2/$D5,0)-SUM($G5:G5)")

    def test_cell_mapping(self):
        edit = LineMove("model", "Costs", GroupAxis.COLUMN, 7, 1, 10)
        moved = [edit.move_cell("model", "Costs", 1, col)[3] for col in (6, 7, 8, 9, 10, 11)]
        self.assertEqual(moved, [6, 10, 7, 8, 9, 11])

    def test_moving_back_restores(self):
        workbooks = workbook_set(COST_MODEL_SWT)
        original = workbooks.model_copy(deep=True)
        apply_edit(workbooks, LineMove("model", "Costs", GroupAxis.COLUMN, 7, 1, 10))
        apply_edit(workbooks, LineMove("model", "Costs", GroupAxis.COLUMN, 10, 1, 7))
        self.assertEqual(formula(workbooks, "Costs!H5"), "=ROUNDUP(H2/$D5,0)-SUM($G5:G5)")
        self.assertEqual(formula(workbooks, "Costs!I5"), "=ROUNDUP(I2/$D5,0)-SUM($H5:H5)")
        self.assertNotEqual(workbooks, original)


class TestBlockMove(unittest.TestCase):
    def test_references_follow_the_block(self):
        workbooks = workbook_set(COST_MODEL_SWT)
        workbooks.put(cell("Costs!K1"), CellContent.of_formula("=J6"))
        workbooks.put(cell("Costs!J5"), CellContent.of_number(99))
        source = Box("model", "Costs", 5, 7, 6, 7)
        apply_edit(workbooks, BlockMove(source, "model", "Costs", 5, 10))
        self.assertEqual(formula(workbooks, "Costs!H5"), "=ROUNDUP(H2/$D5,0)-SUM($J5:J5)")
        self.assertEqual(formula(workbooks, "Costs!I5"), "=ROUNDUP(I2/$D5,0)-SUM($G5:H5)")
        self.assertEqual(workbooks.get(cell("Costs!J5")).number, 0.0)
        self.assertTrue(workbooks.get(cell("Costs!G5")).is_blank)
        self.assertEqual(formula(workbooks, "Costs!K1"), "=#REF!")

    def test_extents(self):
        edit = BlockMove(Box("model", "Costs", 5, 7, 6, 7), "model", "Costs", 5, 10)
        self.assertEqual(move_extent(edit, extent("Costs!G5:G6")), extent("Costs!J5:J6"))
        self.assertIsNone(move_extent(edit, extent("Costs!J5")))
        self.assertEqual(move_extent(edit, extent("Costs!H5:I6")), extent("Costs!H5:I6"))

    def test_destination_off_the_grid(self):
        with self.assertRaises(ReferenceOutOfGridError):
            BlockMove(Box("model", "Costs", 5, 7, 6, 7), "model", "Costs", 1_048_576, 1)


class TestGroupLineInsert(unittest.TestCase):
    def test_aggregates_stretch(self):
        workbooks = workbook_set(GROUP_MODEL_SWT)
        edit = GroupLineInsert("model", "Cards", GroupAxis.ROW, 4, 1, [(extent("Cards!C2:C3"), 1)])
        apply_edit(workbooks, edit)
        self.assertEqual(formula(workbooks, "Cards!C5"), "=SUM(C2:C4)")
        self.assertEqual(formula(workbooks, "Cards!D5"), "=SUMPRODUCT(B2:B4,C2:C4)")
        self.assertEqual(formula(workbooks, "Cards!C10"), "=SUM(C8:C9)")
        self.assertEqual(formula(workbooks, "Cards!C3"), "=ROUNDUP(B3/$F$1,0)")
        self.assertIn("C2:C4", edit.extended)

    def test_member_lines_do_not_stretch(self):
        edit = GroupLineInsert("model", "Cards", GroupAxis.ROW, 4, 1, [(extent("Cards!C2:C3"), 1)])
        host = ("model", "Cards", 3, 5)
        self.assertEqual(rewrite_formula("=SUM(C2:C3)", edit, host, edit.move_cell(*host)), "=SUM(C2:C3)")


def _random_workbook(rng: random.Random) -> WorkbookSet:
    wb = Workbook(id="model")
    sheet = wb.add_sheet("S")
    other = wb.add_sheet("T")
    cols = "ABCDEFGH"
    for _ in range(30):
        row, col = rng.randint(1, 12), rng.randint(1, 8)
        if rng.random() < 0.4:
            sheet.put(row, col, CellContent.of_number(rng.randint(0, 99)))
            continue
        a = f"{rng.choice(cols)}{rng.randint(1, 12)}"
        top, bottom = sorted((rng.randint(1, 12), rng.randint(1, 12)))
        left, right = sorted((rng.randint(0, 7), rng.randint(0, 7)))
        rng_text = f"${cols[left]}{top}:{cols[right]}${bottom}"
        sheet.put(row, col, CellContent.of_formula(f"={a}+SUM({rng_text})*2"))
    other.put(1, 1, CellContent.of_formula(f"=S!{rng.choice(cols)}{rng.randint(1, 12)}"))
    return WorkbookSet.of(wb)


class TestEditProperties(unittest.TestCase):
    def test_insert_then_delete_is_identity(self):
        rng = random.Random(314)
        for _ in range(1000):
            workbooks = _random_workbook(rng)
            original = workbooks.model_copy(deep=True)
            axis = rng.choice(list(GroupAxis))
            at, count = rng.randint(1, 13), rng.randint(1, 3)
            apply_edit(workbooks, LineInsert("model", "S", axis, at, count))
            apply_edit(workbooks, LineDelete("model", "S", axis, at, count))
            self.assertEqual(workbooks, original)

    def test_move_there_and_back_is_identity_for_cells(self):
        rng = random.Random(271)
        for _ in range(1000):
            workbooks = _random_workbook(rng)
            positions = set(workbooks.workbook("model").sheet("S").cells)
            start, dest = rng.randint(1, 12), rng.randint(1, 12)
            edit = LineMove("model", "S", GroupAxis.ROW, start, 1, dest)
            back = LineMove("model", "S", GroupAxis.ROW, dest, 1, start)
            for row, col in positions:
                there = edit.move_cell("model", "S", row, col)
                self.assertEqual(back.move_cell(*there)[2:], (row, col))


if __name__ == '__main__':
    unittest.main()
