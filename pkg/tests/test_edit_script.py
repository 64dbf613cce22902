import sys
import os
import unittest

# Add src to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from core.errors import EditScriptError, ModeError
from models.edit import CommandVerb
from models.watch import AuditVerb, GroupAxis, Mode
from service.edit_script import parse_command, parse_script
from service.watch_service import replay
from scenario_models import cell, group_model, make_tools


class TestParseCommand(unittest.TestCase):
    def test_group_insert(self):
        command = parse_command("INSERT-BELOW group=CardRows row=7 count=2", 4)
        self.assertEqual(command.verb, CommandVerb.INSERT_BELOW)
        self.assertEqual(command.line, 4)
        self.assertEqual(command.params, {"group": "CardRows", "axis": GroupAxis.ROW, "index": 7, "count": 2})

    def test_group_delete_defaults_to_one_line(self):
        command = parse_command("delete-cols group=Years col=H")
        self.assertEqual(command.verb, CommandVerb.DELETE_COLS)
        self.assertEqual((command.params["axis"], command.params["index"], command.params["count"]),
                         (GroupAxis.COLUMN, 8, 1))

    def test_raw_line_commands(self):
        self.assertEqual(parse_command("RAW-INSERT-ROWS Costs row=4").params,
                         {"sheet": "Costs", "axis": GroupAxis.ROW, "index": 4, "count": 1})
        self.assertEqual(parse_command("RAW-MOVE-COLS Costs col=G -> J").params,
                         {"sheet": "Costs", "axis": GroupAxis.COLUMN, "index": 7, "count": 1, "dest": 10})
        self.assertEqual(parse_command("RAW-MOVE-COLS Costs col=G:H -> J").params["count"], 2)
        self.assertEqual(parse_command("RAW-DELETE-ROWS 'Cost Model' row=3 count=2").params["sheet"], "'Cost Model'")

    def test_cell_commands(self):
        self.assertEqual(parse_command("SET Costs!E5 := 24").params["content"].number, 24.0)
        self.assertEqual(parse_command("SET Costs!H5 := =H2*2").params["content"].formula, "=H2*2")
        self.assertEqual(parse_command("FILL Costs!H7 -> Costs!H8:I8").params,
                         {"source": "Costs!H7", "target": "Costs!H8:I8"})
        self.assertEqual(parse_command("REPLICATE entries=e12,e13 -> Costs2!B2").params,
                         {"entries": ["e12", "e13"], "target": "Costs2!B2"})
        self.assertEqual(parse_command("FIX e9 reject").params, {"entry": "e9", "accept": False})
        self.assertTrue(parse_command("FIX e9 ACCEPT").params["accept"])

    def test_malformed_commands(self):
        broken = [
            "FROB Costs!A1",
            "INSERT-BELOW row=7",
            "INSERT-BELOW group=CardRows row=0",
            "INSERT-BELOW group=CardRows row=seven",
            "RAW-MOVE-ROWS Costs row=8:7 -> 2",
            "FIX e9 maybe",
            "SET Costs!A1 24",
            "MOVE Costs!G2:G8",
        ]
        for text in broken:
            with self.assertRaises(EditScriptError, msg=text) as ctx:
                parse_command(text, 9)
            self.assertEqual(ctx.exception.line, 9)

    def test_script_line_numbers(self):
        commands = parse_script("# volumes for year 3\n\nSET Costs!J2 := 100\n  SET Costs!J3 := 6\n")
        self.assertEqual([c.line for c in commands], [3, 4])
        with self.assertRaises(EditScriptError) as ctx:
            parse_script("SET Costs!J2 := 100\nINSERT-SIDEWAYS x\n")
        self.assertEqual(ctx.exception.line, 2)


class TestRunner(unittest.TestCase):
    def setUp(self):
        self.tools = make_tools()
        self.workbooks, self.reg = group_model(self.tools)

    def test_script_runs_in_order(self):
        script = "INSERT-BELOW group=CardRows row=3\nSET Cards!B4 := 15\nSET Cards!B11 := 35\n"
        result = self.tools.runner.apply_text(self.workbooks, self.reg, script)
        self.assertEqual([e.verb for e in result.events], [AuditVerb.INSERT, AuditVerb.EDIT, AuditVerb.EDIT])
        self.assertEqual(result.events[1].detail, {"set": "Cards!$B$4", "kind": "Number"})
        self.assertEqual(result.registry.audit[-1], result.events[-1])
        self.assertEqual(result.workbooks.get(cell("Cards!B11")).number, 35.0)
        self.assertEqual(self.tools.checker.check_all(result.workbooks, result.registry).findings, [])

    def test_failures_carry_the_line(self):
        with self.assertRaises(EditScriptError) as ctx:
            self.tools.runner.apply_text(self.workbooks, self.reg, "SET Cards!B4 := 15\nFIX e99 accept\n")
        self.assertEqual(ctx.exception.line, 2)
        self.assertEqual(ctx.exception.command, "FIX e99 accept")
        self.assertTrue(self.workbooks.get(cell("Cards!B4")).is_blank)

    def test_operational_mode_refuses_tool_edits(self):
        self.tools.watch_service.set_mode(self.reg, Mode.OPERATIONAL)
        for script in ("INSERT-BELOW group=CardRows row=3", "MOVE Cards!D4 -> Cards!F4",
                       "REPLICATE entries=e2 -> Cards!H2", "DELETE-ROWS group=CardRows row=3"):
            with self.assertRaises(ModeError, msg=script):
                self.tools.runner.apply_text(self.workbooks, self.reg, script)

    def test_own_cell_edits_are_audited(self):
        script = "SET Cards!B2 := 11\nCLEAR Cards!B3\nFILL Cards!C2 -> Cards!C3\n"
        result = self.tools.runner.apply_text(self.workbooks, self.reg, script)
        self.assertEqual([e.verb for e in result.events], [AuditVerb.EDIT] * 3)
        self.assertEqual([e.detail for e in result.events[1:]], [
            {"clear": "Cards!$B$3"}, {"fill": "Cards!$C$2", "to": "Cards!$C$3"},
        ])
        self.assertEqual(len(result.registry.audit), len(self.reg.audit) + 3)
        self.assertTrue(replay(result.registry.audit, result.registry.capacity).state_equals(result.registry))

    def test_operational_mode_allows_own_edits(self):
        self.tools.watch_service.set_mode(self.reg, Mode.OPERATIONAL)
        result = self.tools.runner.apply_text(self.workbooks, self.reg, "RAW-INSERT-ROWS Cards row=4\nFIX e2 accept\n")
        self.assertEqual(result.workbooks.get(cell("Cards!C5")).formula, "=SUM(C2:C3)")
        self.assertEqual([e.verb for e in result.events], [AuditVerb.EDIT, AuditVerb.FIX])


if __name__ == '__main__':
    unittest.main()
