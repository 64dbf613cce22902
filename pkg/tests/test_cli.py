import sys
import os
import io
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from unittest import mock

# Add src to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

import cli
from cli import EXIT_FAILURE, EXIT_FINDINGS, EXIT_OK, default_watchfile, run
from core.config import Settings
from models.watch import Mode
from service.watchfile import load_watchfile
from service.workbook_io import load_workbook_set
from scenario_models import COST_MODEL_AREAS, COST_MODEL_SWT, GROUP_MODEL_AREAS, GROUP_MODEL_SWT, cell


class CliTestCase(unittest.TestCase):
    swt = COST_MODEL_SWT

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.path = str(self.dir / "model.swt")
        Path(self.path).write_text(self.swt, encoding="utf-8")
        self.settings = Settings(SLEUTH_ACTOR="tester")

    def tearDown(self):
        self.tmp.cleanup()

    def sleuth(self, *args):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = run(list(args), self.settings)
        return code, out.getvalue(), err.getvalue()

    def script(self, text: str) -> str:
        path = self.dir / "edits.txt"
        path.write_text(text, encoding="utf-8")
        return str(path)


class TestDefaultWatchfile(unittest.TestCase):
    def test_names(self):
        self.assertEqual(default_watchfile("model.swt"), Path("model.sleuth"))
        self.assertEqual(default_watchfile("models/"), Path("models.sleuth"))
        self.assertEqual(default_watchfile("a/b"), Path("a/b.sleuth"))


class TestCostModelSession(CliTestCase):
    def setUp(self):
        super().setUp()
        for area in COST_MODEL_AREAS:
            code, out, _ = self.sleuth("watch", self.path, area)
            self.assertEqual(code, EXIT_OK, out)
        self.assertEqual(self.sleuth("status", self.path, "e6", "final")[0], EXIT_OK)

    def test_watch_writes_the_watchfile(self):
        reg = load_watchfile(self.dir / "model.sleuth")
        self.assertEqual(sorted(reg.entries), ["e1", "e2", "e3", "e4", "e5", "e6"])
        self.assertEqual(reg.audit[0].actor, "tester")
        code, out, err = self.sleuth("watch", self.path, "Costs!I6:I7")
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn("overlaps", err)

    def test_clean_check(self):
        code, out, _ = self.sleuth("check", self.path)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("# 0 error(s), 0 warning(s)", out)

    def test_damage_fix_cycle(self):
        self.assertEqual(self.sleuth("apply", self.path, self.script("SET Costs!I6 := =1\n"))[0], EXIT_OK)
        code, out, _ = self.sleuth("check", self.path, "--context", "1")
        self.assertEqual(code, EXIT_FINDINGS)
        self.assertIn("<Error in Formula.>", out)
        self.assertIn("=1*", out)

        code, out, _ = self.sleuth("report", self.path, "--format", "delimited")
        self.assertEqual(code, EXIT_FINDINGS)
        self.assertTrue(out.startswith("Date Modified\tError Found\t"))

        self.assertEqual(self.sleuth("fix", self.path, "e5", "reject")[0], EXIT_OK)
        workbooks = load_workbook_set(self.path)
        self.assertEqual(workbooks.get(cell("Costs!I6")).formula, "=ROUNDUP(I3/$D6,0)-SUM($G6:H6)")
        self.assertEqual(self.sleuth("check", self.path)[0], EXIT_OK)

    def test_report_records_nothing(self):
        before = len(load_watchfile(self.dir / "model.sleuth").audit)
        self.assertEqual(self.sleuth("report", self.path)[0], EXIT_OK)
        self.assertEqual(len(load_watchfile(self.dir / "model.sleuth").audit), before)

    def test_operational_mode(self):
        code, out, _ = self.sleuth("mode", self.path, "operational")
        self.assertEqual((code, out.strip()), (EXIT_OK, "mode Operational"))
        self.assertEqual(self.sleuth("insert", self.path, "--group", "Cards", "--below", "5")[0], EXIT_FAILURE)
        self.assertEqual(self.sleuth("watch", self.path, "Costs!J2:J3", "--kind", "guard")[0], EXIT_FAILURE)
        self.assertEqual(self.sleuth("check", self.path)[0], EXIT_OK)
        self.assertEqual(load_watchfile(self.dir / "model.sleuth").mode, Mode.OPERATIONAL)

    def test_mode_override_is_not_saved(self):
        code, _, err = self.sleuth("--mode", "operational", "move", self.path, "Costs!H7:I7", "H9")
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn("Operational", err)
        self.assertEqual(self.sleuth("--mode", "operational", "check", self.path)[0], EXIT_OK)
        self.assertEqual(load_watchfile(self.dir / "model.sleuth").mode, Mode.DEVELOPMENT)

    def test_move(self):
        code, out, _ = self.sleuth("move", self.path, "Costs!H7:I7", "H9")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(load_workbook_set(self.path).get(cell("Costs!H9")).formula, "=SUMPRODUCT(H5:H6,$E$5:$E$6)")
        self.assertEqual(load_watchfile(self.dir / "model.sleuth").entries["e6"].extent.label(), "Costs!$H$9:$I$9")

    def test_reading_verbs(self):
        code, out, _ = self.sleuth("eval", self.path, "Costs!H7", "Costs!I7")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.splitlines(), ["Costs!$H$7  3500", "Costs!$I$7  4000"])
        code, out, _ = self.sleuth("trace", self.path, "Costs!H7")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Absolute Range", out)
        self.assertEqual(self.sleuth("find", self.path), (EXIT_OK, "", ""))

    def test_unwatch(self):
        self.assertEqual(self.sleuth("unwatch", self.path, "e6")[0], EXIT_OK)
        code, out, _ = self.sleuth("find", self.path)
        self.assertTrue(out.startswith("Costs!$H$7:$I$7  =SUMPRODUCT("))
        self.assertEqual(self.sleuth("unwatch", self.path, "e6")[0], EXIT_FAILURE)


class TestWatchfileLock(CliTestCase):
    def setUp(self):
        super().setUp()
        self.lock = self.dir / "model.sleuth.lock"
        self.assertEqual(self.sleuth("watch", self.path, "Costs!H2:I3")[0], EXIT_OK)

    def test_watchfile_is_read_under_the_lock(self):
        held = []
        real = cli.load_watchfile

        def load(path):
            held.append(self.lock.exists())
            return real(path)

        with mock.patch("cli.load_watchfile", side_effect=load):
            self.assertEqual(self.sleuth("watch", self.path, "Costs!D5:D6")[0], EXIT_OK)
            self.assertEqual(self.sleuth("report", self.path)[0], EXIT_OK)
        self.assertEqual(held, [True, True])
        self.assertFalse(self.lock.exists())

    def test_held_lock_refuses_every_verb(self):
        self.lock.write_text("1", encoding="utf-8")
        for args in (("watch", "Costs!D5:D6"), ("check",), ("eval", "Costs!H2")):
            code, _, err = self.sleuth(args[0], self.path, *args[1:])
            self.assertEqual(code, EXIT_FAILURE, args)
            self.assertIn("holds the watchfile", err)
        self.assertEqual(sorted(load_watchfile(self.dir / "model.sleuth").entries), ["e1"])


class TestBoundsOption(CliTestCase):
    def test_reversed_bounds_fail_cleanly(self):
        code, out, err = self.sleuth("watch", self.path, "Costs!H2:I3", "--bounds", "10", "5")
        self.assertEqual((code, out), (EXIT_FAILURE, ""))
        self.assertIn("lower bound 10 exceeds upper bound 5", err)
        self.assertFalse((self.dir / "model.sleuth").exists())

        code, out, _ = self.sleuth("watch", self.path, "Costs!H2:I3", "--bounds", "5", "150")
        self.assertEqual(code, EXIT_OK)
        bounds = load_watchfile(self.dir / "model.sleuth").entries["e1"].data_descriptor.bounds
        self.assertEqual((bounds.lower, bounds.upper), (5, 150))


class TestGroupSession(CliTestCase):
    swt = GROUP_MODEL_SWT

    def setUp(self):
        super().setUp()
        for area in GROUP_MODEL_AREAS:
            self.assertEqual(self.sleuth("watch", self.path, area)[0], EXIT_OK)
        for entry_id in ("e4", "e5", "e8", "e9"):
            self.assertEqual(self.sleuth("status", self.path, entry_id, "final")[0], EXIT_OK)
        code, out, _ = self.sleuth("group", self.path, "CardRows", "e2", "e3", "e6", "e7")
        self.assertEqual((code, out.strip()), (EXIT_OK, "CardRows: e2, e3, e6, e7"))

    def test_insert_then_enter_data(self):
        code, out, _ = self.sleuth("insert", self.path, "--group", "CardRows", "--below", "3")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("group=CardRows", out)
        workbooks = load_workbook_set(self.path)
        self.assertEqual(workbooks.get(cell("Cards!C6")).formula, "=SUM(C2:C5)")
        self.assertEqual(self.sleuth("check", self.path)[0], EXIT_FINDINGS)
        edits = self.script("SET Cards!B4 := 15\nSET Cards!B11 := 35\n")
        self.assertEqual(self.sleuth("apply", self.path, edits)[0], EXIT_OK)
        self.assertEqual(self.sleuth("check", self.path)[0], EXIT_OK)
        code, out, _ = self.sleuth("eval", self.path, "Cards!D13")
        self.assertEqual(out.strip(), "Cards!$D$13  495")

    def test_usage_errors(self):
        self.assertEqual(self.sleuth("insert", self.path, "--group", "CardRows")[0], EXIT_FAILURE)
        self.assertEqual(self.sleuth("delete", self.path, "--group", "CardRows", "--rows", "3", "--cols", "B")[0],
                         EXIT_FAILURE)
        self.assertEqual(self.sleuth("frobnicate", self.path)[0], EXIT_FAILURE)
        self.assertEqual(self.sleuth("check", str(self.dir / "missing.swt"))[0], EXIT_FAILURE)

    def test_replicate(self):
        code, out, _ = self.sleuth("replicate", self.path, "e2", "e3", "e4", "e5", "--to", "Cards!B12")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("created=['e10', 'e11', 'e12', 'e13']", out)
        self.assertEqual(self.sleuth("check", self.path)[0], EXIT_OK)


if __name__ == '__main__':
    unittest.main()
