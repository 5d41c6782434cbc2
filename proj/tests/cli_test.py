"""End-to-end checks of the cltype command line: exit codes and the JSON report."""
import json
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

CLTYPE = os.environ.get("CLTYPE_BIN", "build/cltype")
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "tests", "data")
with open(os.path.join(ROOT, "docs", "report.schema.json")) as f:
    SCHEMA = json.load(f)


def data(name):
    return os.path.join(DATA, name)


def cltype(*args):
    return subprocess.run([CLTYPE, *args], capture_output=True, text=True, timeout=120)


class Cli(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def report(self, *args):
        out = self.path("report.json")
        p = cltype(*args, "--report", out)
        with open(out, encoding="utf-8") as f:
            doc = json.load(f)
        jsonschema.validate(doc, SCHEMA)
        return p, doc

    def test_findings_exit_2(self):
        p, doc = self.report("--trace", data("golden.trace"), "--annot", data("golden.annot"),
                             "--branch-table", data("golden.bt"))
        self.assertEqual(p.returncode, 2, p.stderr)
        self.assertEqual([f["kind"] for f in doc["findings"]], ["SDBC", "SDBC", "SDMA"])
        self.assertEqual(doc["stats"]["trace_length"], 14)
        self.assertIn("SDMA at 0x804963b", p.stdout)

    def test_verbose_log(self):
        p = cltype("--trace", data("golden.trace"), "--annot", data("golden.annot"),
                   "--branch-table", data("golden.bt"), "--verbose")
        self.assertEqual(p.returncode, 2)
        self.assertIn("Logic.I, Conj&Disj.I, Const-Conj.I&II", p.stdout)
        self.assertIn("BR(0x8049649,0x8049691)", p.stdout)

    def test_clean_exit_0(self):
        p, doc = self.report("--trace", data("golden.trace"), "--branch-table", data("golden.bt"))
        self.assertEqual(p.returncode, 0, p.stderr)
        self.assertEqual(doc["findings"], [])
        p = cltype("--mode", "oracle-compare", "--trace", data("ct_select.prog"))
        self.assertEqual(p.returncode, 0, p.stdout + p.stderr)
        self.assertIn("verdict: sound", p.stdout)

    def test_missing_table_warns(self):
        p, doc = self.report("--trace", data("golden.trace"), "--annot", data("golden.annot"))
        self.assertEqual(p.returncode, 2)
        self.assertIn("warning", p.stderr)
        self.assertEqual(doc["stats"]["sdbc_layout_unknown"], 2)
        self.assertEqual(doc["stats"]["sdbc"], 0)

    def test_bad_input_exit_1(self):
        bad = self.path("bad.trace")
        with open(bad, "w") as f:
            regs = " | eax=0x0 ebx=0x0 ecx=0x0 edx=0x0 esi=0x0 edi=0x0 ebp=0x0 esp=0x0"
            f.write("T 0 0x8048000 mov eax,ebx" + regs + "\nT 1 0x8048002 frobnicate eax" + regs + "\n")
        p = cltype("--trace", bad)
        self.assertEqual(p.returncode, 1)
        self.assertIn("bad.trace:2", p.stderr)
        p = cltype("--trace", self.path("missing.trace"))
        self.assertEqual(p.returncode, 1)
        self.assertIn("missing.trace", p.stderr)
        annot = self.path("bad.annot")
        with open(annot, "w") as f:
            f.write("SECRET mem 0x10 4 @0\nNONSENSE\n")
        p = cltype("--trace", data("golden.trace"), "--annot", annot)
        self.assertEqual(p.returncode, 1)
        self.assertIn("bad.annot:2", p.stderr)

    def test_oracle_compare_miss_exit_2(self):
        p = cltype("--mode", "oracle-compare", "--trace", data("mask_reuse.prog"))
        self.assertEqual(p.returncode, 2)
        self.assertIn("[xor-mask-reuse]", p.stdout)

    def test_gen_trace(self):
        empty = self.path("empty.trace")
        self.assertEqual(cltype("--mode", "gen-trace", "--trace", empty).returncode, 0)
        self.assertEqual(os.path.getsize(empty), 0)
        p, doc = self.report("--trace", empty)
        self.assertEqual(p.returncode, 0)
        self.assertEqual(doc["stats"]["trace_length"], 0)

        trace, annot, bt = self.path("g.trace"), self.path("g.annot"), self.path("g.bt")
        p = cltype("--mode", "gen-trace", "--trace", trace, "--annot", annot, "--branch-table", bt,
                   "--length", "2000", "--seed", "5")
        self.assertEqual(p.returncode, 0, p.stderr)
        p, doc = self.report("--trace", trace, "--annot", annot, "--branch-table", bt)
        self.assertEqual(p.returncode, 2)
        self.assertEqual(doc["stats"]["trace_length"], 2000)
        self.assertEqual(doc["stats"]["containment_violations"], 0)
        self.assertTrue(all(f["hits"] > 1 for f in doc["findings"]))

    def test_cache_line_bits(self):
        p = cltype("--trace", data("golden.trace"), "--cache-line-bits", "3")
        self.assertEqual(p.returncode, 1)
        p, doc = self.report("--trace", data("golden.trace"), "--annot", data("golden.annot"),
                             "--branch-table", data("golden.bt"), "--cache-line-bits", "12")
        self.assertIn(p.returncode, (0, 2))


if __name__ == "__main__":
    if len(sys.argv) > 1:
        CLTYPE = sys.argv.pop(1)
    unittest.main()
