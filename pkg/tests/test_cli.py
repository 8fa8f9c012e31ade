import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd

from fasi_sdk.__main__ import main
from fasi_sdk.commands import parse_grid
from fasi_sdk.config import RunConfig, ScenarioConfig, resolve_seed
from fasi_sdk.constants import INDECISION
from fasi_sdk.core.errors import ValidationError
from fasi_sdk.core.persistence import (
    read_conformal,
    read_report,
    read_rvalue_table,
    read_scores,
    read_selections,
    read_table,
    write_scores,
)
from fasi_sdk.core.records import ScoreFrame


def _score_frame(n, seed, labeled=True, groups=("F", "M"), prefix="r"):
    rng = np.random.default_rng(seed)
    s2 = np.round(rng.random(n), 6)
    labels = [("2" if rng.random() < s2[i] else "1") for i in range(n)] if labeled else None
    return ScoreFrame.from_arrays(
        [f"{prefix}{i}" for i in range(n)],
        [groups[i % len(groups)] for i in range(n)],
        labels,
        {"1": 1.0 - s2, "2": s2},
    )


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name
        self.cal = self.path("cal.csv")
        self.test = self.path("test.csv")
        write_scores(self.cal, _score_frame(60, 1, prefix="c"))
        write_scores(self.test, _score_frame(30, 2, labeled=False, prefix="t"))

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.dir, name)

    def test_rvalue_writes_row_per_record_and_class(self):
        out, sel = self.path("r.csv"), self.path("sel.csv")
        code = main([
            "rvalue", "--cal", self.cal, "--test", self.test, "--class", "1", "--class", "2",
            "--alpha", "0.3", "--alpha", "0.2", "--out", out, "--selections", sel,
        ])
        self.assertEqual(code, 0)
        table = read_rvalue_table(out)
        self.assertEqual(len(table), 60)
        self.assertEqual(list(table["class"][:2]), ["1", "2"])
        self.assertTrue(((table["mono_r"] >= 0) & (table["mono_r"] <= 1)).all())
        self.assertTrue((table["mono_r"] <= table["raw_r"]).all())
        selections = read_selections(sel)
        self.assertEqual(len(selections), 30)
        for _, row in selections.iterrows():
            if row["decision"] != INDECISION:
                alpha = 0.3 if row["decision"] == "1" else 0.2
                self.assertLessEqual(row["winning_r"], alpha)

    def test_hand_fixture_through_files(self):
        cal = ScoreFrame.from_arrays(["c0", "c1", "c2"], ["a"] * 3, ["c", "o", "o"],
                                     {"c": [0.9, 0.7, 0.4], "o": [0.1, 0.3, 0.6]})
        test = ScoreFrame.from_arrays(["t0", "t1"], ["a", "a"], None, {"c": [0.8, 0.5], "o": [0.2, 0.5]})
        write_scores(self.cal, cal)
        write_scores(self.test, test)
        args = ["rvalue", "--cal", self.cal, "--test", self.test, "--class", "c", "--class-set", "c,o",
                "--alpha", "0.5"]
        self.assertEqual(main(args + ["--variant", "standard", "--out", self.path("std.csv")]), 0)
        self.assertEqual(main(args + ["--variant", "plus", "--out", self.path("plus.csv")]), 0)
        std = read_rvalue_table(self.path("std.csv"))
        plus = read_rvalue_table(self.path("plus.csv"))
        np.testing.assert_allclose(std["raw_r"], [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(plus["raw_r"], [0.5, 0.6], atol=1e-12)
        self.assertEqual(list(std["decision"]), ["c", "c"])
        self.assertEqual(list(plus["decision"]), ["c", INDECISION])
        again = read_scores(self.cal, ("c", "o"), require_labels=True)
        self.assertEqual(list(again.labels), ["c", "o", "o"])

    def test_alpha_one_decides_every_record(self):
        sel = self.path("sel.csv")
        code = main([
            "rvalue", "--cal", self.cal, "--test", self.test, "--class", "1", "--class", "2",
            "--alpha", "1", "--out", self.path("r.csv"), "--selections", sel,
        ])
        self.assertEqual(code, 0)
        self.assertFalse((read_selections(sel)["decision"] == INDECISION).any())

    def test_fcc_and_conservative_flags(self):
        plain, pooled = self.path("plain.csv"), self.path("pooled.csv")
        args = ["rvalue", "--cal", self.cal, "--test", self.test, "--class", "2", "--alpha", "0.2"]
        self.assertEqual(main(args + ["--out", plain, "--variant", "plus"]), 0)
        self.assertEqual(main(args + ["--out", pooled, "--fcc"]), 0)
        self.assertEqual(main(args + ["--out", self.path("cons.csv"), "--conservative", "--variant", "plus"]), 0)
        a = read_rvalue_table(plain)
        b = read_rvalue_table(pooled)
        c = read_rvalue_table(self.path("cons.csv"))
        self.assertEqual(list(a["group"]), list(b["group"]))
        self.assertTrue((c["mono_r"] >= a["mono_r"]).all())

    def test_class_set_defaults_to_calibration_columns(self):
        cal = ScoreFrame.from_arrays(["c0", "c1", "c2"], ["a"] * 3, ["2", "1", "1"],
                                     {"1": [0.1, 0.3, 0.6], "2": [0.9, 0.7, 0.4]})
        test = ScoreFrame.from_arrays(["t0", "t1"], ["a", "a"], None, {"1": [0.2, 0.5], "2": [0.8, 0.5]})
        write_scores(self.cal, cal)
        write_scores(self.test, test)
        out = self.path("r.csv")
        code = main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "2", "--alpha", "0.5",
                     "--variant", "standard", "--out", out])
        self.assertEqual(code, 0)
        table = read_rvalue_table(out)
        self.assertEqual(list(table["class"]), ["2", "2"])
        np.testing.assert_allclose(table["raw_r"], [0.5, 0.5], atol=1e-12)
        self.assertEqual(list(table["decision"]), ["2", "2"])

    def test_alpha_class_without_score_column_exits_2(self):
        code = main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "3", "--alpha", "0.1",
                     "--out", self.path("o.csv")])
        self.assertEqual(code, 2)

    def test_threaded_classes_match_serial(self):
        outs = [self.path("serial.csv"), self.path("threaded.csv")]
        for out, threads in zip(outs, ("1", "4")):
            code = main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "1", "--class", "2",
                         "--alpha", "0.3", "--threads", threads, "--out", out])
            self.assertEqual(code, 0)
        with open(outs[0], "rb") as a, open(outs[1], "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_seed_only_on_random_commands(self):
        with self.assertRaises(SystemExit):
            main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "2", "--seed", "1"])
        with self.assertRaises(SystemExit):
            main(["conformal", "--cal", self.cal, "--test", self.test, "--class", "2", "--alpha", "0.1",
                  "--threads", "2"])

    def test_missing_column_exits_2(self):
        bad = self.path("bad.csv")
        pd.DataFrame({"id": ["x"], "score_1": [0.2], "score_2": [0.8]}).to_csv(bad, index=False)
        code = main(["rvalue", "--cal", self.cal, "--test", bad, "--class", "2", "--out", self.path("o.csv")])
        self.assertEqual(code, 2)

    def test_unreadable_file_exits_2(self):
        code = main(["rvalue", "--cal", self.path("nope.csv"), "--test", self.test, "--class", "2",
                     "--out", self.path("o.csv")])
        self.assertEqual(code, 2)

    def test_score_out_of_range_exits_3(self):
        bad = self.path("bad.csv")
        pd.DataFrame({"id": ["x"], "group": ["F"], "score_1": [-0.5], "score_2": [1.5]}).to_csv(bad, index=False)
        code = main(["rvalue", "--cal", self.cal, "--test", bad, "--class", "2", "--out", self.path("o.csv")])
        self.assertEqual(code, 3)

    def test_alpha_out_of_range_exits_3(self):
        code = main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "2", "--alpha", "0",
                     "--out", self.path("o.csv")])
        self.assertEqual(code, 3)
        code = main(["conformal", "--cal", self.cal, "--test", self.test, "--class", "2", "--alpha", "1.5",
                     "--out", self.path("o.csv")])
        self.assertEqual(code, 3)

    def test_unknown_group_exits_3(self):
        code = main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "2", "--groups", "F",
                     "--out", self.path("o.csv")])
        self.assertEqual(code, 3)

    def test_conformal_matches_single_class_rvalue(self):
        n = 40
        rng = np.random.default_rng(12)
        s1 = np.round(rng.random(n), 6)
        cal = ScoreFrame.from_arrays([f"c{i}" for i in range(n)], ["ALL"] * n, ["0"] * n, {"0": 1 - s1, "1": s1})
        t1 = np.round(rng.random(25), 6)
        test = ScoreFrame.from_arrays([f"t{i}" for i in range(25)], ["ALL"] * 25, None, {"0": 1 - t1, "1": t1})
        write_scores(self.cal, cal)
        write_scores(self.test, test)

        conf_out, rv_out = self.path("conf.csv"), self.path("rv.csv")
        self.assertEqual(main(["conformal", "--cal", self.cal, "--test", self.test, "--class", "1",
                               "--alpha", "0.3", "--out", conf_out]), 0)
        self.assertEqual(main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "1",
                               "--class-set", "0,1", "--alpha", "0.3", "--variant", "standard",
                               "--out", rv_out]), 0)
        conf = read_conformal(conf_out)
        rv = read_rvalue_table(rv_out)
        np.testing.assert_array_equal(conf["q_mono"].to_numpy(), rv["mono_r"].to_numpy())
        np.testing.assert_array_equal(conf["decision"].to_numpy(), (rv["decision"] == "1").to_numpy())

    def test_evaluate_report(self):
        sel, report_path = self.path("sel.csv"), self.path("report.json")
        test = _score_frame(30, 2, labeled=True, prefix="t")
        write_scores(self.test, test)
        main(["rvalue", "--cal", self.cal, "--test", self.test, "--class", "1", "--class", "2",
              "--alpha", "0.5", "--out", self.path("r.csv"), "--selections", sel])
        code = main(["evaluate", "--selections", sel, "--truth", self.test, "--out", report_path])
        self.assertEqual(code, 0)
        report = read_report(report_path)
        self.assertEqual(report.classes, ("1", "2"))
        self.assertEqual(report.groups, ("F", "M"))
        self.assertEqual(report.m, 30)
        with open(report_path, encoding="utf-8") as f:
            self.assertIn("cells", json.load(f))

    def test_conformal_alpha_zero_rejects_nothing(self):
        out = self.path("conf.csv")
        self.assertEqual(main(["conformal", "--cal", self.cal, "--test", self.test, "--class", "2",
                               "--alpha", "0", "--out", out]), 0)
        self.assertFalse(read_conformal(out)["decision"].any())

    def test_evaluate_all_indecision(self):
        sel, truth = self.path("sel.csv"), self.path("truth.csv")
        pd.DataFrame({"id": ["a", "b"], "group": ["F", "M"], "decision": [INDECISION] * 2}).to_csv(sel, index=False)
        pd.DataFrame({"id": ["a", "b"], "label": ["1", "2"]}).to_csv(truth, index=False)
        out = self.path("report.json")
        self.assertEqual(main(["evaluate", "--selections", sel, "--truth", truth, "--out", out]), 0)
        report = read_report(out)
        self.assertEqual(report.epi, 1.0)
        self.assertTrue(all(v == 0.0 for v in report.fsp.values()))
        self.assertIn(("1", "M"), report.fsp)

    def test_evaluate_missing_truth_exits_3(self):
        sel = self.path("sel.csv")
        pd.DataFrame({"id": ["a", "b"], "group": ["F", "F"], "decision": ["1", INDECISION]}).to_csv(sel, index=False)
        truth = self.path("truth.csv")
        pd.DataFrame({"id": ["b"], "label": ["1"]}).to_csv(truth, index=False)
        self.assertEqual(main(["evaluate", "--selections", sel, "--truth", truth, "--out", self.path("o.json")]), 3)

    def test_simulate_small_sweep(self):
        out = self.path("sim.csv")
        code = main(["simulate", "--scenario", "1", "--reps", "2", "--pi2f", "0.5", "--methods", "fasi,oracle",
                     "--seed", "3", "--threads", "1", "--out", out])
        self.assertEqual(code, 0)
        table = read_table(out)
        self.assertEqual(set(table["method"]), {"fasi", "oracle"})
        self.assertEqual(list(table.columns[-2:]), ["q05", "q95"])
        fsr = pd.to_numeric(table.loc[table["metric"] == "fsp", "mean"])
        self.assertTrue(fsr.between(0, 1).all())
        self.assertEqual(set(table["pi2f"]), {0.5})

    @patch("fasi_sdk.config.FASI_SEED", None)
    def test_simulate_same_seed_same_bytes(self):
        outs = [self.path("a.csv"), self.path("b.csv")]
        for out in outs:
            main(["simulate", "--reps", "1", "--pi2f", "0.35", "--methods", "fasi,fcc", "--seed", "9",
                  "--threads", "1", "--out", out])
        with open(outs[0], "rb") as a, open(outs[1], "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_stability_small(self):
        out = self.path("stab.csv")
        code = main(["stability", "--test-sizes", "5,20", "--n-cal", "50", "--draws", "5", "--out", out])
        self.assertEqual(code, 0)
        table = read_table(out)
        self.assertEqual(list(table["test_size"]), [5, 20])


class TestSeeds(unittest.TestCase):
    @patch("fasi_sdk.config.FASI_SEED", "7")
    def test_environment_overrides_seed(self):
        self.assertEqual(resolve_seed(123), 7)
        self.assertEqual(ScenarioConfig(seed=5).effective_seed, 7)

    @patch("fasi_sdk.config.FASI_SEED", None)
    def test_explicit_seed_without_environment(self):
        self.assertEqual(resolve_seed(123), 123)

    @patch("fasi_sdk.config.FASI_SEED", "abc")
    def test_bad_environment_seed(self):
        with self.assertRaises(ValidationError):
            resolve_seed(1)


class TestConfig(unittest.TestCase):
    def test_parse_grid(self):
        self.assertEqual(parse_grid("0.2:0.8:0.15"), (0.2, 0.35, 0.5, 0.65, 0.8))
        self.assertEqual(parse_grid("0.1,0.9"), (0.1, 0.9))
        with self.assertRaises(ValidationError):
            parse_grid("0.1:0.9:0")

    def test_run_config(self):
        config = RunConfig(alphas={"2": 0.1}, classes=("1", "2"), fcc=True, variant="standard")
        config.validate()
        self.assertEqual(config.selected_classes.labels, ("2",))
        self.assertTrue(config.rvalue_variant.is_plus)
        with self.assertRaises(ValidationError):
            RunConfig(alphas={"3": 0.1}, classes=("1", "2")).validate()

    def test_scenario_config(self):
        ScenarioConfig().validate()
        with self.assertRaises(ValidationError):
            ScenarioConfig(n_train=10).validate()
        with self.assertRaises(ValidationError):
            ScenarioConfig(methods=("fasi", "magic")).validate()


if __name__ == "__main__":
    unittest.main()
