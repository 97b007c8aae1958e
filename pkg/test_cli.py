#!/usr/bin/env python3
"""Tests for the command line, settings, validators and result files"""

import io
import os
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd

ROOT = Path(__file__).resolve().parent
BACKEND_PATH = ROOT / "backend"
if str(BACKEND_PATH) not in sys.path:
    sys.path.insert(0, str(BACKEND_PATH))

from app.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, run
from app.config import get_settings, load_settings, reset_settings
from app.errors import ExportError
from app.export import read_csv, read_summary, write_csv_atomic
from app.models import ModelFamily
from app.validators import RunValidator, parse_oracle_spec


def invoke(*argv):
    """Run the CLI and return (exit code, stdout lines, stderr text)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(list(argv))
    return code, out.getvalue().splitlines(), err.getvalue()


def as_dict(lines):
    return dict(line.split("=", 1) for line in lines if "=" in line)


class CLITestCase(unittest.TestCase):
    def setUp(self):
        patcher = mock.patch.dict(os.environ, {}, clear=False)
        patcher.start()
        self.addCleanup(patcher.stop)
        for variable in [v for v in os.environ if v.startswith("QENS_")]:
            del os.environ[variable]
        reset_settings()
        self.addCleanup(reset_settings)


class DeutschJozsaCommandTests(CLITestCase):
    def test_constant_oracle(self):
        code, lines, _ = invoke("dj", "--n", "3", "--oracle", "constant:0")
        self.assertEqual(code, EXIT_OK)
        summary = as_dict(lines)
        self.assertEqual(summary["p_all_zeros"], "1.0")
        self.assertEqual(summary["verdict"], "constant")
        self.assertEqual(summary["p_f_zero"], "1.0")
        self.assertEqual(summary["congruent"], "true")

    def test_balanced_mask_oracle(self):
        code, lines, _ = invoke("dj", "--n", "3", "--oracle", "balanced:mask=5")
        self.assertEqual(code, EXIT_OK)
        summary = as_dict(lines)
        self.assertEqual(summary["p_all_zeros"], "0.0")
        self.assertEqual(summary["verdict"], "balanced")
        self.assertEqual(summary["p_f_zero"], "0.5")

    def test_result_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "dj.csv"
            code, lines, _ = invoke("dj", "--n", "2", "--oracle", "balanced:subset=0,3", "--output", str(path))
            self.assertEqual(code, EXIT_OK)
            self.assertIn(f"output={path}", lines)
            frame = read_csv(path)
        self.assertEqual(list(frame.columns), ["oracle", "n", "p_all_zeros", "verdict", "p_f_zero", "congruent"])
        self.assertEqual(frame.loc[0, "verdict"], "balanced")

    def test_bad_oracle(self):
        code, _, err = invoke("dj", "--n", "3", "--oracle", "balanced:mask=0")
        self.assertEqual(code, EXIT_INVALID)
        self.assertIn("VALIDATION_ERROR", err)

    def test_qubit_cap(self):
        code, _, _ = invoke("dj", "--n", "30")
        self.assertEqual(code, EXIT_INVALID)


class UsageTests(CLITestCase):
    def test_unknown_flag(self):
        code, _, err = invoke("dj", "--bogus", "1")
        self.assertEqual(code, EXIT_INVALID)
        self.assertIn("USAGE", err)

    def test_abbreviated_flag_rejected(self):
        code, _, _ = invoke("dj", "--orac", "constant:0")
        self.assertEqual(code, EXIT_INVALID)

    def test_missing_subcommand(self):
        code, _, _ = invoke()
        self.assertEqual(code, EXIT_INVALID)

    def test_negative_seed(self):
        code, _, _ = invoke("dj", "--seed", "-1")
        self.assertEqual(code, EXIT_INVALID)

    def test_output_directory_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, _, _ = invoke("dj", "--output", tmp)
        self.assertEqual(code, EXIT_INVALID)


class PipelineCommandTests(CLITestCase):
    def test_qensemble_probabilities(self):
        code, lines, _ = invoke("qensemble", "--d", "2", "--bits", "2", "--M", "16", "--seed", "3")
        self.assertEqual(code, EXIT_OK)
        summary = as_dict(lines)
        self.assertAlmostEqual(float(summary["p_minus"]) + float(summary["p_plus"]), 1.0, delta=1e-10)
        self.assertAlmostEqual(float(summary["p_minus"]), float(summary["p_minus_exact"]), delta=1e-10)
        self.assertIn(summary["label"], ("1", "-1"))

    def test_uniform_weighting(self):
        code, lines, _ = invoke("qensemble", "--d", "1", "--bits", "2", "--weighting", "uniform")
        self.assertEqual(code, EXIT_OK)
        # the one-dimensional grid is symmetric, so exactly half the models vote each way
        self.assertEqual(as_dict(lines)["p_minus"], "0.5")

    def test_too_many_parameter_bits(self):
        code, _, err = invoke("qensemble", "--d", "11", "--bits", "2")
        self.assertEqual(code, EXIT_INVALID)
        self.assertIn("22 parameter qubits", err)

    def test_audit_limit(self):
        code, _, _ = invoke("compare", "--d", "7", "--bits", "2")
        self.assertEqual(code, EXIT_INVALID)

    def test_empty_ensemble_is_a_runtime_failure(self):
        with mock.patch("app.cli.accuracy_table", return_value=np.zeros(4)):
            code, _, err = invoke("dequantize", "--d", "1", "--bits", "2", "--proposals", "100")
        self.assertEqual(code, EXIT_RUNTIME)
        self.assertIn("EMPTY_ENSEMBLE", err)

    def test_dequantize_files_are_reproducible(self):
        argv = ["dequantize", "--d", "2", "--bits", "2", "--proposals", "5000", "--seed", "8"]
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / "a.csv", Path(tmp) / "b.csv"
            self.assertEqual(invoke(*argv, "--output", str(first))[0], EXIT_OK)
            self.assertEqual(invoke(*argv, "--output", str(second), "--threads", "2")[0], EXIT_OK)
            self.assertEqual(first.read_bytes(), second.read_bytes())
            frame = read_csv(first)
        self.assertEqual(list(frame.columns), ["theta_id", "a_theta", "accepted", "weight"])
        self.assertEqual(len(frame), 16)

    def test_above_half_expected_acceptance(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "above.csv"
            code, lines, _ = invoke("dequantize", "--d", "2", "--bits", "2", "--proposals", "20000", "--seed", "8",
                                    "--mode", "above_half", "--output", str(path))
            self.assertEqual(code, EXIT_OK)
            accuracies = read_csv(path)["a_theta"].to_numpy()
        summary = as_dict(lines)
        expected = float(np.mean(np.where(accuracies > 0.5, accuracies, 0.0)))
        self.assertAlmostEqual(float(summary["expected_acceptance"]), expected, delta=1e-12)
        self.assertLess(abs(float(summary["acceptance_rate"]) - expected), 0.02)

    def test_uniform_weighting_file_holds_accuracies(self):
        argv = ["qensemble", "--d", "2", "--bits", "2", "--M", "16", "--seed", "3"]
        with tempfile.TemporaryDirectory() as tmp:
            uniform, weighted = Path(tmp) / "uniform.csv", Path(tmp) / "weighted.csv"
            self.assertEqual(invoke(*argv, "--weighting", "uniform", "--output", str(uniform))[0], EXIT_OK)
            self.assertEqual(invoke(*argv, "--output", str(weighted))[0], EXIT_OK)
            uniform_frame, weighted_frame = read_csv(uniform), read_csv(weighted)
        pd.testing.assert_series_equal(uniform_frame["a_theta"], weighted_frame["a_theta"])
        self.assertFalse((uniform_frame["a_theta"] == 1.0).all())
        np.testing.assert_allclose(uniform_frame["weight_share"], 1 / 16, atol=1e-15)

    def test_compare_writes_distributions(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "nested" / "compare.csv"
            code, lines, _ = invoke("compare", "--d", "2", "--bits", "2", "--proposals", "20000", "--output", str(path))
            self.assertEqual(code, EXIT_OK)
            frame = read_csv(path)
            summary = read_summary(path)
        self.assertEqual(len(frame), 16)
        self.assertAlmostEqual(frame["quantum_probability"].sum(), 1.0, delta=1e-10)
        self.assertAlmostEqual(frame["classical_frequency"].sum(), 1.0, delta=1e-10)
        self.assertIn("tv_distance", summary)
        self.assertLess(float(as_dict(lines)["tv_distance"]), 0.05)

    def test_export_failure_is_a_runtime_failure(self):
        with tempfile.TemporaryDirectory() as tmp:
            blocker = Path(tmp) / "file"
            blocker.write_text("x")
            code, _, err = invoke("dj", "--output", str(blocker / "dj.csv"))
        self.assertEqual(code, EXIT_RUNTIME)
        self.assertIn("EXPORT_FAILED", err)


class ExperimentCommandTests(CLITestCase):
    def test_concentration(self):
        code, lines, _ = invoke("concentration", "--family", "linear", "--d-list", "5,50,500", "--M", "500",
                                "--n", "20")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(sum(1 for line in lines if line.startswith("d=")), 3)
        self.assertLess(float(as_dict(lines)["slope"]), 0.0)

    def test_duplicate_dimensions(self):
        code, _, _ = invoke("concentration", "--d-list", "10,10")
        self.assertEqual(code, EXIT_INVALID)

    def test_malformed_dimension_list(self):
        code, _, _ = invoke("appendix-b", "--d-list", "10,x")
        self.assertEqual(code, EXIT_INVALID)

    def test_highd(self):
        code, lines, _ = invoke("highd", "--d", "20", "--M", "100", "--n", "50", "--M-test", "40")
        self.assertEqual(code, EXIT_OK)
        self.assertLessEqual(int(as_dict(lines)["accepted_count"]), 50)

    def test_appendix_b(self):
        code, lines, _ = invoke("appendix-b", "--d-list", "10,100", "--M", "200", "--trials", "20",
                                "--ground-truth", "uniform")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(as_dict(lines)["largest_d"], "100")


class ReproducibilityTests(CLITestCase):
    COMMANDS = [
        ["dj", "--n", "3", "--oracle", "balanced:mask=5"],
        ["qensemble", "--d", "2", "--bits", "2", "--M", "16"],
        ["dequantize", "--d", "2", "--bits", "2", "--proposals", "5000"],
        ["compare", "--d", "2", "--bits", "2", "--proposals", "5000"],
        ["concentration", "--d-list", "5,50", "--M", "200", "--n", "10"],
        ["highd", "--d", "20", "--M", "100", "--n", "50", "--M-test", "40"],
        ["appendix-b", "--d-list", "10,100", "--M", "200", "--trials", "10"],
    ]

    def test_same_seed_gives_identical_files(self):
        for argv in self.COMMANDS:
            with self.subTest(command=argv[0]), tempfile.TemporaryDirectory() as tmp:
                first, second = Path(tmp) / "first.csv", Path(tmp) / "second.csv"
                self.assertEqual(invoke(*argv, "--seed", "5", "--output", str(first))[0], EXIT_OK)
                self.assertEqual(invoke(*argv, "--seed", "5", "--output", str(second))[0], EXIT_OK)
                self.assertEqual(first.read_bytes(), second.read_bytes())


class SettingsTests(CLITestCase):
    def test_defaults(self):
        settings = load_settings()
        self.assertEqual(settings.seed, 0)
        self.assertEqual(settings.max_qubits, 26)
        self.assertEqual(settings.block_size, 65536)

    def test_environment_overrides(self):
        os.environ["QENS_SEED"] = "0x10"
        os.environ["QENS_THREADS"] = "4"
        os.environ["QENS_LOG_LEVEL"] = "debug"
        settings = load_settings()
        self.assertEqual(settings.seed, 16)
        self.assertEqual(settings.threads, 4)
        self.assertEqual(settings.log_level, "DEBUG")

    def test_malformed_values(self):
        for variable, value in (("QENS_SEED", "abc"), ("QENS_THREADS", "0"), ("QENS_LOG_LEVEL", "LOUD")):
            with self.subTest(variable=variable):
                with mock.patch.dict(os.environ, {variable: value}):
                    with self.assertRaises(ValueError):
                        load_settings()

    def test_settings_are_cached_until_reset(self):
        os.environ["QENS_HIDDEN_WIDTH"] = "8"
        self.assertEqual(get_settings().hidden_width, 8)
        os.environ["QENS_HIDDEN_WIDTH"] = "16"
        self.assertEqual(get_settings().hidden_width, 8)
        reset_settings()
        self.assertEqual(get_settings().hidden_width, 16)

    def test_seed_falls_back_to_environment(self):
        argv = ["qensemble", "--d", "2", "--bits", "1", "--M", "8"]
        explicit = invoke(*argv, "--seed", "5")
        os.environ["QENS_SEED"] = "5"
        reset_settings()
        from_env = invoke(*argv)
        self.assertEqual(explicit[1], from_env[1])

    def test_bad_environment_exits_invalid(self):
        os.environ["QENS_SEED"] = "not-a-number"
        code, _, err = invoke("dj")
        self.assertEqual(code, EXIT_INVALID)
        self.assertIn("INVALID_SETTINGS", err)


class ValidatorTests(unittest.TestCase):
    def test_oracle_mini_language(self):
        self.assertEqual(parse_oracle_spec("balanced:subset=0,3", 2).truth_table.tolist(), [1, 0, 0, 1])
        self.assertEqual(parse_oracle_spec("constant:1", 2).ones, 4)
        for text in ("constant:2", "weird:1", "balanced:mask=0", "balanced:other=1", "balanced:mask=x"):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    parse_oracle_spec(text, 2)

    def test_dimension_lists(self):
        self.assertEqual(RunValidator.validate_d_list([10, 100]), [])
        self.assertEqual(len(RunValidator.validate_d_list([])), 1)
        self.assertEqual(len(RunValidator.validate_d_list([0, 10])), 1)
        self.assertEqual(len(RunValidator.validate_d_list([10, 10])), 1)

    def test_ensemble_bits(self):
        self.assertEqual(RunValidator.validate_ensemble_bits(ModelFamily.PERCEPTRON, 10, 2, None, 20), [])
        self.assertEqual(len(RunValidator.validate_ensemble_bits(ModelFamily.PERCEPTRON, 11, 2, None, 20)), 1)
        self.assertEqual(len(RunValidator.validate_ensemble_bits(ModelFamily.MLP3, 2, 1, 2, 20)), 0)

    def test_qubit_budget(self):
        self.assertEqual(RunValidator.validate_qubit_budget(26, 26), [])
        self.assertEqual(len(RunValidator.validate_qubit_budget(27, 26)), 1)


class AtomicWriteTests(unittest.TestCase):
    def test_summary_lines_follow_the_table(self):
        frame = pd.DataFrame({"a": [0.1, 0.25], "b": [1, 2]})
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv_atomic(frame, Path(tmp) / "t.csv", ["rate=0.5"])
            text = path.read_text()
            self.assertEqual(read_summary(path), {"rate": "0.5"})
            self.assertEqual(read_csv(path)["a"].tolist(), [0.1, 0.25])
            self.assertEqual(sorted(p.name for p in Path(tmp).iterdir()), ["t.csv"])
        self.assertTrue(text.startswith("a,b\n0.10000000000000001,1\n"))

    def test_unwritable_destination(self):
        with tempfile.TemporaryDirectory() as tmp:
            blocker = Path(tmp) / "file"
            blocker.write_text("x")
            with self.assertRaises(ExportError):
                write_csv_atomic(pd.DataFrame({"a": [1]}), blocker / "t.csv")
            self.assertEqual(blocker.read_text(), "x")


if __name__ == "__main__":
    unittest.main()
