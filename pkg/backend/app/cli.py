"""
Command-line entry point: one subcommand per experiment

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
Summaries go to stdout, logs to stderr, tables to --output.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import LOG_LEVELS, SimulationSettings, get_settings
from .deutsch_jozsa import congruence_check, run_deutsch_jozsa, run_qensemble_dj
from .dequantize import (
    RejectionConfig,
    UniformProposal,
    acceptance_probability,
    classical_predict,
    equivalence_audit,
    rejection_sample,
)
from .errors import QEnsembleError
from .experiments import (
    AppendixBRecord,
    ConcentrationRecord,
    HighDResult,
    appendix_b_check,
    concentration_study,
    concentration_summary,
    export_csv,
    highd_experiment,
)
from .export import summary_lines, write_csv_atomic
from .models import Dataset, accuracy_table, generate_dataset, parameter_count
from .qensemble import (
    ParameterCode,
    accuracy_weighted_state,
    all_thetas,
    exact_ensemble_probabilities,
    measure_prediction,
    uniform_ensemble_state,
)
from .rng import QUERY_STREAM
from .schemas import CompareRow, DequantizeRow, DJRow, ErrorDetail, QEnsembleRow, RunConfig, Subcommand, Weighting
from .validators import RunValidator, parse_oracle_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class UsageError(ValueError):
    """Raised instead of exiting when argparse rejects the command line."""

    def __init__(self, message: str, usage: str = "") -> None:
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message, self.format_usage())


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: QENS_SEED or 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (1 = serial)")
    common.add_argument("--output", type=Path, default=None, help="CSV destination")
    common.add_argument("--log-level", choices=LOG_LEVELS, default=None, type=str.upper)

    model = _Parser(add_help=False)
    model.add_argument("--family", choices=["linear", "perceptron", "mlp3"], default="perceptron")
    model.add_argument("--hidden-width", type=int, default=None)

    pipeline = _Parser(add_help=False)
    pipeline.add_argument("--bits", type=int, default=2, help="bits per parameter")
    pipeline.add_argument("--d", type=int, default=2)
    pipeline.add_argument("--M", type=int, default=32)

    parser = _Parser(prog="qensemble", description="Quantum ensemble simulation and dequantization toolkit",
                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, parents: Sequence[argparse.ArgumentParser], help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=list(parents), help=help_text, allow_abbrev=False)

    dj = add("dj", [common], "Deutsch-Jozsa and its ensemble embedding")
    dj.add_argument("--n", type=int, default=3, help="number of input qubits")
    dj.add_argument("--oracle", default="constant:0")

    qens = add("qensemble", [common, model, pipeline], "simulate the weighted quantum ensemble")
    qens.add_argument("--weighting", choices=[w.value for w in Weighting], default=Weighting.ACCURACY.value)

    deq = add("dequantize", [common, model, pipeline], "classical rejection-sampling ensemble")
    deq.add_argument("--proposals", type=int, default=100000)
    deq.add_argument("--mode", choices=["accuracy_weighted", "above_half"], default="accuracy_weighted")

    cmp_ = add("compare", [common, model, pipeline], "audit quantum against classical sampling")
    cmp_.add_argument("--proposals", type=int, default=100000)

    conc = add("concentration", [common, model], "accuracy concentration over dimension")
    conc.add_argument("--d-list", type=_int_list, default=[10, 100, 1000])
    conc.add_argument("--M", type=int, default=10000)
    conc.add_argument("--n", type=int, default=100, help="models per dimension")

    highd = add("highd", [common], "high-dimensional weak-model ensemble")
    highd.add_argument("--d", type=int, default=1000)
    highd.add_argument("--M", type=int, default=2000)
    highd.add_argument("--n", type=int, default=2000, help="models sampled")
    highd.add_argument("--M-test", dest="M_test", type=int, default=500)

    appb = add("appendix-b", [common], "Monte Carlo check of the accuracy limits")
    appb.add_argument("--d-list", type=_int_list, default=[10, 100, 1000, 5000])
    appb.add_argument("--M", type=int, default=2000)
    appb.add_argument("--trials", type=int, default=200)
    appb.add_argument("--ground-truth", choices=["axis", "uniform"], default="axis")

    return parser


def build_config(args: argparse.Namespace, settings: SimulationSettings) -> RunConfig:
    """Fold parsed arguments over the environment defaults."""
    fields = {
        "subcommand": args.subcommand,
        "seed": settings.seed if args.seed is None else args.seed,
        "threads": settings.threads if args.threads is None else args.threads,
        "output_path": args.output,
    }
    renames = {"bits": "bits_per_param"}
    for name in ("family", "hidden_width", "bits", "d", "M", "n", "M_test", "oracle", "weighting",
                 "proposals", "mode", "d_list", "trials", "ground_truth"):
        if hasattr(args, name):
            fields[renames.get(name, name)] = getattr(args, name)
    if args.subcommand == Subcommand.DJ.value:
        fields["n_qubits"] = fields.pop("n")
    return RunConfig(**fields)


# ----- subcommands -----

def _query_point(d: int, seed: int) -> np.ndarray:
    return generate_dataset(1, d, seed, stream=(QUERY_STREAM,)).points[0]


def _pipeline_inputs(config: RunConfig):
    pc = ParameterCode(parameter_count(config.family, config.d, config.hidden_width), config.bits_per_param)
    data: Dataset = generate_dataset(config.M, config.d, config.seed)
    return pc, data, _query_point(config.d, config.seed)


def run_dj(config: RunConfig) -> dict:
    oracle = parse_oracle_spec(config.oracle, config.n_qubits)
    outcome = run_deutsch_jozsa(oracle)
    row = DJRow(
        oracle=oracle.label,
        n=config.n_qubits,
        p_all_zeros=outcome.p_all_zeros,
        verdict=outcome.verdict.value,
        p_f_zero=run_qensemble_dj(oracle),
        congruent=congruence_check(oracle),
    )
    if config.output_path:
        export_csv([row], config.output_path)
    return {k: v for k, v in row.model_dump(mode="json").items() if k not in ("oracle", "n")}


def run_qensemble(config: RunConfig) -> dict:
    pc, data, x_tilde = _pipeline_inputs(config)
    if config.weighting is Weighting.UNIFORM:
        ws = uniform_ensemble_state(config.family, pc, x_tilde, config.hidden_width)
    else:
        ws = accuracy_weighted_state(config.family, pc, data, x_tilde, config.hidden_width)
    result = measure_prediction(ws)

    codes = list(result.per_model)
    weights = np.array([result.per_model[c][0] for c in codes])
    predictions = np.array([result.per_model[c][1] for c in codes])
    p_minus_exact, _ = exact_ensemble_probabilities(weights, predictions)
    summary = {
        "p_minus": result.p_minus,
        "p_plus": result.p_plus,
        "label": result.label,
        "p_minus_exact": p_minus_exact,
    }
    if config.output_path:
        shares = ws.weight_shares
        # a_theta is the training accuracy under either weighting
        accuracies = (
            weights if config.weighting is Weighting.ACCURACY
            else accuracy_table(config.family, all_thetas(pc), data, config.hidden_width)
        )
        rows = [
            QEnsembleRow(
                theta_code=c, a_theta=float(accuracies[k]), prediction=int(predictions[k]), weight_share=shares[k]
            )
            for k, c in enumerate(codes)
        ]
        export_csv(rows, config.output_path, QEnsembleRow, summary)
    return summary


def run_dequantize(config: RunConfig) -> dict:
    pc, data, x_tilde = _pipeline_inputs(config)
    accuracies = accuracy_table(config.family, all_thetas(pc), data, config.hidden_width)
    cfg = RejectionConfig(n_proposals=config.proposals, mode=config.mode, seed=config.seed, threads=config.threads)
    ensemble = rejection_sample(accuracies, UniformProposal(pc.size), cfg)
    result = classical_predict(ensemble, config.family, pc, x_tilde, config.hidden_width)

    summary = {
        "acceptance_rate": ensemble.acceptance_rate,
        "expected_acceptance": acceptance_probability(accuracies, config.mode),
        "p_minus": result.p_minus,
        "p_plus": result.p_plus,
        "label": result.label,
    }
    if config.output_path:
        counts, totals = ensemble.tallies(pc.size)
        frame = pd.DataFrame({
            "theta_id": np.arange(pc.size),
            "a_theta": accuracies,
            "accepted": counts,
            "weight": totals.astype(np.float64),
        }, columns=list(DequantizeRow.model_fields))
        write_csv_atomic(frame, config.output_path, summary_lines(summary))
    return summary


def run_compare(config: RunConfig) -> dict:
    pc, data, x_tilde = _pipeline_inputs(config)
    report = equivalence_audit(config.family, pc, data, x_tilde, config.proposals, config.seed,
                               config.hidden_width, config.threads)
    summary = {
        "p_minus_quantum": report.p_minus_quantum,
        "p_minus_classical": report.p_minus_classical,
        "p_minus_gap": report.p_minus_gap,
        "tv_distance": report.tv_distance,
        "acceptance_rate": report.acceptance_rate,
        "expected_acceptance": report.expected_acceptance,
    }
    if config.output_path:
        rows = [
            CompareRow(
                theta_code=pc.code_string(k),
                a_theta=report.accuracies[k],
                quantum_probability=report.quantum_distribution[k],
                classical_frequency=report.classical_frequencies[k],
            )
            for k in range(pc.size)
        ]
        export_csv(rows, config.output_path, CompareRow, summary)
    return summary


def run_concentration(config: RunConfig) -> dict:
    records = concentration_study(config.family, config.d_list, config.M, config.n, config.seed,
                                  config.hidden_width, config.threads)
    summary = concentration_summary(records)
    if config.output_path:
        export_csv(records, config.output_path, ConcentrationRecord, summary)
    for record in records:
        print(f"d={record.d} mean_A={record.mean_A:.6f} std_A={record.std_A:.6f}")
    return summary


def run_highd(config: RunConfig) -> dict:
    result = highd_experiment(config.d, config.M, config.n, config.M_test, config.seed, config.threads)
    if config.output_path:
        export_csv([result], config.output_path, HighDResult)
    return {"accepted_count": result.accepted_count, "test_accuracy": result.test_accuracy}


def run_appendix_b(config: RunConfig) -> dict:
    records = appendix_b_check(config.d_list, config.M, config.trials, config.seed,
                               config.ground_truth, config.threads)
    if config.output_path:
        export_csv(records, config.output_path, AppendixBRecord)
    for record in records:
        print(f"d={record.d} mean_a={record.mean_a:.6f} var_a={record.var_a:.6g}")
    largest = max(records, key=lambda r: r.d)
    return {"largest_d": largest.d, "mean_a": largest.mean_a, "var_a": largest.var_a}


HANDLERS: Dict[Subcommand, Callable[[RunConfig], dict]] = {
    Subcommand.DJ: run_dj,
    Subcommand.QENSEMBLE: run_qensemble,
    Subcommand.DEQUANTIZE: run_dequantize,
    Subcommand.COMPARE: run_compare,
    Subcommand.CONCENTRATION: run_concentration,
    Subcommand.HIGHD: run_highd,
    Subcommand.APPENDIX_B: run_appendix_b,
}


# ----- entry point -----

def _display(value: object) -> str:
    if isinstance(value, float):
        return repr(round(value, 12))
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def _report_error(code: str, message: str, details: Optional[dict] = None) -> None:
    error = ErrorDetail(code=code, message=message, details=details)
    print(f"error: {error.model_dump_json(exclude_none=True)}", file=sys.stderr)


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, validate and execute one subcommand; return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        settings = get_settings()
    except UsageError as exc:
        print(exc.usage, end="", file=sys.stderr)
        _report_error("USAGE", str(exc))
        return EXIT_INVALID
    except ValueError as exc:
        _report_error("INVALID_SETTINGS", str(exc))
        return EXIT_INVALID

    configure_logging(args.log_level or settings.log_level)

    try:
        config = build_config(args, settings)
        errors = RunValidator.validate_run_config(config, settings)
        if errors:
            _report_error("VALIDATION_ERROR", "; ".join(errors), {"errors": errors})
            return EXIT_INVALID
        logger.info("Running %s with seed %d", config.subcommand.value, config.seed)
        summary = HANDLERS[config.subcommand](config)
    except QEnsembleError as exc:
        logger.error("%s failed: %s", args.subcommand, exc)
        _report_error(exc.code, str(exc))
        return EXIT_RUNTIME
    except ValueError as exc:
        _report_error("VALIDATION_ERROR", str(exc))
        return EXIT_INVALID

    for line in (f"{key}={_display(value)}" for key, value in summary.items()):
        print(line)
    if config.output_path:
        print(f"output={config.output_path}")
    return EXIT_OK


def main() -> None:
    sys.exit(run())
