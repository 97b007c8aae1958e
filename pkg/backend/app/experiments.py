"""
Accuracy concentration experiments for randomly sampled models.

Every (d, model) accuracy is computed from its own seeded substream, so a
run with the same seed and sizes reproduces the same numbers regardless of
the number of worker threads.
"""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from .config import get_settings
from .dequantize import select_above_half
from .export import read_csv, summary_lines, write_csv_atomic
from .models import (
    MODEL_CHUNK,
    Dataset,
    GroundTruthMode,
    ModelFamily,
    accuracy_table,
    correct_counts,
    generate_dataset,
    ground_truth_spec,
    predict_many,
    sample_thetas,
)
from .rng import TEST_STREAM, parallel_map

logger = logging.getLogger(__name__)

RecordT = TypeVar("RecordT", bound=BaseModel)


class ConcentrationRecord(BaseModel):
    family: ModelFamily
    d: int = Field(ge=1)
    M: int = Field(ge=1)
    n: int = Field(ge=1)
    mean_A: float = Field(ge=0.0, le=1.0)
    std_A: float = Field(ge=0.0)


class HighDResult(BaseModel):
    d: int = Field(ge=1)
    M: int = Field(ge=1)
    n: int = Field(ge=1)
    M_test: int = Field(ge=1)
    accepted_count: int = Field(ge=0)
    test_accuracy: float = Field(ge=0.0, le=1.0)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _accepted_within_pool(self) -> "HighDResult":
        if self.accepted_count > self.n:
            raise ValueError(f"accepted_count {self.accepted_count} exceeds the pool of {self.n} models")
        return self


class AppendixBRecord(BaseModel):
    d: int = Field(ge=1)
    trials: int = Field(ge=2)
    mean_a: float = Field(ge=0.0, le=1.0)
    var_a: float = Field(ge=0.0)


# ----- statistics -----

def _mean_and_variance(values: np.ndarray) -> Tuple[float, float]:
    """Mean and sample variance (n - 1 denominator) with compensated sums."""
    data = np.asarray(values, dtype=np.float64).tolist()
    mean = math.fsum(data) / len(data)
    variance = math.fsum((v - mean) ** 2 for v in data) / (len(data) - 1)
    return mean, variance


def _model_accuracies(family: ModelFamily, data: Dataset, n: int, seed: int,
                      stream: Tuple[int, ...], hidden_width: Optional[int], threads: int) -> np.ndarray:
    """Accuracies of models 0..n-1 drawn from (seed, MODEL_STREAM, *stream, i)."""
    starts = list(range(0, n, MODEL_CHUNK))

    def chunk(start: int) -> np.ndarray:
        count = min(MODEL_CHUNK, n - start)
        thetas = sample_thetas(family, data.dim, count, seed, hidden_width, stream, offset=start)
        return accuracy_table(family, thetas, data, hidden_width)

    return np.concatenate(parallel_map(chunk, starts, threads))


def _check_sizes(d_list: Sequence[int], **sizes: int) -> List[int]:
    d_values = [int(d) for d in d_list]
    if not d_values:
        raise ValueError("d_list must contain at least one dimension")
    if any(d < 1 for d in d_values):
        raise ValueError(f"every dimension must be >= 1, got {d_values}")
    for name, (value, minimum) in sizes.items():
        if value < minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return d_values


# ----- concentration -----

def concentration_study(family: Union[ModelFamily, str], d_list: Sequence[int], M: int = 10000,
                        n: int = 100, seed: int = 0, hidden_width: Optional[int] = None,
                        threads: Optional[int] = None) -> List[ConcentrationRecord]:
    """Mean and spread of random-model accuracy for each dimension in ``d_list``.

    Each dimension gets a fresh dataset labeled by the sign of its first
    coordinate and n fresh models.
    """
    family = ModelFamily(family)
    d_values = _check_sizes(d_list, M=(M, 2), n=(n, 2))
    threads = get_settings().threads if threads is None else threads

    records = []
    for d_index, d in enumerate(d_values):
        data = generate_dataset(M, d, seed, stream=(d_index,))
        accuracies = _model_accuracies(family, data, n, seed, (d_index,), hidden_width, threads)
        mean, variance = _mean_and_variance(accuracies)
        record = ConcentrationRecord(family=family, d=d, M=M, n=n, mean_A=mean, std_A=math.sqrt(variance))
        logger.info("Concentration %s d=%d: mean_A=%.6f std_A=%.6f", family.value, d, mean, record.std_A)
        records.append(record)
    return records


def berry_esseen_reference(d_list: Sequence[int], c: float) -> List[Tuple[int, float]]:
    """Reference curve c * d^(-1/2)."""
    if not c > 0:
        raise ValueError(f"scale c must be positive, got {c}")
    return [(int(d), c / math.sqrt(d)) for d in d_list]


def fit_reference_scale(records: Sequence[ConcentrationRecord]) -> float:
    """Scale c that puts the reference curve through the smallest-d record."""
    if not records:
        raise ValueError("need at least one record to fit the reference scale")
    anchor = min(records, key=lambda r: r.d)
    if anchor.std_A <= 0:
        raise ValueError(f"record at d={anchor.d} has zero spread")
    return anchor.std_A * math.sqrt(anchor.d)


def fit_decay_slope(records: Sequence[ConcentrationRecord]) -> float:
    """Least-squares slope of log(std_A) against log(d)."""
    if len(records) < 3:
        raise ValueError(f"need at least 3 records to fit a slope, got {len(records)}")
    if any(r.std_A <= 0 for r in records):
        raise ValueError("cannot fit a log-log slope through a zero standard deviation")
    if len({r.d for r in records}) < 2:
        raise ValueError("need at least two distinct dimensions to fit a slope")
    log_d = np.log([float(r.d) for r in records])
    log_std = np.log([r.std_A for r in records])
    slope, _ = np.polyfit(log_d, log_std, 1)
    return float(slope)


def concentration_summary(records: Sequence[ConcentrationRecord]) -> dict:
    """Slope and reference scale for the result file, when they can be fitted."""
    summary = {}
    if len(records) >= 3 and all(r.std_A > 0 for r in records) and len({r.d for r in records}) >= 2:
        summary["slope"] = fit_decay_slope(records)
    else:
        logger.warning("Too few records with positive spread to fit a decay slope")
    if records and min(records, key=lambda r: r.d).std_A > 0:
        summary["berry_esseen_c"] = fit_reference_scale(records)
    return summary


# ----- high-dimensional ensemble -----

def highd_experiment(d: int, M: int, n: int, M_test: int, seed: int = 0,
                     threads: Optional[int] = None) -> HighDResult:
    """Accuracy-weighted ensemble of the sampled perceptrons with accuracy above 0.5.

    Raises EmptyEnsembleError when no sampled model qualifies.
    """
    _check_sizes([d], M=(M, 1), n=(n, 1), M_test=(M_test, 1))
    threads = get_settings().threads if threads is None else threads
    family = ModelFamily.PERCEPTRON

    train = generate_dataset(M, d, seed)
    test = generate_dataset(M_test, d, seed, stream=(TEST_STREAM,))
    starts = list(range(0, n, MODEL_CHUNK))

    def chunk(start: int) -> Tuple[np.ndarray, np.ndarray]:
        count = min(MODEL_CHUNK, n - start)
        thetas = sample_thetas(family, d, count, seed, offset=start)
        accuracies = correct_counts(family, thetas, train) / M
        weights = np.where(accuracies > 0.5, accuracies, 0.0)
        votes = weights @ predict_many(family, thetas, test.points).astype(np.float64)
        return accuracies, votes

    results = parallel_map(chunk, starts, threads)
    accuracies = np.concatenate([r[0] for r in results])
    votes = np.sum([r[1] for r in results], axis=0)

    ensemble = select_above_half(np.arange(n), accuracies)
    predictions = np.where(votes >= 0, 1, -1)
    test_accuracy = float(np.count_nonzero(predictions == test.labels)) / M_test

    result = HighDResult(d=d, M=M, n=n, M_test=M_test, accepted_count=ensemble.size,
                         test_accuracy=test_accuracy, seed=seed)
    logger.info("High-d ensemble d=%d: %d of %d models selected, test accuracy %.5f",
                d, result.accepted_count, n, test_accuracy)
    return result


# ----- ground-truth limits -----

def appendix_b_check(d_list: Sequence[int], M: int = 2000, trials: int = 200, seed: int = 0,
                     ground_truth: Union[GroundTruthMode, str] = GroundTruthMode.AXIS,
                     threads: Optional[int] = None) -> List[AppendixBRecord]:
    """Monte Carlo mean and variance of perceptron accuracy per dimension."""
    d_values = _check_sizes(d_list, M=(M, 1), trials=(trials, 2))
    threads = get_settings().threads if threads is None else threads
    family = ModelFamily.PERCEPTRON

    records = []
    for d_index, d in enumerate(d_values):
        truth = ground_truth_spec(d, ground_truth, seed, stream=(d_index,))
        data = generate_dataset(M, d, seed, ground_truth=truth, stream=(d_index,))
        accuracies = _model_accuracies(family, data, trials, seed, (d_index,), None, threads)
        mean, variance = _mean_and_variance(accuracies)
        records.append(AppendixBRecord(d=d, trials=trials, mean_a=mean, var_a=variance))
        logger.info("Ground-truth check d=%d: mean_a=%.6f var_a=%.3e", d, mean, variance)
    return records


# ----- CSV -----

def export_csv(records: Sequence[BaseModel], destination: Union[str, Path],
               record_type: Optional[Type[BaseModel]] = None,
               summary: Optional[Mapping[str, object]] = None) -> Path:
    """Write records with a header row; an empty list yields a header-only file."""
    if record_type is None:
        if not records:
            raise ValueError("record_type is required to export an empty record list")
        record_type = type(records[0])
    columns = list(record_type.model_fields)
    frame = pd.DataFrame([r.model_dump(mode="json") for r in records], columns=columns)
    return write_csv_atomic(frame, destination, summary_lines(summary or {}))


def load_records(source: Union[str, Path], record_type: Type[RecordT]) -> List[RecordT]:
    frame = read_csv(source)
    return [record_type(**row) for row in frame.to_dict(orient="records")]
