"""
Classical base models, ground truth, synthetic data and the accuracy functional

Families:
- linear / perceptron: f(x; theta) = sigma(x . theta)
- mlp3: three hidden layers of width h, no biases, tanh on hidden layers,
  sigma on the scalar output. theta is flattened as W1 (d x h), W2 (h x h),
  W3 (h x h), w4 (h), each row-major.

sigma(z) = +1 if z >= 0 else -1 (the threshold at zero is fixed to +1).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import get_settings
from .export import read_csv, write_csv_atomic
from .rng import DATA_STREAM, GROUND_TRUTH_STREAM, MODEL_STREAM, substream

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9
MODEL_CHUNK = 1024
# Upper bound on hidden activations held at once by the mlp3 forward pass
MLP_ACTIVATION_BUDGET = 2 ** 22


class ModelFamily(str, Enum):
    LINEAR = "linear"
    PERCEPTRON = "perceptron"
    MLP3 = "mlp3"


class GroundTruthMode(str, Enum):
    AXIS = "axis"  # theta* = (1, 0, ..., 0)
    UNIFORM = "uniform"  # theta* drawn like any other perceptron


def _hidden(family: ModelFamily, hidden_width: Optional[int]) -> Optional[int]:
    if ModelFamily(family) is not ModelFamily.MLP3:
        return None
    width = get_settings().hidden_width if hidden_width is None else hidden_width
    if width < 1:
        raise ValueError(f"hidden width must be >= 1, got {width}")
    return width


def parameter_count(family: Union[ModelFamily, str], d: int, hidden_width: Optional[int] = None) -> int:
    """Number of entries in a flat theta for ``family`` on d-dimensional inputs."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    family = ModelFamily(family)
    if family is ModelFamily.MLP3:
        h = _hidden(family, hidden_width)
        return d * h + 2 * h * h + h
    return d


def sigma(z: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(z) >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A base model: family, input dimension and a flat theta in [-1, 1]^P."""

    family: ModelFamily
    theta: np.ndarray
    dim: int
    hidden_width: Optional[int] = None

    def __post_init__(self) -> None:
        family = ModelFamily(self.family)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "hidden_width", _hidden(family, self.hidden_width))

        theta = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        expected = parameter_count(family, self.dim, self.hidden_width)
        if theta.size != expected:
            raise ValueError(f"{family.value} on d={self.dim} needs {expected} parameters, got {theta.size}")
        if np.any(np.abs(theta) > 1.0) or not np.all(np.isfinite(theta)):
            raise ValueError("theta entries must lie in [-1, 1]")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def layout(self) -> Tuple[int, ...]:
        if self.family is ModelFamily.MLP3:
            h = self.hidden_width
            return (self.dim, h, h, h, 1)
        return (self.dim, 1)

    def negated(self) -> "ModelSpec":
        return ModelSpec(self.family, -self.theta, self.dim, self.hidden_width)


@dataclass(frozen=True, eq=False)
class Dataset:
    """M l2-normalized points with +-1 labels."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.labels).astype(np.int8)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise ValueError(f"points must be a non-empty M x d matrix, got shape {points.shape}")
        if labels.shape != (points.shape[0],):
            raise ValueError(f"expected {points.shape[0]} labels, got shape {labels.shape}")
        if not np.all((labels == 1) | (labels == -1)):
            raise ValueError("labels must be +1 or -1")
        norms = np.linalg.norm(points, axis=1)
        if np.max(np.abs(norms - 1.0)) > NORM_TOLERANCE:
            raise ValueError("every point must have unit Euclidean norm")
        points.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class AccuracyRecord:
    theta_id: int
    correct: int
    size: int

    @property
    def a_theta(self) -> float:
        return self.correct / self.size


# ----- prediction -----

def _mlp3_scores(thetas: np.ndarray, points: np.ndarray, h: int) -> np.ndarray:
    d = points.shape[1]
    k = thetas.shape[0]
    cut1, cut2, cut3 = d * h, d * h + h * h, d * h + 2 * h * h
    w1 = thetas[:, :cut1].reshape(k, d, h)
    w2 = thetas[:, cut1:cut2].reshape(k, h, h)
    w3 = thetas[:, cut2:cut3].reshape(k, h, h)
    w4 = thetas[:, cut3:].reshape(k, h)

    hidden = np.tanh(np.einsum("md,kdh->kmh", points, w1))
    hidden = np.tanh(np.einsum("kmh,khj->kmj", hidden, w2))
    hidden = np.tanh(np.einsum("kmh,khj->kmj", hidden, w3))
    return np.einsum("kmh,kh->km", hidden, w4)


def predict_many(
    family: Union[ModelFamily, str],
    thetas: np.ndarray,
    points: np.ndarray,
    hidden_width: Optional[int] = None,
) -> np.ndarray:
    """K x M matrix of predictions for K parameter rows on M points."""
    family = ModelFamily(family)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    expected = parameter_count(family, points.shape[1], hidden_width)
    if thetas.shape[1] != expected:
        raise ValueError(
            f"{family.value} on d={points.shape[1]} needs {expected} parameters, got {thetas.shape[1]}"
        )

    if family is not ModelFamily.MLP3:
        return sigma(thetas @ points.T)

    h = _hidden(family, hidden_width)
    out = np.empty((thetas.shape[0], points.shape[0]), dtype=np.int8)
    chunk = max(1, MLP_ACTIVATION_BUDGET // (points.shape[0] * h))
    for start in range(0, thetas.shape[0], chunk):
        stop = start + chunk
        out[start:stop] = sigma(_mlp3_scores(thetas[start:stop], points, h))
    return out


def predict(spec: ModelSpec, x: Sequence[float]) -> int:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != spec.dim:
        raise ValueError(f"input has dimension {x.size}, model expects {spec.dim}")
    return int(predict_many(spec.family, spec.theta[None, :], x[None, :], spec.hidden_width)[0, 0])


# ----- accuracy -----

def _check_compatible(spec: ModelSpec, data: Dataset) -> None:
    if data.size == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    if spec.dim != data.dim:
        raise ValueError(f"model expects d={spec.dim}, dataset has d={data.dim}")


def accuracy(spec: ModelSpec, data: Dataset) -> float:
    """Fraction of points where the model agrees with the ground-truth label."""
    _check_compatible(spec, data)
    predictions = predict_many(spec.family, spec.theta[None, :], data.points, spec.hidden_width)[0]
    return int(np.count_nonzero(predictions == data.labels)) / data.size


def accuracy_abs_formula(spec: ModelSpec, data: Dataset) -> float:
    """(1/M) sum_m 1/2 |f(x_m; theta) + f*(x_m)|"""
    _check_compatible(spec, data)
    predictions = predict_many(spec.family, spec.theta[None, :], data.points, spec.hidden_width)[0]
    agreement = np.abs(predictions.astype(np.int64) + data.labels.astype(np.int64)) // 2
    return int(agreement.sum()) / data.size


def correct_counts(
    family: Union[ModelFamily, str],
    thetas: np.ndarray,
    data: Dataset,
    hidden_width: Optional[int] = None,
) -> np.ndarray:
    """Number of correctly classified points for each parameter row."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    counts = np.empty(thetas.shape[0], dtype=np.int64)
    for start in range(0, thetas.shape[0], MODEL_CHUNK):
        stop = start + MODEL_CHUNK
        predictions = predict_many(family, thetas[start:stop], data.points, hidden_width)
        counts[start:stop] = np.count_nonzero(predictions == data.labels[None, :], axis=1)
    return counts


def accuracy_table(
    family: Union[ModelFamily, str],
    thetas: np.ndarray,
    data: Dataset,
    hidden_width: Optional[int] = None,
) -> np.ndarray:
    return correct_counts(family, thetas, data, hidden_width) / data.size


def accuracy_records(
    family: Union[ModelFamily, str],
    thetas: np.ndarray,
    data: Dataset,
    hidden_width: Optional[int] = None,
) -> list:
    counts = correct_counts(family, thetas, data, hidden_width)
    return [AccuracyRecord(theta_id=i, correct=int(c), size=data.size) for i, c in enumerate(counts)]


# ----- sampling -----

def sample_theta(family: Union[ModelFamily, str], d: int, seed: int, index: int = 0,
                 hidden_width: Optional[int] = None, stream: Tuple[int, ...] = ()) -> np.ndarray:
    rng = substream(seed, MODEL_STREAM, *stream, index)
    return rng.uniform(-1.0, 1.0, parameter_count(family, d, hidden_width))


def sample_model(family: Union[ModelFamily, str], d: int, hidden_width: Optional[int] = None,
                 seed: int = 0, index: int = 0, stream: Tuple[int, ...] = ()) -> ModelSpec:
    """Model with i.i.d. U[-1, 1] parameters from substream (seed, index)."""
    family = ModelFamily(family)
    theta = sample_theta(family, d, seed, index, hidden_width, stream)
    return ModelSpec(family, theta, d, hidden_width)


def sample_thetas(family: Union[ModelFamily, str], d: int, n: int, seed: int,
                  hidden_width: Optional[int] = None, stream: Tuple[int, ...] = (),
                  offset: int = 0) -> np.ndarray:
    """n x P matrix whose row i equals sample_theta(..., index=offset + i)."""
    if n < 1:
        raise ValueError(f"number of models must be >= 1, got {n}")
    return np.stack([
        sample_theta(family, d, seed, offset + i, hidden_width, stream) for i in range(n)
    ])


def ground_truth_spec(d: int, mode: Union[GroundTruthMode, str] = GroundTruthMode.AXIS,
                      seed: int = 0, stream: Tuple[int, ...] = ()) -> ModelSpec:
    """Perceptron ground truth: theta* = e_1, or a uniformly sampled theta*."""
    mode = GroundTruthMode(mode)
    if mode is GroundTruthMode.AXIS:
        theta = np.zeros(d)
        theta[0] = 1.0
    else:
        theta = substream(seed, GROUND_TRUTH_STREAM, *stream).uniform(-1.0, 1.0, d)
    return ModelSpec(ModelFamily.PERCEPTRON, theta, d)


def dataset_from_raw(raw: np.ndarray, ground_truth: Optional[ModelSpec] = None) -> Dataset:
    """Normalize raw rows and label them.

    Without a ground truth the label is +1 iff the first entry is positive.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero row")
    points = raw / norms[:, None]
    if ground_truth is None:
        labels = np.where(points[:, 0] > 0, 1, -1)
    else:
        if ground_truth.dim != points.shape[1]:
            raise ValueError(f"ground truth expects d={ground_truth.dim}, data has d={points.shape[1]}")
        labels = predict_many(ground_truth.family, ground_truth.theta[None, :], points,
                              ground_truth.hidden_width)[0]
    return Dataset(points, labels)


def generate_dataset(M: int, d: int, seed: int, ground_truth: Optional[ModelSpec] = None,
                     stream: Tuple[int, ...] = ()) -> Dataset:
    """M standard-normal rows in d dimensions, l2-normalized and labeled."""
    if M < 1 or d < 1:
        raise ValueError(f"dataset needs M >= 1 and d >= 1, got M={M}, d={d}")
    raw = substream(seed, DATA_STREAM, *stream).standard_normal((M, d))
    return dataset_from_raw(raw, ground_truth)


# ----- CSV exchange -----

def save_dataset(data: Dataset, destination: Union[str, Path]) -> Path:
    frame = pd.DataFrame(data.points, columns=[f"x_{j}" for j in range(data.dim)])
    frame["label"] = data.labels.astype(int)
    return write_csv_atomic(frame, destination)


def load_dataset(source: Union[str, Path]) -> Dataset:
    frame = read_csv(source)
    if "label" not in frame.columns:
        raise ValueError(f"{source} has no label column")
    features = [c for c in frame.columns if c != "label"]
    return Dataset(frame[features].to_numpy(dtype=np.float64), frame["label"].to_numpy())
