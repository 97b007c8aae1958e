"""
Quantum ensemble of classifiers on the statevector simulator

Register layout: qubits 0..n-1 hold the parameter code theta (parameter 0 in
the leading b bits), qubit n is the output qubit (|0> = class -1,
|1> = class +1) and, while the accuracy-weighted state is being built,
qubit n+1 is the accuracy register.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .config import get_settings
from .deutsch_jozsa import BooleanOracle, OracleKind
from .errors import CapacityError
from .models import Dataset, ModelFamily, accuracy_table, parameter_count, predict_many
from .statevector import (
    BRANCH_TOLERANCE,
    NORM_TOLERANCE,
    StateVector,
    amplitude_encode,
    apply_boolean_oracle,
    apply_hadamard_layer,
    apply_uniformly_controlled_gate,
    marginal_probability,
    new_basis_state,
    postselect,
    release_qubit,
    ry_matrices,
)

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ParameterCode:
    """Uniform b-bit grid over [-1, 1] for each of P parameters."""

    num_params: int
    bits_per_param: int

    def __post_init__(self) -> None:
        if self.num_params < 1:
            raise ValueError(f"num_params must be >= 1, got {self.num_params}")
        if self.bits_per_param < 1:
            raise ValueError(f"bits_per_param must be >= 1, got {self.bits_per_param}")

    @property
    def total_bits(self) -> int:
        return self.num_params * self.bits_per_param

    @property
    def size(self) -> int:
        return 2 ** self.total_bits

    @property
    def grid(self) -> np.ndarray:
        levels = 2 ** self.bits_per_param
        return -1.0 + 2.0 * np.arange(levels) / (levels - 1)

    def code_string(self, index: int) -> str:
        if not 0 <= index < self.size:
            raise ValueError(f"code index must lie in [0, {self.size - 1}], got {index}")
        return format(index, f"0{self.total_bits}b")

    def check_capacity(self, max_bits: Optional[int] = None) -> None:
        limit = get_settings().max_ensemble_bits if max_bits is None else max_bits
        if self.total_bits > limit:
            raise CapacityError(self.total_bits, limit)


def decode_theta(code: str, pc: ParameterCode) -> np.ndarray:
    """Map an n-bit string to theta; each b-bit group k becomes -1 + 2k/(2^b - 1)."""
    if len(code) != pc.total_bits:
        raise ValueError(f"code must have {pc.total_bits} bits, got {len(code)}")
    if set(code) - {"0", "1"}:
        raise ValueError(f"code must be a bit string, got {code!r}")
    b = pc.bits_per_param
    levels = [int(code[i * b:(i + 1) * b], 2) for i in range(pc.num_params)]
    return pc.grid[levels]


def encode_theta(theta: Sequence[float], pc: ParameterCode) -> str:
    """Bit string of the nearest grid point for every entry of theta."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != pc.num_params:
        raise ValueError(f"expected {pc.num_params} parameters, got {theta.size}")
    if np.any(np.abs(theta) > 1.0):
        raise ValueError("theta entries must lie in [-1, 1]")
    levels = np.argmin(np.abs(theta[:, None] - pc.grid[None, :]), axis=1)
    return "".join(format(int(k), f"0{pc.bits_per_param}b") for k in levels)


def all_thetas(pc: ParameterCode) -> np.ndarray:
    """2^n x P matrix whose row k is decode_theta of code index k."""
    indices = np.arange(pc.size)
    b = pc.bits_per_param
    shifts = b * np.arange(pc.num_params - 1, -1, -1)
    levels = (indices[:, None] >> shifts[None, :]) & (2 ** b - 1)
    return pc.grid[levels]


def _check_family(family: Union[ModelFamily, str], pc: ParameterCode, x: np.ndarray,
                  hidden_width: Optional[int]) -> ModelFamily:
    family = ModelFamily(family)
    expected = parameter_count(family, x.size, hidden_width)
    if expected != pc.num_params:
        raise ValueError(
            f"{family.value} on a {x.size}-dimensional input needs {expected} parameters, "
            f"the code holds {pc.num_params}"
        )
    return family


def classifier_predictions(family: Union[ModelFamily, str], pc: ParameterCode,
                           x: Sequence[float], hidden_width: Optional[int] = None) -> np.ndarray:
    """f(x; theta) for every code, in code order."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    family = _check_family(family, pc, x, hidden_width)
    return predict_many(family, all_thetas(pc), x[None, :], hidden_width)[:, 0]


def build_classifier_oracle(family: Union[ModelFamily, str], pc: ParameterCode,
                            x: Sequence[float], hidden_width: Optional[int] = None) -> BooleanOracle:
    """Truth table over theta codes with bit (1 + f(x; theta)) / 2."""
    predictions = classifier_predictions(family, pc, x, hidden_width)
    table = ((1 + predictions.astype(np.int64)) // 2).astype(np.uint8)
    return BooleanOracle(pc.total_bits, table, OracleKind.GENERAL, f"classifier:{ModelFamily(family).value}")


@dataclass(eq=False)
class WeightedEnsembleState:
    state: StateVector
    weights: np.ndarray
    num_theta_qubits: int
    oracle: Optional[BooleanOracle] = None
    normalizer: float = field(init=False)

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.shape != (2 ** self.num_theta_qubits,):
            raise ValueError(f"expected {2 ** self.num_theta_qubits} weights, got shape {weights.shape}")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        extra = self.state.num_qubits - self.num_theta_qubits
        if extra not in (1, 2):
            raise ValueError("state must hold the theta register, the output qubit and at most one ancilla")
        self.weights = weights
        self.normalizer = math.fsum(weights.tolist())
        if self.normalizer <= 0:
            raise ValueError("at least one weight must be positive")

    @property
    def output_qubit(self) -> int:
        return self.num_theta_qubits

    @property
    def has_accuracy_qubit(self) -> bool:
        return self.state.num_qubits == self.num_theta_qubits + 2

    @property
    def weight_shares(self) -> np.ndarray:
        return self.weights / self.normalizer


@dataclass(frozen=True)
class EnsembleResult:
    p_minus: float
    p_plus: float
    label: int
    per_model: Dict[str, Tuple[float, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if abs(self.p_minus + self.p_plus - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"label probabilities must sum to 1, got {self.p_minus} + {self.p_plus}")
        if self.label not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")


def decide_label(p_minus: float, p_plus: float) -> int:
    """sgn(p_plus - p_minus) with ties going to +1."""
    diff = p_plus - p_minus
    if abs(diff) <= TIE_TOLERANCE:
        logger.warning("Ensemble vote tied (p_minus=%.6f); labeling +1", p_minus)
        return 1
    return 1 if diff > 0 else -1


# ----- circuit stages -----

def prepare_weighted_state(weights: Sequence[float], max_qubits: Optional[int] = None) -> WeightedEnsembleState:
    """W routine: sum_theta sqrt(w_theta / E_X) |theta>|0>."""
    weights = np.asarray(weights, dtype=np.float64)
    state = amplitude_encode(weights, extra_qubits=1, max_qubits=max_qubits)
    return WeightedEnsembleState(state, weights, state.num_qubits - 1)


def apply_A(ws: WeightedEnsembleState, oracle: BooleanOracle) -> WeightedEnsembleState:
    """Write each branch's classifier bit into the output qubit."""
    n = ws.num_theta_qubits
    if oracle.arity != n:
        raise ValueError(f"oracle arity {oracle.arity} does not match {n} theta qubits")
    if ws.has_accuracy_qubit:
        raise ValueError("postselect and release the accuracy qubit before applying the classifier")
    stray = marginal_probability(ws.state, ws.output_qubit, 1)
    if stray > BRANCH_TOLERANCE:
        raise ValueError(f"output qubit must start in |0>, found probability {stray:.3e} on |1>")
    state = apply_boolean_oracle(ws.state, oracle, list(range(n)), ws.output_qubit)
    return WeightedEnsembleState(state, ws.weights, n, oracle)


def uniform_ensemble_state(family: Union[ModelFamily, str], pc: ParameterCode, x_tilde: Sequence[float],
                           hidden_width: Optional[int] = None) -> WeightedEnsembleState:
    """Equal weights over every code, classifier applied for x_tilde."""
    pc.check_capacity()
    oracle = build_classifier_oracle(family, pc, x_tilde, hidden_width)
    return apply_A(prepare_weighted_state(np.ones(pc.size)), oracle)


def accuracy_weighted_state(family: Union[ModelFamily, str], pc: ParameterCode, dataset: Dataset,
                            x_tilde: Sequence[float], hidden_width: Optional[int] = None) -> WeightedEnsembleState:
    """Accuracy-weighted ensemble state with weights w_theta = a_theta.

    The accuracy qubit of each branch is rotated to sqrt(a)|0> + sqrt(1-a)|1>
    by one uniformly controlled Ry, then postselected on |0> and released.
    Raises PostselectionError when every accuracy is zero.
    """
    pc.check_capacity()
    n = pc.total_bits
    x_tilde = np.asarray(x_tilde, dtype=np.float64).reshape(-1)
    family = _check_family(family, pc, x_tilde, hidden_width)
    oracle = build_classifier_oracle(family, pc, x_tilde, hidden_width)

    accuracies = accuracy_table(family, all_thetas(pc), dataset, hidden_width)
    angles = 2.0 * np.arcsin(np.sqrt(np.clip(1.0 - accuracies, 0.0, 1.0)))
    logger.debug("Accuracy register for %d codes, mean accuracy %.6f", pc.size, float(np.mean(accuracies)))

    accuracy_qubit = n + 1
    state = new_basis_state(n + 2, 0, max_qubits=get_settings().max_qubits)
    state = apply_hadamard_layer(state, range(n))
    state = apply_uniformly_controlled_gate(state, ry_matrices(angles), list(range(n)), accuracy_qubit)
    state = postselect(state, accuracy_qubit, 0)
    state = release_qubit(state, accuracy_qubit, 0)

    return apply_A(WeightedEnsembleState(state, accuracies, n), oracle)


def measure_prediction(ws: WeightedEnsembleState) -> EnsembleResult:
    """Label probabilities from the output qubit: |0> reads as class -1."""
    p_minus = marginal_probability(ws.state, ws.output_qubit, 0)
    p_plus = 1.0 - p_minus

    per_model: Dict[str, Tuple[float, int]] = {}
    if ws.oracle is not None:
        predictions = 2 * ws.oracle.truth_table.astype(np.int64) - 1
        width = ws.num_theta_qubits
        per_model = {
            format(k, f"0{width}b"): (float(ws.weights[k]), int(predictions[k]))
            for k in range(ws.weights.size)
        }
    return EnsembleResult(p_minus, p_plus, decide_label(p_minus, p_plus), per_model)


# ----- analytic counterpart -----

def exact_ensemble_probabilities(weights: Sequence[float], predictions: Sequence[int]) -> Tuple[float, float]:
    """(p_minus, p_plus) as weight sums over the models predicting -1 and +1."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    f = np.asarray(predictions).reshape(-1)
    if w.size != f.size:
        raise ValueError(f"got {w.size} weights for {f.size} predictions")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if not np.all((f == 1) | (f == -1)):
        raise ValueError("predictions must be +1 or -1")
    total = math.fsum(w.tolist())
    if total <= 0:
        raise ValueError("total weight must be positive")
    p_minus = math.fsum(w[f == -1].tolist()) / total
    return p_minus, 1.0 - p_minus


def majority_vote(predictions: Sequence[int]) -> int:
    f = np.asarray(predictions, dtype=np.int64).reshape(-1)
    if f.size == 0:
        raise ValueError("majority vote needs at least one prediction")
    return 1 if int(f.sum()) >= 0 else -1
