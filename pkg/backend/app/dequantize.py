"""
Classical replication of the accuracy-weighted quantum ensemble.

A proposal theta is drawn uniformly over the code space and accepted iff
u < a_theta with u ~ U[0, 1). Accepted frequencies then follow
a_theta / sum(a), the distribution the postselected theta register holds.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .config import get_settings
from .errors import EmptyEnsembleError
from .models import Dataset, ModelFamily, accuracy_table, predict_many
from .qensemble import (
    EnsembleResult,
    ParameterCode,
    accuracy_weighted_state,
    all_thetas,
    decide_label,
    exact_ensemble_probabilities,
    measure_prediction,
)
from .rng import PROPOSAL_STREAM, parallel_map, substream
from .statevector import register_probabilities

logger = logging.getLogger(__name__)

AUDIT_MAX_BITS = 12

AccuracySource = Union[Callable[[np.ndarray], np.ndarray], Sequence[float], np.ndarray]


class RejectionMode(str, Enum):
    ACCURACY_WEIGHTED = "accuracy_weighted"
    ABOVE_HALF = "above_half"


class RejectionConfig(BaseModel):
    n_proposals: int = Field(ge=1)
    mode: RejectionMode = RejectionMode.ACCURACY_WEIGHTED
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    block_size: int = Field(default_factory=lambda: get_settings().block_size, ge=1)
    threads: int = Field(default_factory=lambda: get_settings().threads, ge=1)


@dataclass(frozen=True)
class UniformProposal:
    """q(theta) = 1/E over theta ids 0..E-1."""

    num_ids: int

    def __post_init__(self) -> None:
        if self.num_ids < 1:
            raise ValueError(f"proposal needs at least one theta id, got {self.num_ids}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(0, self.num_ids, size=size)


@dataclass(frozen=True, eq=False)
class AcceptedEnsemble:
    """Accepted members in proposal order."""

    theta_ids: np.ndarray
    a_theta: np.ndarray
    weights: np.ndarray
    n_proposals: int
    mode: RejectionMode

    @property
    def size(self) -> int:
        return int(self.theta_ids.size)

    @property
    def acceptance_rate(self) -> float:
        return self.size / self.n_proposals

    @property
    def members(self) -> List[Tuple[int, float, float]]:
        return list(zip(self.theta_ids.tolist(), self.a_theta.tolist(), self.weights.tolist()))

    def frequencies(self, num_ids: int) -> np.ndarray:
        """Accepted fraction per theta id."""
        if self.size == 0:
            return np.zeros(num_ids)
        return np.bincount(self.theta_ids, minlength=num_ids) / self.size

    def tallies(self, num_ids: int) -> Tuple[np.ndarray, np.ndarray]:
        """Acceptance count and total weight per theta id."""
        counts = np.bincount(self.theta_ids, minlength=num_ids)
        totals = np.bincount(self.theta_ids, weights=self.weights, minlength=num_ids)
        return counts, totals


@dataclass(frozen=True)
class AuditReport:
    p_minus_quantum: float
    p_minus_classical: float
    p_minus_exact: float
    label_quantum: int
    label_classical: int
    tv_distance: float
    acceptance_rate: float
    expected_acceptance: float
    proposals_per_acceptance: float
    n_proposals: int
    accuracies: np.ndarray = field(repr=False)
    quantum_distribution: np.ndarray = field(repr=False)
    classical_frequencies: np.ndarray = field(repr=False)

    @property
    def p_minus_gap(self) -> float:
        return abs(self.p_minus_quantum - self.p_minus_classical)


def accuracy_lookup(table: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    values = np.asarray(table, dtype=np.float64)
    return lambda ids: values[ids]


def _accuracy_fn(source: AccuracySource) -> Callable[[np.ndarray], np.ndarray]:
    return source if callable(source) else accuracy_lookup(source)


def rejection_sample(accuracy_fn: AccuracySource, proposal: UniformProposal, cfg: RejectionConfig) -> AcceptedEnsemble:
    """Accept proposal theta iff u < a_theta (and a_theta > 0.5 in above_half mode).

    ``accuracy_fn`` takes an integer array of theta ids and returns their
    accuracies; a plain table is accepted too. Proposals are drawn in blocks
    of ``cfg.block_size``, block i from substream (seed, PROPOSAL_STREAM, i),
    so the result does not depend on ``cfg.threads``.
    """
    lookup = _accuracy_fn(accuracy_fn)
    starts = list(range(0, cfg.n_proposals, cfg.block_size))

    def run_block(block_index: int) -> Tuple[np.ndarray, np.ndarray]:
        count = min(cfg.block_size, cfg.n_proposals - starts[block_index])
        rng = substream(cfg.seed, PROPOSAL_STREAM, block_index)
        ids = proposal.draw(rng, count)
        u = rng.random(count)
        a = np.asarray(lookup(ids), dtype=np.float64)
        if np.any(a < 0) or np.any(a > 1):
            raise ValueError("accuracies must lie in [0, 1]")
        accept = u < a
        if cfg.mode is RejectionMode.ABOVE_HALF:
            accept &= a > 0.5
        return ids[accept], a[accept]

    blocks = parallel_map(run_block, range(len(starts)), cfg.threads)
    ids = np.concatenate([b[0] for b in blocks]).astype(np.int64)
    a = np.concatenate([b[1] for b in blocks])
    weights = a.copy() if cfg.mode is RejectionMode.ABOVE_HALF else np.ones_like(a)
    ensemble = AcceptedEnsemble(ids, a, weights, cfg.n_proposals, cfg.mode)

    logger.info(
        "Rejection sampling (%s): accepted %d of %d proposals (rate %.6f)",
        cfg.mode.value, ensemble.size, cfg.n_proposals, ensemble.acceptance_rate,
    )
    if ensemble.size == 0:
        raise EmptyEnsembleError(f"no model accepted out of {cfg.n_proposals} proposals", ensemble)
    if ensemble.acceptance_rate < 0.01:
        logger.warning("Acceptance rate %.3g is very low", ensemble.acceptance_rate)
    return ensemble


def acceptance_probability(
    accuracies: Sequence[float],
    mode: RejectionMode = RejectionMode.ACCURACY_WEIGHTED,
) -> float:
    """Chance a uniform proposal is accepted under ``mode``.

    That is the mean accuracy, or the mean of a * [a > 0.5] in above_half mode.
    """
    values = np.asarray(accuracies, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ValueError("acceptance probability of an empty accuracy list is undefined")
    if mode is RejectionMode.ABOVE_HALF:
        values = np.where(values > 0.5, values, 0.0)
    return math.fsum(values.tolist()) / values.size


def select_above_half(theta_ids: Sequence[int], accuracies: Sequence[float]) -> AcceptedEnsemble:
    """Keep every listed model with accuracy above 0.5, weighted by its accuracy.

    Each model is considered exactly once; no random acceptance test is made.
    """
    ids = np.asarray(theta_ids, dtype=np.int64).reshape(-1)
    a = np.asarray(accuracies, dtype=np.float64).reshape(-1)
    if ids.size != a.size:
        raise ValueError(f"got {ids.size} theta ids for {a.size} accuracies")
    if ids.size == 0:
        raise ValueError("selection needs at least one model")
    keep = a > 0.5
    ensemble = AcceptedEnsemble(ids[keep], a[keep], a[keep].copy(), int(ids.size), RejectionMode.ABOVE_HALF)
    logger.info("Selected %d of %d models with accuracy > 0.5", ensemble.size, ids.size)
    if ensemble.size == 0:
        raise EmptyEnsembleError(f"none of {ids.size} models has accuracy above 0.5", ensemble)
    return ensemble


def classical_predict(ens: AcceptedEnsemble, family: Union[ModelFamily, str],
                      source: Union[ParameterCode, np.ndarray], x_tilde: Sequence[float],
                      hidden_width: Optional[int] = None) -> EnsembleResult:
    """Weighted vote of the accepted members on x_tilde.

    ``source`` resolves theta ids: a ParameterCode decodes code indices, a
    K x P matrix is indexed by row.
    """
    if ens.size == 0:
        raise EmptyEnsembleError("cannot predict with an empty ensemble", ens)

    unique_ids, inverse = np.unique(ens.theta_ids, return_inverse=True)
    if isinstance(source, ParameterCode):
        thetas = all_thetas(source)[unique_ids]
        keys = [source.code_string(int(i)) for i in unique_ids]
    else:
        thetas = np.atleast_2d(np.asarray(source, dtype=np.float64))[unique_ids]
        keys = [str(int(i)) for i in unique_ids]

    x = np.asarray(x_tilde, dtype=np.float64).reshape(1, -1)
    unique_predictions = predict_many(family, thetas, x, hidden_width)[:, 0].astype(np.int64)
    p_minus, p_plus = exact_ensemble_probabilities(ens.weights, unique_predictions[inverse])

    totals = np.bincount(inverse, weights=ens.weights, minlength=unique_ids.size)
    per_model = {key: (float(w), int(f)) for key, w, f in zip(keys, totals, unique_predictions)}
    return EnsembleResult(p_minus, p_plus, decide_label(p_minus, p_plus), per_model)


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"distributions differ in support size: {p.shape} vs {q.shape}")
    return 0.5 * math.fsum(np.abs(p - q).tolist())


def equivalence_audit(family: Union[ModelFamily, str], pc: ParameterCode, dataset: Dataset,
                      x_tilde: Sequence[float], n_proposals: int, seed: int,
                      hidden_width: Optional[int] = None, threads: Optional[int] = None) -> AuditReport:
    """Run the simulated ensemble and rejection sampling on the same inputs and compare them."""
    if pc.total_bits > AUDIT_MAX_BITS:
        raise ValueError(f"audit needs total_bits <= {AUDIT_MAX_BITS}, got {pc.total_bits}")
    n = pc.total_bits

    ws = accuracy_weighted_state(family, pc, dataset, x_tilde, hidden_width)
    quantum = measure_prediction(ws)
    theta_distribution = register_probabilities(ws.state, range(n))

    accuracies = accuracy_table(family, all_thetas(pc), dataset, hidden_width)
    cfg_fields = dict(n_proposals=n_proposals, mode=RejectionMode.ACCURACY_WEIGHTED, seed=seed)
    if threads is not None:
        cfg_fields["threads"] = threads
    ensemble = rejection_sample(accuracies, UniformProposal(pc.size), RejectionConfig(**cfg_fields))
    classical = classical_predict(ensemble, family, pc, x_tilde, hidden_width)

    predictions = np.array([quantum.per_model[pc.code_string(k)][1] for k in range(pc.size)])
    p_minus_exact, _ = exact_ensemble_probabilities(accuracies, predictions)

    expected = acceptance_probability(accuracies)
    report = AuditReport(
        p_minus_quantum=quantum.p_minus,
        p_minus_classical=classical.p_minus,
        p_minus_exact=p_minus_exact,
        label_quantum=quantum.label,
        label_classical=classical.label,
        tv_distance=total_variation(theta_distribution, ensemble.frequencies(pc.size)),
        acceptance_rate=ensemble.acceptance_rate,
        expected_acceptance=expected,
        proposals_per_acceptance=1.0 / expected,
        n_proposals=n_proposals,
        accuracies=accuracies,
        quantum_distribution=theta_distribution,
        classical_frequencies=ensemble.frequencies(pc.size),
    )
    logger.info(
        "Audit: p_minus quantum=%.6f classical=%.6f gap=%.3g TV=%.3g",
        report.p_minus_quantum, report.p_minus_classical, report.p_minus_gap, report.tv_distance,
    )
    return report
