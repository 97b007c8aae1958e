"""
Deutsch-Jozsa algorithm and its embedding in the quantum ensemble template

Register layout for both circuits: qubits 0..n-1 hold x (or theta), qubit n
is the output/ancilla qubit.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import PromiseViolationError
from .statevector import (
    NORM_TOLERANCE,
    PAULI_X,
    HADAMARD,
    StateVector,
    apply_boolean_oracle,
    apply_gate,
    apply_hadamard_layer,
    marginal_probability,
    new_basis_state,
    register_probabilities,
    states_equal_up_to_phase,
)

logger = logging.getLogger(__name__)


class OracleKind(str, Enum):
    CONSTANT = "constant"
    BALANCED = "balanced"
    GENERAL = "general"


@dataclass(frozen=True, eq=False)
class BooleanOracle:
    """Total function {0,1}^n -> {0,1} stored as a truth table indexed by x."""

    arity: int
    truth_table: np.ndarray
    kind: OracleKind = OracleKind.GENERAL
    label: str = ""

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError(f"oracle arity must be >= 1, got {self.arity}")
        table = np.asarray(self.truth_table)
        if table.shape != (2 ** self.arity,):
            raise ValueError(f"truth table must have {2 ** self.arity} entries, got shape {table.shape}")
        if not np.all((table == 0) | (table == 1)):
            raise ValueError("truth table entries must be 0 or 1")
        table = table.astype(np.uint8)
        table.setflags(write=False)
        object.__setattr__(self, "truth_table", table)

        kind = OracleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        ones = int(table.sum())
        if kind is OracleKind.CONSTANT and ones not in (0, table.size):
            raise ValueError("constant oracle must have all entries equal")
        if kind is OracleKind.BALANCED and ones != table.size // 2:
            raise ValueError(f"balanced oracle must have exactly {table.size // 2} ones, got {ones}")

    def __call__(self, x: int) -> int:
        return int(self.truth_table[x])

    @property
    def ones(self) -> int:
        return int(self.truth_table.sum())

    @property
    def zero_fraction(self) -> float:
        return 1.0 - self.ones / self.truth_table.size


@dataclass(frozen=True)
class DJOutcome:
    p_all_zeros: float
    verdict: OracleKind = field(init=False)

    def __post_init__(self) -> None:
        # Exact simulation gives 0 or 1; the threshold only guards float noise
        verdict = OracleKind.CONSTANT if self.p_all_zeros > 0.5 else OracleKind.BALANCED
        object.__setattr__(self, "verdict", verdict)


@dataclass(frozen=True)
class StepTrace:
    """States after each step of a circuit (psi0 is the initial state)."""

    psi0: StateVector
    psi1: StateVector
    psi2: StateVector
    psi3: StateVector


# ----- oracle construction -----

def make_constant_oracle(n: int, value: int) -> BooleanOracle:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if value not in (0, 1):
        raise ValueError(f"constant value must be 0 or 1, got {value!r}")
    return BooleanOracle(n, np.full(2 ** n, value, dtype=np.uint8), OracleKind.CONSTANT, f"constant:{value}")


def _parity_table(n: int, mask: int) -> np.ndarray:
    masked = np.arange(2 ** n) & mask
    parity = np.zeros(2 ** n, dtype=np.uint8)
    for bit in range(n):
        parity ^= ((masked >> bit) & 1).astype(np.uint8)
    return parity


def make_balanced_oracle(
    n: int,
    mask: Optional[int] = None,
    subset: Optional[Iterable[int]] = None,
) -> BooleanOracle:
    """Balanced oracle from a parity mask (g(x) = x.s mod 2) or an explicit set of ones."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if (mask is None) == (subset is None):
        raise ValueError("give exactly one of mask or subset")

    if mask is not None:
        if not 0 < mask < 2 ** n:
            raise ValueError(f"mask must be in [1, {2 ** n - 1}], got {mask}")
        return BooleanOracle(n, _parity_table(n, mask), OracleKind.BALANCED, f"balanced:mask={mask}")

    ones = sorted(set(int(x) for x in subset))
    if len(ones) != 2 ** (n - 1):
        raise ValueError(f"subset must contain exactly {2 ** (n - 1)} distinct inputs, got {len(ones)}")
    if ones[0] < 0 or ones[-1] >= 2 ** n:
        raise ValueError(f"subset entries must lie in [0, {2 ** n - 1}]")
    table = np.zeros(2 ** n, dtype=np.uint8)
    table[ones] = 1
    label = "balanced:subset=" + ",".join(str(x) for x in ones)
    return BooleanOracle(n, table, OracleKind.BALANCED, label)


def random_balanced_oracle(n: int, rng: np.random.Generator) -> BooleanOracle:
    subset = rng.permutation(2 ** n)[: 2 ** (n - 1)]
    return make_balanced_oracle(n, subset=subset.tolist())


def all_balanced_oracles(n: int) -> Iterator[BooleanOracle]:
    """Every balanced oracle on n inputs (C(2^n, 2^(n-1)) of them)."""
    if n > 4:
        raise ValueError("exhaustive enumeration is limited to n <= 4")
    for subset in itertools.combinations(range(2 ** n), 2 ** (n - 1)):
        yield make_balanced_oracle(n, subset=subset)


# ----- Deutsch-Jozsa -----

def closed_form_all_zeros(g: BooleanOracle) -> float:
    """|2^-n sum_x (-1)^g(x)|^2"""
    signs = 1.0 - 2.0 * g.truth_table.astype(np.float64)
    return float(np.mean(signs) ** 2)


def deutsch_jozsa_states(g: BooleanOracle) -> StepTrace:
    """Steps i-iv; no promise is enforced here."""
    n = g.arity
    psi0 = new_basis_state(n + 1, 1)
    psi1 = apply_hadamard_layer(psi0, range(n + 1))
    psi2 = apply_boolean_oracle(psi1, g, list(range(n)), n)
    psi3 = apply_hadamard_layer(psi2, range(n))
    return StepTrace(psi0, psi1, psi2, psi3)


def deutsch_jozsa_probability(g: BooleanOracle) -> float:
    """Probability of reading 0...0 on the first n qubits after step iv."""
    trace = deutsch_jozsa_states(g)
    return float(register_probabilities(trace.psi3, range(g.arity))[0])


def run_deutsch_jozsa(g: BooleanOracle) -> DJOutcome:
    if g.kind is OracleKind.GENERAL:
        raise PromiseViolationError(
            "Deutsch-Jozsa needs an oracle promised to be constant or balanced"
        )
    outcome = DJOutcome(deutsch_jozsa_probability(g))
    logger.debug("DJ on %s: p(0...0)=%.12f -> %s", g.label or g.kind.value, outcome.p_all_zeros, outcome.verdict.value)
    return outcome


# ----- q-ensemble embedding -----

def apply_A_DJ(state: StateVector, g: BooleanOracle, final_layer: bool = True) -> StateVector:
    """(H^n x I) U_g (I^n x X) (I^n x H), applied right to left.

    ``final_layer=False`` omits the trailing H^n.
    """
    n = g.arity
    if state.num_qubits != n + 1:
        raise ValueError(f"A_DJ for a {n}-input oracle needs {n + 1} qubits, got {state.num_qubits}")
    state = apply_gate(state, HADAMARD, n)
    state = apply_gate(state, PAULI_X, n)
    state = apply_boolean_oracle(state, g, list(range(n)), n)
    if final_layer:
        state = apply_hadamard_layer(state, range(n))
    return state


def qensemble_dj_states(g: BooleanOracle, uncompute: bool = True) -> StepTrace:
    """Steps 1-4 with W_DJ (uniform weights) and A_DJ.

    With ``uncompute=False`` the trailing H^n of A_DJ and the step-4 layer are
    both skipped, so psi3 equals psi2.
    """
    n = g.arity
    psi0 = new_basis_state(n + 1, 1)
    psi1 = apply_hadamard_layer(psi0, range(n + 1))
    psi2 = apply_A_DJ(psi1, g, final_layer=uncompute)
    psi3 = apply_hadamard_layer(psi2, range(n)) if uncompute else psi2
    return StepTrace(psi0, psi1, psi2, psi3)


def run_qensemble_dj(g: BooleanOracle) -> float:
    """p(f = 0) on the output qubit of the embedded ensemble."""
    trace = qensemble_dj_states(g)
    return marginal_probability(trace.psi3, g.arity, 0)


def phase_kickback_image(state: StateVector) -> np.ndarray:
    """Image of a state under |x>|y> -> (-1)^y |x>|->, acting on the last qubit.

    Norm is preserved only when every x-branch holds the last qubit in a
    computational basis state.
    """
    pairs = state.amplitudes.reshape(-1, 2)
    kicked = (pairs[:, 0] - pairs[:, 1]) / np.sqrt(2)
    return np.stack([kicked, -kicked], axis=1).reshape(-1)


def congruence_check(g: BooleanOracle, tol: float = NORM_TOLERANCE) -> bool:
    """Compare the embedding's step states with the Deutsch-Jozsa step states.

    Step 2 matches step ii directly. The output qubit of steps 3 and 4 is in
    the computational basis, so those states are mapped by the phase-kickback
    identification before comparison. A_DJ ends with H^n, which puts step 3
    opposite step iv and the uncomputed step 4 opposite step iii.
    """
    dj = deutsch_jozsa_states(g)
    embedded = qensemble_dj_states(g)
    checks = (
        states_equal_up_to_phase(embedded.psi1, dj.psi1, tol),
        states_equal_up_to_phase(phase_kickback_image(embedded.psi2), dj.psi3.amplitudes, tol),
        states_equal_up_to_phase(phase_kickback_image(embedded.psi3), dj.psi2.amplitudes, tol),
    )
    if not all(checks):
        logger.warning("Congruence failed for %s: %s", g.label or g.kind.value, checks)
    return all(checks)


def oracles_from_tables(tables: Sequence[Sequence[int]]) -> list:
    """General (promise-free) oracles from raw truth tables."""
    result = []
    for table in tables:
        size = len(table)
        if size < 2 or size & (size - 1):
            raise ValueError(f"truth table length must be a power of two >= 2, got {size}")
        result.append(BooleanOracle(size.bit_length() - 1, np.asarray(table), OracleKind.GENERAL))
    return result
