"""
Dense statevector simulator
Only the primitives the ensemble and Deutsch-Jozsa circuits need

Qubit ordering: qubit 0 is the leftmost ket symbol and the most significant
bit of the amplitude index, so |q0 q1 ... q(n-1)> sits at index
q0*2^(n-1) + ... + q(n-1). Reshaping the amplitudes to [2]*n in C order
puts qubit q on axis q.

Every operation returns a new StateVector; inputs are never modified.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, List, Optional, Sequence, Union

import numpy as np

from .config import get_settings
from .errors import CapacityError, PostselectionError

if TYPE_CHECKING:  # pragma: no cover
    from .deutsch_jozsa import BooleanOracle

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-10
ALGEBRA_TOLERANCE = 1e-12
BRANCH_TOLERANCE = 1e-12

QubitIndex = int


@dataclass(eq=False)
class StateVector:
    """Normalized amplitudes over ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise ValueError(f"num_qubits must be >= 1, got {self.num_qubits}")
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if amplitudes.shape != (2 ** self.num_qubits,):
            raise ValueError(
                f"expected {2 ** self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got shape {amplitudes.shape}"
            )
        norm_sq = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm_sq - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"state is not normalized: sum |a|^2 = {norm_sq!r}")
        self.amplitudes = amplitudes

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex], normalize: bool = False) -> "StateVector":
        """Build a state from raw amplitudes, optionally rescaling to unit norm."""
        values = np.asarray(amplitudes, dtype=np.complex128)
        size = values.shape[0] if values.ndim == 1 else 0
        if size < 2 or size & (size - 1):
            raise ValueError(f"amplitude count must be a power of two >= 2, got {values.shape}")
        if normalize:
            norm = np.linalg.norm(values)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            values = values / norm
        return cls(size.bit_length() - 1, values)

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped so that axis q is qubit q."""
        return self.amplitudes.reshape((2,) * self.num_qubits)


@dataclass(frozen=True)
class SingleQubitGate:
    """A named 2x2 unitary."""

    name: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        if matrix.shape != (2, 2):
            raise ValueError(f"gate {self.name} must be 2x2, got {matrix.shape}")
        deviation = np.max(np.abs(matrix @ matrix.conj().T - np.eye(2)))
        if deviation > ALGEBRA_TOLERANCE:
            raise ValueError(f"gate {self.name} is not unitary (deviation {deviation:.3e})")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def hadamard(cls) -> "SingleQubitGate":
        return cls("H", np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2))

    @classmethod
    def pauli_x(cls) -> "SingleQubitGate":
        return cls("X", np.array([[0, 1], [1, 0]], dtype=np.complex128))

    @classmethod
    def ry(cls, angle: float) -> "SingleQubitGate":
        c, s = np.cos(angle / 2), np.sin(angle / 2)
        return cls(f"Ry({angle:.6g})", np.array([[c, -s], [s, c]], dtype=np.complex128))


HADAMARD = SingleQubitGate.hadamard()
PAULI_X = SingleQubitGate.pauli_x()


def ry_matrices(angles: Sequence[float]) -> np.ndarray:
    """Stacked Ry(angle) matrices, shape (len(angles), 2, 2)."""
    half = np.asarray(angles, dtype=np.float64) / 2
    c, s = np.cos(half), np.sin(half)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2).astype(np.complex128)


# ----- validation helpers -----

def _check_capacity(num_qubits: int, max_qubits: Optional[int]) -> None:
    cap = get_settings().max_qubits if max_qubits is None else max_qubits
    if num_qubits > cap:
        raise CapacityError(num_qubits, cap)


def _check_qubit(state: StateVector, qubit: QubitIndex) -> int:
    if isinstance(qubit, bool) or not isinstance(qubit, (int, np.integer)):
        raise ValueError(f"qubit index must be an integer, got {qubit!r}")
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit {qubit} out of range for a {state.num_qubits}-qubit state")
    return int(qubit)


def _check_outcome(outcome: int) -> int:
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
    return int(outcome)


def _check_distinct(state: StateVector, qubits: Iterable[QubitIndex]) -> List[int]:
    checked = [_check_qubit(state, q) for q in qubits]
    if len(set(checked)) != len(checked):
        raise ValueError(f"qubit indices must be distinct, got {checked}")
    return checked


def _grouped(state: StateVector, leading: List[int]) -> tuple:
    """Transpose so ``leading`` qubits come first; return (array, axis order)."""
    rest = [q for q in range(state.num_qubits) if q not in leading]
    order = leading + rest
    return np.transpose(state.tensor(), order), order


def _ungrouped(tensor: np.ndarray, order: List[int]) -> np.ndarray:
    return np.transpose(tensor, np.argsort(order)).reshape(-1)


# ----- operations -----

def new_basis_state(num_qubits: int, basis_index: int, max_qubits: Optional[int] = None) -> StateVector:
    """Return |basis_index> on ``num_qubits`` qubits."""
    if num_qubits < 1:
        raise ValueError(f"num_qubits must be >= 1, got {num_qubits}")
    _check_capacity(num_qubits, max_qubits)
    if not 0 <= basis_index < 2 ** num_qubits:
        raise ValueError(f"basis index {basis_index} out of range for {num_qubits} qubits")
    amplitudes = np.zeros(2 ** num_qubits, dtype=np.complex128)
    amplitudes[basis_index] = 1.0
    return StateVector(num_qubits, amplitudes)


def apply_gate(state: StateVector, gate: SingleQubitGate, target: QubitIndex) -> StateVector:
    """Apply a single-qubit gate to ``target``."""
    target = _check_qubit(state, target)
    rotated = np.tensordot(gate.matrix, state.tensor(), axes=([1], [target]))
    return StateVector(state.num_qubits, np.moveaxis(rotated, 0, target).reshape(-1))


def apply_hadamard_layer(state: StateVector, targets: Iterable[QubitIndex]) -> StateVector:
    """Apply H to every qubit in ``targets`` (order is irrelevant)."""
    for target in sorted(_check_distinct(state, targets)):
        state = apply_gate(state, HADAMARD, target)
    return state


def apply_boolean_oracle(
    state: StateVector,
    g: "BooleanOracle",
    inputs: Sequence[QubitIndex],
    target: QubitIndex,
) -> StateVector:
    """U_g: |x, y> -> |x, y XOR g(x)>, with inputs[0] the most significant bit of x."""
    inputs = _check_distinct(state, inputs)
    target = _check_qubit(state, target)
    if target in inputs:
        raise ValueError(f"target qubit {target} overlaps the input register {inputs}")
    if g.arity != len(inputs):
        raise ValueError(f"oracle arity {g.arity} does not match {len(inputs)} input qubits")

    grouped, order = _grouped(state, inputs + [target])
    block = grouped.reshape(2 ** len(inputs), 2, -1)
    flip = np.asarray(g.truth_table, dtype=bool)
    out = block.copy()
    out[flip] = block[flip][:, ::-1, :]
    return StateVector(state.num_qubits, _ungrouped(out.reshape(grouped.shape), order))


def apply_uniformly_controlled_gate(
    state: StateVector,
    gates: Sequence[Union[SingleQubitGate, np.ndarray]],
    controls: Sequence[QubitIndex],
    target: QubitIndex,
) -> StateVector:
    """Apply ``gates[c]`` to ``target`` on the branch where the control register reads ``c``.

    ``gates`` may also be a stacked (2^k, 2, 2) array of unitaries.
    """
    controls = _check_distinct(state, controls)
    target = _check_qubit(state, target)
    if target in controls:
        raise ValueError(f"target qubit {target} overlaps the control register {controls}")
    if len(gates) != 2 ** len(controls):
        raise ValueError(f"need {2 ** len(controls)} gates for {len(controls)} controls, got {len(gates)}")

    if isinstance(gates, np.ndarray) and gates.ndim == 3:
        matrices = gates.astype(np.complex128)
        if matrices.shape[1:] != (2, 2):
            raise ValueError(f"stacked gates must have shape (k, 2, 2), got {matrices.shape}")
        products = np.einsum("kba,kbc->kac", matrices.conj(), matrices)
        if np.max(np.abs(products - np.eye(2))) > ALGEBRA_TOLERANCE:
            raise ValueError("every stacked gate must be unitary")
    else:
        matrices = np.stack([
            gate.matrix if isinstance(gate, SingleQubitGate) else SingleQubitGate("U", gate).matrix
            for gate in gates
        ])
    grouped, order = _grouped(state, controls + [target])
    block = grouped.reshape(2 ** len(controls), 2, -1)
    out = np.einsum("kab,kbr->kar", matrices, block)
    return StateVector(state.num_qubits, _ungrouped(out.reshape(grouped.shape), order))


def amplitude_encode(
    weights: Sequence[float],
    extra_qubits: int = 0,
    max_qubits: Optional[int] = None,
) -> StateVector:
    """Prepare sum_theta sqrt(w_theta / E_X) |theta> |0...0>.

    The weighting routine is realized by direct amplitude assignment; no gate
    decomposition is attempted.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or w.size & (w.size - 1):
        raise ValueError(f"weights length must be a power of two, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    total = float(np.sum(w))
    if total <= 0:
        raise ValueError("at least one weight must be positive")
    if extra_qubits < 0:
        raise ValueError(f"extra_qubits must be >= 0, got {extra_qubits}")

    num_qubits = (w.size.bit_length() - 1) + extra_qubits
    if num_qubits < 1:
        raise ValueError("encoded state needs at least one qubit")
    _check_capacity(num_qubits, max_qubits)

    amplitudes = np.zeros(2 ** num_qubits, dtype=np.complex128)
    amplitudes[:: 2 ** extra_qubits] = np.sqrt(w / total)
    return StateVector(num_qubits, amplitudes)


def marginal_probability(state: StateVector, qubit: QubitIndex, outcome: int) -> float:
    """Probability that measuring ``qubit`` yields ``outcome``."""
    qubit = _check_qubit(state, qubit)
    outcome = _check_outcome(outcome)
    probabilities = np.abs(state.tensor()) ** 2
    return float(np.sum(np.take(probabilities, outcome, axis=qubit)))


def register_probabilities(state: StateVector, qubits: Sequence[QubitIndex]) -> np.ndarray:
    """Joint outcome distribution of ``qubits`` (qubits[0] most significant)."""
    qubits = _check_distinct(state, qubits)
    if not qubits:
        raise ValueError("register must contain at least one qubit")
    probabilities = np.abs(state.tensor()) ** 2
    others = tuple(q for q in range(state.num_qubits) if q not in qubits)
    reduced = probabilities.sum(axis=others) if others else probabilities
    ascending = sorted(qubits)
    return np.transpose(reduced, [ascending.index(q) for q in qubits]).reshape(-1)


def postselect(state: StateVector, qubit: QubitIndex, outcome: int) -> StateVector:
    """Keep the branch where ``qubit`` reads ``outcome`` and renormalize."""
    probability = marginal_probability(state, qubit, outcome)
    if probability <= BRANCH_TOLERANCE:
        raise PostselectionError(qubit, outcome, probability)

    tensor = state.tensor().copy()
    index = [slice(None)] * state.num_qubits
    index[qubit] = 1 - outcome
    tensor[tuple(index)] = 0.0
    flat = tensor.reshape(-1)
    logger.debug("Postselected qubit %d = %d (branch probability %.6g)", qubit, outcome, probability)
    return StateVector(state.num_qubits, flat / np.linalg.norm(flat))


def release_qubit(state: StateVector, qubit: QubitIndex, outcome: int) -> StateVector:
    """Drop a qubit that is known to sit in |outcome>."""
    if state.num_qubits < 2:
        raise ValueError("cannot release the only qubit of a state")
    probability = marginal_probability(state, qubit, outcome)
    if probability < 1.0 - NORM_TOLERANCE:
        raise ValueError(
            f"qubit {qubit} is not in |{outcome}> (probability {probability:.12f}); "
            "postselect before releasing it"
        )
    reduced = np.take(state.tensor(), outcome, axis=qubit).reshape(-1)
    return StateVector(state.num_qubits - 1, reduced / np.linalg.norm(reduced))


def states_equal_up_to_phase(
    a: Union[StateVector, np.ndarray],
    b: Union[StateVector, np.ndarray],
    tol: float = NORM_TOLERANCE,
) -> bool:
    """Amplitude-wise comparison after removing one global phase."""
    x = a.amplitudes if isinstance(a, StateVector) else np.asarray(a, dtype=np.complex128)
    y = b.amplitudes if isinstance(b, StateVector) else np.asarray(b, dtype=np.complex128)
    if x.shape != y.shape:
        return False
    pivot = int(np.argmax(np.abs(x)))
    if abs(x[pivot]) <= tol:
        return bool(np.max(np.abs(y)) <= tol)
    if abs(y[pivot]) <= tol:
        return False
    phase = (y[pivot] / x[pivot]) / abs(y[pivot] / x[pivot])
    return bool(np.max(np.abs(x * phase - y)) <= tol)
