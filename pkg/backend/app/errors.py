"""
Exception types shared across the simulation toolkit.

Input problems raise ``ValueError`` (the CLI maps them to exit code 1).
Everything below derives from ``QEnsembleError`` and signals a failure
that happened while running a valid request (exit code 2).
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Optional, Union


class QEnsembleError(RuntimeError):
    """Base class for runtime failures of a simulation or experiment."""

    code = "RUNTIME_ERROR"


class CapacityError(QEnsembleError):
    """Raised when a dense statevector would exceed the configured qubit cap."""

    code = "CAPACITY_EXCEEDED"

    def __init__(self, num_qubits: int, max_qubits: int) -> None:
        super().__init__(
            f"Statevector of {num_qubits} qubits exceeds the cap of {max_qubits} "
            f"(set QENS_MAX_QUBITS to raise it)"
        )
        self.num_qubits = num_qubits
        self.max_qubits = max_qubits


class PostselectionError(QEnsembleError):
    """Raised when postselecting on a branch with (numerically) zero probability."""

    code = "ZERO_PROBABILITY_BRANCH"

    def __init__(self, qubit: int, outcome: int, probability: float) -> None:
        super().__init__(
            f"Cannot postselect qubit {qubit} on outcome {outcome}: "
            f"branch probability {probability:.3e} is zero"
        )
        self.qubit = qubit
        self.outcome = outcome
        self.probability = probability


class PromiseViolationError(QEnsembleError):
    """Raised when Deutsch-Jozsa is asked to decide an oracle without the promise."""

    code = "PROMISE_VIOLATED"


class EmptyEnsembleError(QEnsembleError):
    """Raised when rejection sampling accepts no model at all.

    The (empty) ensemble is attached so the caller can still inspect the
    number of proposals that were drawn.
    """

    code = "EMPTY_ENSEMBLE"

    def __init__(self, message: str, ensemble: Optional[Any] = None) -> None:
        super().__init__(message)
        self.ensemble = ensemble


class ExportError(QEnsembleError):
    """Raised when a result file cannot be written."""

    code = "EXPORT_FAILED"

    def __init__(self, destination: Union[str, Path], reason: str) -> None:
        super().__init__(f"Could not write {destination}: {reason}")
        self.destination = Path(destination)
