"""
Pre-flight checks for run configurations and the oracle mini-language
"""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import List, Optional

from .config import SimulationSettings, get_settings
from .deutsch_jozsa import BooleanOracle, make_balanced_oracle, make_constant_oracle
from .dequantize import AUDIT_MAX_BITS
from .models import ModelFamily, parameter_count
from .schemas import RunConfig, Subcommand

logger = logging.getLogger(__name__)


def parse_oracle_spec(text: str, n: int) -> BooleanOracle:
    """Build an oracle from ``constant:{0|1}``, ``balanced:mask=<int>`` or ``balanced:subset=<ints>``."""
    kind, _, argument = text.strip().partition(":")
    if kind == "constant":
        if argument not in ("0", "1"):
            raise ValueError(f"constant oracle needs value 0 or 1, got {argument!r}")
        return make_constant_oracle(n, int(argument))

    if kind == "balanced":
        key, _, value = argument.partition("=")
        try:
            if key == "mask":
                return make_balanced_oracle(n, mask=int(value))
            if key == "subset":
                return make_balanced_oracle(n, subset=[int(v) for v in value.split(",") if v.strip()])
        except ValueError as exc:
            raise ValueError(f"invalid oracle {text!r}: {exc}") from exc
        raise ValueError(f"balanced oracle needs mask=<int> or subset=<ints>, got {argument!r}")

    raise ValueError(f"unknown oracle kind {kind!r} (use constant or balanced)")


class RunValidator:
    """Each check returns a list of error messages; an empty list means valid."""

    @staticmethod
    def validate_oracle_spec(text: str, n: int) -> List[str]:
        try:
            parse_oracle_spec(text, n)
        except ValueError as exc:
            return [str(exc)]
        return []

    @staticmethod
    def validate_qubit_budget(num_qubits: int, max_qubits: int) -> List[str]:
        if num_qubits > max_qubits:
            return [f"circuit needs {num_qubits} qubits, the cap is {max_qubits}"]
        return []

    @staticmethod
    def validate_ensemble_bits(family: ModelFamily, d: int, bits: int, hidden_width: Optional[int],
                               max_bits: int) -> List[str]:
        """P * b must fit in the simulated parameter register."""
        try:
            total = parameter_count(family, d, hidden_width) * bits
        except ValueError as exc:
            return [str(exc)]
        if total > max_bits:
            return [
                f"{family.value} on d={d} with {bits} bits per parameter needs {total} parameter qubits, "
                f"the cap is {max_bits}"
            ]
        return []

    @staticmethod
    def validate_d_list(d_list: List[int]) -> List[str]:
        errors = []
        if not d_list:
            errors.append("d-list must contain at least one dimension")
        if any(d < 1 for d in d_list):
            errors.append(f"every dimension must be >= 1, got {d_list}")
        if len(set(d_list)) != len(d_list):
            errors.append(f"d-list contains duplicates: {d_list}")
        return errors

    @staticmethod
    def validate_output_path(path: Optional[Path]) -> List[str]:
        if path is None:
            return []
        if path.is_dir():
            return [f"output path {path} is a directory"]
        parent = path.parent if str(path.parent) else Path(".")
        existing = parent
        while not existing.exists() and existing != existing.parent:
            existing = existing.parent
        if not os.access(existing, os.W_OK):
            return [f"output directory {parent} is not writable"]
        return []

    @staticmethod
    def validate_run_config(config: RunConfig, settings: Optional[SimulationSettings] = None) -> List[str]:
        settings = settings or get_settings()
        errors = RunValidator.validate_output_path(config.output_path)
        command = config.subcommand

        if command is Subcommand.DJ:
            budget = RunValidator.validate_qubit_budget(config.n_qubits + 1, settings.max_qubits)
            # the truth table has 2^n entries, so only parse once the size is known to fit
            errors += budget or RunValidator.validate_oracle_spec(config.oracle, config.n_qubits)
        elif command in (Subcommand.QENSEMBLE, Subcommand.DEQUANTIZE):
            errors += RunValidator.validate_ensemble_bits(
                config.family, config.d, config.bits_per_param, config.hidden_width, settings.max_ensemble_bits
            )
        elif command is Subcommand.COMPARE:
            errors += RunValidator.validate_ensemble_bits(
                config.family, config.d, config.bits_per_param, config.hidden_width,
                min(AUDIT_MAX_BITS, settings.max_ensemble_bits),
            )
        elif command is Subcommand.CONCENTRATION:
            errors += RunValidator.validate_d_list(config.d_list)
            if config.M < 2 or config.n < 2:
                errors.append(f"concentration needs M >= 2 and n >= 2, got M={config.M}, n={config.n}")
        elif command is Subcommand.APPENDIX_B:
            errors += RunValidator.validate_d_list(config.d_list)

        if errors:
            logger.debug("Run configuration rejected: %s", errors)
        return errors
