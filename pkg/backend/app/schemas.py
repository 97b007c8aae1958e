"""
Run configuration and CSV row schemas for the command-line surface
"""
from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from .dequantize import RejectionMode
from .models import GroundTruthMode, ModelFamily


class Subcommand(str, Enum):
    DJ = "dj"
    QENSEMBLE = "qensemble"
    DEQUANTIZE = "dequantize"
    CONCENTRATION = "concentration"
    HIGHD = "highd"
    APPENDIX_B = "appendix-b"
    COMPARE = "compare"


class Weighting(str, Enum):
    ACCURACY = "accuracy"
    UNIFORM = "uniform"


class RunConfig(BaseModel):
    """Every parameter of one CLI invocation, validated before any work starts."""

    subcommand: Subcommand
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    output_path: Optional[Path] = None
    threads: int = Field(default=1, ge=1)

    # dj
    n_qubits: int = Field(default=3, ge=1)
    oracle: str = "constant:0"

    # quantum pipeline and sampling
    family: ModelFamily = ModelFamily.PERCEPTRON
    bits_per_param: int = Field(default=2, ge=1)
    weighting: Weighting = Weighting.ACCURACY
    proposals: int = Field(default=100000, ge=1)
    mode: RejectionMode = RejectionMode.ACCURACY_WEIGHTED
    hidden_width: Optional[int] = Field(default=None, ge=1)

    # data and experiments
    d: int = Field(default=2, ge=1)
    M: int = Field(default=32, ge=1)
    n: int = Field(default=100, ge=1)
    M_test: int = Field(default=500, ge=1)
    d_list: List[int] = Field(default_factory=lambda: [10, 100, 1000])
    trials: int = Field(default=200, ge=2)
    ground_truth: GroundTruthMode = GroundTruthMode.AXIS


class ErrorDetail(BaseModel):
    code: str
    message: str
    details: Optional[Dict[str, Any]] = None


class DJRow(BaseModel):
    oracle: str
    n: int = Field(ge=1)
    p_all_zeros: float = Field(ge=0.0)
    verdict: str
    p_f_zero: float = Field(ge=0.0)
    congruent: bool


class QEnsembleRow(BaseModel):
    theta_code: str
    a_theta: float = Field(ge=0.0)
    prediction: int
    weight_share: float = Field(ge=0.0, le=1.0)


class DequantizeRow(BaseModel):
    theta_id: int = Field(ge=0)
    a_theta: float = Field(ge=0.0, le=1.0)
    accepted: int = Field(ge=0)
    weight: float = Field(ge=0.0)


class CompareRow(BaseModel):
    theta_code: str
    a_theta: float = Field(ge=0.0, le=1.0)
    quantum_probability: float = Field(ge=0.0)
    classical_frequency: float = Field(ge=0.0, le=1.0)
