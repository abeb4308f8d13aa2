"""
Run configuration: one JSON file parsed into strict pydantic models.

Unknown keys are rejected at every level. Scalars can be overridden from the
command line with dotted paths, e.g. ``--set domain.h=0.02``.
"""

import hashlib
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .damping import (
    DampingKind,
    DampingProfile,
    build_smooth_m_damping,
    build_wing_damping,
    constant_damping,
)
from .exceptions import ConfigError
from .geometry import DomainSpec, GridMesh, Shape, build_mesh

logger = logging.getLogger(__name__)


class Task(str, Enum):
    MESH_INFO = "mesh-info"
    SWEEP = "sweep"
    EVOLVE = "evolve"
    SPECTRUM = "spectrum"
    QUASIMODE = "quasimode"
    R0 = "r0"
    LEMMA31 = "lemma31"


class InitialData(str, Enum):
    BOUNCING_BALL = "bouncing_ball"
    WING_BUMP = "wing_bump"
    EIGENFUNCTION = "eigenfunction"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainConfig(StrictModel):
    """Domain and grid. For a stadium, ``Ly`` is ignored and taken as ``2 beta``."""

    shape: Shape = Shape.STADIUM
    Lx: float = Field(1.0, gt=0)
    Ly: float = Field(math.pi, gt=0)
    beta: float = Field(math.pi / 2, ge=0)
    h: float = Field(0.05, gt=0)

    def to_spec(self) -> DomainSpec:
        if self.shape is Shape.STADIUM:
            return DomainSpec(Shape.STADIUM, Lx=1.0, Ly=2 * self.beta, beta=self.beta)
        if self.shape is Shape.RECTANGLE:
            return DomainSpec(Shape.RECTANGLE, Lx=self.Lx, Ly=self.Ly)
        return DomainSpec(self.shape, Lx=self.Lx, Ly=self.Ly, beta=self.beta)

    def build(self) -> GridMesh:
        return build_mesh(self.to_spec(), self.h)


class DampingConfig(StrictModel):
    kind: DampingKind = DampingKind.WING_CONTINUOUS
    strip: Tuple[float, float] = (0.15, 0.85)
    floor: float = 1.0
    m: int = 4
    delta: float = 0.1
    amplitude: float = 1.0
    value: float = Field(1.0, ge=0, description="Constant damping value (kind=constant)")

    def build(self, mesh: GridMesh, m: Optional[int] = None) -> DampingProfile:
        if self.kind is DampingKind.WING_CONTINUOUS:
            return build_wing_damping(mesh, self.strip, self.floor)
        if self.kind is DampingKind.SMOOTH_ORDER_M:
            return build_smooth_m_damping(mesh, m or self.m, self.delta, self.amplitude)
        return constant_damping(mesh, self.value)


class SweepConfig(StrictModel):
    lambdas: List[float] = Field(default_factory=lambda: [5.0, 7.0, 10.0, 14.0, 20.0, 28.0])
    tol: float = Field(1e-6, gt=0)
    window_min: float = 5.0
    window_max: Optional[float] = None
    alpha_bound: float = 1.3
    residual_bound: float = Field(0.2, gt=0, description="Largest accepted RMS log-residual of the exponent fit")
    compare_orders: List[int] = Field(default_factory=list, description="Extra m values swept for comparison")
    generator: bool = False
    generator_alpha_bound: float = 2.3
    identity_tol: float = 1e-8

    @field_validator("lambdas")
    @classmethod
    def _increasing(cls, value: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("lambdas must be strictly increasing")
        return value

    @property
    def window(self) -> Tuple[float, float]:
        return self.window_min, math.inf if self.window_max is None else self.window_max


class EvolveConfig(StrictModel):
    T: float = Field(50.0, gt=0)
    dt: Optional[float] = Field(None, gt=0, description="Defaults to 0.4 h")
    data: InitialData = InitialData.BOUNCING_BALL
    mode: int = Field(1, ge=1)
    orders: List[int] = Field(default_factory=lambda: [1, 2])
    conservation_tol: float = 1e-4
    order_bounds: Tuple[float, float] = Field((3.0, 5.0), description="Accepted collocated-error ratio under dt halving")
    monotone_slack: float = 1e-12
    doubling_tol: float = Field(0.2, description="Allowed relative change of C_k between T/2 and T")
    m: Optional[float] = Field(None, description="Also report the improved-rate functional for this m")
    eps: float = 0.0


class SpectrumConfig(StrictModel):
    window: Optional[Tuple[float, float, float, float]] = None
    per_target: int = Field(12, ge=1)
    n_targets: int = Field(8, ge=1)
    lower_halfplane: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(0.0, -1.0), (0.0, -2.0), (0.0, -4.0)],
        description="(re, im) points with im < 0 where the resolvent bound is checked",
    )
    band_slack: float = 1e-10
    max_iter: int = Field(1000, ge=1, description="Power-iteration cap for the lower half-plane norms")

    @field_validator("lower_halfplane")
    @classmethod
    def _lower(cls, value: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        if any(im >= 0 for _, im in value):
            raise ValueError("lower half-plane points need a negative imaginary part")
        return value


class QuasimodeConfig(StrictModel):
    ks: List[int] = Field(default_factory=lambda: [8, 16, 32])
    half_length: float = 15.0
    sigma: float = 1.0
    cutoff: float = 6.0
    h: float = 0.05
    dt: Optional[float] = None
    n_times: int = Field(8, ge=2)
    ratio_time: float = 4.0
    ratio_bounds: Tuple[float, float] = (1.4, 2.8)


class R0Config(StrictModel):
    tau_min: float = Field(1.0, gt=0)
    tau_max: float = 200.0
    n_tau: int = Field(60, ge=4)
    window_factor: float = 3.0
    high_mode_lambdas: List[float] = Field(default_factory=lambda: [8.0, 16.0, 32.0])
    high_mode_multiples: List[int] = Field(default_factory=lambda: [1, 2, 4])
    trials: int = Field(50, ge=1)
    k_drift: float = Field(0.05, description="Allowed relative growth of the ratio as k doubles")


class Lemma31Config(StrictModel):
    orders: List[int] = Field(default_factory=lambda: [4, 6, 8])
    delta: float = 0.1
    normalized: bool = Field(True, description="Use amplitude delta^m so the n=1 constant is exactly m")
    refinement_tol: float = 0.01

    @field_validator("orders")
    @classmethod
    def _orders(cls, value: List[int]) -> List[int]:
        if any(m < 4 for m in value):
            raise ValueError("vanishing orders must be >= 4")
        return value


class RunConfig(StrictModel):
    task: Task
    domain: DomainConfig = Field(default_factory=DomainConfig)
    damping: DampingConfig = Field(default_factory=DampingConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    evolve: EvolveConfig = Field(default_factory=EvolveConfig)
    spectrum: SpectrumConfig = Field(default_factory=SpectrumConfig)
    quasimode: QuasimodeConfig = Field(default_factory=QuasimodeConfig)
    r0: R0Config = Field(default_factory=R0Config)
    lemma31: Lemma31Config = Field(default_factory=Lemma31Config)
    output_dir: str = "results"
    seed: int = 0x5EED
    plots: bool = False
    jobs: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        domain = self.domain
        if domain.shape is Shape.STADIUM and domain.beta <= 0:
            raise ValueError("a stadium needs beta > 0")
        if self.sweep.compare_orders and self.damping.kind is not DampingKind.SMOOTH_ORDER_M:
            raise ValueError("sweep.compare_orders needs damping.kind = smooth_order_m")
        return self


def _format_errors(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
    )


def parse_config(data: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {_format_errors(exc)}") from exc


def load_config(path: Path, task: Optional[str] = None) -> RunConfig:
    """
    Read and validate a JSON run configuration.

    Args:
        path: JSON file
        task: Task used when the file does not name one

    Returns:
        RunConfig
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"Configuration file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    if task is not None:
        data.setdefault("task", task)
    logger.debug("Loaded configuration from %s", path)
    return parse_config(data)


def _parse_scalar(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """
    Return a copy of ``config`` with dotted-path overrides applied and revalidated.

    String values are decoded as JSON when possible (``"0.02"`` -> 0.02).
    """
    data = config.model_dump(mode="json")
    for dotted, value in overrides.items():
        if value is None:
            continue
        keys = dotted.split(".")
        node = data
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ConfigError(f"Unknown configuration section in override '{dotted}'")
            node = node[key]
        if keys[-1] not in node:
            raise ConfigError(f"Unknown configuration key in override '{dotted}'")
        node[keys[-1]] = _parse_scalar(value) if isinstance(value, str) else value
    return parse_config(data)


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON dump."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
