from typing import Any, Dict, List, Literal, Optional

import hashlib

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ConfigError
from ..kernel import KernelSpec

DEFAULT_SIZES = [2**e for e in range(6, 11)]
DEFAULT_EPS_GRID = [2.0**e for e in range(-5, 0)]


class ExperimentConfig(BaseModel):
    """
    Every knob of a run, with the documented defaults.

    Attributes:
        d (int): Dimension.
        beta (float): Kernel intensity.
        variant (str): "selfsim" or "power".
        s (Optional[float]): Exponent of the power-law variant.
        sizes (List[int]): Strictly increasing box sizes.
        replicas (int): Replicas per size.
        seed (int): Master seed.
        delta (float): Good-block threshold factor.
        block_k (int): Block side for block experiments.
        eps_grid (List[float]): Lower-tail grid.
        diameter_threshold (int): Largest vertex set with an exact diameter.
        threads (int): Worker threads.
        theta_hat (Optional[float]): Distance exponent; estimated first when missing.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    d: int = Field(default=1, ge=1)
    beta: float = Field(default=1.0, ge=0.0)
    variant: Literal["selfsim", "power"] = "selfsim"
    s: Optional[float] = None
    sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_SIZES))
    replicas: int = Field(default=32, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    delta: float = Field(default=0.25, gt=0.0)
    block_k: int = Field(default=8, ge=2)
    eps_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_EPS_GRID))
    diameter_threshold: int = Field(default=20_000, ge=1)
    threads: int = Field(default=1, ge=1)
    bootstrap_rounds: int = Field(default=1000, ge=0)
    theta_hat: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    observable: Literal["axis", "diagonal", "diameter"] = "axis"
    elongation: Optional[int] = Field(default=None, ge=2)
    eta: float = Field(default=0.5, ge=0.0)
    k_max: int = Field(default=8, ge=1)
    hop: int = Field(default=2, ge=1)
    hop_distances: List[int] = Field(default_factory=lambda: [4, 8, 16, 32, 64])
    blocks_per_side: List[int] = Field(default_factory=lambda: [8, 16, 32])
    count_scale: float = Field(default=1.0, gt=0.0)
    box_radii: List[int] = Field(default_factory=lambda: [0, 1, 2, 4, 8, 16, 32])
    beta_low: float = Field(default=0.5, ge=0.0)
    beta_high: float = Field(default=2.0, ge=0.0)
    renorm_k: List[int] = Field(default_factory=lambda: [2, 3, 4])
    renorm_w: List[int] = Field(default_factory=lambda: [2, 3, 5])

    @field_validator("sizes")
    @classmethod
    def _check_sizes(cls, sizes: List[int]) -> List[int]:
        if not sizes:
            raise ValueError("at least one box size is required")
        if any(n < 2 for n in sizes):
            raise ValueError("box sizes must be at least 2")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("not strictly increasing")
        return sizes

    @field_validator("eps_grid")
    @classmethod
    def _check_eps_grid(cls, grid: List[float]) -> List[float]:
        if not grid or any(not 0 < eps for eps in grid):
            raise ValueError("grid values must be positive")
        return sorted(grid)

    @field_validator("hop_distances", "blocks_per_side", "renorm_k", "renorm_w", "box_radii")
    @classmethod
    def _check_positive_lists(cls, values: List[int]) -> List[int]:
        if any(v < 0 for v in values):
            raise ValueError("values must be nonnegative")
        return values

    @model_validator(mode="after")
    def _check_variant(self) -> "ExperimentConfig":
        if (self.variant == "power") != (self.s is not None):
            raise ValueError("s is required by the power variant and only by it")
        return self

    @property
    def spec(self) -> KernelSpec:
        return KernelSpec(d=self.d, beta=self.beta, variant=self.variant, s=self.s)

    def with_beta(self, beta: float) -> KernelSpec:
        return KernelSpec(d=self.d, beta=beta, variant=self.variant, s=self.s)

    def check_eps_grid(self, theta_hat: float, distance: int) -> None:
        """Every grid point must satisfy eps * |x|^theta_hat >= 1."""
        for eps in self.eps_grid:
            if eps * distance**theta_hat < 1:
                raise ConfigError(
                    "eps_grid", f"eps={eps!r} gives eps * {distance}^{theta_hat:.4g} < 1"
                )

    def canonical_text(self) -> str:
        """Sorted `key = value` lines, floats at 17 significant digits."""
        lines = []
        for key, value in sorted(self.model_dump().items()):
            lines.append(f"{key} = {format_value(value)}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return str(value)
