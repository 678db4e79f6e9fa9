from typing import Dict, List, Optional, Sequence, Tuple

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..errors import BlockGeometryError, KernelIdentityError
from ..graphdist import bfs_distances
from ..graphdist.search import UNREACHABLE, frontier_search
from ..kernel import probability_from_kernel
from ..renorm import BlockGrid, block_edge_marginal, block_kernel_sum
from ..sampler import BoxShape, kernel_table, sample_box, sample_coupled
from .config import ExperimentConfig
from .runner import map_tasks, replica_seed

METRIC_COUNT_SLACK = 1.25


class CouplingReport(BaseModel):
    """Monotonicity violations of coupled environments, per replica."""

    model_config = ConfigDict(frozen=True)

    beta_low: float
    beta_high: float
    n: int
    replicas: int
    edge_violations: List[int]
    distance_violations: List[int]
    low_edges: List[int]
    high_edges: List[int]

    @property
    def violations(self) -> int:
        return sum(self.edge_violations) + sum(self.distance_violations)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict:
        return {**self.model_dump(), "violations": self.violations, "passed": self.passed}


def coupling_check(
    config: ExperimentConfig, beta_low: Optional[float] = None, beta_high: Optional[float] = None, n: Optional[int] = None
) -> CouplingReport:
    """
    Sample coupled environments and count edges and distances that break monotonicity.

    An edge open at beta_low but closed at beta_high, or a vertex with
    D_high(0, x) > D_low(0, x), is a violation.
    """
    beta_low = config.beta_low if beta_low is None else beta_low
    beta_high = config.beta_high if beta_high is None else beta_high
    n = config.sizes[-1] if n is None else n
    shape = BoxShape.cube(config.d, n)
    spec_low, spec_high = config.with_beta(beta_low), config.with_beta(beta_high)

    def replica(r: int) -> Tuple[int, int, int, int]:
        pair = sample_coupled(spec_low, spec_high, shape, replica_seed(config.seed, 0, r))
        low = bfs_distances(pair.low, [0]).distances
        high = bfs_distances(pair.high, [0]).distances
        return len(pair.violations()), int(np.sum(high > low)), pair.low.edge_count, pair.high.edge_count

    results = map_tasks(replica, range(config.replicas), config.threads)
    report = CouplingReport(
        beta_low=beta_low,
        beta_high=beta_high,
        n=n,
        replicas=config.replicas,
        edge_violations=[r[0] for r in results],
        distance_violations=[r[1] for r in results],
        low_edges=[r[2] for r in results],
        high_edges=[r[3] for r in results],
    )
    if report.passed:
        logging.info(f"\033[92m✔ coupling {beta_low} <= {beta_high}: no violations in {config.replicas} replicas\033[0m")
    else:
        logging.error(f"\033[91m✖ coupling {beta_low} <= {beta_high}: {report.violations} violations\033[0m")
    return report


class MarginalCheck(BaseModel):
    """One comparison of the block marginal with the fine edge probability."""

    model_config = ConfigDict(frozen=True)

    k: int
    w: Tuple[int, ...]
    block_sum: float
    kernel: float
    marginal: float
    probability: float
    relative_error: float
    passed: bool

    def to_row(self) -> Tuple:
        return (self.k, "x".join(str(c) for c in self.w), self.block_sum, self.kernel, self.marginal, self.probability, self.relative_error, int(self.passed))


def _coarse_displacements(d: int, w_values: Sequence[int]) -> List[Tuple[int, ...]]:
    displacements = []
    for w in w_values:
        displacements.append((w,) + (0,) * (d - 1))
        if d > 1:
            displacements.append((w,) * d)
    return displacements


def renormalization_check(config: ExperimentConfig, k_values: Optional[Sequence[int]] = None, w_values: Optional[Sequence[int]] = None) -> List[MarginalCheck]:
    """
    Compare block marginals with fine edge probabilities for every (k, w).

    Each integer w is used along the first axis and, for d > 1, on the diagonal.
    """
    spec = config.spec
    k_values = config.renorm_k if k_values is None else k_values
    w_values = config.renorm_w if w_values is None else w_values
    table = kernel_table(spec, max(w_values))
    rows = []
    for k in k_values:
        for w in _coarse_displacements(spec.d, w_values):
            if max(abs(c) for c in w) < 2:
                raise BlockGeometryError(f"Coarse displacement {w} is a nearest neighbour")
            aggregated = block_kernel_sum(spec, k, w)
            kernel = table.kernel_value(w)
            relative = abs(aggregated - kernel) / kernel
            try:
                marginal = block_edge_marginal(spec, k, w)
                passed = True
            except KernelIdentityError as e:
                logging.error(f"\033[91m✖ {e}\033[0m")
                marginal = probability_from_kernel(spec.beta, aggregated)
                passed = False
            rows.append(
                MarginalCheck(
                    k=k,
                    w=w,
                    block_sum=aggregated,
                    kernel=kernel,
                    marginal=marginal,
                    probability=table.edge_probability(w),
                    relative_error=relative,
                    passed=passed,
                )
            )
    return rows


class MetricBoxRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int
    radius: float
    max_count: int
    mean_count: float
    ratio: float


class MetricBoxCount(BaseModel):
    """
    Number of blocks within chemical distance c (n/m)^theta_hat of each block, per m.

    `ratio` is the max count over log m; the run passes when no ratio exceeds the
    first one by more than a quarter.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    theta_hat: float
    scale: float
    rows: List[MetricBoxRow]
    slope: Optional[float]
    passed: bool

    def to_dict(self) -> Dict:
        return self.model_dump()


def block_counts(env, grid: BlockGrid, radius: float, threads: int = 1) -> np.ndarray:
    """For every block W, the number of blocks holding a vertex at distance < radius from W."""
    cutoff = max(int(math.ceil(radius)) - 1, 0)

    def count(block: int) -> int:
        distances, _ = frontier_search(env, grid.members(block), cutoff=cutoff)
        return len(np.unique(grid.block_of[distances != UNREACHABLE]))

    return np.array(map_tasks(count, range(grid.block_count), threads), dtype=np.int64)


def metric_box_count(config: ExperimentConfig, theta_hat: float, m_values: Optional[Sequence[int]] = None) -> MetricBoxCount:
    """
    Block counts of chemical balls at the block scale, for several numbers of blocks per side.

    Raises:
        BlockGeometryError: If some m does not divide the box size.
    """
    n = config.sizes[-1]
    m_values = sorted(config.blocks_per_side if m_values is None else m_values)
    for m in m_values:
        if m < 2 or n % m:
            raise BlockGeometryError(f"{m} blocks per side do not tile a box of size {n}")
    shape = BoxShape.cube(config.d, n)
    size_index = len(config.sizes) - 1
    envs = [sample_box(config.spec, shape, replica_seed(config.seed, size_index, r)) for r in range(config.replicas)]

    rows = []
    for m in m_values:
        radius = config.count_scale * (n / m) ** theta_hat
        counts = np.concatenate([block_counts(env, BlockGrid(env, n // m), radius, config.threads) for env in envs])
        max_count = int(np.max(counts))
        rows.append(
            MetricBoxRow(m=m, radius=radius, max_count=max_count, mean_count=float(np.mean(counts)), ratio=max_count / math.log(m))
        )
    slope = None
    if len(rows) >= 2:
        slope = float(np.polyfit([math.log(row.m) for row in rows], [row.max_count for row in rows], 1)[0])
    passed = all(row.ratio <= rows[0].ratio * METRIC_COUNT_SLACK for row in rows)
    return MetricBoxCount(n=n, theta_hat=theta_hat, scale=config.count_scale, rows=rows, slope=slope, passed=passed)
