from typing import Dict, List, Optional, Sequence

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..errors import FitError
from .config import ExperimentConfig
from .fit import ScalingFit, fit_power_law, replicate_resampler, wilson_interval
from .runner import pair_shape, sample_distance_distribution


class LowerTailCurve(BaseModel):
    """
    Empirical P(D(0, x) <= eps |x|^theta_hat) over an eps grid.

    Grid points whose Wilson interval is wider than half the estimate are
    kept in the table but left out of the fit.
    """

    model_config = ConfigDict(frozen=True)

    distance: int
    theta_hat: float
    eps: List[float]
    thresholds: List[float]
    probabilities: List[float]
    ci_low: List[float]
    ci_high: List[float]
    included: List[bool]
    trials: int
    fit: Optional[ScalingFit] = None
    expected_slope: float
    flags: List[str] = []

    @model_validator(mode="after")
    def _check_probabilities(self) -> "LowerTailCurve":
        if any(not 0.0 <= p <= 1.0 for p in self.probabilities):
            raise ValueError("Probabilities must lie in [0, 1]")
        if any(b < a for a, b in zip(self.probabilities, self.probabilities[1:])):
            raise ValueError("Probabilities must be nondecreasing in eps")
        return self

    @property
    def slope(self) -> Optional[float]:
        return None if self.fit is None else self.fit.slope

    def rows(self) -> List[tuple]:
        return list(
            zip(self.eps, self.thresholds, self.probabilities, self.ci_low, self.ci_high, [int(i) for i in self.included])
        )

    def to_dict(self) -> Dict:
        return self.model_dump()


def _proportions(values: np.ndarray, thresholds: Sequence[float]) -> np.ndarray:
    return np.array([np.mean(values <= t) for t in thresholds])


def lower_tail_experiment(config: ExperimentConfig, theta_hat: float, distance: Optional[int] = None) -> LowerTailCurve:
    """
    Lower tail of the chemical distance between two points at distance |x|.

    Args:
        config: Experiment configuration; its eps grid must satisfy eps |x|^theta_hat >= 1.
        theta_hat: Distance exponent.
        distance: |x|, the largest box size by default.

    Returns:
        LowerTailCurve: Frequencies, Wilson intervals and the log-log slope against eps.

    Raises:
        ConfigError: If a grid point violates eps |x|^theta_hat >= 1.
    """
    distance = config.sizes[-1] if distance is None else distance
    config.check_eps_grid(theta_hat, distance)
    elongation = config.elongation if config.d > 1 else None
    shape, source, target = pair_shape(config.d, distance, elongation)
    flags = ["elongated"] if elongation is not None else []

    values = sample_distance_distribution(
        config.spec, shape, source, target, config.replicas, config.seed, config.threads, size_index=len(config.sizes)
    )
    thresholds = [eps * distance**theta_hat for eps in config.eps_grid]
    probabilities = _proportions(values, thresholds)
    intervals = [wilson_interval(int(round(p * len(values))), len(values)) for p in probabilities]
    included = [bool(p > 0 and high - low <= p / 2) for p, (low, high) in zip(probabilities, intervals)]

    fit = None
    kept = [i for i, keep in enumerate(included) if keep]
    if len(kept) >= 4:
        kept_thresholds = [thresholds[i] for i in kept]

        def resample(rng: np.random.Generator) -> np.ndarray:
            return _proportions(rng.choice(values, size=len(values), replace=True), kept_thresholds)

        fit = fit_power_law(
            [config.eps_grid[i] for i in kept],
            probabilities[kept].tolist(),
            rounds=config.bootstrap_rounds,
            resample=resample,
            seed=config.seed,
            flags=flags,
        )
    else:
        logging.warning(f"Only {len(kept)} grid points are resolved, the lower-tail slope is not fitted")

    return LowerTailCurve(
        distance=distance,
        theta_hat=theta_hat,
        eps=list(config.eps_grid),
        thresholds=thresholds,
        probabilities=probabilities.tolist(),
        ci_low=[low for low, _ in intervals],
        ci_high=[high for _, high in intervals],
        included=included,
        trials=len(values),
        fit=fit,
        expected_slope=2 * config.d / theta_hat,
        flags=flags,
    )


class FixedHopTail(BaseModel):
    """P(D(0, x) <= k) for a fixed hop count k as |x| grows, against the -2d decay."""

    model_config = ConfigDict(frozen=True)

    hop: int
    distances: List[int]
    probabilities: List[float]
    ci_low: List[float]
    ci_high: List[float]
    trials: int
    fit: Optional[ScalingFit] = None
    expected_slope: float

    def to_dict(self) -> Dict:
        return self.model_dump()


def fixed_hop_tail(
    config: ExperimentConfig, hop: Optional[int] = None, distances: Optional[Sequence[int]] = None
) -> FixedHopTail:
    """
    Probability of reaching a point at distance |x| within a fixed number of hops.

    Args:
        config: Experiment configuration.
        hop: k, config.hop by default.
        distances: The |x| values, config.hop_distances by default.

    Returns:
        FixedHopTail: Frequencies and, when at least four are positive, the log-log slope.
    """
    hop = config.hop if hop is None else hop
    distances = sorted(config.hop_distances if distances is None else distances)
    if not distances:
        raise FitError("At least one distance is required")
    elongation = config.elongation if config.d > 1 else None
    hits, intervals = [], []
    for index, distance in enumerate(distances):
        shape, source, target = pair_shape(config.d, distance, elongation)
        values = sample_distance_distribution(
            config.spec, shape, source, target, config.replicas, config.seed, config.threads, size_index=index
        )
        hits.append((values <= hop).astype(float))
        intervals.append(wilson_interval(int(np.sum(values <= hop)), len(values)))
    probabilities = [float(np.mean(h)) for h in hits]

    fit = None
    positive = [i for i, p in enumerate(probabilities) if p > 0]
    if len(positive) >= 4:
        fit = fit_power_law(
            [distances[i] for i in positive],
            [probabilities[i] for i in positive],
            rounds=config.bootstrap_rounds,
            resample=replicate_resampler([hits[i] for i in positive], np.mean),
            seed=config.seed,
        )
    return FixedHopTail(
        hop=hop,
        distances=distances,
        probabilities=probabilities,
        ci_low=[low for low, _ in intervals],
        ci_high=[high for _, high in intervals],
        trials=config.replicas,
        fit=fit,
        expected_slope=-2.0 * config.d,
    )
