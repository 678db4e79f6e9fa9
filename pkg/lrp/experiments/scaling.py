from typing import Callable, Dict, List, Optional, Sequence, Tuple

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..errors import FitError
from ..graphdist import ball_curve, diameter, distance_between
from ..sampler import BoxShape, Environment, sample_box
from .config import ExperimentConfig
from .fit import ScalingFit, fit_power_law, replicate_resampler, trend_test, wilson_interval
from .runner import map_tasks, replica_seed, require_sizes

# growth of the last moment over the first that still counts as flat
MOMENT_GROWTH_TOLERANCE = 1.05
TREND_LEVEL = 0.05


def _theta_observation(config: ExperimentConfig, n: int) -> Tuple[BoxShape, Callable[[Environment], int], float, List[str]]:
    d = config.d
    flags: List[str] = []
    if config.observable == "axis":
        if d > 1 and config.elongation is not None:
            shape = BoxShape(sides=(n,) + (config.elongation,) * (d - 1))
            flags.append("elongated")
        else:
            shape = BoxShape.cube(d, n)
        target = shape.index([n - 1] + [0] * (d - 1))
        return shape, lambda env: distance_between(env, 0, target), float(n - 1), flags
    shape = BoxShape.cube(d, n)
    if config.observable == "diagonal":
        target = shape.volume - 1
        return shape, lambda env: distance_between(env, 0, target), (n - 1) * math.sqrt(d), flags
    mode = "exact" if shape.volume <= config.diameter_threshold else "double_sweep"
    if mode != "exact":
        flags.append("diameter-lower-bound")

    def measure(env: Environment) -> int:
        return diameter(env, mode=mode, threshold=config.diameter_threshold).value

    return shape, measure, float(n - 1), flags


def estimate_theta(config: ExperimentConfig) -> ScalingFit:
    """
    Estimate the distance exponent from the growth of median distances.

    The observable is D(0, (n - 1) e_1) by default, D(0, (n - 1) 1) for
    "diagonal" and the box diameter for "diameter". The slope of the log median
    against log |x| is reported with a replica bootstrap interval; the slope of
    the means is attached as `mean_slope`.

    Args:
        config: Experiment configuration with at least four sizes.

    Returns:
        ScalingFit: theta_hat as the slope, per-size medians as ordinates.

    Raises:
        FitError: For fewer than four sizes.
    """
    require_sizes(config)
    abscissas, samples, flags = [], [], set()
    for size_index, n in enumerate(config.sizes):
        shape, measure, abscissa, size_flags = _theta_observation(config, n)
        flags.update(size_flags)

        def replica(r: int, shape=shape, measure=measure, size_index=size_index) -> int:
            return measure(sample_box(config.spec, shape, replica_seed(config.seed, size_index, r)))

        values = np.array(map_tasks(replica, range(config.replicas), config.threads), dtype=float)
        logging.info(f">> n={n}: median {config.observable} distance {np.median(values)}")
        abscissas.append(abscissa)
        samples.append(values)

    medians = [float(np.median(s)) for s in samples]
    means = [float(np.mean(s)) for s in samples]
    fit = fit_power_law(
        abscissas,
        medians,
        rounds=config.bootstrap_rounds,
        resample=replicate_resampler(samples),
        seed=config.seed,
        flags=sorted(flags),
    )
    mean_fit = fit_power_law(abscissas, means, rounds=0)
    logging.info(f"<< theta_hat = {fit.slope:.4f} [{fit.ci_low:.4f}, {fit.ci_high:.4f}]")
    return fit.model_copy(update={"mean_slope": mean_fit.slope, "samples": [s.tolist() for s in samples]})


class VolumeGrowth(BaseModel):
    """Volume-growth fit compared with d / theta_hat."""

    model_config = ConfigDict(frozen=True)

    fit: ScalingFit
    theta_hat: float
    expected: float
    difference: float
    difference_ci: Tuple[float, float]
    radii: List[int]
    excluded_radii: List[int]

    def to_dict(self) -> Dict:
        return self.model_dump()


def _radius_grid(k_max: int, points: int = 16) -> List[int]:
    return sorted({int(round(k)) for k in np.geomspace(1, max(k_max, 1), points)})


def estimate_volume_exponent(config: ExperimentConfig, theta_hat: float) -> VolumeGrowth:
    """
    Estimate the volume-growth exponent from ball sizes at the largest box size.

    Radii at which any replica's ball has reached the box boundary are
    discarded; the remaining median |B_k| are fitted against 2k + 1.

    Args:
        config: Experiment configuration.
        theta_hat: Distance exponent to compare with.

    Returns:
        VolumeGrowth: The fit, d / theta_hat and their difference.

    Raises:
        FitError: If saturation leaves fewer than four radii.
    """
    n = config.sizes[-1]
    shape = BoxShape.cube(config.d, n)
    radii = _radius_grid(n // 2)
    size_index = len(config.sizes) - 1

    def replica(r: int):
        env = sample_box(config.spec, shape, replica_seed(config.seed, size_index, r))
        return ball_curve(env, shape.center(), radii[-1])

    curves = map_tasks(replica, range(config.replicas), config.threads)
    kept = [k for k in radii if not any(curve.saturated[k] for curve in curves)]
    excluded = [k for k in radii if k not in kept]
    if not kept:
        raise FitError("Every ball curve is saturated at every radius")
    if excluded:
        logging.warning(f"Excluding saturated radii {excluded}")
    samples = [np.array([curve.sizes[k] for curve in curves], dtype=float) for k in kept]
    fit = fit_power_law(
        [2 * k + 1 for k in kept],
        [float(np.median(s)) for s in samples],
        rounds=config.bootstrap_rounds,
        resample=replicate_resampler(samples),
        seed=config.seed,
    )
    expected = config.d / theta_hat
    return VolumeGrowth(
        fit=fit,
        theta_hat=theta_hat,
        expected=expected,
        difference=fit.slope - expected,
        difference_ci=(fit.ci_low - expected, fit.ci_high - expected),
        radii=radii,
        excluded_radii=excluded,
    )


class BallTailRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    K: int
    threshold: float
    exceedances: int
    trials: int
    probability: float
    ci_low: float
    ci_high: float


class BallTailTable(BaseModel):
    """
    Exceedance frequencies P(|B_r| >= C K r^(d / theta_hat)) against K.

    Attributes:
        n: Box size.
        radius: Chemical radius r.
        scale: C, the median of |B_r| r^(-d / theta_hat).
        rows: One row per K.
        decay_rate: Fitted decrease of log P per unit K over the observable rows.
        geometric: Whether the frequencies are nonincreasing and decay at least geometrically.
        saturated_replicas: Replicas whose ball reached the box boundary.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    radius: int
    theta_hat: float
    scale: float
    rows: List[BallTailRow]
    decay_rate: Optional[float]
    geometric: bool
    saturated_replicas: int

    def to_dict(self) -> Dict:
        return self.model_dump()


def ball_tail_experiment(config: ExperimentConfig, theta_hat: float, k_values: Optional[Sequence[int]] = None) -> BallTailTable:
    """
    Tail of the ball volume at the largest box size.

    Args:
        config: Experiment configuration.
        theta_hat: Distance exponent.
        k_values: Multiples K, 1..config.k_max by default.

    Returns:
        BallTailTable: Frequencies with Wilson intervals.
    """
    n = config.sizes[-1]
    shape = BoxShape.cube(config.d, n)
    radius = max(1, int(math.floor((n / 8) ** theta_hat)))
    size_index = len(config.sizes) - 1
    k_values = list(range(1, config.k_max + 1)) if k_values is None else sorted(k_values)

    def replica(r: int):
        env = sample_box(config.spec, shape, replica_seed(config.seed, size_index, r))
        return ball_curve(env, shape.center(), radius)

    curves = map_tasks(replica, range(config.replicas), config.threads)
    volumes = np.array([curve.sizes[radius] for curve in curves], dtype=float)
    saturated = sum(curve.is_saturated for curve in curves)
    if saturated:
        logging.warning(f"{saturated} ball(s) of radius {radius} reached the boundary of the {n}-box")
    growth = radius ** (config.d / theta_hat)
    scale = float(np.median(volumes)) / growth

    rows = []
    for K in k_values:
        threshold = scale * K * growth
        hits = int(np.sum(volumes >= threshold))
        low, high = wilson_interval(hits, len(volumes))
        rows.append(
            BallTailRow(
                K=K,
                threshold=threshold,
                exceedances=hits,
                trials=len(volumes),
                probability=hits / len(volumes),
                ci_low=low,
                ci_high=high,
            )
        )

    probabilities = [row.probability for row in rows]
    monotone = all(b <= a for a, b in zip(probabilities, probabilities[1:]))
    observable = [(row.K, row.probability) for row in rows if row.probability > 0]
    decay_rate = None
    if len(observable) >= 2 and len({p for _, p in observable}) >= 2:
        ks, ps = zip(*observable)
        decay_rate = -float(np.polyfit(ks, np.log(ps), 1)[0])
    return BallTailTable(
        n=n,
        radius=radius,
        theta_hat=theta_hat,
        scale=scale,
        rows=rows,
        decay_rate=decay_rate,
        geometric=monotone and (decay_rate is None or decay_rate > 0),
        saturated_replicas=saturated,
    )


class StretchedMoments(BaseModel):
    """Empirical E[exp((dia / n^theta_hat)^eta)] per size with a trend verdict."""

    model_config = ConfigDict(frozen=True)

    sizes: List[int]
    moments: List[float]
    eta: float
    theta_hat: float
    critical_eta: Optional[float]
    tau: float
    p_value: float
    growth: float
    bounded: bool

    def to_dict(self) -> Dict:
        return self.model_dump()


def stretched_moment_diagnostic(config: ExperimentConfig, theta_hat: float, eta: float) -> StretchedMoments:
    """
    Check that stretched exponential moments of the rescaled diameter stay bounded.

    The sequence counts as unbounded when Kendall's tau shows an upward trend
    at the 5% level and the last moment exceeds the first by more than 5%.

    Raises:
        DiameterThresholdError: If a box is too large for an exact diameter.
    """
    moments = []
    for size_index, n in enumerate(config.sizes):
        shape = BoxShape.cube(config.d, n)

        def replica(r: int, shape=shape, size_index=size_index) -> int:
            env = sample_box(config.spec, shape, replica_seed(config.seed, size_index, r))
            return diameter(env, threshold=config.diameter_threshold).value

        diameters = np.array(map_tasks(replica, range(config.replicas), config.threads), dtype=float)
        moments.append(float(np.mean(np.exp((diameters / n**theta_hat) ** eta))))
    tau, p_value = trend_test(moments)
    growth = moments[-1] / moments[0]
    bounded = not (tau > 0 and p_value < TREND_LEVEL and growth > MOMENT_GROWTH_TOLERANCE)
    return StretchedMoments(
        sizes=list(config.sizes),
        moments=moments,
        eta=eta,
        theta_hat=theta_hat,
        critical_eta=None if theta_hat >= 1 else 1 / (1 - theta_hat),
        tau=tau,
        p_value=p_value,
        growth=growth,
        bounded=bounded,
    )
