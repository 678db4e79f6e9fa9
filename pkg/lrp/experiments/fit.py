from typing import Callable, Dict, List, Optional, Sequence, Tuple

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import stats

from ..errors import FitError

MIN_FIT_POINTS = 4
BOOTSTRAP_STREAM = 7

Resampler = Callable[[np.random.Generator], Optional[np.ndarray]]


class ScalingFit(BaseModel):
    """
    Least-squares line through (log x, log y) with a bootstrap interval.

    Attributes:
        x (List[float]): Abscissas.
        y (List[float]): Ordinates, e.g. the per-size medians.
        slope (float): Fitted exponent.
        intercept (float): Fitted log prefactor.
        ci_low (float): Lower end of the 95% bootstrap interval.
        ci_high (float): Upper end of the 95% bootstrap interval.
        residual (float): Root mean square residual in log space.
        rounds (int): Bootstrap rounds that produced a slope.
        mean_slope (Optional[float]): Slope of the means, when reported.
        flags (List[str]): Caveats such as elongated boxes or lower-bound data.
        samples (List[List[float]]): Replicate-level data behind each ordinate, when kept.
    """

    model_config = ConfigDict(frozen=True)

    x: List[float]
    y: List[float]
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    residual: float
    rounds: int = 0
    mean_slope: Optional[float] = None
    flags: List[str] = []
    samples: List[List[float]] = []

    @model_validator(mode="after")
    def _check_interval(self) -> "ScalingFit":
        if not self.ci_low <= self.slope <= self.ci_high:
            raise ValueError("Confidence interval must contain the slope")
        if len(self.x) < MIN_FIT_POINTS:
            raise ValueError(f"A scaling fit needs at least {MIN_FIT_POINTS} points")
        return self

    @property
    def ci_width(self) -> float:
        return self.ci_high - self.ci_low

    @property
    def abscissas(self) -> List[float]:
        return [math.log(v) for v in self.x]

    @property
    def ordinates(self) -> List[float]:
        return [math.log(v) for v in self.y]

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.x, self.y))

    def to_dict(self) -> Dict:
        return {**self.model_dump(), "ci_width": self.ci_width}


def _line(log_x: np.ndarray, log_y: np.ndarray) -> Tuple[float, float]:
    result = stats.linregress(log_x, log_y)
    return float(result.slope), float(result.intercept)


def fit_power_law(
    x: Sequence[float],
    y: Sequence[float],
    rounds: int = 1000,
    resample: Optional[Resampler] = None,
    seed: int = 0,
    flags: Sequence[str] = (),
) -> ScalingFit:
    """
    Fit y ~ A x^slope by least squares in log-log coordinates.

    Args:
        x: Positive abscissas.
        y: Positive ordinates.
        rounds: Bootstrap rounds, 0 to skip the bootstrap.
        resample: Draws bootstrap ordinates from replicate-level data; the
            (x, y) points themselves are resampled when it is missing.
            Returning None discards the round.
        seed: Seed of the bootstrap stream.
        flags: Caveats carried into the result.

    Returns:
        ScalingFit: Slope, intercept and the 95% percentile interval.

    Raises:
        FitError: For fewer than four points or nonpositive values.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise FitError("x and y must have the same length")
    if len(x) < MIN_FIT_POINTS:
        raise FitError(f"A scaling fit needs at least {MIN_FIT_POINTS} points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise FitError("Power-law fits need finite positive values")
    if len(np.unique(x)) < 2:
        raise FitError("A scaling fit needs at least two distinct abscissas")

    log_x, log_y = np.log(x), np.log(y)
    slope, intercept = _line(log_x, log_y)
    residual = float(np.sqrt(np.mean((log_y - (intercept + slope * log_x)) ** 2)))

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), BOOTSTRAP_STREAM]))
    slopes = []
    for _ in range(rounds):
        if resample is None:
            picks = rng.integers(0, len(x), size=len(x))
            if len(np.unique(x[picks])) < 2:
                continue
            slopes.append(_line(log_x[picks], log_y[picks])[0])
        else:
            ordinates = resample(rng)
            if ordinates is None or np.any(ordinates <= 0):
                continue
            slopes.append(_line(log_x, np.log(ordinates))[0])

    if slopes:
        low, high = np.percentile(slopes, [2.5, 97.5])
        # widened to contain the slope
        low, high = min(float(low), slope), max(float(high), slope)
    else:
        if rounds:
            logging.warning("Every bootstrap round was degenerate, reporting a zero-width interval")
        low = high = slope
    return ScalingFit(
        x=x.tolist(),
        y=y.tolist(),
        slope=slope,
        intercept=intercept,
        ci_low=low,
        ci_high=high,
        residual=residual,
        rounds=len(slopes),
        flags=list(flags),
    )


def replicate_resampler(samples: Sequence[np.ndarray], statistic: Callable = np.median) -> Resampler:
    """Resample every per-size sample with replacement and reduce it by `statistic`."""
    samples = [np.asarray(s, dtype=float) for s in samples]

    def resample(rng: np.random.Generator) -> np.ndarray:
        return np.array([statistic(rng.choice(s, size=len(s), replace=True)) for s in samples])

    return resample


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval of a binomial proportion."""
    if trials < 1:
        raise FitError("A proportion needs at least one trial")
    interval = stats.binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(interval.low), float(interval.high)


def trend_test(values: Sequence[float]) -> Tuple[float, float]:
    """
    Mann-Kendall trend test as Kendall's tau of the sequence against its index.

    Returns:
        Tuple[float, float]: (tau, p-value); a constant sequence gives (0, 1).
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2 or np.all(values == values[0]):
        return 0.0, 1.0
    result = stats.kendalltau(np.arange(len(values)), values)
    tau, p_value = float(result.statistic), float(result.pvalue)
    if math.isnan(tau):
        return 0.0, 1.0
    return tau, p_value
