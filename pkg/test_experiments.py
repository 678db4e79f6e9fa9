import math

import numpy as np
import pytest

from lrp.errors import BlockGeometryError, ConfigError, FitError
from lrp.experiments import (
    ExperimentConfig,
    ball_tail_experiment,
    coupling_check,
    estimate_theta,
    estimate_volume_exponent,
    fit_power_law,
    fixed_hop_tail,
    lower_tail_experiment,
    map_tasks,
    metric_box_count,
    pair_shape,
    renormalization_check,
    replica_seed,
    sample_distance_distribution,
    stretched_moment_diagnostic,
    trend_test,
    wilson_interval,
)
from lrp.experiments.checks import METRIC_COUNT_SLACK
from lrp.kernel import KernelSpec
from lrp.sampler import BoxShape

SMALL = dict(sizes=[8, 16, 32, 64], replicas=4, bootstrap_rounds=50)


def test_replica_seeds_are_stable_and_distinct():
    assert replica_seed(1, 2, 3) == replica_seed(1, 2, 3)
    seeds = {replica_seed(0, s, r) for s in range(4) for r in range(50)}
    assert len(seeds) == 200
    assert all(0 <= seed < 2**64 for seed in seeds)


def test_map_tasks_keeps_submission_order():
    assert map_tasks(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]
    assert map_tasks(str, [], threads=4) == []


def test_pair_shape():
    shape, source, target = pair_shape(1, 4)
    assert (shape.sides, source, target) == ((8,), 2, 6)
    shape, source, target = pair_shape(2, 6, elongation=5)
    assert shape.sides == (12, 5)
    assert shape.coords(source).tolist() == [3, 2]
    assert shape.coords(target).tolist() == [9, 2]


def test_fit_recovers_exact_power_law():
    x = [2.0, 4.0, 8.0, 16.0, 32.0]
    fit = fit_power_law(x, [3 * v**0.5 for v in x], rounds=200, seed=1)
    assert fit.slope == pytest.approx(0.5)
    assert fit.intercept == pytest.approx(math.log(3))
    assert fit.residual == pytest.approx(0.0, abs=1e-12)
    assert fit.ci_low <= fit.slope <= fit.ci_high
    assert fit.ci_width == pytest.approx(0.0, abs=1e-9)


def test_fit_interval_contains_noisy_slope():
    rng = np.random.default_rng(3)
    x = np.geomspace(10, 1000, 8)
    y = x**0.7 * np.exp(rng.normal(0, 0.05, size=8))
    fit = fit_power_law(x, y, rounds=500, seed=2)
    assert fit.ci_low <= fit.slope <= fit.ci_high
    assert abs(fit.slope - 0.7) < 0.1
    assert fit.rounds > 400


@pytest.mark.parametrize(
    "x, y",
    [
        ([1, 2, 3], [1, 2, 3]),
        ([1, 2, 3, 4], [1, 0, 3, 4]),
        ([2, 2, 2, 2], [1, 2, 3, 4]),
        ([1, 2, 3, 4], [1, 2, 3]),
    ],
)
def test_fit_rejects_bad_input(x, y):
    with pytest.raises(FitError):
        fit_power_law(x, y)


def test_wilson_interval():
    low, high = wilson_interval(0, 20)
    assert low == pytest.approx(0.0, abs=1e-12) and 0 < high < 0.2
    low, high = wilson_interval(10, 20)
    assert low == pytest.approx(1 - high)
    with pytest.raises(FitError):
        wilson_interval(0, 0)


def test_trend_test():
    assert trend_test([2.0, 2.0, 2.0]) == (0.0, 1.0)
    tau, p_value = trend_test(list(range(10)))
    assert tau == pytest.approx(1.0)
    assert p_value < 0.01


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(sizes=[64, 32])
    with pytest.raises(ValueError):
        ExperimentConfig(variant="power")
    with pytest.raises(ValueError):
        ExperimentConfig(unknown=1)
    config = ExperimentConfig(eps_grid=[0.5, 0.125, 0.25])
    assert config.eps_grid == [0.125, 0.25, 0.5]
    assert config.spec == KernelSpec(d=1, beta=1.0)
    assert config.with_beta(2.0).beta == 2.0


def test_canonical_text_and_hash():
    config = ExperimentConfig(beta=0.1, seed=7)
    text = config.canonical_text()
    assert "beta = 0.10000000000000001\n" in text
    assert "theta_hat = none\n" in text
    assert "sizes = [64, 128, 256, 512, 1024]\n" in text
    assert config.config_hash() == ExperimentConfig(seed=7, beta=0.1).config_hash()
    assert config.config_hash() != ExperimentConfig(beta=0.1, seed=8).config_hash()


def test_eps_grid_precondition():
    config = ExperimentConfig(**SMALL)
    with pytest.raises(ConfigError) as info:
        config.check_eps_grid(0.5, 64)
    assert info.value.key == "eps_grid"
    with pytest.raises(ConfigError):
        lower_tail_experiment(config, 0.5)


@pytest.mark.parametrize("observable", ["axis", "diagonal", "diameter"])
def test_theta_is_one_without_long_edges(observable):
    fit = estimate_theta(ExperimentConfig(beta=0.0, observable=observable, **SMALL))
    assert fit.slope == pytest.approx(1.0, abs=1e-9)
    assert fit.mean_slope == pytest.approx(1.0, abs=1e-9)
    assert len(fit.samples) == 4


def test_theta_in_two_dimensions_without_long_edges():
    fit = estimate_theta(ExperimentConfig(d=2, beta=0.0, sizes=[4, 8, 16, 32], replicas=2, bootstrap_rounds=20))
    assert fit.slope == pytest.approx(1.0, abs=1e-9)
    assert fit.y == [3.0, 7.0, 15.0, 31.0]


def test_theta_requires_four_sizes():
    with pytest.raises(FitError):
        estimate_theta(ExperimentConfig(sizes=[8, 16, 32], replicas=2))


def test_theta_is_thread_independent():
    config = ExperimentConfig(beta=1.0, **SMALL)
    single = estimate_theta(config)
    pooled = estimate_theta(config.model_copy(update={"threads": 4}))
    assert single == pooled
    assert 0 < single.slope < 1


def test_long_edges_shorten_distances():
    fit = estimate_theta(ExperimentConfig(beta=2.0, sizes=[64, 128, 256, 512], replicas=16, bootstrap_rounds=100))
    assert fit.slope < 0.9
    assert all(y < x for x, y in fit.rows())


def test_volume_growth_without_long_edges():
    growth = estimate_volume_exponent(ExperimentConfig(beta=0.0, **SMALL), theta_hat=1.0)
    assert growth.fit.slope == pytest.approx(1.0, abs=1e-9)
    assert growth.difference == pytest.approx(0.0, abs=1e-9)
    assert 32 in growth.excluded_radii
    assert all(k < 31 for k in growth.radii if k not in growth.excluded_radii)


def test_volume_growth_in_two_dimensions_without_long_edges():
    growth = estimate_volume_exponent(ExperimentConfig(d=2, beta=0.0, **SMALL), theta_hat=1.0)
    assert growth.fit.slope == pytest.approx(2.0, abs=1e-9)
    assert growth.expected == 2.0
    assert growth.difference == pytest.approx(0.0, abs=1e-9)


def test_ball_tail_without_long_edges():
    table = ball_tail_experiment(ExperimentConfig(beta=0.0, k_max=4, **SMALL), theta_hat=1.0)
    assert table.radius == 8
    assert [row.probability for row in table.rows] == [1.0, 0.0, 0.0, 0.0]
    assert table.geometric
    assert table.saturated_replicas == 0


def test_ball_tail_frequencies_decrease():
    config = ExperimentConfig(beta=1.0, sizes=[64, 128, 256, 512], replicas=40, k_max=6)
    table = ball_tail_experiment(config, theta_hat=0.6)
    probabilities = [row.probability for row in table.rows]
    assert probabilities == sorted(probabilities, reverse=True)
    assert all(row.ci_low <= row.probability <= row.ci_high for row in table.rows)


def test_stretched_moments_without_long_edges():
    moments = stretched_moment_diagnostic(ExperimentConfig(beta=0.0, **SMALL), theta_hat=1.0, eta=0.5)
    expected = [math.exp(((n - 1) / n) ** 0.5) for n in SMALL["sizes"]]
    assert moments.moments == pytest.approx(expected)
    assert moments.critical_eta is None
    half = stretched_moment_diagnostic(ExperimentConfig(beta=0.0, **SMALL), theta_hat=0.5, eta=1.0)
    assert half.critical_eta == pytest.approx(2.0)


def test_zeroth_stretched_moment_is_e():
    moments = stretched_moment_diagnostic(ExperimentConfig(beta=1.0, **SMALL), theta_hat=0.7, eta=0.0)
    assert moments.moments == pytest.approx([math.e] * len(SMALL["sizes"]))
    assert moments.bounded
    assert moments.growth == pytest.approx(1.0)


def test_monte_carlo_matches_exact_lower_tail():
    replicas = 10_000
    values = sample_distance_distribution(KernelSpec(d=1, beta=1.0), BoxShape.cube(1, 5), 0, 4, replicas, seed=42)
    frequency = float(np.mean(values <= 2))
    assert abs(frequency - 11 / 36) < 3 * math.sqrt((11 / 36) * (25 / 36) / replicas)


def test_lower_tail_curve():
    config = ExperimentConfig(beta=1.0, sizes=[16, 32, 64, 128], replicas=200, eps_grid=[0.25, 0.5, 1.0, 2.0])
    curve = lower_tail_experiment(config, theta_hat=0.5)
    assert curve.distance == 128
    assert curve.trials == 200
    assert curve.probabilities == sorted(curve.probabilities)
    assert curve.thresholds == pytest.approx([0.25 * 128**0.5, 0.5 * 128**0.5, 128**0.5, 2 * 128**0.5])
    assert curve.expected_slope == pytest.approx(4.0)
    for p, included in zip(curve.probabilities, curve.included):
        assert not included or p > 0


def test_fixed_hop_tail_without_long_edges():
    tail = fixed_hop_tail(ExperimentConfig(beta=0.0, replicas=5), hop=2, distances=[4, 8])
    assert tail.probabilities == [0.0, 0.0]
    assert tail.fit is None
    assert tail.expected_slope == -2.0


def test_fixed_hop_tail_decays():
    tail = fixed_hop_tail(ExperimentConfig(beta=1.0, replicas=300, bootstrap_rounds=100), hop=3, distances=[4, 8, 16, 32])
    assert tail.probabilities[0] > tail.probabilities[-1]


def test_coupling_check_passes():
    report = coupling_check(ExperimentConfig(sizes=[256], replicas=6), beta_low=0.5, beta_high=2.0)
    assert report.passed
    assert report.violations == 0
    assert all(low <= high for low, high in zip(report.low_edges, report.high_edges))
    assert report.to_dict()["passed"] is True


def test_renormalization_check():
    rows = renormalization_check(ExperimentConfig(d=1, beta=1.0))
    assert len(rows) == 9
    assert all(row.passed for row in rows)
    first = rows[0]
    assert (first.k, first.w) == (2, (2,))
    assert first.marginal == pytest.approx(0.25)
    assert first.to_row()[1] == "2"

    rows = renormalization_check(ExperimentConfig(d=2, beta=1.0), k_values=[2], w_values=[2])
    assert [row.w for row in rows] == [(2, 0), (2, 2)]
    assert all(row.passed for row in rows)


def test_renormalization_check_flags_power_kernel():
    rows = renormalization_check(ExperimentConfig(variant="power", s=2.0), k_values=[2], w_values=[2])
    assert not rows[0].passed
    assert rows[0].relative_error > 1e-8


def test_metric_box_count_without_long_edges():
    result = metric_box_count(ExperimentConfig(beta=0.0, sizes=[64], replicas=1), theta_hat=1.0)
    assert [row.max_count for row in result.rows] == [3, 3, 3]
    assert result.passed
    with pytest.raises(BlockGeometryError):
        metric_box_count(ExperimentConfig(sizes=[64], replicas=1), theta_hat=1.0, m_values=[5])


@pytest.mark.slow
def test_scaling_reproduction_at_desk_scale():
    config = ExperimentConfig(sizes=[2**e for e in range(6, 14)], replicas=200, threads=4)
    theta = estimate_theta(config)
    assert theta.ci_width <= 0.05
    growth = estimate_volume_exponent(config, theta.slope)
    assert abs(growth.difference) <= 0.15
    table = ball_tail_experiment(config, theta.slope)
    assert table.geometric


@pytest.mark.slow
def test_theta_decreases_with_beta():
    fits = [
        estimate_theta(ExperimentConfig(beta=beta, sizes=[2**e for e in range(6, 13)], replicas=200, threads=4))
        for beta in (0.25, 1.0, 4.0)
    ]
    for strong, weak in zip(fits[1:], fits[:-1]):
        assert strong.ci_high < weak.ci_low


@pytest.mark.slow
def test_coupling_at_desk_scale():
    report = coupling_check(ExperimentConfig(sizes=[2**12], replicas=200, threads=4))
    assert report.passed


@pytest.mark.slow
def test_lower_tail_slope_at_desk_scale():
    theta = estimate_theta(ExperimentConfig(sizes=[2**e for e in range(6, 13)], replicas=200, threads=4))
    eps_grid = [2.0 ** (e / 2) for e in range(-10, -1)]
    config = ExperimentConfig(sizes=[4096], replicas=20_000, eps_grid=eps_grid, threads=4)
    curve = lower_tail_experiment(config, theta.slope, distance=4096)
    assert curve.fit is not None
    assert abs(curve.slope - 2 / theta.slope) <= 0.3


@pytest.mark.slow
def test_metric_box_count_at_desk_scale():
    theta = estimate_theta(ExperimentConfig(sizes=[2**e for e in range(6, 12)], replicas=100, threads=4))
    result = metric_box_count(ExperimentConfig(sizes=[4096], replicas=20, threads=4), theta.slope, m_values=[8, 16, 32])
    assert [row.m for row in result.rows] == [8, 16, 32]
    assert result.passed
    assert result.slope <= METRIC_COUNT_SLACK * result.rows[0].ratio


@pytest.mark.slow
def test_stretched_moments_stay_bounded():
    config = ExperimentConfig(sizes=[2**e for e in range(6, 11)], replicas=200, threads=4)
    theta = estimate_theta(config)
    moments = stretched_moment_diagnostic(config, theta.slope, eta=0.5 / (1 - theta.slope))
    assert moments.bounded
