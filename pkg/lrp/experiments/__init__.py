from .checks import (
    CouplingReport,
    MarginalCheck,
    MetricBoxCount,
    MetricBoxRow,
    block_counts,
    coupling_check,
    metric_box_count,
    renormalization_check,
)
from .config import DEFAULT_EPS_GRID, DEFAULT_SIZES, ExperimentConfig, format_value
from .fit import ScalingFit, fit_power_law, replicate_resampler, trend_test, wilson_interval
from .runner import map_tasks, pair_shape, replica_seed, sample_distance_distribution
from .scaling import (
    BallTailRow,
    BallTailTable,
    StretchedMoments,
    VolumeGrowth,
    ball_tail_experiment,
    estimate_theta,
    estimate_volume_exponent,
    stretched_moment_diagnostic,
)
from .tails import FixedHopTail, LowerTailCurve, fixed_hop_tail, lower_tail_experiment
