from argparse import ArgumentParser, Namespace
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional

import logging
import sys

from ..errors import ConfigError, InvariantViolation
from ..experiments import (
    ExperimentConfig,
    ball_tail_experiment,
    coupling_check,
    estimate_theta,
    estimate_volume_exponent,
    fixed_hop_tail,
    lower_tail_experiment,
    metric_box_count,
    renormalization_check,
    replica_seed,
    stretched_moment_diagnostic,
)
from ..graphdist import ball_curve, bfs_distances, diameter
from ..kernel import KernelTable
from ..renorm import BlockGrid, box_count, classify_interior_blocks
from ..sampler import BoxShape, Environment, sample_box, serialize
from .config_file import parse_config, parse_value
from .outputs import OutputWriter, RunManifest
from .report import emit_report

Handler = Callable[[ExperimentConfig, OutputWriter, Namespace], int]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _largest_environment(config: ExperimentConfig) -> Environment:
    size_index = len(config.sizes) - 1
    shape = BoxShape.cube(config.d, config.sizes[-1])
    return sample_box(config.spec, shape, replica_seed(config.seed, size_index, 0))


def _theta_hat(config: ExperimentConfig, writer: OutputWriter) -> float:
    if config.theta_hat is not None:
        return config.theta_hat
    logging.info(">> No theta_hat configured, estimating it first")
    return _write_theta(config, writer)


def _write_theta(config: ExperimentConfig, writer: OutputWriter) -> float:
    fit = estimate_theta(config)
    writer.write_json("theta.json", fit.to_dict())
    writer.write_csv("theta.csv", ["n", "x", "median"], [(n, x, y) for n, (x, y) in zip(config.sizes, fit.rows())])
    return fit.slope


def run_sample(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    rows = []
    for size_index, n in enumerate(config.sizes):
        seed = replica_seed(config.seed, size_index, 0)
        env = sample_box(config.spec, BoxShape.cube(config.d, n), seed)
        writer.write_bytes(f"env_{n}.lrp", serialize(env))
        rows.append((n, seed, env.edge_count, env.content_hash()))
        print(env)
    writer.write_csv("environments.csv", ["n", "seed", "long_edges", "sha256"], rows)
    return 0


def run_distances(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    env = _largest_environment(config)
    field = bfs_distances(env, [0])
    writer.write_csv("distances.csv", ["vertex", "distance"], field.to_rows())
    curve = ball_curve(env, env.shape.center(), env.shape.n // 2)
    writer.write_csv("ball_curve.csv", ["k", "size", "saturated"], curve.to_rows())
    mode = "exact" if env.volume <= config.diameter_threshold else "double_sweep"
    dia = diameter(env, mode=mode, threshold=config.diameter_threshold, threads=config.threads)
    writer.write_json(
        "distances.json",
        {
            "n": env.shape.n,
            "eccentricity": field.eccentricity(),
            "farthest": field.farthest(),
            "diameter": dia.value,
            "diameter_exact": dia.exact,
            "ball_saturated_from": curve.saturated_from,
        },
    )
    print(f"eccentricity of 0: {field.eccentricity()}, diameter {'=' if dia.exact else '>='} {dia.value}")
    return 0


def run_theta(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    print(f"theta_hat = {_write_theta(config, writer):.6f}")
    return 0


def run_growth(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    growth = estimate_volume_exponent(config, _theta_hat(config, writer))
    writer.write_json("growth.json", growth.to_dict())
    writer.write_csv("growth.csv", ["k", "median_size"], [((x - 1) / 2, y) for x, y in growth.fit.rows()])
    print(f"volume slope = {growth.fit.slope:.6f}, d/theta_hat = {growth.expected:.6f}")
    return 0


def run_lowertail(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    curve = lower_tail_experiment(config, _theta_hat(config, writer))
    writer.write_json("lowertail.json", curve.to_dict())
    writer.write_csv("lowertail.csv", ["eps", "threshold", "probability", "ci_low", "ci_high", "included"], curve.rows())
    print(f"lower-tail slope = {curve.slope}, 2d/theta_hat = {curve.expected_slope:.6f}")
    return 0


def run_balltail(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    table = ball_tail_experiment(config, _theta_hat(config, writer))
    writer.write_json("balltail.json", table.to_dict())
    writer.write_csv(
        "balltail.csv",
        ["K", "threshold", "exceedances", "trials", "probability", "ci_low", "ci_high"],
        [tuple(row.model_dump().values()) for row in table.rows],
    )
    print(f"ball tail geometric: {table.geometric}")
    return 0


def run_renorm_check(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    rows = renormalization_check(config)
    writer.write_csv(
        "renorm_check.csv",
        ["k", "w", "block_sum", "J", "marginal", "p", "relative_error", "passed"],
        [row.to_row() for row in rows],
    )
    for row in rows:
        print(f"k={row.k} w={row.w}: marginal {row.marginal!r} p {row.probability!r} {'PASS' if row.passed else 'FAIL'}")
    return 0 if all(row.passed for row in rows) else 1


def run_good_blocks(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    theta_hat = _theta_hat(config, writer)
    env = _largest_environment(config)
    reports = classify_interior_blocks(env, BlockGrid(env, config.block_k), config.delta, theta_hat, config.threads)
    writer.write_csv(
        "good_blocks.csv",
        ["block", "good", "good1", "good2", "good3", "witness_dist", "delta", "theta_hat"],
        [report.to_row() for report in reports],
    )
    writer.write_json(
        "good_blocks.json",
        {"delta": config.delta, "theta_hat": theta_hat, "k": config.block_k, "reports": [r.to_dict() for r in reports]},
    )
    print(f"{sum(r.good for r in reports)}/{len(reports)} interior blocks are good")
    return 0


def run_boxcount(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    env = _largest_environment(config)
    result = box_count(env, BlockGrid(env, config.block_k), max(config.box_radii))
    writer.write_csv("boxcount.csv", ["r", "X_k"], result.rows(config.box_radii))
    writer.write_json("boxcount.json", result.to_dict())
    print(f"X_k(r={result.radius}) = {result.count}")
    return 0


def run_coupling_check(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    report = coupling_check(config)
    writer.write_json("coupling.json", report.to_dict())
    print(f"{report.violations} monotonicity violation(s) over {report.replicas} replicas")
    return 0 if report.passed else 1


def run_moments(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    moments = stretched_moment_diagnostic(config, _theta_hat(config, writer), config.eta)
    writer.write_json("moments.json", moments.to_dict())
    writer.write_csv("moments.csv", ["n", "moment"], zip(moments.sizes, moments.moments))
    print(f"stretched moments bounded: {moments.bounded}")
    return 0


def run_metricbox(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    result = metric_box_count(config, _theta_hat(config, writer))
    writer.write_json("metric_box.json", result.to_dict())
    writer.write_csv(
        "metric_box.csv",
        ["m", "radius", "max_count", "mean_count", "ratio"],
        [tuple(row.model_dump().values()) for row in result.rows],
    )
    print(f"metric box count passed: {result.passed}")
    return 0


def run_hoptail(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    tail = fixed_hop_tail(config)
    writer.write_json("hoptail.json", tail.to_dict())
    writer.write_csv(
        "hoptail.csv",
        ["distance", "probability", "ci_low", "ci_high"],
        zip(tail.distances, tail.probabilities, tail.ci_low, tail.ci_high),
    )
    print(f"fixed-hop slope = {None if tail.fit is None else tail.fit.slope}")
    return 0


def run_kernel_dump(config: ExperimentConfig, writer: OutputWriter, args: Namespace) -> int:
    table = KernelTable(config.spec, args.radius)
    rows = [("x".join(str(c) for c in key), value, p) for key, value, p in table.rows()]
    writer.write_csv("kernel.csv", ["w_canonical", "J", "p"], rows)
    return 0


COMMANDS: Dict[str, Handler] = {
    "sample": run_sample,
    "distances": run_distances,
    "growth": run_growth,
    "lowertail": run_lowertail,
    "balltail": run_balltail,
    "renorm-check": run_renorm_check,
    "good-blocks": run_good_blocks,
    "boxcount": run_boxcount,
    "coupling-check": run_coupling_check,
    "theta": run_theta,
    "moments": run_moments,
    "metricbox": run_metricbox,
    "hoptail": run_hoptail,
    "kernel-dump": run_kernel_dump,
}


def _list_flag(text: str) -> List[Any]:
    return parse_value(text if text.strip().startswith("[") else f"[{text}]")


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="worker threads (fallback: LRP_THREADS)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--d", type=int, help="dimension")
    common.add_argument("--beta", type=float, help="kernel intensity")
    common.add_argument("--delta", type=float, help="good-block threshold factor")
    common.add_argument("--block-k", dest="block_k", type=int, help="block side")
    common.add_argument("--sizes", type=_list_flag, help="box sizes, e.g. 64,128,256,512")
    common.add_argument("--replicas", type=int, help="replicas per size")
    common.add_argument("--eps-grid", dest="eps_grid", type=_list_flag, help="lower-tail grid")
    common.add_argument("--theta-hat", dest="theta_hat", type=float, help="distance exponent, skips estimation")
    common.add_argument("--verbose", action="store_true", help="log progress")

    parser = ArgumentParser(prog="lrp", description="Long-range percolation with the self-similar kernel")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        subparser = subparsers.add_parser(name, parents=[common])
        if name == "kernel-dump":
            subparser.add_argument("--radius", type=int, default=16, help="largest sup-norm in the dump")
    report = subparsers.add_parser("report", help="summarize an output directory")
    report.add_argument("--out", default="out", help="output directory")
    report.add_argument("--verbose", action="store_true", help="log progress")
    return parser


FLAG_KEYS = ("seed", "threads", "d", "beta", "delta", "block_k", "sizes", "replicas", "eps_grid", "theta_hat")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        int: 0 on success, 1 when an invariant is violated, 2 for usage errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    if args.command == "report":
        try:
            text = emit_report(args.out)
        except FileNotFoundError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        OutputWriter(args.out).write_text("summary.txt", text)
        print(text, end="")
        return 0

    try:
        config = parse_config(args.config, {key: getattr(args, key) for key in FLAG_KEYS})
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    writer = OutputWriter(args.out)
    started = _now()
    try:
        status = COMMANDS[args.command](config, writer, args)
    except InvariantViolation as e:
        logging.error(f"\033[91m✖ {e}\033[0m")
        print(f"invariant violated: {e}", file=sys.stderr)
        writer.remove_all()
        return 1
    except (ValueError, MemoryError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        writer.remove_all()
        return 2
    if status != 0:
        writer.remove_all()
        return status

    writer.write_text("config.txt", config.canonical_text())
    outputs = list(writer.written) + ["manifest.json"]
    manifest = RunManifest(
        config_hash=config.config_hash(),
        seed=config.seed,
        subcommand=args.command,
        outputs=outputs,
        started=started,
        finished=_now(),
    )
    writer.write_json("manifest.json", manifest.to_dict())
    logging.info(f"\033[92m✔ {args.command} wrote {len(outputs)} file(s) to {writer.directory}\033[0m")
    return 0


if __name__ == "__main__":
    sys.exit(main())
