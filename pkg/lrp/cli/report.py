from pathlib import Path
from typing import Dict, List, Optional, Tuple

import csv
import json

VOLUME_TOLERANCE = 0.15
LOWER_TAIL_TOLERANCE = 0.3
THETA_CI_WIDTH = 0.05

RESULT_FILES = (
    "theta.json",
    "growth.json",
    "lowertail.json",
    "balltail.json",
    "renorm_check.csv",
    "coupling.json",
    "moments.json",
    "metric_box.json",
    "hoptail.json",
    "good_blocks.json",
    "boxcount.json",
)


def _load(directory: Path, name: str) -> Optional[Dict]:
    path = directory / name
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _verdict(passed: bool) -> str:
    return "PASS" if passed else "FAIL"


def _interval(fit: Dict) -> str:
    return f"{fit['slope']:.3f} [{fit['ci_low']:.3f}, {fit['ci_high']:.3f}]"


def emit_report(directory) -> str:
    """
    One-page summary of the results in an output directory.

    Args:
        directory: Output directory of one or more runs.

    Returns:
        str: The summary text.

    Raises:
        FileNotFoundError: If the directory holds no result files.
    """
    directory = Path(directory)
    present = [name for name in RESULT_FILES if (directory / name).exists()]
    if not present:
        raise FileNotFoundError(f"No run outputs in {directory}")

    lines: List[str] = [f"Results in {directory}", ""]
    checks: List[Tuple[str, bool]] = []

    theta = _load(directory, "theta.json")
    if theta is not None:
        lines.append(f"theta_hat = {_interval(theta)} from medians over {len(theta['x'])} sizes")
        if theta.get("mean_slope") is not None:
            lines.append(f"  mean-based slope = {theta['mean_slope']:.3f}")
        if theta.get("flags"):
            lines.append(f"  flags: {', '.join(theta['flags'])}")
        checks.append((f"theta CI width <= {THETA_CI_WIDTH}", theta["ci_high"] - theta["ci_low"] <= THETA_CI_WIDTH))

    growth = _load(directory, "growth.json")
    if growth is not None:
        lines.append(f"volume slope = {_interval(growth['fit'])} vs d/theta_hat = {growth['expected']:.3f}")
        if growth["excluded_radii"]:
            lines.append(f"  excluded saturated radii: {growth['excluded_radii']}")
        checks.append((f"volume slope within {VOLUME_TOLERANCE} of d/theta_hat", abs(growth["difference"]) <= VOLUME_TOLERANCE))

    lower = _load(directory, "lowertail.json")
    if lower is not None:
        if lower["fit"] is None:
            lines.append(f"lower-tail slope not fitted (2d/theta_hat = {lower['expected_slope']:.3f})")
        else:
            lines.append(f"lower-tail slope = {_interval(lower['fit'])} vs 2d/theta_hat = {lower['expected_slope']:.3f}")
            deviation = abs(lower["fit"]["slope"] - lower["expected_slope"])
            checks.append((f"lower-tail slope within {LOWER_TAIL_TOLERANCE} of 2d/theta_hat", deviation <= LOWER_TAIL_TOLERANCE))

    tail = _load(directory, "balltail.json")
    if tail is not None:
        frequencies = ", ".join(f"{row['probability']:.3f}" for row in tail["rows"])
        lines.append(f"ball tail at r={tail['radius']}: P(K) = {frequencies}")
        if tail["saturated_replicas"]:
            lines.append(f"  {tail['saturated_replicas']} saturated replica(s)")
        checks.append(("ball-tail frequencies decay geometrically", tail["geometric"]))

    moments = _load(directory, "moments.json")
    if moments is not None:
        values = ", ".join(f"{m:.4f}" for m in moments["moments"])
        lines.append(f"stretched moments (eta={moments['eta']:.3f}): {values}")
        checks.append(("stretched moments bounded", moments["bounded"]))

    metric = _load(directory, "metric_box.json")
    if metric is not None:
        counts = ", ".join(f"m={row['m']}: {row['max_count']}" for row in metric["rows"])
        lines.append(f"metric box counts: {counts}")
        checks.append(("metric box counts grow at most like log m", metric["passed"]))

    hop = _load(directory, "hoptail.json")
    if hop is not None and hop["fit"] is not None:
        lines.append(f"fixed-hop tail slope = {_interval(hop['fit'])} vs {hop['expected_slope']:.1f}")

    coupling = _load(directory, "coupling.json")
    if coupling is not None:
        lines.append(f"coupling {coupling['beta_low']} <= {coupling['beta_high']}: {coupling['violations']} violation(s)")
        checks.append(("coupling monotonicity", coupling["passed"]))

    marginal_path = directory / "renorm_check.csv"
    if marginal_path.exists():
        with open(marginal_path, "r", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        checks.append((f"block marginal identity ({len(rows)} cases)", all(row["passed"] == "1" for row in rows)))

    blocks = _load(directory, "good_blocks.json")
    if blocks is not None:
        good = sum(1 for report in blocks["reports"] if report["good"])
        lines.append(f"good blocks: {good}/{len(blocks['reports'])} at delta={blocks['delta']}")

    lines.append("")
    lines.extend(f"{_verdict(passed)}  {name}" for name, passed in checks)
    return "\n".join(lines) + "\n"
