from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Tuple, TypeVar

import logging

import numpy as np

from ..errors import FitError
from ..kernel import KernelSpec
from ..sampler import BoxShape, sample_box
from ..graphdist import distance_between
from .config import ExperimentConfig

T = TypeVar("T")
R = TypeVar("R")


def replica_seed(master_seed: int, size_index: int, replica_index: int) -> int:
    """64-bit seed of one replica, a hash of (master seed, size index, replica index)."""
    sequence = np.random.SeedSequence([int(master_seed), int(size_index), int(replica_index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def map_tasks(function: Callable[[T], R], tasks: Iterable[T], threads: int = 1) -> List[R]:
    """Apply `function` to every task on a thread pool, results in submission order."""
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [function(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, tasks))


def replica_seeds(config: ExperimentConfig, size_index: int, replicas: Optional[int] = None) -> List[int]:
    count = config.replicas if replicas is None else replicas
    return [replica_seed(config.seed, size_index, r) for r in range(count)]


def require_sizes(config: ExperimentConfig, minimum: int = 4) -> None:
    if len(config.sizes) < minimum:
        raise FitError(f"At least {minimum} box sizes are required, got {len(config.sizes)}")


def pair_shape(d: int, distance: int, elongation: Optional[int] = None) -> Tuple[BoxShape, int, int]:
    """
    Box of side 2 |x| along the first axis holding a source at |x| / 2 and its target at distance |x|.

    Returns:
        Tuple[BoxShape, int, int]: (shape, source vertex, target vertex).
    """
    side = 2 * distance
    cross = side if elongation is None else elongation
    shape = BoxShape(sides=(side,) + (cross,) * (d - 1))
    start = [distance // 2] + [cross // 2] * (d - 1)
    end = [distance // 2 + distance] + [cross // 2] * (d - 1)
    return shape, shape.index(start), shape.index(end)


def sample_distance_distribution(
    spec: KernelSpec,
    shape: BoxShape,
    source: int,
    target: int,
    replicas: int,
    seed: int,
    threads: int = 1,
    size_index: int = 0,
) -> np.ndarray:
    """
    D(source, target) over independent replicas.

    Args:
        spec: Kernel parameters.
        shape: The box.
        source: Source vertex.
        target: Target vertex.
        replicas: Number of environments.
        seed: Master seed.
        threads: Worker threads.
        size_index: Index mixed into the replica seeds.

    Returns:
        np.ndarray: One distance per replica, in replica order.
    """

    def measure(replica: int) -> int:
        env = sample_box(spec, shape, replica_seed(seed, size_index, replica))
        return distance_between(env, source, target)

    logging.info(f">> Sampling D({source}, {target}) on {shape.label}^{shape.d} over {replicas} replicas")
    return np.array(map_tasks(measure, range(replicas), threads), dtype=np.int64)

