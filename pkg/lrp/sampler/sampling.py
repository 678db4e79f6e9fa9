from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import logging
import threading

import numpy as np

from ..errors import CouplingError, SamplingResourceError
from ..kernel import Displacement, KernelSpec, KernelTable, canonical
from .box import BoxShape, CouplingPair, Environment, half_space_displacements

# stream tags mixed into every SeedSequence entropy tuple
COUNT_STREAM = 0
PLACEMENT_STREAM = 1
UNIFORM_STREAM = 2

TABLE_CACHE_SIZE = 16

_tables_lock = threading.Lock()


@lru_cache(maxsize=TABLE_CACHE_SIZE)
def _shared_table(spec: KernelSpec) -> KernelTable:
    return KernelTable(spec, 1)


def kernel_table(spec: KernelSpec, radius: int) -> KernelTable:
    """Shared kernel table for spec, grown to cover the given radius. Least recently used specs are evicted."""
    table = _shared_table(spec)
    with _tables_lock:
        table.radius = max(table.radius, radius)
    return table


def stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Independent generator keyed by (seed, tag, index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, int(index)]))


class DisplacementClasses:
    """
    All long-edge displacements of a box, in the fixed order of `half_space_displacements`.

    Attributes:
        vectors: (m, d) displacement vectors.
        counts: number of vertex pairs realising each displacement.
        keys: distinct canonical classes.
        class_index: position of each vector's class in `keys`.
    """

    def __init__(self, shape: BoxShape) -> None:
        vectors = list(half_space_displacements(shape))
        self.shape = shape
        self.vectors = np.array(vectors, dtype=np.int64).reshape(len(vectors), shape.d)
        self.counts = np.array([shape.pair_count(w) for w in vectors], dtype=np.int64)
        lookup: Dict[Displacement, int] = {}
        self.class_index = np.array(
            [lookup.setdefault(canonical(w), len(lookup)) for w in vectors], dtype=np.int64
        )
        self.keys: List[Displacement] = list(lookup)

    def __len__(self) -> int:
        return len(self.vectors)

    def probabilities(self, table: KernelTable) -> np.ndarray:
        if not self.keys:
            return np.zeros(0)
        return table.probabilities(self.keys)[self.class_index]


@lru_cache(maxsize=32)
def displacement_classes(shape: BoxShape) -> DisplacementClasses:
    return DisplacementClasses(shape)


def displacement_pair_count(shape: BoxShape, w: Sequence[int]) -> int:
    """
    Number of unordered vertex pairs {x, x + w} inside the box.

    Args:
        shape: The box.
        w: Displacement vector.

    Returns:
        int: prod_i max(n_i - |w_i|, 0).
    """
    return shape.pair_count(w)


def place_pairs(shape: BoxShape, w: np.ndarray, positions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # position p enumerates the base points x with x and x + w both in the box
    lows = np.maximum(-w, 0)
    spans = np.asarray(shape.sides) - np.abs(w)
    base = np.stack(np.unravel_index(positions, tuple(int(s) for s in spans)), axis=-1) + lows
    heads = np.ravel_multi_index(tuple(base.T), shape.sides)
    tails = np.ravel_multi_index(tuple((base + w).T), shape.sides)
    return heads, tails


def _draw_edges(
    shape: BoxShape,
    classes: DisplacementClasses,
    probs: np.ndarray,
    seed: int,
    max_edges: Optional[int],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw the open long edges of every displacement class.

    The per-class edge counts are one vectorised binomial draw on the
    (seed, COUNT_STREAM) generator, in the fixed class order of `classes`.
    Placements use a generator keyed by (seed, PLACEMENT_STREAM, class index).
    The environment therefore depends only on the seed and the box, never on
    which tables or classes were cached before. Keying counts per class would
    cost one SeedSequence per displacement, which is prohibitive for d >= 2.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: Heads, tails and the class index of each edge.
    """
    successes = stream(seed, COUNT_STREAM).binomial(classes.counts, probs) if len(classes) else np.zeros(0, dtype=np.int64)
    total = int(np.sum(successes))
    if max_edges is not None and total > max_edges:
        raise SamplingResourceError(total)
    try:
        heads = np.empty(total, dtype=np.int64)
        tails = np.empty(total, dtype=np.int64)
        owner = np.empty(total, dtype=np.int64)
        cursor = 0
        for idx in np.flatnonzero(successes):
            m = int(successes[idx])
            positions = stream(seed, PLACEMENT_STREAM, idx).choice(int(classes.counts[idx]), size=m, replace=False)
            heads[cursor : cursor + m], tails[cursor : cursor + m] = place_pairs(shape, classes.vectors[idx], positions)
            owner[cursor : cursor + m] = idx
            cursor += m
    except MemoryError as e:
        raise SamplingResourceError(total) from e
    return heads, tails, owner


def sample_box(
    spec: KernelSpec,
    shape: BoxShape,
    seed: int,
    table: Optional[KernelTable] = None,
    max_edges: Optional[int] = None,
) -> Environment:
    """
    Sample an environment on a box.

    For every displacement the number of open edges is one binomial draw over
    all pairs realising it; the open pairs are then placed uniformly without
    replacement from a stream keyed by (seed, displacement index). This gives
    every edge a Bernoulli(p(w)) law, independent across edges.

    Args:
        spec: Kernel parameters.
        shape: The box.
        seed: 64-bit seed; equal inputs give identical environments.
        table: Optional kernel table, the shared one is used otherwise.
        max_edges: Optional cap on the number of long edges.

    Returns:
        Environment: The sampled configuration.

    Raises:
        SamplingResourceError: If the edge list cannot be allocated.
    """
    if spec.d != shape.d:
        raise ValueError(f"Kernel dimension {spec.d} does not match box dimension {shape.d}")
    table = table or kernel_table(spec, shape.n)
    classes = displacement_classes(shape)
    heads, tails, _ = _draw_edges(shape, classes, classes.probabilities(table), seed, max_edges)
    return Environment.from_edges(shape, spec, seed, heads, tails)


def sample_coupled(
    spec_low: KernelSpec,
    spec_high: KernelSpec,
    shape: BoxShape,
    seed: int,
    max_edges: Optional[int] = None,
) -> CouplingPair:
    """
    Sample two environments from one uniform variate per edge.

    Edges are first drawn with probability max(p_low, p_high); each drawn edge
    then gets U = max(p_low, p_high) * V with V uniform from a stream keyed by
    its displacement, which makes U uniform on [0, 1] given the edge. The edge
    is open in an environment when U <= p. When p_low <= p_high everywhere the
    high environment equals `sample_box(spec_high, shape, seed)`.

    Raises:
        CouplingError: If the kernels live in different dimensions.
    """
    if spec_low.d != spec_high.d or spec_low.d != shape.d:
        raise CouplingError(f"Cannot couple kernels in dimensions {spec_low.d} and {spec_high.d} on a {shape.d}-box")
    classes = displacement_classes(shape)
    p_low = classes.probabilities(kernel_table(spec_low, shape.n))
    p_high = classes.probabilities(kernel_table(spec_high, shape.n))
    p_max = np.maximum(p_low, p_high)
    heads, tails, owner = _draw_edges(shape, classes, p_max, seed, max_edges)

    uniforms = np.empty(len(owner))
    boundaries = np.flatnonzero(np.diff(owner, prepend=-1, append=-1))
    for start, stop in zip(boundaries[:-1], boundaries[1:]):
        idx = int(owner[start])
        uniforms[start:stop] = p_max[idx] * stream(seed, UNIFORM_STREAM, idx).random(stop - start)
    low = uniforms <= p_low[owner]
    high = uniforms <= p_high[owner]
    if np.any(p_low > p_high):
        logging.warning("Coupled kernels are not ordered, the low environment is not a subset of the high one")
    return CouplingPair(
        low=Environment.from_edges(shape, spec_low, seed, heads[low], tails[low]),
        high=Environment.from_edges(shape, spec_high, seed, heads[high], tails[high]),
        seed=seed,
    )
