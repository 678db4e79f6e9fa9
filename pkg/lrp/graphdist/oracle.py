from typing import Dict, List, Sequence, Tuple

import logging

import numpy as np

from ..errors import TooManyEdgesError
from ..kernel import KernelSpec
from ..sampler.box import BoxShape, neighbor_offsets
from ..sampler.sampling import displacement_classes, kernel_table, place_pairs

MAX_ENUMERATED_EDGES = 24

Pair = Tuple[int, int]


def candidate_edges(spec: KernelSpec, shape: BoxShape) -> List[Tuple[int, int, float]]:
    """Every possible long edge of the box with a positive probability, as (i, j, p)."""
    classes = displacement_classes(shape)
    probs = classes.probabilities(kernel_table(spec, shape.n))
    edges = []
    for idx in np.flatnonzero(probs > 0):
        heads, tails = place_pairs(shape, classes.vectors[idx], np.arange(classes.counts[idx]))
        edges.extend((int(i), int(j), float(probs[idx])) for i, j in zip(heads, tails))
    return edges


def _neighbor_masks(shape: BoxShape) -> List[int]:
    masks = []
    for v in range(shape.volume):
        coords = shape.coords(v)
        mask = 0
        for offset in neighbor_offsets(shape.d):
            target = coords + offset
            if shape.contains(target):
                mask |= 1 << shape.index(target)
        masks.append(mask)
    return masks


def _ball(masks: List[int], source: int, radius: int) -> int:
    reached = frontier = 1 << source
    for _ in range(radius):
        grown = 0
        while frontier:
            low = frontier & -frontier
            grown |= masks[low.bit_length() - 1]
            frontier ^= low
        frontier = grown & ~reached
        if not frontier:
            break
        reached |= frontier
    return reached


def exact_distance_distribution(
    spec: KernelSpec,
    shape: BoxShape,
    pairs: Sequence[Pair],
    k: int,
    max_edges: int = MAX_ENUMERATED_EDGES,
) -> Dict[Pair, float]:
    """
    Exact P(D(x, y) <= k) by enumerating every long-edge configuration.

    Each of the 2^m configurations of the m possible long edges is weighted by
    its product-Bernoulli probability.

    Args:
        spec: Kernel parameters.
        shape: A small box.
        pairs: Vertex pairs (x, y).
        k: Distance threshold.
        max_edges: Largest m that is enumerated.

    Returns:
        Dict[Pair, float]: The probability for every pair.

    Raises:
        TooManyEdgesError: If the box has more than max_edges possible long edges.
    """
    edges = candidate_edges(spec, shape)
    if len(edges) > max_edges:
        raise TooManyEdgesError(f"{len(edges)} possible long edges exceed the enumeration limit {max_edges}")
    logging.info(f">> Enumerating {2 ** len(edges)} configurations of {len(edges)} long edges")
    base = _neighbor_masks(shape)
    pairs = [(int(x), int(y)) for x, y in pairs]
    totals = {pair: 0.0 for pair in pairs}
    for config in range(2 ** len(edges)):
        masks = list(base)
        weight = 1.0
        for bit, (i, j, p) in enumerate(edges):
            if config >> bit & 1:
                weight *= p
                masks[i] |= 1 << j
                masks[j] |= 1 << i
            else:
                weight *= 1.0 - p
        if weight == 0.0:
            continue
        balls: Dict[int, int] = {}
        for x, y in pairs:
            if x not in balls:
                balls[x] = _ball(masks, x, k)
            if balls[x] >> y & 1:
                totals[(x, y)] += weight
    return {pair: min(total, 1.0) for pair, total in totals.items()}
