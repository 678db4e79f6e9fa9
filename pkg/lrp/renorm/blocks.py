from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import logging
import math

import numpy as np

from ..errors import BlockGeometryError, KernelIdentityError
from ..kernel import KernelSpec, probability_from_kernel, sup_norm
from ..graphdist.degree import neighborhood_degrees
from ..sampler.box import BoxShape, Environment, neighbor_offsets
from ..sampler.sampling import kernel_table

MARGINAL_REL_TOL = 1e-8


class BlockGrid:
    """
    Tessellation of the box into blocks V_u^k = k u + {0, ..., k - 1}^d.

    Attributes:
        env: The fine environment.
        k: Block side.
        coarse_shape: Box of block coordinates u.
        block_of: Block index r(x) of every fine vertex.
    """

    def __init__(self, env: Environment, k: int) -> None:
        if k < 2:
            raise BlockGeometryError(f"Block side must be at least 2, got {k}")
        sides = env.shape.sides
        if any(n % k for n in sides):
            raise BlockGeometryError(f"Block side {k} does not divide the box {env.shape.label}")
        if any(n // k < 2 for n in sides):
            raise BlockGeometryError(f"Box {env.shape.label} holds fewer than two blocks of side {k} per axis")
        self.env = env
        self.k = k
        self.coarse_shape = BoxShape(sides=tuple(n // k for n in sides))
        coords = env.shape.coords(np.arange(env.volume)).reshape(env.volume, env.d)
        self.block_of = np.ravel_multi_index(tuple((coords // k).T), self.coarse_shape.sides)
        self.block_of.setflags(write=False)

    @property
    def block_count(self) -> int:
        return self.coarse_shape.volume

    def block_coords(self, block: int) -> np.ndarray:
        return self.coarse_shape.coords(block)

    def members(self, block: int) -> np.ndarray:
        """Fine vertices of the block, ascending."""
        corner = self.block_coords(block) * self.k
        local = np.stack(np.unravel_index(np.arange(self.k**self.env.d), (self.k,) * self.env.d), axis=-1)
        return np.sort(np.ravel_multi_index(tuple((local + corner).T), self.env.shape.sides))

    def members_of(self, blocks: Sequence[int]) -> np.ndarray:
        return np.flatnonzero(np.isin(self.block_of, np.asarray(blocks, dtype=np.int64)))

    def is_interior(self, block: int) -> bool:
        """Whether the block and its 3^d - 1 coarse neighbours lie inside the box."""
        coords = self.block_coords(block)
        return bool(np.all((coords >= 1) & (coords <= np.asarray(self.coarse_shape.sides) - 2)))

    def interior_blocks(self) -> List[int]:
        return [u for u in range(self.block_count) if self.is_interior(u)]

    def neighborhood(self, block: int) -> List[int]:
        """Blocks at coarse sup-distance at most 1, the block itself included."""
        coords = self.block_coords(block)
        blocks = [block]
        for offset in neighbor_offsets(self.env.d):
            target = coords + offset
            if self.coarse_shape.contains(target):
                blocks.append(self.coarse_shape.index(target))
        return sorted(blocks)

    def central_block(self) -> int:
        return self.coarse_shape.center()

    def sup_distance(self, a: int, b: int) -> int:
        return int(np.max(np.abs(self.block_coords(a) - self.block_coords(b))))


class RenormGraph:
    """
    Renormalized graph G' on the blocks of a grid.

    Coarse vertices r(u) and r(v) are adjacent when some open fine edge joins
    V_u and V_v; nearest-neighbour blocks therefore always are. Every coarse edge
    keeps one fine witness edge.

    Attributes:
        grid: The tessellation.
        edges: (m, 2) coarse edges a < b in ascending order.
        witnesses: (m, 2) fine edges realising them.
    """

    def __init__(self, grid: BlockGrid, edges: np.ndarray, witnesses: np.ndarray) -> None:
        self.grid = grid
        self.edges = edges
        self.witnesses = witnesses
        self._lookup: Dict[Tuple[int, int], int] = {
            (int(a), int(b)): position for position, (a, b) in enumerate(edges)
        }

    @property
    def coarse_shape(self) -> BoxShape:
        return self.grid.coarse_shape

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self._lookup

    def witness(self, a: int, b: int) -> Optional[Tuple[int, int]]:
        position = self._lookup.get((min(a, b), max(a, b)))
        if position is None:
            return None
        i, j = self.witnesses[position]
        return int(i), int(j)

    def long_edges(self) -> np.ndarray:
        """Coarse edges between blocks at sup-distance at least 2."""
        coords = self.coarse_shape.coords(self.edges.ravel()).reshape(len(self.edges), 2, -1)
        far = np.max(np.abs(coords[:, 0] - coords[:, 1]), axis=-1) >= 2
        return self.edges[far]

    def coarse_degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.grid.block_count)

    def coarse_degree(self, block: int) -> int:
        return int(self.coarse_degrees()[block])

    def neighborhood_degrees(self) -> np.ndarray:
        return neighborhood_degrees(self.coarse_shape, self.coarse_degrees())

    def neighborhood_degree(self, block: int) -> int:
        """deg^N(r(u)), the summed coarse degree over the neighbourhood of u."""
        return int(self.neighborhood_degrees()[block])


def _nearest_neighbor_edges(grid: BlockGrid) -> Tuple[np.ndarray, np.ndarray]:
    # face and corner neighbours are joined by the fine edge between the closest corners
    shape = grid.coarse_shape
    env_shape = grid.env.shape
    edges, witnesses = [], []
    for a in range(shape.volume):
        coords = shape.coords(a)
        for offset in neighbor_offsets(shape.d):
            target = coords + offset
            if not shape.contains(target):
                continue
            b = shape.index(target)
            if b < a:
                continue
            x = coords * grid.k + np.where(offset > 0, grid.k - 1, 0)
            edges.append((a, b))
            witnesses.append((env_shape.index(x), env_shape.index(x + offset)))
    return np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(witnesses, dtype=np.int64).reshape(-1, 2)


def build_renorm_graph(env: Environment, k: int) -> RenormGraph:
    """
    Contract every k-block of the box to one vertex.

    Args:
        env: The environment.
        k: Block side, dividing every side of the box.

    Returns:
        RenormGraph: Coarse adjacency with one witness per coarse edge.

    Raises:
        BlockGeometryError: If k does not divide the box.
    """
    grid = BlockGrid(env, k)
    nn_edges, nn_witnesses = _nearest_neighbor_edges(grid)

    fine = env.edges()
    blocks = np.sort(grid.block_of[fine], axis=1)
    crossing = blocks[:, 0] != blocks[:, 1]
    fine, blocks = fine[crossing], blocks[crossing]
    keys = blocks[:, 0] * grid.block_count + blocks[:, 1]
    known = np.isin(keys, nn_edges[:, 0] * grid.block_count + nn_edges[:, 1])
    keys, first = np.unique(keys[~known], return_index=True)
    long_witnesses = fine[~known][first]
    long_edges = np.stack([keys // grid.block_count, keys % grid.block_count], axis=1)

    edges = np.concatenate([nn_edges, long_edges])
    witnesses = np.concatenate([nn_witnesses, long_witnesses])
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    logging.info(f">> Renormalized {env!r} into {len(order)} coarse edges with k={k}")
    return RenormGraph(grid, edges[order], witnesses[order])


def block_kernel_sum(spec: KernelSpec, k: int, w: Sequence[int]) -> float:
    """Sum of J(x - y) over the fine pairs x in V_0^k, y in V_w^k."""
    if k < 1:
        raise BlockGeometryError("Block side must be positive")
    if len(w) != spec.d or sup_norm(w) < 2:
        raise BlockGeometryError(f"Coarse displacement {tuple(w)} needs sup-norm at least 2 in dimension {spec.d}")
    table = kernel_table(spec, k * (sup_norm(w) + 1))
    w = np.asarray(w, dtype=np.int64)
    terms = []
    for delta in product(range(-(k - 1), k), repeat=spec.d):
        multiplicity = math.prod(k - abs(c) for c in delta)
        terms.append(multiplicity * table.kernel_value(tuple(k * w + np.asarray(delta))))
    return math.fsum(terms)


def block_edge_marginal(spec: KernelSpec, k: int, w: Sequence[int]) -> float:
    """
    Probability that blocks V_0^k and V_w^k are joined by an open edge.

    The blocks are joined unless every fine pair is closed, so the marginal is
    1 - exp(-beta * sum of J over the fine pairs). Self-similarity makes the sum
    equal J(w); the identity is asserted to a relative tolerance of 1e-8.

    Args:
        spec: Kernel parameters.
        k: Block side.
        w: Coarse displacement with sup-norm at least 2.

    Returns:
        float: The block marginal, equal to edge_probability at w.

    Raises:
        BlockGeometryError: If w is a coarse nearest neighbour.
        KernelIdentityError: If the aggregated kernel differs from J(w).
    """
    aggregated = block_kernel_sum(spec, k, w)
    table = kernel_table(spec, sup_norm(w))
    direct = table.kernel_value(w)
    if abs(aggregated - direct) > MARGINAL_REL_TOL * abs(direct):
        raise KernelIdentityError(f"Block kernel sum {aggregated!r} differs from J{tuple(w)} = {direct!r} at k={k}")
    marginal = probability_from_kernel(spec.beta, aggregated)
    fine = table.edge_probability(w)
    if abs(marginal - fine) > MARGINAL_REL_TOL * max(fine, np.finfo(float).tiny):
        raise KernelIdentityError(f"Block marginal {marginal!r} differs from p{tuple(w)} = {fine!r} at k={k}")
    return marginal
