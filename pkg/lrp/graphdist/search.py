from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, NamedTuple, Optional, Tuple, Union

import logging

import numpy as np

from ..errors import DiameterThresholdError, EmptySourceError, OverlappingSetsError
from ..sampler.box import BoxShape, Environment, neighbor_offsets

UNREACHABLE = -1
EXACT_DIAMETER_THRESHOLD = 20_000

VertexSet = Union[Iterable[int], np.ndarray]


def as_vertices(vertices: VertexSet, shape: BoxShape) -> np.ndarray:
    """Sorted unique vertex indices from an index collection or a boolean mask."""
    array = vertices if isinstance(vertices, np.ndarray) else np.asarray(list(vertices), dtype=np.int64)
    if array.dtype == bool:
        if array.shape != (shape.volume,):
            raise ValueError("Vertex mask does not match the box")
        return np.flatnonzero(array)
    array = np.unique(array.astype(np.int64))
    if array.size and (array[0] < 0 or array[-1] >= shape.volume):
        raise ValueError(f"Vertex indices must lie in [0, {shape.volume})")
    return array


def as_mask(vertices: VertexSet, shape: BoxShape) -> np.ndarray:
    mask = np.zeros(shape.volume, dtype=bool)
    mask[as_vertices(vertices, shape)] = True
    return mask


def _csr_gather(env: Environment, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    starts = env.indptr[rows]
    lengths = env.indptr[rows + 1] - starts
    total = int(np.sum(lengths))
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    src = np.repeat(rows, lengths)
    within = np.arange(total) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return src, env.indices[np.repeat(starts, lengths) + within]


def open_neighbors(env: Environment, vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    All open edges leaving `vertices`, as parallel (source, target) arrays.

    Nearest-neighbour targets are generated from the 3^d - 1 sup-norm offsets
    and clipped to the box; long-edge targets come from the adjacency.
    """
    shape = env.shape
    offsets = neighbor_offsets(shape.d)
    coords = shape.coords(vertices).reshape(len(vertices), shape.d)
    candidates = coords[:, None, :] + offsets[None, :, :]
    inside = np.all((candidates >= 0) & (candidates < np.asarray(shape.sides)), axis=-1)
    step = offsets @ shape.strides
    nn_src = np.broadcast_to(vertices[:, None], inside.shape)[inside]
    nn_dst = (vertices[:, None] + step[None, :])[inside]
    long_src, long_dst = _csr_gather(env, vertices)
    return np.concatenate([nn_src, long_src]), np.concatenate([nn_dst, long_dst])


def frontier_search(
    env: Environment,
    sources: np.ndarray,
    allowed: Optional[np.ndarray] = None,
    side: Optional[np.ndarray] = None,
    cutoff: Optional[int] = None,
    track_origin: bool = False,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    # level-synchronous breadth-first search; `side` marks two vertex classes
    # 1 and 2 whose direct edges are skipped
    distances = np.full(env.volume, UNREACHABLE, dtype=np.int32)
    origin = np.full(env.volume, -1, dtype=np.int64) if track_origin else None
    frontier = sources
    distances[frontier] = 0
    if origin is not None:
        origin[frontier] = frontier
    level = 0
    while frontier.size and (cutoff is None or level < cutoff):
        src, dst = open_neighbors(env, frontier)
        keep = distances[dst] == UNREACHABLE
        if allowed is not None:
            keep &= allowed[dst]
        if side is not None:
            keep &= side[src] * side[dst] != 2
        src, dst = src[keep], dst[keep]
        frontier, first = np.unique(dst, return_index=True)
        level += 1
        distances[frontier] = level
        if origin is not None:
            origin[frontier] = origin[src[first]]
    return distances, origin


class DistanceField:
    """
    Chemical distances from a source set.

    Attributes:
        shape: The box.
        sources: Sorted source vertices.
        distances: int32 distances, UNREACHABLE (-1) outside the restriction or beyond the cutoff.
        restriction: Optional boolean mask of the vertex subset the paths were confined to.
        origin: Optional nearest source of every reached vertex.
        cutoff: Optional search radius.
    """

    def __init__(
        self,
        shape: BoxShape,
        sources: np.ndarray,
        distances: np.ndarray,
        restriction: Optional[np.ndarray] = None,
        origin: Optional[np.ndarray] = None,
        cutoff: Optional[int] = None,
    ) -> None:
        self.shape = shape
        self.sources = sources
        self.distances = distances
        self.restriction = restriction
        self.origin = origin
        self.cutoff = cutoff

    def __getitem__(self, vertex: int) -> int:
        return int(self.distances[vertex])

    def __len__(self) -> int:
        return len(self.distances)

    @property
    def reached(self) -> np.ndarray:
        return self.distances != UNREACHABLE

    def eccentricity(self) -> int:
        return int(np.max(self.distances))

    def farthest(self) -> int:
        """Lowest-index vertex attaining the eccentricity."""
        return int(np.argmax(self.distances))

    def within(self, radius: int) -> np.ndarray:
        return np.flatnonzero(self.reached & (self.distances <= radius))

    def to_rows(self) -> List[Tuple[int, int]]:
        """(vertex, distance) rows of the reached vertices."""
        reached = np.flatnonzero(self.reached)
        return list(zip(reached.tolist(), self.distances[reached].tolist()))


def bfs_distances(
    env: Environment,
    sources: VertexSet,
    restriction: Optional[VertexSet] = None,
    cutoff: Optional[int] = None,
    track_origin: bool = False,
) -> DistanceField:
    """
    Unit-weight shortest-path distances from a source set.

    Args:
        env: The environment.
        sources: Source vertices (indices or mask).
        restriction: Optional vertex subset A; paths may only visit A.
        cutoff: Optional radius after which the search stops.
        track_origin: Record the nearest source of every reached vertex.

    Returns:
        DistanceField: Distances within A (or the whole box).

    Raises:
        EmptySourceError: If no source is given.
        ValueError: If a source lies outside A.
    """
    sources = as_vertices(sources, env.shape)
    if sources.size == 0:
        raise EmptySourceError("Breadth-first search needs at least one source")
    allowed = None
    if restriction is not None:
        allowed = as_mask(restriction, env.shape)
        if not np.all(allowed[sources]):
            raise ValueError("Sources must lie inside the restriction set")
    distances, origin = frontier_search(env, sources, allowed=allowed, cutoff=cutoff, track_origin=track_origin)
    return DistanceField(env.shape, sources, distances, allowed, origin, cutoff)


def distance_between(env: Environment, x: int, y: int, restriction: Optional[VertexSet] = None) -> int:
    return bfs_distances(env, [x], restriction)[y]


class BallCurve:
    """
    Ball sizes |B_k| for k = 0..k_max around a center.

    `saturated[k]` is set once the ball has reached the boundary of the box; the
    sizes from that radius on are lower bounds for the infinite-volume ball.
    """

    def __init__(self, center: int, sizes: np.ndarray, saturated_from: Optional[int]) -> None:
        self.center = center
        self.sizes = sizes
        self.saturated_from = saturated_from

    @property
    def k_max(self) -> int:
        return len(self.sizes) - 1

    @property
    def radii(self) -> np.ndarray:
        return np.arange(len(self.sizes))

    @property
    def saturated(self) -> np.ndarray:
        if self.saturated_from is None:
            return np.zeros(len(self.sizes), dtype=bool)
        return self.radii >= self.saturated_from

    @property
    def is_saturated(self) -> bool:
        return self.saturated_from is not None

    def unsaturated_radii(self) -> np.ndarray:
        return self.radii[~self.saturated]

    def to_rows(self) -> List[Tuple[int, int, bool]]:
        return list(zip(self.radii.tolist(), self.sizes.tolist(), self.saturated.tolist()))


def ball_curve(env: Environment, center: int, k_max: int) -> BallCurve:
    """
    Sizes of the chemical balls around `center` up to radius k_max.

    Args:
        env: The environment.
        center: Center vertex.
        k_max: Largest radius.

    Returns:
        BallCurve: Cumulative sizes with the saturation radius, if any.
    """
    if not 0 <= center < env.volume:
        raise ValueError(f"Center {center} is outside the box")
    field = bfs_distances(env, [center], cutoff=k_max)
    reached = np.flatnonzero(field.reached)
    sizes = np.cumsum(np.bincount(field.distances[reached], minlength=k_max + 1))[: k_max + 1]
    touching = reached[env.shape.on_boundary(reached)]
    saturated_from = int(np.min(field.distances[touching])) if touching.size else None
    return BallCurve(center, sizes.astype(np.int64), saturated_from)


class Diameter(NamedTuple):
    value: int
    exact: bool


def diameter(
    env: Environment,
    vertices: Optional[VertexSet] = None,
    mode: str = "exact",
    threshold: int = EXACT_DIAMETER_THRESHOLD,
    threads: int = 1,
) -> Diameter:
    """
    Diameter of a vertex set measured with paths inside the set.

    Args:
        env: The environment.
        vertices: The set A, the whole box by default.
        mode: "exact" runs one search per vertex of A; "double_sweep" returns the
            eccentricity of the farthest vertex from min(A), a lower bound.
        threshold: Largest |A| allowed in exact mode.
        threads: Worker threads for the exact sweep.

    Returns:
        Diameter: (value, exact).

    Raises:
        DiameterThresholdError: If |A| exceeds the threshold in exact mode.
    """
    members = np.arange(env.volume) if vertices is None else as_vertices(vertices, env.shape)
    restriction = None if vertices is None else as_mask(members, env.shape)
    if members.size == 0:
        raise EmptySourceError("Diameter of an empty set")

    def eccentricity(source: int) -> int:
        distances, _ = frontier_search(env, np.array([source]), allowed=restriction)
        inside = distances if restriction is None else distances[restriction]
        if np.any(inside == UNREACHABLE):
            raise ValueError("Vertex set is not connected inside itself")
        return int(np.max(inside))

    if mode == "double_sweep":
        distances, _ = frontier_search(env, members[:1], allowed=restriction)
        far = int(np.argmax(distances))
        return Diameter(eccentricity(far), False)
    if mode != "exact":
        raise ValueError(f"Unknown diameter mode '{mode}'")
    if members.size > threshold:
        raise DiameterThresholdError(f"Exact diameter of {members.size} vertices exceeds the threshold {threshold}")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            values = list(executor.map(eccentricity, members.tolist()))
    else:
        values = [eccentricity(source) for source in members.tolist()]
    return Diameter(max(values), True)


class IndirectPath(NamedTuple):
    distance: int
    source: int
    target: int


def indirect_search(
    env: Environment,
    a: VertexSet,
    b: VertexSet,
    cutoff: Optional[int] = None,
) -> Optional[IndirectPath]:
    """Shortest path from A to B avoiding direct A-B edges, with its end points."""
    a_vertices = as_vertices(a, env.shape)
    b_vertices = as_vertices(b, env.shape)
    if a_vertices.size == 0 or b_vertices.size == 0:
        raise EmptySourceError("Indirect distance between empty sets")
    side = np.zeros(env.volume, dtype=np.int8)
    side[a_vertices] = 1
    if np.any(side[b_vertices]):
        raise OverlappingSetsError("Indirect distance needs disjoint sets")
    side[b_vertices] = 2
    distances, origin = frontier_search(env, a_vertices, side=side, cutoff=cutoff, track_origin=True)
    reached = b_vertices[distances[b_vertices] != UNREACHABLE]
    if reached.size == 0:
        return None
    target = int(reached[np.argmin(distances[reached])])
    return IndirectPath(int(distances[target]), int(origin[target]), target)


def indirect_distance(env: Environment, a: VertexSet, b: VertexSet) -> Optional[int]:
    """
    Length of the shortest open path from A to B that uses no edge joining A and B directly.

    Returns:
        Optional[int]: The distance, or None when no such path exists in the box.

    Raises:
        OverlappingSetsError: If A and B intersect.
    """
    path = indirect_search(env, a, b)
    if path is None:
        logging.info("No indirect path between the two sets inside the box")
        return None
    return path.distance
