from typing import Dict, Optional, Protocol

import numpy as np

from ..sampler.box import BoxShape, Environment, neighbor_offsets
from .search import VertexSet, as_mask, as_vertices, open_neighbors


class CoarseDegrees(Protocol):
    coarse_shape: BoxShape

    def coarse_degrees(self) -> np.ndarray: ...


def vertex_degrees(env: Environment) -> np.ndarray:
    """Degree of every vertex, nearest neighbours inside the box included."""
    coords = env.shape.coords(np.arange(env.volume)).reshape(env.volume, env.d)
    sides = np.asarray(env.shape.sides)
    per_axis = 3 - (coords == 0).astype(np.int64) - (coords == sides - 1).astype(np.int64)
    return np.prod(per_axis, axis=1) - 1 + env.long_degree()


def neighborhood_degrees(shape: BoxShape, degrees: np.ndarray) -> np.ndarray:
    """
    deg^N(u) = sum of deg(v) over the sup-norm neighbourhood of u, u itself included.

    Args:
        shape: The coarse box.
        degrees: Coarse degrees indexed like the coarse box.

    Returns:
        np.ndarray: Neighbourhood degrees.
    """
    grid = degrees.reshape(shape.sides)
    padded = np.pad(grid, 1)
    total = grid.copy()
    for offset in neighbor_offsets(shape.d):
        window = tuple(slice(1 + o, 1 + o + n) for o, n in zip(offset, shape.sides))
        total += padded[window]
    return total.ravel()


class DegreeStats:
    """
    Degree statistics of a vertex set Z.

    Attributes:
        degrees: Degree of every vertex of the box.
        members: Sorted vertices of Z.
        boundary: S_1(Z), the vertices outside Z with an open edge into Z.
        average_degree: Mean degree over Z.
        neighborhood_degrees: deg^N of every coarse vertex when a renormalized graph was given.
    """

    def __init__(
        self,
        degrees: np.ndarray,
        members: np.ndarray,
        boundary: np.ndarray,
        neighborhood_degrees: Optional[np.ndarray] = None,
    ) -> None:
        self.degrees = degrees
        self.members = members
        self.boundary = boundary
        self.neighborhood_degrees = neighborhood_degrees

    @property
    def average_degree(self) -> float:
        return float(np.mean(self.degrees[self.members])) if self.members.size else 0.0

    def to_dict(self) -> Dict:
        return {
            "size": int(self.members.size),
            "boundary_size": int(self.boundary.size),
            "average_degree": self.average_degree,
            "max_degree": int(np.max(self.degrees[self.members])) if self.members.size else 0,
        }


def degree_stats(env: Environment, vertices: VertexSet, renorm: Optional[CoarseDegrees] = None) -> DegreeStats:
    """
    Degrees, outer boundary and average degree of a vertex set.

    Args:
        env: The environment.
        vertices: The set Z.
        renorm: Optional renormalized graph; its neighbourhood degrees are added.

    Returns:
        DegreeStats: The statistics of Z.
    """
    members = as_vertices(vertices, env.shape)
    _, targets = open_neighbors(env, members)
    boundary = np.unique(targets[~as_mask(members, env.shape)[targets]])
    neighborhood = None
    if renorm is not None:
        neighborhood = neighborhood_degrees(renorm.coarse_shape, renorm.coarse_degrees())
    return DegreeStats(vertex_degrees(env), members, boundary, neighborhood)
