from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..errors import BlockGeometryError
from ..graphdist.search import bfs_distances
from ..sampler.box import Environment
from .blocks import BlockGrid


class BoxCountResult(BaseModel):
    """
    k-box-count of the chemical ball of radius r around a block.

    Attributes:
        radius (int): r.
        count (int): Number of blocks V_u with D(V_u, V_center) <= r.
        center (int): Coarse index of the central block.
        k (int): Block side.
        block_distances (List[int]): D(V_u, V_center) for every block u.
    """

    model_config = ConfigDict(frozen=True)

    radius: int
    count: int
    center: int
    k: int
    block_distances: List[int]

    def count_within(self, radius: int) -> int:
        return int(np.sum(np.asarray(self.block_distances) <= radius))

    def rows(self, radii: Sequence[int]) -> List[Tuple[int, int]]:
        """(r, X_k) rows for the box-count CSV."""
        return [(int(r), self.count_within(r)) for r in radii]

    def to_dict(self) -> Dict:
        return self.model_dump()


def block_distances(env: Environment, grid: BlockGrid, center: int) -> np.ndarray:
    """Chemical distance from V_center to every block, by one multi-source search."""
    field = bfs_distances(env, grid.members(center))
    distances = np.full(grid.block_count, np.iinfo(np.int32).max, dtype=np.int64)
    np.minimum.at(distances, grid.block_of, field.distances)
    return distances


def box_count(env: Environment, grid: BlockGrid, radius: int, center: Optional[int] = None) -> BoxCountResult:
    """
    Count the blocks that meet the chemical ball of radius r around a block.

    Args:
        env: The environment.
        grid: Its block tessellation.
        radius: r >= 0.
        center: Coarse index of the central block, the middle block by default.

    Returns:
        BoxCountResult: X_k together with the distance of every block.
    """
    if radius < 0:
        raise ValueError("Box-count radius must be nonnegative")
    center = grid.central_block() if center is None else center
    if not 0 <= center < grid.block_count:
        raise BlockGeometryError(f"Central block {center} is outside the coarse box")
    distances = block_distances(env, grid, center)
    return BoxCountResult(
        radius=radius,
        count=int(np.sum(distances <= radius)),
        center=center,
        k=grid.k,
        block_distances=distances.tolist(),
    )
