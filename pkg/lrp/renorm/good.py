from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import BlockGeometryError
from ..graphdist.search import UNREACHABLE, frontier_search, indirect_search
from ..sampler.box import Environment
from .blocks import BlockGrid, RenormGraph, build_renorm_graph

Family = Literal["good1", "good2", "good3"]


class Witness(BaseModel):
    """Vertex pair whose distance falls below the threshold."""

    model_config = ConfigDict(frozen=True)

    family: Family
    x: int
    y: int
    distance: int


class GoodBlockReport(BaseModel):
    """
    Verdicts of the three crossing-distance events for one block.

    Attributes:
        block (int): Coarse index of the block.
        delta (float): Threshold factor.
        theta_hat (float): Distance exponent used in the threshold delta * k^theta_hat.
        threshold (float): delta * k^theta_hat.
        good1 (bool): Portals to two different far blocks are far apart inside the block.
        good2 (bool): Distinct portals to one far block are far apart inside the block.
        good3 (bool): The indirect distance from the block to the far blocks is large.
        witness (Optional[Witness]): Closest violating pair when the block is bad.
        neighborhood_degree (Optional[int]): deg^N of the block in the renormalized graph.
    """

    model_config = ConfigDict(frozen=True)

    block: int
    coords: Tuple[int, ...]
    delta: float = Field(gt=0)
    theta_hat: float
    threshold: float
    good1: bool
    good2: bool
    good3: bool
    witness: Optional[Witness] = None
    neighborhood_degree: Optional[int] = None

    @property
    def good(self) -> bool:
        return self.good1 and self.good2 and self.good3

    def to_row(self) -> Tuple:
        witness_distance = "" if self.witness is None else self.witness.distance
        return (
            self.block,
            int(self.good),
            int(self.good1),
            int(self.good2),
            int(self.good3),
            witness_distance,
            self.delta,
            self.theta_hat,
        )

    def to_dict(self) -> Dict:
        return {**self.model_dump(), "good": self.good}


def _far_contacts(env: Environment, grid: BlockGrid, block: int, members: np.ndarray) -> Dict[int, set]:
    # far blocks reached from each member through a long edge
    coords = grid.block_coords(block)
    contacts: Dict[int, set] = {}
    for x in members.tolist():
        neighbours = env.long_neighbors(x)
        if not neighbours.size:
            continue
        blocks = np.unique(grid.block_of[neighbours])
        gaps = np.max(np.abs(grid.coarse_shape.coords(blocks).reshape(len(blocks), -1) - coords), axis=-1)
        far = blocks[gaps >= 2]
        if far.size:
            contacts[x] = set(far.tolist())
    return contacts


def classify_good_block(
    env: Environment,
    grid: BlockGrid,
    block: int,
    delta: float,
    theta_hat: float,
    renorm: Optional[RenormGraph] = None,
) -> GoodBlockReport:
    """
    Decide whether an interior block is delta-good.

    With t = delta * k^theta_hat the block V_w is good when
        good1: D_{V_w}(x, y) >= t for x, y in V_w (x = y allowed) with long edges to two different far blocks,
        good2: D_{V_w}(x, y) >= t for distinct x, y in V_w with long edges to one far block,
        good3: D*(V_w, union of far blocks) >= t,
    far blocks being those at coarse sup-distance at least 2 from w.

    Args:
        env: The environment.
        grid: Its block tessellation.
        block: Coarse index w.
        delta: Threshold factor.
        theta_hat: Distance exponent estimate.
        renorm: Optional renormalized graph for the reported neighbourhood degree.

    Returns:
        GoodBlockReport: The verdicts and the closest violating pair, if any.

    Raises:
        BlockGeometryError: If the block touches the boundary of the coarse box.
    """
    if not grid.is_interior(block):
        raise BlockGeometryError(f"Block {tuple(grid.block_coords(block))} is not interior")
    threshold = delta * grid.k**theta_hat
    # integer distances below the threshold are at most `radius`
    radius = math.ceil(threshold) - 1
    members = grid.members(block)
    contacts = _far_contacts(env, grid, block, members)
    # a vertex linked to two far blocks violates good1 at distance 0
    violations = [
        Witness(family="good1", x=x, y=x, distance=0) for x in sorted(contacts) if len(contacts[x]) >= 2
    ]

    if radius >= 1:
        allowed = np.zeros(env.volume, dtype=bool)
        allowed[members] = True
        portals = sorted(contacts)
        for x in portals:
            distances, _ = frontier_search(env, np.array([x]), allowed=allowed, cutoff=radius)
            for y in portals:
                if y <= x or distances[y] == UNREACHABLE:
                    continue
                if contacts[x] & contacts[y]:
                    violations.append(Witness(family="good2", x=x, y=y, distance=int(distances[y])))
                if len(contacts[x] | contacts[y]) >= 2:
                    violations.append(Witness(family="good1", x=x, y=y, distance=int(distances[y])))

        far = np.flatnonzero(~np.isin(grid.block_of, grid.neighborhood(block)))
        if far.size:
            path = indirect_search(env, members, far, cutoff=radius)
            if path is not None:
                violations.append(Witness(family="good3", x=path.source, y=path.target, distance=path.distance))

    families = {witness.family for witness in violations}
    witness = min(violations, key=lambda v: (v.distance, v.family, v.x, v.y)) if violations else None
    return GoodBlockReport(
        block=block,
        coords=tuple(int(c) for c in grid.block_coords(block)),
        delta=delta,
        theta_hat=theta_hat,
        threshold=threshold,
        good1="good1" not in families,
        good2="good2" not in families,
        good3="good3" not in families,
        witness=witness,
        neighborhood_degree=None if renorm is None else renorm.neighborhood_degree(block),
    )


def classify_interior_blocks(
    env: Environment,
    grid: BlockGrid,
    delta: float,
    theta_hat: float,
    threads: int = 1,
) -> List[GoodBlockReport]:
    """Classify every interior block, in block order, with deg^N attached."""
    renorm = build_renorm_graph(env, grid.k)
    blocks = grid.interior_blocks()
    if not blocks:
        logging.warning(f"Box {env.shape.label} with k={grid.k} has no interior blocks")

    def classify(block: int) -> GoodBlockReport:
        return classify_good_block(env, grid, block, delta, theta_hat, renorm)

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
        reports = list(executor.map(classify, blocks))
    good = sum(report.good for report in reports)
    logging.info(f"<< {good}/{len(reports)} interior blocks are {delta}-good")
    return reports


def crossing_length(grid: BlockGrid, block: int, path: Sequence[int]) -> Optional[int]:
    """
    Steps a path spends in the neighbourhood of a block while crossing it.

    The crossing starts at the first step that enters V_w from a far block and
    ends at the first later step leaving the 3^d block neighbourhood; every step
    in between is counted, both boundary steps included.

    Returns:
        Optional[int]: The crossing length, None if the path does not cross.
    """
    blocks = grid.block_of[np.asarray(path, dtype=np.int64)]
    inside = np.isin(blocks, grid.neighborhood(block))
    gaps = [grid.sup_distance(int(b), block) for b in blocks]
    for start in range(len(path) - 1):
        if gaps[start] >= 2 and blocks[start + 1] == block:
            for stop in range(start + 1, len(path) - 1):
                if not inside[stop + 1]:
                    return stop - start + 1
            return None
    return None
