import math

import numpy as np
import pytest

from lrp.errors import BlockGeometryError, KernelIdentityError
from lrp.graphdist import bfs_distances
from lrp.graphdist.search import open_neighbors
from lrp.kernel import KernelSpec, KernelTable, kernel_value
from lrp.renorm import (
    BlockGrid,
    block_edge_marginal,
    block_kernel_sum,
    box_count,
    build_renorm_graph,
    classify_good_block,
    classify_interior_blocks,
    crossing_length,
    Witness,
)
from lrp.sampler import BoxShape, Environment, sample_box


def chain(n: int, long_edges=()) -> Environment:
    heads = [i for i, _ in long_edges]
    tails = [j for _, j in long_edges]
    return Environment.from_edges(BoxShape.cube(1, n), KernelSpec(d=1, beta=0.0), 0, np.array(heads), np.array(tails))


def test_block_kernel_sum_of_adjacent_pairs():
    spec = KernelSpec(d=1, beta=1.0)
    expected = math.log(9 / 8) + 2 * math.log(16 / 15) + math.log(25 / 24)
    assert block_kernel_sum(spec, 2, [2]) == pytest.approx(expected, rel=1e-12)
    assert block_kernel_sum(spec, 2, [2]) == pytest.approx(math.log(4 / 3), rel=1e-12)
    assert block_edge_marginal(spec, 2, [2]) == pytest.approx(0.25, rel=1e-12)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("m", [2, 3, 5])
def test_scaling_identity(d, k, m):
    spec = KernelSpec(d=d, beta=1.0)
    w = [m] + [0] * (d - 1)
    assert block_kernel_sum(spec, k, w) == pytest.approx(kernel_value(spec, w), rel=1e-8)
    assert block_edge_marginal(spec, k, w) == pytest.approx(KernelTable(spec, m).edge_probability(w), rel=1e-8)


def test_scaling_identity_off_axis():
    spec = KernelSpec(d=2, beta=0.7)
    assert block_kernel_sum(spec, 2, [2, 3]) == pytest.approx(kernel_value(spec, [2, 3]), rel=1e-8)


def test_marginal_rejects_nearest_neighbours():
    with pytest.raises(BlockGeometryError):
        block_edge_marginal(KernelSpec(d=1, beta=1.0), 2, [1])
    with pytest.raises(BlockGeometryError):
        block_edge_marginal(KernelSpec(d=2, beta=1.0), 2, [1, -1])


def test_power_kernel_is_not_self_similar():
    with pytest.raises(KernelIdentityError):
        block_edge_marginal(KernelSpec(d=1, beta=1.0, variant="power", s=2.0), 2, [2])


def test_block_grid_geometry():
    grid = BlockGrid(chain(40), 8)
    assert grid.block_count == 5
    assert grid.members(2).tolist() == list(range(16, 24))
    assert grid.interior_blocks() == [1, 2, 3]
    assert grid.neighborhood(0) == [0, 1]
    assert grid.central_block() == 2
    assert grid.sup_distance(0, 3) == 3

    env = sample_box(KernelSpec(d=2, beta=0.0), BoxShape.cube(2, 12), seed=0)
    grid = BlockGrid(env, 3)
    assert grid.members(5).tolist() == [39, 40, 41, 51, 52, 53, 63, 64, 65]
    assert grid.interior_blocks() == [5, 6, 9, 10]
    assert len(grid.neighborhood(5)) == 9


@pytest.mark.parametrize("n, k", [(16, 3), (16, 1), (8, 8)])
def test_block_grid_rejects_bad_geometry(n, k):
    with pytest.raises(BlockGeometryError):
        BlockGrid(chain(n), k)


def test_renorm_graph_without_long_edges():
    env = sample_box(KernelSpec(d=2, beta=0.0), BoxShape.cube(2, 12), seed=0)
    renorm = build_renorm_graph(env, 4)
    assert renorm.edge_count == 2 * 3 * 2 + 2 * 2 * 2
    assert len(renorm.long_edges()) == 0
    for (a, b), (i, j) in zip(renorm.edges.tolist(), renorm.witnesses.tolist()):
        assert renorm.grid.sup_distance(a, b) == 1
        assert env.has_edge(i, j)
        assert {renorm.grid.block_of[i], renorm.grid.block_of[j]} == {a, b}


def test_renorm_graph_adds_one_edge_per_long_contact():
    renorm = build_renorm_graph(chain(16, [(1, 13), (2, 14)]), 4)
    assert renorm.edges.tolist() == [[0, 1], [0, 3], [1, 2], [2, 3]]
    assert renorm.long_edges().tolist() == [[0, 3]]
    assert renorm.witness(3, 0) == (1, 13)
    assert renorm.adjacent(3, 0) and not renorm.adjacent(0, 2)
    assert renorm.coarse_degrees().tolist() == [2, 2, 2, 2]
    assert renorm.neighborhood_degree(1) == 6


def test_coarse_edge_frequency_matches_marginal():
    spec = KernelSpec(d=1, beta=1.0)
    shape = BoxShape.cube(1, 16)
    replicas = 4000
    hits = sum(build_renorm_graph(sample_box(spec, shape, seed), 4).adjacent(0, 2) for seed in range(replicas))
    assert abs(hits / replicas - 0.25) < 4 * math.sqrt(0.25 * 0.75 / replicas)


def test_small_threshold_only_checks_double_contacts():
    env = chain(40, [(2, 18), (3, 19), (20, 35)])
    grid = BlockGrid(env, 8)
    report = classify_good_block(env, grid, 2, delta=0.1, theta_hat=1.0)
    assert report.good and report.witness is None
    assert report.threshold == pytest.approx(0.8)


def test_vertex_linking_two_far_blocks_is_bad():
    env = chain(40, [(3, 20), (20, 36)])
    grid = BlockGrid(env, 8)
    for delta in (0.1, 0.5):
        report = classify_good_block(env, grid, 2, delta=delta, theta_hat=1.0)
        assert (report.good1, report.good2, report.good3) == (False, True, True)
        assert report.witness == Witness(family="good1", x=20, y=20, distance=0)
    assert crossing_length(grid, 2, [3, 20, 36]) == 2


def test_adjacent_portals_to_one_far_block_are_bad():
    env = chain(40, [(2, 18), (3, 19)])
    grid = BlockGrid(env, 8)
    report = classify_good_block(env, grid, 2, delta=1.0, theta_hat=1.0)
    assert (report.good1, report.good2, report.good3) == (True, False, True)
    assert (report.witness.family, report.witness.x, report.witness.y, report.witness.distance) == ("good2", 18, 19, 1)
    assert report.to_row() == (2, 0, 1, 0, 1, 1, 1.0, 1.0)


def test_portals_to_two_far_blocks_are_bad():
    env = chain(40, [(2, 18), (20, 35)])
    report = classify_good_block(env, BlockGrid(env, 8), 2, delta=1.0, theta_hat=1.0)
    assert (report.good1, report.good2) == (False, True)
    assert report.witness.distance == 2


def test_indirect_crossing_without_long_edges():
    env = chain(40)
    grid = BlockGrid(env, 8)
    assert classify_good_block(env, grid, 2, delta=1.0, theta_hat=1.0).good
    report = classify_good_block(env, grid, 2, delta=1.25, theta_hat=1.0)
    assert not report.good3
    assert report.witness.distance == 9
    with pytest.raises(BlockGeometryError):
        classify_good_block(env, grid, 0, delta=1.0, theta_hat=1.0)


def test_good_blocks_are_nested_in_delta():
    env = sample_box(KernelSpec(d=1, beta=1.0), BoxShape.cube(1, 256), seed=12)
    grid = BlockGrid(env, 16)
    coarse = classify_interior_blocks(env, grid, 1.0, 0.7)
    fine = classify_interior_blocks(env, grid, 0.5, 0.7, threads=3)
    assert [r.block for r in coarse] == grid.interior_blocks()
    for strict, loose in zip(coarse, fine):
        assert loose.good or not strict.good
        assert strict.neighborhood_degree == loose.neighborhood_degree is not None


def test_crossing_length():
    grid = BlockGrid(chain(40), 8)
    assert crossing_length(grid, 2, [3, 18, 19, 26, 34]) == 4
    assert crossing_length(grid, 2, list(range(5, 30))) is None


def shortest_crossing(env: Environment, grid: BlockGrid, block: int):
    # far-to-far paths through V_w whose inner vertices stay in the neighbourhood;
    # entering and leaving through one vertex to the same far block is a detour, not a crossing
    inside = np.isin(grid.block_of, grid.neighborhood(block))

    def far_blocks(vertex: int) -> set:
        _, targets = open_neighbors(env, np.array([vertex]))
        return set(grid.block_of[targets[~inside[targets]]].tolist())

    best = None
    for x in grid.members(block).tolist():
        entries = far_blocks(x)
        if not entries:
            continue
        field = bfs_distances(env, [x], restriction=inside)
        for y in np.flatnonzero(field.reached).tolist():
            exits = far_blocks(y)
            if not exits or (y == x and len(entries) < 2):
                continue
            length = field[y] + 2
            best = length if best is None else min(best, length)
    return best


@pytest.mark.parametrize("delta", [0.25, 0.375])
def test_good_blocks_bound_every_crossing(delta):
    spec = KernelSpec(d=1, beta=0.5)
    checked = 0
    for seed in range(30):
        env = sample_box(spec, BoxShape.cube(1, 64), seed)
        grid = BlockGrid(env, 8)
        for report in classify_interior_blocks(env, grid, delta, 1.0):
            if not report.good:
                continue
            checked += 1
            length = shortest_crossing(env, grid, report.block)
            assert length is None or length >= report.threshold
    assert checked > 0

    env = chain(40, [(3, 20), (20, 36)])
    grid = BlockGrid(env, 8)
    assert shortest_crossing(env, grid, 2) == 2
    assert not classify_good_block(env, grid, 2, delta, 1.0).good


def test_box_count_without_long_edges():
    env = chain(90)
    grid = BlockGrid(env, 10)
    assert box_count(env, grid, 0).count == 1
    result = box_count(env, grid, 15)
    assert result.center == 4
    assert result.count == 5
    assert result.rows([0, 1, 10, 11, 21]) == [(0, 1), (1, 3), (10, 3), (11, 5), (21, 7)]


def test_box_count_is_monotone_in_radius():
    env = sample_box(KernelSpec(d=2, beta=1.0), BoxShape.cube(2, 40), seed=2)
    grid = BlockGrid(env, 8)
    counts = [box_count(env, grid, r).count for r in range(0, 30, 3)]
    assert counts == sorted(counts)
    assert counts[0] == 1
    with pytest.raises(ValueError):
        box_count(env, grid, -1)
