import networkx as nx
import numpy as np
import pytest

from lrp.errors import DiameterThresholdError, EmptySourceError, OverlappingSetsError, TooManyEdgesError
from lrp.graphdist import (
    UNREACHABLE,
    ball_curve,
    bfs_distances,
    degree_stats,
    diameter,
    distance_between,
    exact_distance_distribution,
    indirect_distance,
    indirect_search,
    neighborhood_degrees,
    vertex_degrees,
)
from lrp.kernel import KernelSpec
from lrp.sampler import BoxShape, Environment, neighbor_offsets, sample_box


def to_networkx(env: Environment) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(env.volume))
    for v in range(env.volume):
        coords = env.shape.coords(v)
        for offset in neighbor_offsets(env.d):
            if env.shape.contains(coords + offset):
                graph.add_edge(v, env.shape.index(coords + offset))
    graph.add_edges_from(env.edges().tolist())
    return graph


def chain(n: int, long_edges=()) -> Environment:
    heads = [i for i, _ in long_edges]
    tails = [j for _, j in long_edges]
    return Environment.from_edges(BoxShape.cube(1, n), KernelSpec(d=1, beta=0.0), 0, np.array(heads), np.array(tails))


def random_instances(count: int):
    rng = np.random.default_rng(17)
    for seed in range(count):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(2, 33 if d == 1 else 13))
        beta = float(rng.choice([0.0, 0.5, 1.0, 3.0]))
        yield sample_box(KernelSpec(d=d, beta=beta), BoxShape.cube(d, n), seed)


def check_against_networkx(env: Environment, rng: np.random.Generator) -> None:
    graph = to_networkx(env)
    source = int(rng.integers(env.volume))
    field = bfs_distances(env, [source])
    expected = nx.single_source_shortest_path_length(graph, source)
    assert field.distances.tolist() == [expected[v] for v in range(env.volume)]

    restriction = rng.random(env.volume) < 0.6
    restriction[source] = True
    restricted = bfs_distances(env, [source], restriction=restriction)
    inside = nx.single_source_shortest_path_length(graph.subgraph(np.flatnonzero(restriction).tolist()), source)
    for v in range(env.volume):
        assert restricted[v] == inside.get(v, UNREACHABLE)
        if restricted[v] != UNREACHABLE:
            assert restricted[v] >= field[v]


def test_search_matches_networkx():
    rng = np.random.default_rng(0)
    for env in random_instances(150):
        check_against_networkx(env, rng)


@pytest.mark.slow
def test_search_matches_networkx_on_many_instances():
    rng = np.random.default_rng(1)
    for env in random_instances(1000):
        check_against_networkx(env, rng)


def test_distances_are_lipschitz_and_bounded_by_sup_norm():
    env = sample_box(KernelSpec(d=2, beta=1.0), BoxShape.cube(2, 24), seed=4)
    field = bfs_distances(env, [0])
    coords = env.shape.coords(np.arange(env.volume))
    assert np.all(field.distances <= np.max(coords, axis=1))
    for v in range(env.volume):
        for offset in neighbor_offsets(2):
            target = coords[v] + offset
            if env.shape.contains(target):
                assert abs(field[v] - field[env.shape.index(target)]) <= 1
    for i, j in env.edges().tolist():
        assert abs(field[i] - field[j]) <= 1


def test_zero_beta_distances_are_sup_norm():
    env = sample_box(KernelSpec(d=2, beta=0.0), BoxShape.cube(2, 9), seed=0)
    assert distance_between(env, 0, env.volume - 1) == 8
    assert distance_between(env, env.shape.index([0, 8]), env.shape.index([3, 2])) == 6


def test_multi_source_and_origin():
    field = bfs_distances(chain(10), [0, 9], track_origin=True)
    assert field.distances.tolist() == [0, 1, 2, 3, 4, 4, 3, 2, 1, 0]
    assert field.origin.tolist() == [0] * 5 + [9] * 5
    assert field.eccentricity() == 4
    assert field.farthest() == 4


def test_cutoff_stops_the_search():
    field = bfs_distances(chain(10), [0], cutoff=3)
    assert field.within(10).tolist() == [0, 1, 2, 3]
    assert field[4] == UNREACHABLE


def test_search_errors():
    env = chain(6)
    with pytest.raises(EmptySourceError):
        bfs_distances(env, [])
    with pytest.raises(ValueError):
        bfs_distances(env, [0], restriction=[1, 2])
    with pytest.raises(ValueError):
        bfs_distances(env, [6])


def test_restricted_search_leaves_unreachable_vertices():
    env = chain(8, [(0, 5)])
    field = bfs_distances(env, [0], restriction=[0, 1, 5, 6])
    assert field.distances.tolist() == [0, 1, -1, -1, -1, 1, 2, -1]


def test_ball_curve_without_long_edges():
    env = sample_box(KernelSpec(d=2, beta=0.0), BoxShape.cube(2, 21), seed=0)
    curve = ball_curve(env, env.shape.index([10, 10]), 5)
    assert curve.sizes.tolist() == [(2 * k + 1) ** 2 for k in range(6)]
    assert not curve.is_saturated

    curve = ball_curve(chain(21), 10, 12)
    assert curve.sizes[:11].tolist() == [2 * k + 1 for k in range(11)]
    assert curve.saturated_from == 10
    assert curve.unsaturated_radii().tolist() == list(range(10))
    assert curve.sizes[12] == 21


def test_diameter():
    assert diameter(chain(10)) == (9, True)
    assert diameter(chain(10), mode="double_sweep") == (9, False)
    assert diameter(chain(10, [(0, 9)])).value == 5
    assert diameter(chain(10), vertices=[2, 3, 4]).value == 2
    with pytest.raises(DiameterThresholdError):
        diameter(chain(10), threshold=5)
    with pytest.raises(ValueError):
        diameter(chain(10), vertices=[2, 5])


def test_diameter_is_thread_independent():
    env = sample_box(KernelSpec(d=2, beta=1.0), BoxShape.cube(2, 10), seed=8)
    assert diameter(env, threads=1) == diameter(env, threads=4)
    assert diameter(env, mode="double_sweep").value <= diameter(env).value


def test_indirect_distance():
    a, b = [0, 1], [2, 3]
    assert indirect_distance(chain(8), a, b) is None
    assert indirect_distance(chain(8, [(0, 4)]), a, b) == 2
    path = indirect_search(chain(8, [(0, 4)]), a, b)
    assert (path.source, path.target) == (0, 3)
    assert indirect_distance(chain(8, [(1, 5)]), [0, 1], [6, 7]) == 2
    with pytest.raises(OverlappingSetsError):
        indirect_distance(chain(8), [0, 1], [1, 2])


def test_degrees_match_networkx():
    env = sample_box(KernelSpec(d=2, beta=2.0), BoxShape.cube(2, 10), seed=6)
    graph = to_networkx(env)
    degrees = vertex_degrees(env)
    assert degrees.tolist() == [graph.degree(v) for v in range(env.volume)]
    members = [11, 12, 13, 22, 45, 46, 47, 58, 71, 99]
    stats = degree_stats(env, members)
    assert stats.average_degree == pytest.approx(sum(graph.degree(v) for v in members) / len(members))
    expected = set().union(*(graph.neighbors(v) for v in members)) - set(members)
    assert stats.boundary.tolist() == sorted(expected)


def test_degree_stats_on_a_chain():
    stats = degree_stats(chain(10), range(3, 8))
    assert stats.boundary.tolist() == [2, 8]
    assert stats.average_degree == 2.0
    assert vertex_degrees(chain(10))[[0, 5, 9]].tolist() == [1, 2, 1]


def test_neighborhood_degrees():
    assert neighborhood_degrees(BoxShape.cube(1, 4), np.array([1, 2, 3, 4])).tolist() == [3, 6, 9, 7]
    grid = neighborhood_degrees(BoxShape.cube(2, 3), np.ones(9, dtype=np.int64))
    assert grid.tolist() == [4, 6, 4, 6, 9, 6, 4, 6, 4]


def test_exact_distance_distribution():
    shape = BoxShape.cube(1, 5)
    exact = exact_distance_distribution(KernelSpec(d=1, beta=1.0), shape, [(0, 4), (0, 2)], 2)
    assert exact[(0, 4)] == pytest.approx(11 / 36, abs=1e-12)
    assert exact[(0, 2)] == pytest.approx(1.0)
    none = exact_distance_distribution(KernelSpec(d=1, beta=0.0), shape, [(0, 4)], 2)
    assert none[(0, 4)] == 0.0
    assert exact_distance_distribution(KernelSpec(d=1, beta=0.0), shape, [(0, 4)], 4)[(0, 4)] == 1.0
    stronger = exact_distance_distribution(KernelSpec(d=1, beta=2.0), shape, [(0, 4)], 2)
    assert stronger[(0, 4)] >= exact[(0, 4)]


def test_exact_distance_distribution_limit():
    with pytest.raises(TooManyEdgesError):
        exact_distance_distribution(KernelSpec(d=1, beta=1.0), BoxShape.cube(1, 12), [(0, 11)], 2)
