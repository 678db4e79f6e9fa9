from .degree import DegreeStats, degree_stats, neighborhood_degrees, vertex_degrees
from .oracle import candidate_edges, exact_distance_distribution
from .search import (
    UNREACHABLE,
    BallCurve,
    Diameter,
    DistanceField,
    IndirectPath,
    ball_curve,
    bfs_distances,
    diameter,
    distance_between,
    indirect_distance,
    indirect_search,
    open_neighbors,
)
