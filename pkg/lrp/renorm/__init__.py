from .blocks import BlockGrid, RenormGraph, block_edge_marginal, block_kernel_sum, build_renorm_graph
from .boxcount import BoxCountResult, block_distances, box_count
from .good import GoodBlockReport, Witness, classify_good_block, classify_interior_blocks, crossing_length
