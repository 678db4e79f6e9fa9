from .box import BoxShape, CouplingPair, Environment, half_space_displacements, neighbor_offsets
from .codec import deserialize, serialize
from .sampling import (
    displacement_classes,
    displacement_pair_count,
    kernel_table,
    sample_box,
    sample_coupled,
    stream,
)
