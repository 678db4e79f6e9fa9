from itertools import product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import hashlib

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..kernel import KernelSpec


class BoxShape(BaseModel):
    """
    Finite box {0, ..., n_1 - 1} x ... x {0, ..., n_d - 1}, shifted by an origin offset.

    Vertices are addressed by their row-major index, the last axis varying fastest.
    """

    model_config = ConfigDict(frozen=True)

    sides: Tuple[int, ...] = Field(min_length=1)
    origin: Optional[Tuple[int, ...]] = None

    @field_validator("sides")
    @classmethod
    def _check_sides(cls, sides: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(n < 2 for n in sides):
            raise ValueError(f"Every side of the box must be at least 2, got {sides}")
        if int(np.prod(sides, dtype=object)) >= np.iinfo(np.int64).max:
            raise ValueError(f"Box {sides} has too many vertices to index")
        return sides

    @model_validator(mode="after")
    def _check_origin(self) -> "BoxShape":
        if self.origin is not None and len(self.origin) != len(self.sides):
            raise ValueError("Origin offset must have one entry per axis")
        return self

    @classmethod
    def cube(cls, d: int, n: int) -> "BoxShape":
        return cls(sides=(n,) * d)

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def is_cube(self) -> bool:
        return len(set(self.sides)) == 1

    @property
    def n(self) -> int:
        """Largest side length."""
        return max(self.sides)

    @property
    def volume(self) -> int:
        return int(np.prod(self.sides))

    @property
    def strides(self) -> np.ndarray:
        strides = np.ones(self.d, dtype=np.int64)
        for axis in range(self.d - 2, -1, -1):
            strides[axis] = strides[axis + 1] * self.sides[axis + 1]
        return strides

    @property
    def label(self) -> str:
        return str(self.sides[0]) if self.is_cube else "x".join(str(n) for n in self.sides)

    def index(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in coords), self.sides))

    def coords(self, index) -> np.ndarray:
        """Coordinates of one index (shape (d,)) or of an index array (shape (len, d))."""
        unravelled = np.unravel_index(np.asarray(index, dtype=np.int64), self.sides)
        return np.stack(unravelled, axis=-1).astype(np.int64)

    def contains(self, coords: Sequence[int]) -> bool:
        return all(0 <= int(c) < n for c, n in zip(coords, self.sides))

    def on_boundary(self, indices: np.ndarray) -> np.ndarray:
        coords = self.coords(indices)
        sides = np.asarray(self.sides)
        return np.any((coords == 0) | (coords == sides - 1), axis=-1)

    def center(self) -> int:
        return self.index([n // 2 for n in self.sides])

    def pair_count(self, w: Sequence[int]) -> int:
        """Number of vertex pairs {x, x + w} with both ends inside the box."""
        count = 1
        for n, c in zip(self.sides, w):
            count *= max(n - abs(int(c)), 0)
        return count

    def to_dict(self) -> Dict:
        return self.model_dump()


def neighbor_offsets(d: int) -> np.ndarray:
    """The 3^d - 1 sup-norm neighbour offsets, shape (3^d - 1, d)."""
    offsets = [o for o in product((-1, 0, 1), repeat=d) if any(o)]
    return np.array(offsets, dtype=np.int64)


def half_space_displacements(shape: BoxShape) -> Iterator[Tuple[int, ...]]:
    """
    Displacements w with sup-norm >= 2 whose first nonzero coordinate is positive.

    Each unordered vertex pair {x, y} of the box has exactly one of y - x, x - y
    in this list. The order is fixed, so it can index random streams.
    """
    ranges = [range(-(n - 1), n) for n in shape.sides]
    for w in product(*ranges):
        first = next((c for c in w if c != 0), 0)
        if first > 0 and max(abs(c) for c in w) >= 2:
            yield w


class Environment:
    """
    One percolation configuration on a finite box.

    Only long edges (sup-norm displacement >= 2) are stored, as a CSR adjacency
    with sorted neighbour lists; nearest-neighbour edges are always open and
    therefore implicit.

    Attributes:
        shape: The box.
        spec: Kernel the edges were drawn from.
        seed: 64-bit seed that reproduces the edge set.
        indptr: CSR row pointers, length volume + 1.
        indices: CSR neighbour indices.
    """

    def __init__(
        self,
        shape: BoxShape,
        spec: KernelSpec,
        seed: int,
        indptr: np.ndarray,
        indices: np.ndarray,
    ) -> None:
        self.shape = shape
        self.spec = spec
        self.seed = int(seed)
        self.indptr = indptr
        self.indices = indices
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_edges(
        cls,
        shape: BoxShape,
        spec: KernelSpec,
        seed: int,
        heads: np.ndarray,
        tails: np.ndarray,
    ) -> "Environment":
        """Build the symmetric adjacency from an undirected edge list."""
        heads = np.asarray(heads, dtype=np.int64)
        tails = np.asarray(tails, dtype=np.int64)
        low = np.minimum(heads, tails)
        high = np.maximum(heads, tails)
        keys = np.unique(low * shape.volume + high)
        low, high = keys // shape.volume, keys % shape.volume
        rows = np.concatenate([low, high])
        cols = np.concatenate([high, low])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        indptr = np.zeros(shape.volume + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=shape.volume), out=indptr[1:])
        return cls(shape, spec, seed, indptr, cols)

    @property
    def d(self) -> int:
        return self.shape.d

    @property
    def volume(self) -> int:
        return self.shape.volume

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def long_neighbors(self, vertex: int) -> np.ndarray:
        return self.indices[self.indptr[vertex] : self.indptr[vertex + 1]]

    def long_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, i: int, j: int) -> bool:
        """Whether {i, j} is open, counting the implicit nearest-neighbour edges."""
        if i == j:
            return False
        ci, cj = self.shape.coords(i), self.shape.coords(j)
        if int(np.max(np.abs(ci - cj))) == 1:
            return True
        row = self.long_neighbors(i)
        position = np.searchsorted(row, j)
        return bool(position < len(row) and row[position] == j)

    def edges(self) -> np.ndarray:
        """Long edges as an (m, 2) array of pairs i < j in ascending order."""
        rows = np.repeat(np.arange(self.volume, dtype=np.int64), np.diff(self.indptr))
        mask = rows < self.indices
        return np.stack([rows[mask], self.indices[mask]], axis=1)

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges()}

    def content_hash(self) -> str:
        from .codec import serialize

        return hashlib.sha256(serialize(self)).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.spec == other.spec
            and self.seed == other.seed
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self) -> str:
        return (
            f"Environment(box={self.shape.label}^{self.d}, beta={self.spec.beta}, "
            f"variant={self.spec.label}, seed={self.seed}, long_edges={self.edge_count})"
        )

    def to_dict(self) -> Dict:
        return {
            "shape": self.shape.to_dict(),
            "spec": self.spec.to_dict(),
            "seed": self.seed,
            "edges": self.edges().tolist(),
        }


class CouplingPair:
    """Two environments built from one uniform variate per edge."""

    def __init__(self, low: Environment, high: Environment, seed: int) -> None:
        self.low = low
        self.high = high
        self.seed = seed

    def violations(self) -> List[Tuple[int, int]]:
        """Edges open in the low environment but closed in the high one."""
        return sorted(self.low.edge_set() - self.high.edge_set())
