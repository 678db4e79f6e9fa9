from functools import lru_cache, reduce
from itertools import combinations_with_replacement
from math import factorial
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import logging
import math
import threading

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import KernelDomainError, QuadratureError

QUADRATURE_ABS_TOL = 1e-10
QUADRATURE_REL_TOL = 1e-12
QUADRATURE_ORDERS = (8, 16, 32, 64)
QUADRATURE_SEGMENTS = (1, 2, 4, 8)

Displacement = Tuple[int, ...]


class KernelSpec(BaseModel):
    """
    Parameters of the connection kernel.

    Attributes:
        d (int): Dimension of the lattice.
        beta (float): Intensity of long edges, an edge is open with probability 1 - exp(-beta * J).
        variant (str): "selfsim" for the self-similar kernel, "power" for the plain power law.
        s (Optional[float]): Decay exponent of the plain power law, unused for the self-similar kernel.
    """

    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=1)
    beta: float = Field(ge=0.0)
    variant: Literal["selfsim", "power"] = "selfsim"
    s: Optional[float] = None

    @model_validator(mode="after")
    def _check_exponent(self) -> "KernelSpec":
        if self.variant == "power":
            if self.s is None or not self.s > 0:
                raise ValueError("The power-law variant needs an exponent s > 0")
        elif self.s is not None:
            raise ValueError("The self-similar kernel takes no exponent s")
        return self

    @property
    def label(self) -> str:
        """Variant tag as written into environment headers."""
        if self.variant == "power":
            return f"power:{self.s!r}"
        return "selfsim"

    @classmethod
    def from_label(cls, d: int, beta: float, label: str) -> "KernelSpec":
        if label == "selfsim":
            return cls(d=d, beta=beta)
        if label.startswith("power:"):
            return cls(d=d, beta=beta, variant="power", s=float(label[len("power:"):]))
        raise ValueError(f"Unknown kernel variant '{label}'")

    def to_dict(self) -> Dict:
        return self.model_dump()


def canonical(w: Sequence[int]) -> Displacement:
    """Representative of w under coordinate permutations and sign flips."""
    return tuple(sorted(abs(int(c)) for c in w))


def sup_norm(w: Sequence[int]) -> int:
    return max(abs(int(c)) for c in w)


def class_multiplicity(w: Displacement) -> int:
    """Number of displacement vectors sharing the canonical class of w."""
    counts: Dict[int, int] = {}
    for c in w:
        counts[c] = counts.get(c, 0) + 1
    permutations = factorial(len(w))
    for c in counts.values():
        permutations //= factorial(c)
    return permutations * 2 ** sum(1 for c in w if c != 0)


def _check_displacement(spec: KernelSpec, w: Sequence[int]) -> Displacement:
    if len(w) != spec.d:
        raise KernelDomainError(f"Displacement {tuple(w)} does not live in dimension {spec.d}")
    key = canonical(w)
    if key[-1] == 0:
        raise KernelDomainError("The kernel is not defined at displacement 0")
    return key


@lru_cache(maxsize=None)
def _tent_rule(order: int, segments: int) -> Tuple[np.ndarray, np.ndarray]:
    # Gauss-Legendre on [-1, 1] split at 0 and dyadically, weighted by the tent 1 - |u|
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-1.0, 1.0, 2 * segments + 1)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    points = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    tent = (half[:, None] * weights[None, :]).ravel() * (1.0 - np.abs(points))
    return points, tent


def _tensor_quadrature(w: Displacement, order: int, segments: int) -> float:
    d = len(w)
    points, tent = _tent_rule(order, segments)
    squares = [(c + points) ** 2 for c in w]
    radius2 = reduce(np.add.outer, squares)
    weight = reduce(np.multiply.outer, [tent] * d)
    return float(np.sum(weight * radius2 ** (-float(d))))


def self_similar_quadrature(w: Sequence[int]) -> float:
    """
    Evaluate the self-similar kernel by deterministic quadrature.

    The double integral of |x - y|^(-2d) over two unit blocks reduces to a
    d-dimensional integral over the difference u in [-1, 1]^d against the tent
    weight prod(1 - |u_i|). The rule is refined in order and then in dyadic
    segments until two successive values agree to within 1e-10 absolute and
    1e-12 relative.

    Args:
        w: Displacement between the two blocks, with sup-norm at least 2.

    Returns:
        float: The value of J(w).

    Raises:
        KernelDomainError: If the integral diverges (sup-norm at most 1).
        QuadratureError: If the refinement ladder is exhausted.
    """
    key = canonical(w)
    if key[-1] <= 1:
        raise KernelDomainError(f"The kernel integral diverges at {tuple(w)}")
    previous: Optional[float] = None
    for segments in QUADRATURE_SEGMENTS:
        for order in QUADRATURE_ORDERS:
            value = _tensor_quadrature(key, order, segments)
            if previous is not None:
                gap = abs(value - previous)
                if gap <= QUADRATURE_ABS_TOL and gap <= QUADRATURE_REL_TOL * abs(value):
                    return value
            previous = value
    raise QuadratureError(f"Quadrature for J{key} did not converge")


def self_similar_closed_form(k: int) -> float:
    """J(k) = ln(k^2 / (k^2 - 1)) in one dimension."""
    k = abs(int(k))
    if k <= 1:
        return math.inf
    return -math.log1p(-1.0 / (k * k))


def _kernel_value_canonical(spec: KernelSpec, key: Displacement) -> float:
    if key[-1] == 1:
        return math.inf
    if spec.variant == "power":
        return math.sqrt(sum(c * c for c in key)) ** (-spec.s)
    if spec.d == 1:
        return self_similar_closed_form(key[0])
    return self_similar_quadrature(key)


def kernel_value(spec: KernelSpec, w: Sequence[int]) -> float:
    """
    Evaluate J(w).

    Args:
        spec: Kernel parameters.
        w: Nonzero displacement vector of length spec.d.

    Returns:
        float: +inf for sup-norm neighbours, otherwise the finite kernel value.

    Raises:
        KernelDomainError: If w is zero or has the wrong dimension.
    """
    return _kernel_value_canonical(spec, _check_displacement(spec, w))


def probability_from_kernel(beta: float, value: float) -> float:
    if math.isinf(value):
        return 1.0
    return -math.expm1(-beta * value)


def asymptotic_weight(spec: KernelSpec, w: Sequence[int]) -> float:
    """|w|^(2d) p(w), which tends to beta for the self-similar kernel."""
    key = _check_displacement(spec, w)
    norm = math.sqrt(sum(c * c for c in key))
    p = probability_from_kernel(spec.beta, _kernel_value_canonical(spec, key))
    return norm ** (2 * spec.d) * p


class KernelTable:
    """
    Cache of kernel values and edge probabilities keyed by canonical displacement.

    Entries are computed on first access. Reads after `build()` never write, so
    a built table can be shared between worker threads; lazy fills are guarded
    by a lock.
    """

    def __init__(self, spec: KernelSpec, radius: int) -> None:
        if radius < 1:
            raise ValueError("Kernel table radius must be positive")
        self.spec = spec
        self.radius = radius
        self._values: Dict[Displacement, Tuple[float, float]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, w: Sequence[int]) -> bool:
        return canonical(w) in self._values

    def entry(self, w: Sequence[int]) -> Tuple[float, float]:
        key = _check_displacement(self.spec, w)
        cached = self._values.get(key)
        if cached is not None:
            return cached
        value = _kernel_value_canonical(self.spec, key)
        cached = (value, probability_from_kernel(self.spec.beta, value))
        with self._lock:
            self._values[key] = cached
        return cached

    def kernel_value(self, w: Sequence[int]) -> float:
        return self.entry(w)[0]

    def edge_probability(self, w: Sequence[int]) -> float:
        return self.entry(w)[1]

    def canonical_classes(self, radius: Optional[int] = None) -> Iterator[Displacement]:
        """Canonical displacements with 2 <= sup-norm <= radius, in lexicographic order."""
        radius = self.radius if radius is None else radius
        for key in combinations_with_replacement(range(radius + 1), self.spec.d):
            if key[-1] >= 2:
                yield key

    def probabilities(self, keys: Sequence[Displacement]) -> np.ndarray:
        if self.spec.variant == "selfsim" and self.spec.d == 1:
            k = np.array([key[0] for key in keys], dtype=float)
            values = -np.log1p(-1.0 / k**2)
            probs = -np.expm1(-self.spec.beta * values)
            with self._lock:
                for key, value, p in zip(keys, values, probs):
                    self._values.setdefault(key, (float(value), float(p)))
            return probs
        return np.array([self.entry(key)[1] for key in keys], dtype=float)

    def build(self) -> "KernelTable":
        keys = list(self.canonical_classes())
        logging.info(f">> Building kernel table d={self.spec.d} radius={self.radius} ({len(keys)} classes)")
        self.probabilities(keys)
        return self

    def rows(self, radius: Optional[int] = None) -> List[Tuple[Displacement, float, float]]:
        """(canonical w, J, p) rows for the kernel dump."""
        keys = list(self.canonical_classes(radius))
        self.probabilities(keys)
        return [(key, *self.entry(key)) for key in keys]


def edge_probability(table: KernelTable, w: Sequence[int]) -> float:
    """
    Probability that an edge with displacement w is open.

    Args:
        table: Kernel table that caches the value after the first evaluation.
        w: Nonzero displacement.

    Returns:
        float: 1 - exp(-beta J(w)), exactly 1 for sup-norm neighbours.
    """
    return table.edge_probability(w)


def _tail_bound(spec: KernelSpec, radius: int) -> float:
    # shells |w|_inf = m hold at most 2d (2m + 1)^(d - 1) vectors
    d, beta = spec.d, spec.beta
    if beta == 0:
        return 0.0
    if spec.variant == "power":
        if spec.s <= d:
            return math.inf
        # 2m + 1 <= 2.5 m and |w|_2 >= |w|_inf for m >= 2
        shell = 2 * d * 2.5 ** (d - 1)
        exponent = spec.s - d + 1
        return beta * shell * (radius ** (-exponent) + radius ** (1 - exponent) / (exponent - 1))
    # the blocks stay at Euclidean distance >= m - 1, so p <= beta (m - 1)^(-2d);
    # (2m + 1) / (m - 1) <= 3.5 for m >= 3
    shell = 2 * d * 3.5 ** (d - 1)
    return beta * shell * (radius ** (-d - 1) + radius ** (-d) / d)


def expected_degree(table: KernelTable, radius: int) -> Tuple[float, float]:
    """
    Truncated expected degree of the origin.

    Args:
        table: Kernel table holding the kernel parameters.
        radius: Truncation radius R >= 2 in the sup-norm.

    Returns:
        Tuple[float, float]: (mu, tail) where mu sums p over 0 < |w|_inf <= R and
        tail bounds the omitted sum over |w|_inf > R from above.
    """
    if radius < 2:
        raise ValueError("Truncation radius must be at least 2")
    spec = table.spec
    keys = list(table.canonical_classes(radius))
    probs = table.probabilities(keys)
    weights = np.array([class_multiplicity(key) for key in keys], dtype=float)
    mu = float(3**spec.d - 1) + float(np.sum(np.sort(probs * weights)))
    return mu, _tail_bound(spec, radius)
