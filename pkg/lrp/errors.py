# Custom exceptions for clarity and specificity
from typing import Optional


class KernelDomainError(ValueError):
    """Exception raised when the kernel is evaluated outside its domain."""

    pass


class QuadratureError(ArithmeticError):
    """Exception raised when the kernel quadrature fails to reach its tolerance."""

    pass


class EnvironmentFormatError(ValueError):
    """Exception raised for malformed or truncated environment files."""

    def __init__(self, message: str, offset: int, line: Optional[int] = None):
        location = f"byte {offset}" if line is None else f"line {line}, byte {offset}"
        super().__init__(f"{message} ({location})")
        self.offset = offset
        self.line = line


class SamplingResourceError(MemoryError):
    """Exception raised when an environment does not fit into memory."""

    def __init__(self, edge_count: int):
        super().__init__(f"Cannot allocate environment with {edge_count} long edges")
        self.edge_count = edge_count


class EmptySourceError(ValueError):
    """Exception raised when a search is started from an empty source set."""

    pass


class DiameterThresholdError(ValueError):
    """Exception raised when an exact diameter is requested for a set that is too large."""

    pass


class OverlappingSetsError(ValueError):
    """Exception raised when two vertex sets that must be disjoint overlap."""

    pass


class TooManyEdgesError(ValueError):
    """Exception raised when exhaustive enumeration would be infeasible."""

    pass


class BlockGeometryError(ValueError):
    """Exception raised for block tessellations that do not fit the box."""

    pass


class CouplingError(ValueError):
    """Exception raised when two kernels cannot be coupled."""

    pass


class FitError(ValueError):
    """Exception raised when a scaling fit receives unusable data."""

    pass


class ConfigError(ValueError):
    """Exception raised for invalid configuration values."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class InvariantViolation(AssertionError):
    """Exception raised when a property that must always hold is violated."""

    pass


class KernelIdentityError(InvariantViolation):
    """Exception raised when the block-aggregated kernel does not reproduce the coarse kernel."""

    pass
