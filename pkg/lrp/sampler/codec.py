from typing import List, Tuple

import re

import numpy as np

from ..errors import EnvironmentFormatError
from ..kernel import KernelSpec
from .box import BoxShape, Environment

MAGIC = "LRP"
FORMAT_VERSION = 1

_HEADER = re.compile(
    r"^LRP (?P<version>\d+) d=(?P<d>\d+) n=(?P<n>\d+(?:x\d+)*) beta=(?P<beta>\S+) "
    r"seed=(?P<seed>\d+)(?: variant=(?P<variant>\S+))?$"
)
_COUNT = re.compile(r"^edges (?P<count>\d+)$")
_EDGE = re.compile(r"^(?P<i>\d+) (?P<j>\d+)$")


def serialize(env: Environment) -> bytes:
    """
    Write an environment in the text format

        LRP 1 d=<d> n=<n> beta=<beta> seed=<seed> variant=<variant>
        edges <count>
        i j            (one line per long edge, i < j, ascending)
    """
    edges = env.edges()
    lines = [
        f"{MAGIC} {FORMAT_VERSION} d={env.d} n={env.shape.label} beta={env.spec.beta!r} "
        f"seed={env.seed} variant={env.spec.label}",
        f"edges {len(edges)}",
    ]
    lines.extend(f"{i} {j}" for i, j in edges.tolist())
    return ("\n".join(lines) + "\n").encode("utf-8")


def _split_lines(data: bytes) -> List[Tuple[int, str]]:
    lines = []
    offset = 0
    for raw in data.split(b"\n"):
        try:
            lines.append((offset, raw.decode("utf-8")))
        except UnicodeDecodeError as e:
            raise EnvironmentFormatError("Invalid UTF-8", offset + e.start, len(lines) + 1) from e
        offset += len(raw) + 1
    if lines and lines[-1][1] == "":
        lines.pop()
    return lines


def deserialize(data: bytes) -> Environment:
    """
    Parse an environment written by `serialize`.

    Raises:
        EnvironmentFormatError: For a malformed header, a truncated edge list or an
            edge that is out of range, unordered or not long-range, with the line
            number and byte offset of the offending line.
    """
    lines = _split_lines(data)
    if not lines:
        raise EnvironmentFormatError("Empty environment file", 0, 1)

    offset, text = lines[0]
    header = _HEADER.match(text)
    if header is None:
        raise EnvironmentFormatError(f"Malformed header '{text}'", offset, 1)
    if int(header["version"]) != FORMAT_VERSION:
        raise EnvironmentFormatError(f"Unsupported format version {header['version']}", offset, 1)
    d = int(header["d"])
    sides = tuple(int(n) for n in header["n"].split("x"))
    if len(sides) == 1:
        sides = sides * d
    try:
        shape = BoxShape(sides=sides)
        spec = KernelSpec.from_label(d, float(header["beta"]), header["variant"] or "selfsim")
    except ValueError as e:
        raise EnvironmentFormatError(f"Invalid header values: {e}", offset, 1) from e
    if shape.d != d:
        raise EnvironmentFormatError(f"Box {header['n']} does not have dimension {d}", offset, 1)

    if len(lines) < 2:
        raise EnvironmentFormatError("Missing edge count", len(data), 2)
    offset, text = lines[1]
    count_match = _COUNT.match(text)
    if count_match is None:
        raise EnvironmentFormatError(f"Malformed edge count '{text}'", offset, 2)
    count = int(count_match["count"])
    if len(lines) - 2 < count:
        raise EnvironmentFormatError(
            f"Truncated edge list: expected {count} edges, found {len(lines) - 2}", len(data), len(lines) + 1
        )
    if len(lines) - 2 > count:
        offset, _ = lines[2 + count]
        raise EnvironmentFormatError(f"Trailing data after {count} edges", offset, 3 + count)

    heads = np.empty(count, dtype=np.int64)
    tails = np.empty(count, dtype=np.int64)
    for position, (offset, text) in enumerate(lines[2:]):
        line_number = position + 3
        edge = _EDGE.match(text)
        if edge is None:
            raise EnvironmentFormatError(f"Malformed edge line '{text}'", offset, line_number)
        i, j = int(edge["i"]), int(edge["j"])
        if j >= shape.volume:
            raise EnvironmentFormatError(f"Vertex {j} outside a box of {shape.volume} vertices", offset, line_number)
        if i >= j:
            raise EnvironmentFormatError(f"Edge {i} {j} is not ordered i < j", offset, line_number)
        if int(np.max(np.abs(shape.coords(i) - shape.coords(j)))) < 2:
            raise EnvironmentFormatError(f"Edge {i} {j} is a nearest-neighbour edge", offset, line_number)
        heads[position], tails[position] = i, j

    env = Environment.from_edges(shape, spec, int(header["seed"]), heads, tails)
    if env.edge_count != count:
        raise EnvironmentFormatError("Duplicate edges in edge list", lines[1][0], 2)
    return env
