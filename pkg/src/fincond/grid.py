"""Mesh geometry, grid-valued fields, and boundary traces.

Index convention used throughout the package: ``i`` indexes the x
direction (1..m), ``j`` indexes the y direction (1..n). Arrays are
stored with shape ``(n, m)`` so that ``values[j-1, i-1]`` holds the
node (i, j); flattening in C order gives the node numbering
``(j-1)*m + i`` used by the forward solver's banded matrix.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

#: Positivity floor for conductivities; candidates below it are rejected.
KAPPA_MIN = 1e-6

#: Header naming the canonical boundary ordering in serialized traces.
BOUNDARY_ORDER_NAME = "boundary_ccw_from_origin"


@dataclass(frozen=True)
class MeshSpec:
    """Uniform rectangular mesh on [0, Lx] x [0, Ly] with m x n nodes."""

    m: int
    n: int
    Lx: float
    Ly: float

    def __post_init__(self):
        if self.m < 4 or self.n < 4:
            raise ValueError(
                f"mesh must have m >= 4 and n >= 4 nodes (got {self.m}x{self.n}); "
                "the slope-ratio penalty needs 4 nodes per direction"
            )
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError(f"fin dimensions must be positive (got Lx={self.Lx}, Ly={self.Ly})")

    @property
    def dx(self) -> float:
        return self.Lx / (self.m - 1)

    @property
    def dy(self) -> float:
        return self.Ly / (self.n - 1)

    @property
    def num_nodes(self) -> int:
        return self.m * self.n

    @property
    def boundary_length(self) -> int:
        return 2 * (self.m + self.n) - 4

    def x(self, i: int) -> float:
        """x coordinate of 1-based node index i."""
        return (i - 1) * self.dx

    def y(self, j: int) -> float:
        """y coordinate of 1-based node index j."""
        return (j - 1) * self.dy

    def x_coords(self) -> np.ndarray:
        return np.arange(self.m) * self.dx

    def y_coords(self) -> np.ndarray:
        return np.arange(self.n) * self.dy


def make_mesh(m: int, n: int, Lx: float = 4.0, Ly: float = 4.0) -> MeshSpec:
    """Build a mesh spec, validating node counts and dimensions."""
    return MeshSpec(m=int(m), n=int(n), Lx=float(Lx), Ly=float(Ly))


def _check_values(mesh: MeshSpec, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (mesh.n, mesh.m):
        raise ValueError(
            f"field shape {values.shape} does not match mesh (n, m) = ({mesh.n}, {mesh.m})"
        )
    return values


@dataclass(frozen=True)
class ConductivityField:
    """Node-valued conductivity on a mesh; entries must exceed the positivity floor."""

    mesh: MeshSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _check_values(self.mesh, self.values)
        if not np.all(values > KAPPA_MIN):
            raise ValueError(f"conductivity entries must exceed the floor {KAPPA_MIN}")
        object.__setattr__(self, "values", values)

    @classmethod
    def unchecked(cls, mesh: MeshSpec, values: np.ndarray) -> "ConductivityField":
        """Construct without the positivity check.

        Proposal kernels may generate candidates below the floor; the
        chain auto-rejects those, so they never reach a forward solve.
        """
        f = object.__new__(cls)
        object.__setattr__(f, "mesh", mesh)
        object.__setattr__(f, "values", np.asarray(values, dtype=np.float64))
        return f


@dataclass(frozen=True)
class TemperatureField:
    """Node-valued temperature on a mesh."""

    mesh: MeshSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _check_values(self.mesh, self.values)
        if not np.all(np.isfinite(values)):
            raise ValueError("temperature entries must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class BoundaryTrace:
    """Boundary temperatures in canonical counterclockwise order from the origin."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.values)


def constant_field(mesh: MeshSpec, c: float) -> ConductivityField:
    """Conductivity field with every entry equal to c."""
    if c <= KAPPA_MIN:
        raise ValueError(f"constant conductivity must exceed the floor {KAPPA_MIN} (got {c})")
    return ConductivityField(mesh, np.full((mesh.n, mesh.m), float(c)))


def boundary_indices(mesh: MeshSpec) -> np.ndarray:
    """Flat indices of the boundary nodes in canonical order.

    Order: bottom row left to right, right column bottom to top, top row
    right to left, left column top to bottom; each corner appears once.
    """
    m, n = mesh.m, mesh.n
    idx = np.empty(mesh.boundary_length, dtype=np.intp)
    k = 0
    idx[k:k + m] = np.arange(m)                                   # j=1, i=1..m
    k += m
    idx[k:k + n - 1] = np.arange(1, n) * m + (m - 1)              # i=m, j=2..n
    k += n - 1
    idx[k:k + m - 1] = (n - 1) * m + np.arange(m - 2, -1, -1)     # j=n, i=m-1..1
    k += m - 1
    idx[k:] = np.arange(n - 2, 0, -1) * m                         # i=1, j=n-1..2
    return idx


def extract_boundary(u: TemperatureField) -> BoundaryTrace:
    """Restrict a field to its boundary nodes in canonical order."""
    flat = u.values.ravel()
    return BoundaryTrace(flat[boundary_indices(u.mesh)])


def boundary_positions(mesh: MeshSpec) -> list[tuple[int, int]]:
    """(i, j) 1-based positions of the canonical boundary order."""
    return [(int(k % mesh.m) + 1, int(k // mesh.m) + 1) for k in boundary_indices(mesh)]


def field_to_csv(mesh: MeshSpec, values: np.ndarray) -> str:
    """Serialize a grid field: header 'm,n,Lx,Ly' then n rows of m values."""
    buf = io.StringIO()
    buf.write(f"{mesh.m},{mesh.n},{mesh.Lx!r},{mesh.Ly!r}\n")
    for j in range(mesh.n):
        buf.write(",".join(repr(float(v)) for v in values[j]))
        buf.write("\n")
    return buf.getvalue()


def field_from_csv(text: str) -> tuple[MeshSpec, np.ndarray]:
    """Parse the CSV format produced by :func:`field_to_csv`."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split(",")
    if len(head) != 4:
        raise ValueError("field CSV header must be 'm,n,Lx,Ly'")
    mesh = make_mesh(int(head[0]), int(head[1]), float(head[2]), float(head[3]))
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    values = np.array(rows)
    return mesh, _check_values(mesh, values)


def trace_to_csv(trace: BoundaryTrace) -> str:
    lines = [BOUNDARY_ORDER_NAME]
    lines += [repr(float(v)) for v in trace.values]
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str) -> BoundaryTrace:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if lines[0] != BOUNDARY_ORDER_NAME:
        raise ValueError(f"boundary trace CSV must start with header '{BOUNDARY_ORDER_NAME}'")
    return BoundaryTrace(np.array([float(v) for v in lines[1:]]))
