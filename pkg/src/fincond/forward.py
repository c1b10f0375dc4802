"""Finite-difference forward solver for the steady-state cooling fin.

The fin satisfies u_xx + u_yy = (2H / (K delta)) u on a uniform mesh.
Convective boundaries obey K du/dn_out = -H u (heat leaves the fin);
the CPU contact segment on the lower half of the left edge prescribes
an inward flux, K du/dn_out = q. Both conditions are discretized to
second order by ghost-node elimination, so the matrix couples each
boundary node to its mirrored interior neighbor with a doubled weight.

Nodes are numbered p = (j-1)*m + i (1-based i, j), giving a banded
matrix of bandwidth m. K enters only the main diagonal and the
right-hand side, so the off-diagonal bands are assembled once per mesh
and reused for every solve; :class:`FinSolver` exploits this in the
MCMC hot path by refreshing only the diagonal before each banded LU.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs, solve_banded

from .grid import (
    KAPPA_MIN,
    BoundaryTrace,
    ConductivityField,
    MeshSpec,
    TemperatureField,
    boundary_indices,
)


class SolverError(RuntimeError):
    """Raised when the banded factorization breaks down."""


@dataclass(frozen=True)
class PhysicalParams:
    """Fin physics: convection H, thickness delta, contact flux q.

    The contact segment is the part of the left edge with
    y <= contact_fraction * Ly; contact_fraction = 1 means the whole
    left edge is in contact with the CPU.
    """

    H: float = 0.005
    delta: float = 0.1
    q: float = 25.0
    contact_fraction: float = 0.5

    def __post_init__(self):
        if self.H <= 0:
            raise ValueError(f"convection coefficient H must be positive (got {self.H})")
        if self.delta <= 0:
            raise ValueError(f"fin thickness delta must be positive (got {self.delta})")
        if self.q < 0:
            raise ValueError(f"contact flux q must be nonnegative (got {self.q})")
        if not (0 < self.contact_fraction <= 1):
            raise ValueError(
                f"contact_fraction must lie in (0, 1] (got {self.contact_fraction})"
            )


@dataclass
class FaceData:
    """Per-node boundary data, one entry per node (zero off the boundary).

    Each boundary face imposes K du/dn_out = -h u + r. Convective faces
    have h = H, r = 0; the contact segment has h = 0, r = q. Nonstandard
    values support manufactured-solution tests.
    """

    h_x: np.ndarray
    h_y: np.ndarray
    r_x: np.ndarray
    r_y: np.ndarray


def contact_mask(mesh: MeshSpec, phys: PhysicalParams) -> np.ndarray:
    """Boolean (n, m) mask of the CPU contact nodes on the left edge."""
    mask = np.zeros((mesh.n, mesh.m), dtype=bool)
    y = mesh.y_coords()
    tol = 1e-12 * mesh.Ly
    mask[y <= phys.contact_fraction * mesh.Ly + tol, 0] = True
    return mask


def default_face_data(mesh: MeshSpec, phys: PhysicalParams) -> FaceData:
    """Face data for the physical problem: convection everywhere except the contact."""
    n, m = mesh.n, mesh.m
    h_x = np.zeros((n, m))
    h_y = np.zeros((n, m))
    r_x = np.zeros((n, m))
    r_y = np.zeros((n, m))
    h_x[:, 0] = phys.H
    h_x[:, m - 1] = phys.H
    h_y[0, :] = phys.H
    h_y[n - 1, :] = phys.H
    contact = contact_mask(mesh, phys)
    h_x[contact] = 0.0
    r_x[contact] = phys.q
    return FaceData(h_x.ravel(), h_y.ravel(), r_x.ravel(), r_y.ravel())


def _neighbor_bands(mesh: MeshSpec):
    """Off-diagonal stencil weights; boundary rows carry the doubled ghost weight."""
    n, m = mesh.n, mesh.m
    wx, wy = 1.0 / mesh.dx**2, 1.0 / mesh.dy**2
    cx_plus = np.full((n, m), wx)
    cx_minus = np.full((n, m), wx)
    cy_plus = np.full((n, m), wy)
    cy_minus = np.full((n, m), wy)
    cx_plus[:, 0] = 2 * wx
    cx_plus[:, m - 1] = 0.0
    cx_minus[:, m - 1] = 2 * wx
    cx_minus[:, 0] = 0.0
    cy_plus[0, :] = 2 * wy
    cy_plus[n - 1, :] = 0.0
    cy_minus[n - 1, :] = 2 * wy
    cy_minus[0, :] = 0.0
    return cx_plus.ravel(), cx_minus.ravel(), cy_plus.ravel(), cy_minus.ravel()


def _reaction_coef(mesh: MeshSpec, phys: PhysicalParams, face: FaceData) -> np.ndarray:
    """Per-node factor c with diagonal contribution -c / K."""
    return 2 * phys.H / phys.delta + (2 / mesh.dx) * face.h_x + (2 / mesh.dy) * face.h_y


@dataclass
class LinearSystem:
    """Banded system A u = b in ``scipy.linalg.solve_banded`` layout.

    ``ab[m + p - q, q]`` holds A[p, q] with bandwidth m either side;
    node (i, j) maps to row p = (j-1)*m + i (1-based).
    """

    mesh: MeshSpec
    ab: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.mesh.num_nodes

    @property
    def bandwidth(self) -> int:
        return self.mesh.m

    def node_index(self, i: int, j: int) -> int:
        """0-based row index of 1-based node (i, j)."""
        return (j - 1) * self.mesh.m + (i - 1)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """A @ u computed band by band."""
        m = self.mesh.m
        out = np.zeros_like(u)
        for r in range(self.ab.shape[0]):
            d = m - r  # band offset: column = row + d
            if d >= 0:
                out[: len(u) - d] += self.ab[r, d:] * u[d:]
            else:
                out[-d:] += self.ab[r, :d] * u[:d]
        return out

    def to_dense(self) -> np.ndarray:
        m, N = self.mesh.m, self.dimension
        A = np.zeros((N, N))
        for r in range(self.ab.shape[0]):
            d = m - r
            diag = self.ab[r, max(d, 0):] if d >= 0 else self.ab[r, : d]
            A += np.diag(diag, k=d)
        return A


def _check_conductivity(K: ConductivityField) -> np.ndarray:
    K_flat = K.values.ravel()
    if not np.all(K_flat > KAPPA_MIN):
        raise ValueError(f"conductivity entries must exceed the floor {KAPPA_MIN}")
    return K_flat


def assemble_system(
    K: ConductivityField,
    mesh: MeshSpec,
    phys: PhysicalParams,
    volume_source: np.ndarray | None = None,
    face_data: FaceData | None = None,
) -> LinearSystem:
    """Assemble the banded discretization of the fin equation.

    volume_source and face_data override the defaults (zero source,
    physical boundary conditions) for verification problems.
    """
    K_flat = _check_conductivity(K)
    face = face_data if face_data is not None else default_face_data(mesh, phys)
    m, N = mesh.m, mesh.num_nodes

    ab = np.zeros((2 * m + 1, N))
    cx_plus, cx_minus, cy_plus, cy_minus = _neighbor_bands(mesh)
    ab[m - 1, 1:] = cx_plus[:-1]
    ab[m + 1, :-1] = cx_minus[1:]
    ab[0, m:] = cy_plus[:-m]
    ab[2 * m, :-m] = cy_minus[m:]
    base = -2.0 / mesh.dx**2 - 2.0 / mesh.dy**2
    ab[m, :] = base - _reaction_coef(mesh, phys, face) / K_flat

    rhs = -(2 / mesh.dx) * face.r_x / K_flat - (2 / mesh.dy) * face.r_y / K_flat
    if volume_source is not None:
        rhs = rhs + np.asarray(volume_source, dtype=np.float64).ravel()
    return LinearSystem(mesh, ab, rhs)


def solve_system(system: LinearSystem) -> np.ndarray:
    """Direct banded solve; returns the flat solution vector."""
    m = system.mesh.m
    try:
        u = solve_banded((m, m), system.ab, system.rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - unreachable for valid K
        raise SolverError(f"banded factorization failed: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise SolverError("banded solve produced non-finite values")
    return u


class FinSolver:
    """Reusable forward solver holding preallocated factorization workspace.

    One instance per chain: the LAPACK workspace is mutated in place on
    every call, so instances must not be shared across threads.
    """

    def __init__(self, mesh: MeshSpec, phys: PhysicalParams):
        self.mesh = mesh
        self.phys = phys
        m, N = mesh.m, mesh.num_nodes
        self._m = m
        self._N = N

        face = default_face_data(mesh, phys)
        self._coef = _reaction_coef(mesh, phys, face)
        self._base_diag = -2.0 / mesh.dx**2 - 2.0 / mesh.dy**2
        contact = contact_mask(mesh, phys).ravel()
        self._contact_idx = np.nonzero(contact)[0]
        self._q_factor = 2 * phys.q / mesh.dx
        self._bidx = boundary_indices(mesh)

        # gbsv layout: A[p, q] at row 2m + p - q; top m rows are LU fill.
        template = np.zeros((3 * m + 1, N), order="F")
        cx_plus, cx_minus, cy_plus, cy_minus = _neighbor_bands(mesh)
        template[2 * m - 1, 1:] = cx_plus[:-1]
        template[2 * m + 1, :-1] = cx_minus[1:]
        template[m, m:] = cy_plus[:-m]
        template[3 * m, :-m] = cy_minus[m:]
        self._template = template
        self._work = np.zeros_like(template)
        self._rhs = np.zeros(N)
        (self._gbsv,) = get_lapack_funcs(("gbsv",), (template,))

    def solve_flat(self, K_flat: np.ndarray) -> np.ndarray:
        """Solve for the flat temperature vector; K_flat entries must be > 0."""
        m = self._m
        np.copyto(self._work, self._template)
        self._work[2 * m, :] = self._base_diag - self._coef / K_flat
        rhs = self._rhs
        rhs[:] = 0.0
        rhs[self._contact_idx] = -self._q_factor / K_flat[self._contact_idx]
        _, _, u, info = self._gbsv(m, m, self._work, rhs, overwrite_ab=True, overwrite_b=True)
        if info != 0:
            raise SolverError(f"dgbsv failed with info={info}")
        return u

    def boundary_flat(self, K_flat: np.ndarray) -> np.ndarray:
        """Boundary trace values of the solution, canonical order."""
        return self.solve_flat(K_flat)[self._bidx]


def solve_forward(K: ConductivityField, mesh: MeshSpec, phys: PhysicalParams) -> TemperatureField:
    """Solve the fin equation for the given conductivity."""
    K_flat = _check_conductivity(K)
    u = FinSolver(mesh, phys).solve_flat(K_flat)
    return TemperatureField(mesh, u.reshape(mesh.n, mesh.m))


def boundary_of_solution(
    K: ConductivityField, mesh: MeshSpec, phys: PhysicalParams
) -> BoundaryTrace:
    """Boundary trace of the forward solution; the chain's hot path."""
    K_flat = _check_conductivity(K)
    return BoundaryTrace(FinSolver(mesh, phys).boundary_flat(K_flat))
