"""Trial conductivities and synthetic boundary data.

Three target families drive the experiments: a constant field, a
tilted plane K(i,j) = (i+j)/divisor + 1, and a Gaussian well, a deep
radial depression centered mid-domain in an otherwise flat field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import FinSolver, PhysicalParams
from .grid import BoundaryTrace, ConductivityField, MeshSpec, constant_field
from .proposals import RngStream

TRIAL_KINDS = ("constant", "tilted_plane", "gaussian_well")

# Gaussian well shape constants: K = amp / (1 + sup * exp(-r^2 / width))
WELL_AMPLITUDE = 2.0
WELL_SUPPRESSION = 50.0
WELL_CENTER = (2.0, 2.0)
WELL_WIDTH = 0.2


@dataclass(frozen=True)
class TrialSpec:
    """Names a target conductivity family and the synthetic-data noise level."""

    kind: str = "constant"
    constant_value: float = 1.68
    divisor: float = 20.0
    noise_std: float = 0.0

    def __post_init__(self):
        if self.kind not in TRIAL_KINDS:
            raise ValueError(f"trial kind must be one of {TRIAL_KINDS} (got {self.kind!r})")
        if self.divisor <= 0:
            raise ValueError(f"tilted-plane divisor must be positive (got {self.divisor})")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0 (got {self.noise_std})")

    def build(self, mesh: MeshSpec) -> ConductivityField:
        if self.kind == "constant":
            return constant_field(mesh, self.constant_value)
        if self.kind == "tilted_plane":
            return tilted_plane(mesh, self.divisor)
        return gaussian_well(mesh)


def tilted_plane(mesh: MeshSpec, divisor: float) -> ConductivityField:
    """K(i,j) = (i + j)/divisor + 1 with 1-based indices."""
    if divisor <= 0:
        raise ValueError(f"divisor must be positive (got {divisor})")
    i = np.arange(1, mesh.m + 1)
    j = np.arange(1, mesh.n + 1)
    values = (i[None, :] + j[:, None]) / divisor + 1.0
    return ConductivityField(mesh, values)


def gaussian_well(mesh: MeshSpec) -> ConductivityField:
    """Flat plateau near 2 with a deep radial well centered at (2, 2)."""
    x = mesh.x_coords()
    y = mesh.y_coords()
    r2 = (x[None, :] - WELL_CENTER[0]) ** 2 + (y[:, None] - WELL_CENTER[1]) ** 2
    values = WELL_AMPLITUDE / (1.0 + WELL_SUPPRESSION * np.exp(-r2 / WELL_WIDTH))
    return ConductivityField(mesh, values)


def synthesize_data(
    K_correct: ConductivityField,
    mesh: MeshSpec,
    phys: PhysicalParams,
    noise_std: float = 0.0,
    rng: RngStream | None = None,
) -> BoundaryTrace:
    """Boundary trace of the forward solution, optionally with Gaussian noise."""
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0 (got {noise_std})")
    trace = FinSolver(mesh, phys).boundary_flat(K_correct.values.ravel())
    if noise_std > 0:
        if rng is None:
            raise ValueError("noisy data requires an RngStream")
        trace = trace + rng.normal(noise_std, size=trace.shape)
    return BoundaryTrace(trace)


def reconstruction_error(
    K_hat: ConductivityField, K_correct: ConductivityField
) -> tuple[float, float, float]:
    """(mean absolute, RMS, max absolute) entrywise deviation."""
    if K_hat.mesh != K_correct.mesh:
        raise ValueError("fields live on different meshes")
    err = np.abs(K_hat.values - K_correct.values)
    return float(err.mean()), float(np.sqrt(np.mean(err**2))), float(err.max())
