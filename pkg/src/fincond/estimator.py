"""Scikit-learn style estimator facade over the MCMC reconstruction.

``ConductivityReconstructor().fit(d)`` reconstructs the conductivity
grid from a boundary-temperature trace; ``predict()`` returns the
boundary trace simulated from the fitted field. Parameters follow the
sklearn convention (stored verbatim in ``__init__``, validated in
``fit``), so the estimator composes with ``get_params``/``set_params``,
``clone``, and pipeline machinery.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .chain import McmcConfig, run_chain
from .forward import FinSolver, PhysicalParams
from .grid import BoundaryTrace, constant_field, make_mesh
from .priors import PriorWeights, misfit_flat
from .proposals import ProposalConfig


class ConductivityReconstructor(BaseEstimator):
    """Reconstruct a fin's conductivity grid from boundary temperatures.

    Parameters mirror the run configuration: mesh size (m, n) and fin
    dimensions, physics (H, delta, q, contact_fraction), prior weights
    (lam, mu, w), likelihood scale sigma, proposal kernel and bound,
    iteration budget, and seed.

    Attributes set by fit:
        conductivity_: (n, m) reconstructed conductivity values.
        result_: the full ChainResult (trace, snapshots, counters).
        misfit_: final data misfit of the reconstruction.
    """

    def __init__(
        self,
        m=10,
        n=10,
        Lx=4.0,
        Ly=4.0,
        H=0.005,
        delta=0.1,
        q=25.0,
        contact_fraction=0.5,
        lam=100.0,
        mu=0.0,
        w=0.0,
        sigma=0.1,
        epsilon0=0.00005,
        kernel="gridwise",
        omega_bound=0.005,
        kappa_min=1e-6,
        iterations=100_000,
        k0=1.0,
        seed=0,
    ):
        self.m = m
        self.n = n
        self.Lx = Lx
        self.Ly = Ly
        self.H = H
        self.delta = delta
        self.q = q
        self.contact_fraction = contact_fraction
        self.lam = lam
        self.mu = mu
        self.w = w
        self.sigma = sigma
        self.epsilon0 = epsilon0
        self.kernel = kernel
        self.omega_bound = omega_bound
        self.kappa_min = kappa_min
        self.iterations = iterations
        self.k0 = k0
        self.seed = seed

    def _mesh(self):
        return make_mesh(self.m, self.n, self.Lx, self.Ly)

    def _physics(self):
        return PhysicalParams(
            H=self.H, delta=self.delta, q=self.q, contact_fraction=self.contact_fraction
        )

    def _validate_trace(self, d) -> np.ndarray:
        values = d.values if isinstance(d, BoundaryTrace) else np.asarray(d, dtype=np.float64)
        values = np.ravel(values)
        expected = self._mesh().boundary_length
        if values.shape != (expected,):
            raise ValueError(
                f"boundary trace must have length {expected} for a "
                f"{self.m}x{self.n} mesh, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("boundary trace contains non-finite values")
        return values

    def fit(self, d, y=None):
        """Run the chain against the observed boundary trace d."""
        values = self._validate_trace(d)
        mesh = self._mesh()
        phys = self._physics()
        cfg = McmcConfig(
            iterations=int(self.iterations),
            weights=PriorWeights(
                lam=self.lam, mu=self.mu, w=self.w, sigma=self.sigma, epsilon0=self.epsilon0
            ),
            proposal=ProposalConfig(
                omega_bound=self.omega_bound, kernel=self.kernel, kappa_min=self.kappa_min
            ),
            seed=int(self.seed),
        )
        result = run_chain(
            BoundaryTrace(values), mesh, phys, cfg, k0=constant_field(mesh, self.k0)
        )
        self.result_ = result
        self.conductivity_ = result.final.values
        self.misfit_ = result.final_misfit
        self.n_features_in_ = len(values)
        return self

    def predict(self, d=None):
        """Boundary trace simulated from the fitted conductivity."""
        check_is_fitted(self, "conductivity_")
        return FinSolver(self._mesh(), self._physics()).boundary_flat(
            self.conductivity_.ravel()
        )

    def score(self, d, y=None):
        """Negative misfit of the fitted field against the given trace."""
        check_is_fitted(self, "conductivity_")
        values = self._validate_trace(d)
        return -misfit_flat(values, self.predict(), self.sigma)
