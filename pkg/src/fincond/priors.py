"""Data misfit, prior functionals, and the combined acceptance probability.

Three Metropolis variants share the misfit exponent f_n - f_c:

* smoothness: damps candidates rougher than the current state,
  exponent f_n - f_c - lam * (T_c - T_n);
* slope-ratio: penalizes changes in the ratio of adjacent slopes,
  exponent f_n - f_c - mu * (Px_c + Py_c);
* flatness: penalizes any roughness at all, exponent f_n - f_c - w * T_c.

The chain accepts with the maximum of the three probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import BoundaryTrace, ConductivityField

# exp() underflows to 0 below roughly -745; clamping keeps alpha > 0.
_EXP_FLOOR = -745.0


@dataclass(frozen=True)
class PriorWeights:
    """Weights of the three priors plus likelihood and slope regularizers."""

    lam: float = 100.0
    mu: float = 0.0
    w: float = 0.0
    sigma: float = 0.1
    epsilon0: float = 0.00005

    def __post_init__(self):
        if self.lam < 0 or not np.isfinite(self.lam):
            raise ValueError(f"smoothness weight lam must be finite and >= 0 (got {self.lam})")
        if self.mu < 0 or not np.isfinite(self.mu):
            raise ValueError(f"slope weight mu must be finite and >= 0 (got {self.mu})")
        if self.w < 0 or not np.isfinite(self.w):
            raise ValueError(f"flatness weight w must be finite and >= 0 (got {self.w})")
        if self.sigma <= 0:
            raise ValueError(f"likelihood noise scale sigma must be positive (got {self.sigma})")
        if self.epsilon0 <= 0:
            raise ValueError(f"slope regularizer epsilon0 must be positive (got {self.epsilon0})")


@dataclass(frozen=True)
class PriorEvaluation:
    """Cached functionals of one conductivity state."""

    f: float
    T: float
    Px: float
    Py: float


def data_misfit(d: BoundaryTrace, d_sim: BoundaryTrace, sigma: float) -> float:
    """Half the sum of squared sigma-normalized trace residuals."""
    return misfit_flat(d.values, d_sim.values, sigma)


def misfit_flat(d: np.ndarray, d_sim: np.ndarray, sigma: float) -> float:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive (got {sigma})")
    if d.shape != d_sim.shape:
        raise ValueError(f"trace length mismatch: {d.shape} vs {d_sim.shape}")
    r = (d - d_sim) / sigma
    return 0.5 * float(r @ r)


def smoothness_term(K: ConductivityField) -> float:
    """Sum of squared differences between adjacent nodes in both directions."""
    return smoothness_flat(K.values)


def smoothness_flat(values: np.ndarray) -> float:
    dx = np.diff(values, axis=1)
    dy = np.diff(values, axis=0)
    return float(np.einsum("ij,ij->", dx, dx) + np.einsum("ij,ij->", dy, dy))


def slope_terms(K: ConductivityField, epsilon0: float) -> tuple[float, float]:
    """Slope-ratio penalties (Px, Py); zero whenever the slope ratio is constant."""
    Px, Py, _ = slope_terms_flat(K.values, epsilon0)
    return Px, Py


def slope_terms_flat(values: np.ndarray, epsilon0: float) -> tuple[float, float, int]:
    """Array-level slope penalties; also returns the degenerate-summand count.

    A summand whose denominator S + epsilon0 vanishes exactly is
    re-evaluated with epsilon0 doubled for that summand only.
    """
    if epsilon0 <= 0:
        raise ValueError(f"epsilon0 must be positive (got {epsilon0})")
    Px, deg_x = _slope_penalty(np.diff(values, axis=1), epsilon0, axis=1)
    Py, deg_y = _slope_penalty(np.diff(values, axis=0), epsilon0, axis=0)
    return Px, Py, deg_x + deg_y


def _slope_penalty(slopes: np.ndarray, eps: float, axis: int) -> tuple[float, int]:
    # summand over triples (S_k, S_{k+1}, S_{k+2}) along `axis`:
    # | (S_k+eps)/(S_{k+1}+eps) - (S_{k+1}+eps)/(S_{k+2}+eps) |
    if slopes.shape[axis] < 3:
        return 0.0, 0
    sl = [slice(None), slice(None)]

    def shift(arr, k):
        s = list(sl)
        stop = arr.shape[axis] - 2 + k
        s[axis] = slice(k, stop if stop != 0 else None)
        return arr[tuple(s)]

    degenerate = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = shift(slopes, 0) + eps
        s1 = shift(slopes, 1) + eps
        s2 = shift(slopes, 2) + eps
        terms = np.abs(s0 / s1 - s1 / s2)
        bad = (s1 == 0.0) | (s2 == 0.0)
        if bad.any():
            degenerate = int(bad.sum())
            e2 = 2 * eps
            t0 = shift(slopes, 0)[bad] + e2
            t1 = shift(slopes, 1)[bad] + e2
            t2 = shift(slopes, 2)[bad] + e2
            terms[bad] = np.abs(t0 / t1 - t1 / t2)
    return float(terms.sum()), degenerate


def acceptance_probability(
    f_n: float,
    f_c: float,
    T_n: float,
    T_c: float,
    Px_c: float,
    Py_c: float,
    weights: PriorWeights,
) -> float:
    """max of the smoothness, slope, and flatness acceptance probabilities.

    Subscript n is the current state, c the candidate. A prior with
    weight zero is disabled: its branch is excluded from the max,
    otherwise a single active prior could never damp anything (a
    zero-weight branch is pure likelihood and dominates the max). With
    all three weights zero this is plain likelihood-only Metropolis.
    """
    base = f_n - f_c
    exponent = base
    active = False
    if weights.lam > 0:
        exponent = base - weights.lam * (T_c - T_n)
        active = True
    if weights.mu > 0:
        e_s = base - weights.mu * (Px_c + Py_c)
        exponent = e_s if not active else max(exponent, e_s)
        active = True
    if weights.w > 0:
        e_f = base - weights.w * T_c
        exponent = e_f if not active else max(exponent, e_f)
    if exponent >= 0.0:
        return 1.0
    return float(np.exp(max(exponent, _EXP_FLOOR)))
