"""Candidate generation: uniform, pointwise, and gridwise shifts.

All three kernels draw a single shift omega ~ Uniform(-bound, bound)
per proposal and add it to either every entry, one random entry, or
the four corners of one random mesh cell. Each kernel is symmetric
(the reverse move has the same site probability and |omega| density),
so the Hastings correction ratio is identically 1 and the acceptance
rule needs only the posterior terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ConductivityField

KERNELS = ("uniform", "pointwise", "gridwise")


@dataclass(frozen=True)
class ProposalConfig:
    """Proposal settings: shift half-width, kernel name, positivity floor."""

    omega_bound: float = 0.005
    kernel: str = "gridwise"
    kappa_min: float = 1e-6

    def __post_init__(self):
        # omega_bound = 0 is allowed as the degenerate identity proposal
        if self.omega_bound < 0 or not np.isfinite(self.omega_bound):
            raise ValueError(f"omega_bound must be finite and >= 0 (got {self.omega_bound})")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS} (got {self.kernel!r})")
        if self.kappa_min <= 0:
            raise ValueError(f"kappa_min must be positive (got {self.kappa_min})")


class RngStream:
    """Seedable deterministic random stream (PCG64), one per chain.

    Identical seeds reproduce identical draw sequences. Streams for
    parallel chains derive from a master seed via :func:`derive_seed`.
    """

    def __init__(self, seed: int):
        self._bitgen = np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._gen = np.random.Generator(self._bitgen)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def uniform(self, low: float, high: float) -> float:
        return float(self._gen.uniform(low, high))

    def random(self) -> float:
        return float(self._gen.random())

    def integer_below(self, n: int) -> int:
        return int(self._gen.integers(n))

    def normal(self, scale: float, size=None):
        return self._gen.normal(0.0, scale, size=size)

    def state_words(self) -> tuple[int, int, int, int]:
        """PCG64 state as integers, for checkpoint serialization."""
        st = self._bitgen.state
        return (
            st["state"]["state"],
            st["state"]["inc"],
            int(st["has_uint32"]),
            int(st["uinteger"]),
        )

    def restore_state_words(self, state: int, inc: int, has_uint32: int, uinteger: int) -> None:
        self._bitgen.state = {
            "bit_generator": "PCG64",
            "state": {"state": state, "inc": inc},
            "has_uint32": int(has_uint32),
            "uinteger": int(uinteger),
        }


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic child seed: master XOR a splitmix64-style hash of the index."""
    z = (index + 1) * 0x9E3779B97F4A7C15 & 0xFFFFFFFFFFFFFFFF
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 31
    return (master_seed ^ z) & 0xFFFFFFFFFFFFFFFF


def _draw_omega(cfg: ProposalConfig, rng: RngStream) -> float:
    if cfg.omega_bound == 0.0:
        return 0.0
    return rng.uniform(-cfg.omega_bound, cfg.omega_bound)


def propose_uniform_values(
    values: np.ndarray, cfg: ProposalConfig, rng: RngStream
) -> np.ndarray:
    """Shift every entry by one shared omega."""
    return values + _draw_omega(cfg, rng)


def propose_pointwise_values(
    values: np.ndarray, cfg: ProposalConfig, rng: RngStream
) -> np.ndarray:
    """Shift a single uniformly chosen entry by omega."""
    n, m = values.shape
    idx = rng.integer_below(n * m)
    omega = _draw_omega(cfg, rng)
    out = values.copy()
    out[idx // m, idx % m] += omega
    return out


def propose_gridwise_values(
    values: np.ndarray, cfg: ProposalConfig, rng: RngStream
) -> np.ndarray:
    """Shift the four corners of a uniformly chosen mesh cell by omega."""
    n, m = values.shape
    cell = rng.integer_below((n - 1) * (m - 1))
    cj, ci = divmod(cell, m - 1)
    omega = _draw_omega(cfg, rng)
    out = values.copy()
    out[cj : cj + 2, ci : ci + 2] += omega
    return out


_KERNEL_FUNCS = {
    "uniform": propose_uniform_values,
    "pointwise": propose_pointwise_values,
    "gridwise": propose_gridwise_values,
}


def kernel_function(name: str):
    """Array-level proposal function for a kernel name."""
    try:
        return _KERNEL_FUNCS[name]
    except KeyError:
        raise ValueError(f"kernel must be one of {KERNELS} (got {name!r})") from None


def _propose(K: ConductivityField, cfg: ProposalConfig, rng: RngStream, func) -> ConductivityField:
    # candidates below the floor are legal here; mh_step auto-rejects them
    return ConductivityField.unchecked(K.mesh, func(K.values, cfg, rng))


def propose_uniform(K: ConductivityField, cfg: ProposalConfig, rng: RngStream) -> ConductivityField:
    return _propose(K, cfg, rng, propose_uniform_values)


def propose_pointwise(K: ConductivityField, cfg: ProposalConfig, rng: RngStream) -> ConductivityField:
    return _propose(K, cfg, rng, propose_pointwise_values)


def propose_gridwise(K: ConductivityField, cfg: ProposalConfig, rng: RngStream) -> ConductivityField:
    return _propose(K, cfg, rng, propose_gridwise_values)
