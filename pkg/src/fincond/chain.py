"""Metropolis-Hastings chain over conductivity fields.

Each step proposes a candidate with the configured kernel, solves the
forward problem for it, and accepts with the combined (max-of-priors)
probability. The current state's misfit and smoothness term are cached,
so exactly one forward solve runs per iteration. Candidates with any
entry at or below the positivity floor are rejected before the solve
and counted separately from Metropolis rejections.
"""

from __future__ import annotations

import struct
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .forward import FinSolver, PhysicalParams
from .grid import BoundaryTrace, ConductivityField, MeshSpec, constant_field
from .priors import (
    PriorWeights,
    acceptance_probability,
    misfit_flat,
    slope_terms_flat,
    smoothness_flat,
)
from .proposals import ProposalConfig, RngStream, derive_seed, kernel_function


class CheckpointError(RuntimeError):
    """Raised on checkpoint version mismatch or corruption."""


class ChainError(RuntimeError):
    """Raised when a step fails; carries the iteration and candidate hash."""


@dataclass(frozen=True)
class McmcConfig:
    """Chain settings: budget, priors, proposal kernel, trace density, seed."""

    iterations: int
    weights: PriorWeights = PriorWeights()
    proposal: ProposalConfig = ProposalConfig()
    thin: int | None = None
    snapshot_count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1 (got {self.iterations})")
        if self.thin is not None and self.thin < 1:
            raise ValueError(f"thin must be >= 1 (got {self.thin})")
        if self.snapshot_count < 0:
            raise ValueError(f"snapshot_count must be >= 0 (got {self.snapshot_count})")

    @property
    def effective_thin(self) -> int:
        if self.thin is not None:
            return self.thin
        return max(1, self.iterations // 1000)


@dataclass
class ChainState:
    """Mutable chain state; f_n and T_n always match recomputation from values."""

    mesh: MeshSpec
    values: np.ndarray
    f_n: float
    T_n: float
    iter: int
    accept_count: int
    floor_reject_count: int
    slope_degenerate_count: int
    rng: RngStream
    update_counts: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.update_counts is None:
            self.update_counts = np.zeros((self.mesh.n, self.mesh.m), dtype=np.uint64)

    @property
    def conductivity(self) -> ConductivityField:
        return ConductivityField(self.mesh, self.values.copy())


@dataclass
class ChainResult:
    """Outcome of a chain run: final field, thinned trace, snapshots, counters."""

    final: ConductivityField
    trace: np.ndarray  # columns: iteration, misfit, acceptance rate to date
    snapshots: list[tuple[int, np.ndarray]]
    update_counts: np.ndarray
    accept_count: int
    floor_reject_count: int
    slope_degenerate_count: int
    iterations: int
    final_misfit: float
    best_misfit: float
    wall_time: float
    config: McmcConfig

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.iterations if self.iterations else 0.0


class ChainRunner:
    """Binds data, solver, and config so the per-step cost is one banded solve."""

    def __init__(
        self,
        d: BoundaryTrace | np.ndarray,
        mesh: MeshSpec,
        phys: PhysicalParams,
        cfg: McmcConfig,
    ):
        self.mesh = mesh
        self.phys = phys
        self.cfg = cfg
        self.d = d.values if isinstance(d, BoundaryTrace) else np.asarray(d, dtype=np.float64)
        if len(self.d) != mesh.boundary_length:
            raise ValueError(
                f"data trace length {len(self.d)} does not match mesh boundary "
                f"length {mesh.boundary_length}"
            )
        self.solver = FinSolver(mesh, phys)
        self._kernel = kernel_function(cfg.proposal.kernel)

    def init_state(self, k0: ConductivityField | None = None) -> ChainState:
        K0 = k0 if k0 is not None else constant_field(self.mesh, 1.0)
        if K0.mesh != self.mesh:
            raise ValueError("initial conductivity mesh does not match the run mesh")
        values = K0.values.copy()
        w = self.cfg.weights
        f0 = misfit_flat(self.d, self.solver.boundary_flat(values.ravel()), w.sigma)
        return ChainState(
            mesh=self.mesh,
            values=values,
            f_n=f0,
            T_n=smoothness_flat(values),
            iter=0,
            accept_count=0,
            floor_reject_count=0,
            slope_degenerate_count=0,
            rng=RngStream(self.cfg.seed),
        )

    def step(self, state: ChainState) -> None:
        """Advance the chain by one accept/reject decision, in place."""
        cfg = self.cfg
        w = cfg.weights
        cand = self._kernel(state.values, cfg.proposal, state.rng)
        state.iter += 1
        if cand.min() <= cfg.proposal.kappa_min:
            state.floor_reject_count += 1
            return
        try:
            d_sim = self.solver.boundary_flat(cand.ravel())
        except Exception as exc:
            raise ChainError(
                f"forward solve failed at iteration {state.iter} "
                f"(candidate hash {hash(cand.tobytes()):#x}): {exc}"
            ) from exc
        f_c = misfit_flat(self.d, d_sim, w.sigma)
        T_c = smoothness_flat(cand)
        if w.mu > 0:
            Px_c, Py_c, deg = slope_terms_flat(cand, w.epsilon0)
            state.slope_degenerate_count += deg
        else:
            Px_c = Py_c = 0.0
        alpha = acceptance_probability(state.f_n, f_c, state.T_n, T_c, Px_c, Py_c, w)
        if state.rng.random() < alpha:
            state.update_counts += cand != state.values
            state.values = cand
            state.f_n = f_c
            state.T_n = T_c
            state.accept_count += 1

    def run(
        self,
        k0: ConductivityField | None = None,
        initial_state: ChainState | None = None,
        checkpoint_path=None,
        checkpoint_every: int | None = None,
    ) -> ChainResult:
        """Run to cfg.iterations total steps; resumes if initial_state is given."""
        cfg = self.cfg
        state = initial_state if initial_state is not None else self.init_state(k0)
        if state.iter > cfg.iterations:
            raise ValueError(
                f"state is already at iteration {state.iter} > budget {cfg.iterations}"
            )
        thin = cfg.effective_thin
        snap_at = snapshot_iterations(cfg.iterations, cfg.snapshot_count)

        trace_rows: list[tuple[int, float, float]] = []
        snapshots: list[tuple[int, np.ndarray]] = []
        best = state.f_n
        start = time.perf_counter()
        try:
            for _ in range(state.iter, cfg.iterations):
                self.step(state)
                best = min(best, state.f_n)
                it = state.iter
                if it % thin == 0 or it == cfg.iterations:
                    trace_rows.append((it, state.f_n, state.accept_count / it))
                if it in snap_at:
                    snapshots.append((it, state.values.copy()))
                if checkpoint_every and it % checkpoint_every == 0:
                    checkpoint_save(state, checkpoint_path)
        except ChainError:
            if checkpoint_path is not None:
                checkpoint_save(state, checkpoint_path)
            raise
        wall = time.perf_counter() - start
        if checkpoint_path is not None:
            checkpoint_save(state, checkpoint_path)
        return ChainResult(
            final=ConductivityField(self.mesh, state.values.copy()),
            trace=np.array(trace_rows, dtype=np.float64).reshape(-1, 3),
            snapshots=snapshots,
            update_counts=state.update_counts.copy(),
            accept_count=state.accept_count,
            floor_reject_count=state.floor_reject_count,
            slope_degenerate_count=state.slope_degenerate_count,
            iterations=state.iter,
            final_misfit=state.f_n,
            best_misfit=best,
            wall_time=wall,
            config=cfg,
        )


def snapshot_iterations(iterations: int, count: int) -> frozenset[int]:
    """Evenly spaced snapshot iterations, always including the last."""
    if count <= 0:
        return frozenset()
    return frozenset(round(k * iterations / count) for k in range(1, count + 1))


def mh_step(
    state: ChainState,
    d: BoundaryTrace,
    mesh: MeshSpec,
    phys: PhysicalParams,
    cfg: McmcConfig,
) -> ChainState:
    """One Metropolis step. Builds a fresh solver; loops should use ChainRunner."""
    ChainRunner(d, mesh, phys, cfg).step(state)
    return state


def run_chain(
    d: BoundaryTrace,
    mesh: MeshSpec,
    phys: PhysicalParams,
    cfg: McmcConfig,
    k0: ConductivityField | None = None,
    checkpoint_path=None,
    checkpoint_every: int | None = None,
) -> ChainResult:
    """Run a full chain from K_0 (default: all ones)."""
    return ChainRunner(d, mesh, phys, cfg).run(
        k0=k0, checkpoint_path=checkpoint_path, checkpoint_every=checkpoint_every
    )


def run_chains(
    d: BoundaryTrace,
    mesh: MeshSpec,
    phys: PhysicalParams,
    cfg: McmcConfig,
    n_chains: int,
    k0: ConductivityField | None = None,
) -> list[ChainResult]:
    """Run n independent chains with seeds derived from cfg.seed.

    Results depend only on the derived seeds, never on scheduling order.
    """
    results = []
    for idx in range(n_chains):
        chain_cfg = McmcConfig(
            iterations=cfg.iterations,
            weights=cfg.weights,
            proposal=cfg.proposal,
            thin=cfg.thin,
            snapshot_count=cfg.snapshot_count,
            seed=derive_seed(cfg.seed, idx),
        )
        results.append(run_chain(d, mesh, phys, chain_cfg, k0=k0))
    return results


# ---------------------------------------------------------------------------
# Checkpointing: fixed-layout little-endian binary, CRC32-protected.
# Layout after the 4-byte magic: version u32, m u32, n u32, Lx f64, Ly f64,
# K values (m*n f64, row order), iter u64, accept u64, floor_reject u64,
# slope_degenerate u64, f_n f64, T_n f64, seed u64, RNG state (two 16-byte
# words, has_uint32 u32, uinteger u32), update counts (m*n u64), CRC32 u32
# of everything from version onward.

CHECKPOINT_MAGIC = b"FRCK"
CHECKPOINT_VERSION = 1


def checkpoint_save(state: ChainState, path) -> None:
    """Write the chain state; the round trip through load is exact."""
    mesh = state.mesh
    parts = [struct.pack("<IIIdd", CHECKPOINT_VERSION, mesh.m, mesh.n, mesh.Lx, mesh.Ly)]
    K = np.ascontiguousarray(state.values, dtype="<f8")
    parts.append(K.tobytes())
    parts.append(
        struct.pack(
            "<QQQQddQ",
            state.iter,
            state.accept_count,
            state.floor_reject_count,
            state.slope_degenerate_count,
            state.f_n,
            state.T_n,
            state.rng.seed,
        )
    )
    rng_state, rng_inc, has32, uint = state.rng.state_words()
    parts.append(rng_state.to_bytes(16, "little"))
    parts.append(rng_inc.to_bytes(16, "little"))
    parts.append(struct.pack("<II", has32, uint))
    parts.append(np.ascontiguousarray(state.update_counts, dtype="<u8").tobytes())
    body = b"".join(parts)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + body + struct.pack("<I", crc))


def checkpoint_load(path) -> ChainState:
    """Load a chain state written by :func:`checkpoint_save`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a chain checkpoint (bad magic)")
    body, (crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CheckpointError(f"{path}: checksum mismatch, file is corrupt or truncated")
    off = 0

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, body, off)
        off += struct.calcsize(fmt)
        return vals

    version, m, n, Lx, Ly = take("<IIIdd")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {version} not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    mesh = MeshSpec(m=m, n=n, Lx=Lx, Ly=Ly)
    N = m * n
    values = np.frombuffer(body, dtype="<f8", count=N, offset=off).reshape(n, m).copy()
    off += 8 * N
    it, acc, floor_rej, deg, f_n, T_n, seed = take("<QQQQddQ")
    rng_state = int.from_bytes(body[off : off + 16], "little")
    rng_inc = int.from_bytes(body[off + 16 : off + 32], "little")
    off += 32
    has32, uint = take("<II")
    counts = np.frombuffer(body, dtype="<u8", count=N, offset=off).reshape(n, m).copy()
    off += 8 * N
    if off != len(body):
        raise CheckpointError(f"{path}: unexpected trailing bytes")
    rng = RngStream(seed)
    rng.restore_state_words(rng_state, rng_inc, has32, uint)
    return ChainState(
        mesh=mesh,
        values=values,
        f_n=f_n,
        T_n=T_n,
        iter=it,
        accept_count=acc,
        floor_reject_count=floor_rej,
        slope_degenerate_count=deg,
        rng=rng,
        update_counts=counts,
    )
