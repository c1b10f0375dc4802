"""Run configuration: flat key=value files plus command-line overrides.

Precedence is flag > file > default. Unknown keys are errors, never
silently ignored, so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .chain import McmcConfig
from .forward import PhysicalParams
from .grid import ConductivityField, MeshSpec, constant_field, make_mesh
from .priors import PriorWeights
from .proposals import KERNELS, ProposalConfig
from .trials import TRIAL_KINDS, TrialSpec


class ConfigError(ValueError):
    """Invalid or unknown configuration input."""


@dataclass(frozen=True)
class RunConfig:
    """Full description of one experiment; defaults follow the reference setup."""

    # mesh
    m: int = 10
    n: int = 10
    Lx: float = 4.0
    Ly: float = 4.0
    # physics
    H: float = 0.005
    delta: float = 0.1
    q: float = 25.0
    contact_fraction: float = 0.5
    # trial problem
    trial: str = "constant"
    trial_value: float = 1.68
    divisor: float = 20.0
    noise_std: float = 0.0
    # prior weights and likelihood
    lam: float = 100.0
    mu: float = 0.0
    w: float = 0.0
    sigma: float = 0.1
    epsilon0: float = 0.00005
    # proposal
    kernel: str = "uniform"
    omega_bound: float = 0.005
    kappa_min: float = 1e-6
    # chain
    iterations: int = 100_000
    k0: float = 1.0
    seed: int = 0
    thin: int = 0  # 0 means automatic (iterations / 1000)
    snapshot_count: int = 10
    checkpoint_every: int = 0  # 0 disables periodic checkpoints

    def mesh(self) -> MeshSpec:
        return make_mesh(self.m, self.n, self.Lx, self.Ly)

    def physics(self) -> PhysicalParams:
        return PhysicalParams(
            H=self.H, delta=self.delta, q=self.q, contact_fraction=self.contact_fraction
        )

    def trial_spec(self) -> TrialSpec:
        return TrialSpec(
            kind=self.trial,
            constant_value=self.trial_value,
            divisor=self.divisor,
            noise_std=self.noise_std,
        )

    def weights(self) -> PriorWeights:
        return PriorWeights(
            lam=self.lam, mu=self.mu, w=self.w, sigma=self.sigma, epsilon0=self.epsilon0
        )

    def proposal(self) -> ProposalConfig:
        return ProposalConfig(
            omega_bound=self.omega_bound, kernel=self.kernel, kappa_min=self.kappa_min
        )

    def mcmc(self) -> McmcConfig:
        return McmcConfig(
            iterations=self.iterations,
            weights=self.weights(),
            proposal=self.proposal(),
            thin=self.thin if self.thin > 0 else None,
            snapshot_count=self.snapshot_count,
            seed=self.seed,
        )

    def initial_conductivity(self) -> ConductivityField:
        return constant_field(self.mesh(), self.k0)

    def validate(self) -> "RunConfig":
        """Cross-validate by constructing every component; raises ConfigError."""
        try:
            self.mesh()
            self.physics()
            self.trial_spec()
            self.weights()
            self.proposal()
            self.mcmc()
            self.initial_conductivity()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
# the config-file spelling of the smoothness weight
_ALIASES = {"lambda": "lam"}


def _coerce(key: str, raw: str):
    typ = _FIELD_TYPES[key]
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ}") from None


def parse_kv_text(text: str, source: str = "<config>") -> dict:
    """Parse 'key = value' lines; '#' starts a comment; unknown keys fail."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def parse_config(
    path: str | Path | None = None, overrides: dict | None = None
) -> RunConfig:
    """Build a validated RunConfig from an optional file and overrides."""
    values: dict = {}
    if path is not None:
        text = Path(path).read_text()
        values.update(parse_kv_text(text, source=str(path)))
    for key, val in (overrides or {}).items():
        key = _ALIASES.get(key, key)
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, str(val)) if isinstance(val, str) else val
    if values.get("kernel") is not None and values["kernel"] not in KERNELS:
        raise ConfigError(f"kernel must be one of {KERNELS} (got {values['kernel']!r})")
    if values.get("trial") is not None and values["trial"] not in TRIAL_KINDS:
        raise ConfigError(f"trial must be one of {TRIAL_KINDS} (got {values['trial']!r})")
    return RunConfig(**values).validate()
