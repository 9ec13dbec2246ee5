"""Solver configuration: a flat ``key = value`` text file.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
List values are comma separated.  A value of ``auto`` keeps the derived
default (only for the keys that have one).  Unknown or repeated keys are
errors, reported with their line number.

The canonical form (sorted keys, round-trip floats) is what the run
manifest hashes, so two configs that parse to the same values share a hash
no matter how they were written.  The output directory is not part of it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, DomainError
from .goursat import GammaMinusProfile
from .wave import WaveParams

_LIST_KEYS = {"deltas"}
_INT_KEYS = {"n_plus", "n_minus", "max_iter", "refine", "fd_levels", "smooth_degree"}
_STR_KEYS = {"out"}
_AUTO_KEYS = {"s0", "theta_c"}


@dataclass(frozen=True)
class SolverConfig:
    p1: float = -2.0
    p4: float = -1.0
    kappa: float = 0.5
    # BC profile; auto means s0 = |p1 - p4| and theta_c = pi/2
    s0: float | None = None
    theta_c: float | None = None
    n_plus: int = 32
    n_minus: int = 32
    t0: float = 0.2
    t_min_factor: float = 1e-3
    dr: float = 0.005
    r_margin: float = 0.06
    dt_ratio: float = 0.9
    cfl: float = 0.9
    deltas: tuple = (1.1, 1.5, 1.9)
    delta: float = 1.5
    eps_ratio: float = 0.5
    eps_floor: float = 16.0
    tol: float = 1e-12
    max_iter: int = 50
    relax: float = 0.5
    refine: int = 1
    rate_lo: float = 0.9
    rate_hi: float = 1.1
    match_tol: float = 5e-3
    fd_h: float = 0.02
    fd_levels: int = 4
    smooth_degree: int = 10
    out: str = field(default="out", compare=False)

    def __post_init__(self):
        try:
            self.wave_params()
        except DomainError as exc:
            raise ConfigError(f"p1/p4/kappa: {exc}") from None
        checks = [
            ("n_plus", self.n_plus >= 8, "must be >= 8"),
            ("n_minus", self.n_minus >= 8, "must be >= 8"),
            ("t0", self.t0 > 0, "must be positive"),
            ("t_min_factor", 0 < self.t_min_factor < 0.1, "must lie in (0, 0.1)"),
            ("dr", self.dr > 0, "must be positive"),
            ("r_margin", self.r_margin >= 0, "must be nonnegative"),
            ("dt_ratio", 0 < self.dt_ratio < 1, "must lie in (0, 1)"),
            ("cfl", 0 < self.cfl <= 1, "must lie in (0, 1]"),
            ("delta", 1 < self.delta < 2, "must lie in (1, 2)"),
            ("deltas", len(self.deltas) > 0 and all(1 < d < 2 for d in self.deltas),
             "entries must lie in (1, 2)"),
            ("eps_ratio", 0 < self.eps_ratio < 1, "must lie in (0, 1)"),
            ("eps_floor", self.eps_floor >= 1, "must be >= 1"),
            ("tol", self.tol > 0, "must be positive"),
            ("max_iter", self.max_iter >= 1, "must be >= 1"),
            ("relax", 0 < self.relax <= 1, "must lie in (0, 1]"),
            ("refine", self.refine >= 1, "must be >= 1"),
            ("rate_lo", self.rate_lo < self.rate_hi, "must be below rate_hi"),
            ("match_tol", self.match_tol > 0, "must be positive"),
            ("fd_h", self.fd_h > 0, "must be positive"),
            ("fd_levels", self.fd_levels >= 3, "must be >= 3"),
            ("smooth_degree", self.smooth_degree >= 2, "must be >= 2"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{key} = {getattr(self, key)!r}: {msg}")
        if self.s0 is not None and self.s0 < 0:
            raise ConfigError(f"s0 = {self.s0!r}: must be nonnegative")
        params = self.wave_params()
        tb = params.theta_B
        if self.theta_c is not None and self.theta_c == tb:
            raise ConfigError("theta_c: must differ from theta_B")
        gap = -params.p1 * np.sin(tb) + params.p4
        if not self.t0 ** 2 < gap:
            raise ConfigError(f"t0 = {self.t0!r}: t0^2 must stay below r + p at B ({gap!r})")

    # derived values -------------------------------------------------------

    def wave_params(self) -> WaveParams:
        return WaveParams(self.p1, self.p4, self.kappa)

    def profile(self) -> GammaMinusProfile:
        s0 = abs(self.p1 - self.p4) if self.s0 is None else self.s0
        tc = np.pi / 2 if self.theta_c is None else self.theta_c
        return GammaMinusProfile(float(s0), self.wave_params().theta_B, float(tc))

    @property
    def mesh_n_plus(self) -> int:
        return self.n_plus * self.refine

    @property
    def mesh_n_minus(self) -> int:
        return self.n_minus * self.refine

    @property
    def grid_dr(self) -> float:
        return self.dr / self.refine

    @property
    def march_ratio(self) -> float:
        """Step ratio ``t_{k+1}/t_k`` after refinement."""
        return 1 - (1 - self.dt_ratio) / self.refine

    @property
    def t_min(self) -> float:
        return self.t_min_factor * self.t0

    def eps_schedule(self) -> list:
        """``t0^2, t0^2 q, t0^2 q^2, ...`` down to ``eps_floor * t_min^2``."""
        out = []
        eps = self.t0 ** 2
        floor = self.eps_floor * self.t_min ** 2 * (1 - 1e-12)
        while eps >= floor:
            out.append(eps)
            eps *= self.eps_ratio
        return out

    def fd_steps(self) -> list:
        return [self.fd_h / 2 ** k for k in range(self.fd_levels)]

    def with_refine(self, k: int) -> "SolverConfig":
        return replace(self, refine=int(k))

    # serialization ----------------------------------------------------------

    def canonical(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "out":
                continue
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _format(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _convert(key, text):
    if key in _AUTO_KEYS and text == "auto":
        return None
    if key in _STR_KEYS:
        if not text:
            raise ValueError("empty")
        return text
    if key in _LIST_KEYS:
        return tuple(_parse_float(x.strip()) for x in text.split(","))
    if key in _INT_KEYS:
        return int(text)
    return _parse_float(text)


def parse_config(text: str, source: str = "<config>") -> SolverConfig:
    names = {f.name for f in fields(SolverConfig)}
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: key {key!r} repeated (first on line {seen[key]})")
        seen[key] = lineno
        try:
            values[key] = _convert(key, val)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for key {key!r}: {val!r}") from None
    try:
        return SolverConfig(**values)
    except ConfigError as exc:
        key = str(exc).split(" ", 1)[0]
        where = f":{seen[key]}" if key in seen else ""
        raise ConfigError(f"{source}{where}: {exc}") from None


def load_config(path) -> SolverConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))
