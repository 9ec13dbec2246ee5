"""Near-sonic layer in the degeneracy coordinates ``(r, t)``, ``t = sqrt(r + p)``.

The characteristic mesh stops at the level ``t = t0``.  From there the pair
``(R, S)`` is marched down in ``t`` on a uniform ``r`` grid:

    R_t + Lm R_r = d-R,    S_t + Lp S_r = d+S,

with ``Lp < 0 < Lm``, both ``O(t^2)``.  The angle is carried along too
(``theta_t = 4t/(R + S)`` at fixed ``r``), which is all the level curves
``r + p = eps`` need.  Marching stops at ``t_min > 0``; values on the sonic
line itself come from extrapolation in ``t``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import (MonitorConstants, coeff_E_h_f_g, coeff_l1_l2, derived_quantities,
                   l1_minus_one_over_t, lambda_inv_over_t, lambda_pm, rt_sources)
from .errors import CFLError, DomainError, NumericalError

# --------------------------------------------------------------------------
# the field


@dataclass
class RTField:
    """``(R, S, theta)`` on levels ``t[0] > t[1] > ...`` of a uniform ``r`` grid.

    Level ``k`` is active on columns ``lo[k]:hi[k]``; outside that window the
    arrays hold NaN.  ``removed[k]`` counts the columns dropped (left, right)
    when stepping into level ``k`` and ``drift[k]`` the largest characteristic
    displacement of that step, in cells.
    """

    r: np.ndarray
    t: np.ndarray
    R: np.ndarray
    S: np.ndarray
    theta: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    removed: np.ndarray
    drift: np.ndarray

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def p(self):
        return self.t[:, None] ** 2 - self.r[None, :]

    @property
    def nlevels(self) -> int:
        return len(self.t)

    def window(self, k):
        return slice(int(self.lo[k]), int(self.hi[k]))

    def level_index(self, t, rtol=1e-12) -> int:
        hit = np.nonzero(np.abs(self.t - t) <= rtol * t)[0]
        if hit.size == 0:
            raise DomainError(f"t = {t!r} is not a stored level")
        return int(hit[0])

    def common_window(self):
        """Columns active on every level (the window of the last one)."""
        return slice(int(np.max(self.lo)), int(np.min(self.hi)))

    def derivatives(self, k, cols=None):
        """Centered ``R_r, S_r`` on level ``k`` (one-sided second order at the window edges)."""
        w = self.window(k)
        Rr = _ddr(self.R[k, w], self.dr)
        Sr = _ddr(self.S[k, w], self.dr)
        if cols is None:
            return Rr, Sr
        off = int(self.lo[k])
        return Rr[cols.start - off: cols.stop - off], Sr[cols.start - off: cols.stop - off]

    def level_data(self, k, cols=None):
        """``(r, t, R, S, theta, Rr, Sr)`` on the active part of level ``k`` (or ``cols``)."""
        w = self.window(k) if cols is None else cols
        Rr, Sr = self.derivatives(k, cols)
        t = np.full(w.stop - w.start, self.t[k])
        return self.r[w], t, self.R[k, w], self.S[k, w], self.theta[k, w], Rr, Sr

    def rows(self):
        for k in range(self.nlevels):
            r, t, R, S, _, Rr, Sr = self.level_data(k)
            with np.errstate(divide="ignore", invalid="ignore"):
                V = 1 / S - 1 / R
            for a in zip(r, t, t * t - r, R, S, V / t, Rr, Sr):
                yield a

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "t", "p", "R", "S", "V_over_t", "Rr", "Sr"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def _ddr(u, dr):
    if u.size < 3:
        raise DomainError("need at least 3 active columns for r-derivatives")
    return np.gradient(u, dr, edge_order=2)


def _upwind(u, a, dr):
    """Second-order ``u_r`` taken from the side the characteristics come from.

    Marching toward smaller ``t``, a positive speed carries information in
    from larger ``r``.  Near the window edge, where the upwind stencil does
    not fit, the centered (or other one-sided) difference is used.
    """
    d = np.gradient(u, dr, edge_order=2)
    n = u.size
    fwd = np.zeros(n, dtype=bool)
    bwd = np.zeros(n, dtype=bool)
    fwd[: n - 2] = a[: n - 2] > 0
    bwd[2:] = a[2:] < 0
    i = np.nonzero(fwd)[0]
    d[i] = (-3 * u[i] + 4 * u[i + 1] - u[i + 2]) / (2 * dr)
    i = np.nonzero(bwd)[0]
    d[i] = (3 * u[i] - 4 * u[i - 1] + u[i - 2]) / (2 * dr)
    return d


# --------------------------------------------------------------------------
# handoff from the characteristic mesh


def grid_window(r_c, r_a, margin, dr_base, refine=1):
    """Uniform grid inside ``[r_c + margin, r_a - margin]``.

    End points snap to multiples of ``dr_base`` so grids refined by any
    integer factor contain the coarse nodes exactly.
    """
    k0 = math.ceil((r_c + margin) / dr_base - 1e-9)
    k1 = math.floor((r_a - margin) / dr_base + 1e-9)
    if k1 - k0 < 4:
        raise DomainError(f"r window [{r_c + margin}, {r_a - margin}] holds too few grid nodes")
    h = dr_base / refine
    return np.arange(k0 * refine, k1 * refine + 1) * h


def handoff(mesh, r_grid) -> RTField:
    """Monotone cubic interpolation of the mesh's level crossings onto ``r_grid``."""
    c = mesh.level_crossings()
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid[0] < c["r"][0] or r_grid[-1] > c["r"][-1]:
        raise DomainError(f"handoff level covers r in [{c['r'][0]}, {c['r'][-1]}] only; "
                          f"grid needs [{r_grid[0]}, {r_grid[-1]}]")
    return field_from_profiles(r_grid, mesh.t0, *(PchipInterpolator(c["r"], c[k])(r_grid)
                                                  for k in ("R", "S", "theta")))


def field_from_profiles(r_grid, t0, R, S, theta) -> RTField:
    n = len(r_grid)
    one = lambda a: np.asarray(a, dtype=float)[None, :] + np.zeros((1, n))
    return RTField(np.asarray(r_grid, dtype=float), np.array([float(t0)]), one(R), one(S),
                   one(theta), np.array([0]), np.array([n]), np.zeros((1, 2), dtype=int),
                   np.zeros(1))


# --------------------------------------------------------------------------
# marching

STENCIL_CELLS = 2


def _rates(r, t, R, S, dr):
    lp, lm = lambda_pm(r, t, R, S)
    sR, sS = rt_sources(r, t, R, S)
    Rr = _upwind(R, lm, dr)
    Sr = _upwind(S, lp, dr)
    return sR - lm * Rr, sS - lp * Sr, 4 * t / (R + S), lp, lm


def stop_levels(t0, t_min, eps_list=()):
    """Levels the march must land on: ``sqrt(eps)`` values and the extrapolation ladders."""
    stops = {float(np.sqrt(e)) for e in eps_list}
    for m in (1.0, 2.0, 4.0):
        stops.add(t_min * m)
        stops.add(t_min * m * np.sqrt(2.0))
    return sorted((s for s in stops if t_min <= s < t0), reverse=True)


def rt_march(field: RTField, t_min: float, ratio: float = 0.9, cfl: float = 0.9,
             stops=(), schedule=None) -> RTField:
    """March the top level of ``field`` down to ``t_min`` (explicit midpoint rule).

    Steps are ``min((1 - ratio) t, cfl dr / (2 max|Lambda|))``, shortened to land
    on every level in ``stops``.  With an explicit ``schedule`` of levels the
    CFL bound is checked instead and a violation raises.  Columns leave the
    window as the characteristic cone of the top level closes: a drift
    accumulator per side drops one column each time it passes a full cell.
    """
    dr = field.dr
    r = field.r
    t = float(field.t[0])
    if not 0 < t_min < t:
        raise DomainError(f"t_min = {t_min} must lie in (0, {t})")
    lo, hi = int(field.lo[0]), int(field.hi[0])
    R = field.R[0, lo:hi].copy()
    S = field.S[0, lo:hi].copy()
    th = field.theta[0, lo:hi].copy()
    levels = [(t, lo, hi, R, S, th, 0, 0, 0.0)]
    if schedule is not None:
        targets = [float(x) for x in schedule]
        if any(b >= a for a, b in zip([t] + targets, targets)) or targets[-1] < t_min:
            raise DomainError("schedule must decrease strictly from t0 and stay >= t_min")
        targets = [x for x in targets if x >= t_min]
    else:
        targets = sorted({float(s) for s in stops if t_min < s < t} | {t_min}, reverse=True)
    acc_l = acc_r = 0.0
    ti = 0
    while t > t_min:
        rr = r[lo:hi]
        kR, kS, kth, lp, lm = _rates(rr, t, R, S, dr)
        amax = float(max(np.max(np.abs(lp)), np.max(np.abs(lm)), 1e-300))
        # the two-cell upwind stencil with the midpoint rule is stable up to
        # Courant number 1/2, so the bound is taken over the stencil width
        dt_cfl = cfl * dr / (STENCIL_CELLS * amax)
        nxt = targets[ti]
        if schedule is not None:
            dt = t - nxt
            if dt > dt_cfl * (1 + 1e-12):
                raise CFLError(f"step {dt} from t={t} exceeds the CFL bound {dt_cfl}")
        else:
            dt = min((1 - ratio) * t, dt_cfl)
            gap = t - nxt
            if gap <= dt * (1 + 1e-12):
                dt = gap
            elif gap < 1.2 * dt:
                dt = 0.5 * gap
        th_ = t - 0.5 * dt
        Rh = R - 0.5 * dt * kR
        Sh = S - 0.5 * dt * kS
        kR2, kS2, kth2, _, _ = _rates(rr, th_, Rh, Sh, dr)
        R = R - dt * kR2
        S = S - dt * kS2
        th = th - dt * kth2
        t_new = nxt if t - dt <= nxt * (1 + 1e-12) else t - dt
        if t_new == nxt:
            ti += 1
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(S)) and np.all(np.isfinite(th))):
            raise NumericalError(f"non-finite values marching from t={t} to t={t_new}")
        # cone bookkeeping: speeds from the start of the step
        acc_l += max(0.0, float(np.max(-lp)), float(np.max(-lm))) * dt / dr
        acc_r += max(0.0, float(np.max(lp)), float(np.max(lm))) * dt / dr
        nl, nr_ = int(acc_l), int(acc_r)
        acc_l -= nl
        acc_r -= nr_
        if hi - nr_ - (lo + nl) < 3:
            raise DomainError(f"the determinacy window closed at t={t_new}")
        R, S, th = R[nl: R.size - nr_], S[nl: S.size - nr_], th[nl: th.size - nr_]
        lo, hi = lo + nl, hi - nr_
        t = t_new
        levels.append((t, lo, hi, R.copy(), S.copy(), th.copy(), nl, nr_, amax * dt / dr))
    return _stack(r, levels)


def _stack(r, levels) -> RTField:
    n = len(r)
    nt = len(levels)
    R = np.full((nt, n), np.nan)
    S = np.full((nt, n), np.nan)
    th = np.full((nt, n), np.nan)
    for k, (_, lo, hi, Rk, Sk, tk, *_) in enumerate(levels):
        R[k, lo:hi], S[k, lo:hi], th[k, lo:hi] = Rk, Sk, tk
    return RTField(r, np.array([lv[0] for lv in levels]), R, S, th,
                   np.array([lv[1] for lv in levels]), np.array([lv[2] for lv in levels]),
                   np.array([[lv[6], lv[7]] for lv in levels], dtype=int),
                   np.array([lv[8] for lv in levels]))


# --------------------------------------------------------------------------
# level curves r + p = eps


@dataclass(frozen=True)
class SonicSample:
    r: float
    eps: float
    theta_eps: float
    dtheta_eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not np.isfinite(self.dtheta_eps):
            raise DomainError("level-curve slope is not finite")


def level_slope(r, t, R, S):
    """``theta'_eps = -(1 + p_r)/p_theta`` with ``p_r = (R - S)/(2 lam_inv)``, ``p_theta = (R + S)/2``."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(t <= 0):
        raise DomainError("level slope needs t > 0")
    pr = (R - S) / (2 * t * np.asarray(lambda_inv_over_t(r, t)))
    return -(1 + pr) / (0.5 * (R + S))


def sonic_trace(field: RTField, eps_list, cols=None) -> list:
    """Samples of every level curve ``r + p = eps`` in ``eps_list``, on the field's grid.

    Each ``sqrt(eps)`` must be a stored level (the march lands on them);
    ``theta_eps`` is then the carried angle there.
    """
    out = []
    cols = field.common_window() if cols is None else cols
    for eps in eps_list:
        try:
            k = field.level_index(float(np.sqrt(eps)))
        except DomainError:
            raise DomainError(f"eps = {eps!r}: level not bracketed by the marched range") from None
        r, t, R, S, th, _, _ = field.level_data(k, cols)
        slope = level_slope(r, t, R, S)
        out.extend(SonicSample(float(a), float(eps), float(b), float(c))
                   for a, b, c in zip(r, th, slope))
    return out


def sonic_trace_exact(provider, r_values, eps_list, bracket=(1e-9, np.pi / 2)) -> list:
    """Level curves of a closed-form solution: ``theta_eps`` by root finding on ``r + p = eps``."""
    from scipy.optimize import brentq

    out = []
    for eps in eps_list:
        t = float(np.sqrt(eps))
        for r in r_values:
            f = lambda th: r + float(provider.p_polar(r, th)) - eps
            lo, hi = bracket
            if f(lo) * f(hi) > 0:
                raise DomainError(f"eps = {eps!r}: root not bracketed at r = {r!r}")
            th = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            R, S = provider.rs(r, t)
            out.append(SonicSample(float(r), float(eps), float(th),
                                   float(level_slope(r, t, R, S))))
    return out


def slope_table(samples):
    """Group samples by eps: ``{eps: (r, theta_eps, dtheta_eps)}`` in schedule order."""
    table = {}
    for s in samples:
        table.setdefault(s.eps, []).append((s.r, s.theta_eps, s.dtheta_eps))
    return {e: tuple(np.array(c) for c in zip(*v)) for e, v in table.items()}


def cauchy_sequence(samples):
    """``sup_r |theta'_{eps_{k+1}} - theta'_{eps_k}|`` for consecutive schedule entries."""
    tab = slope_table(samples)
    eps = list(tab)
    out = []
    for a, b in zip(eps, eps[1:]):
        out.append(float(np.max(np.abs(tab[b][2] - tab[a][2]))))
    return out


# --------------------------------------------------------------------------
# extrapolation to the sonic line


def _poly_at_zero(x, y):
    """Value at ``x = 0`` of the interpolating polynomial through ``(x_k, y_k)`` (Neville)."""
    x = list(x)
    p = [np.asarray(v, dtype=float).copy() for v in y]
    n = len(x)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i])
    return p[0]


@dataclass
class SonicLimits:
    r: np.ndarray
    R_t: np.ndarray
    S_t: np.ndarray
    R_t2: np.ndarray
    S_t2: np.ndarray
    theta: np.ndarray

    @property
    def mismatch(self):
        return {
            "R_t_vs_R_t2": float(np.max(np.abs(self.R_t - self.R_t2))),
            "S_t_vs_S_t2": float(np.max(np.abs(self.S_t - self.S_t2))),
            "R_vs_S_t": float(np.max(np.abs(self.R_t - self.S_t))),
            "R_vs_S_t2": float(np.max(np.abs(self.R_t2 - self.S_t2))),
        }

    def worst(self) -> float:
        return max(self.mismatch.values())


def sonic_limits(field: RTField, t_min: float) -> SonicLimits:
    """Values at ``t = 0`` from two disjoint ladders of levels.

    Ladder one, ``t_min {1, 2, 4}``, is extrapolated as a polynomial in ``t``;
    ladder two, ``sqrt(2) t_min {1, 2, 4}``, as a polynomial in ``t^2``.
    """
    cols = field.common_window()
    ks1 = [field.level_index(t_min * m) for m in (1.0, 2.0, 4.0)]
    ks2 = [field.level_index(t_min * m * np.sqrt(2.0)) for m in (1.0, 2.0, 4.0)]
    x1 = [field.t[k] for k in ks1]
    x2 = [field.t[k] ** 2 for k in ks2]
    get = lambda arr, ks: [arr[k, cols] for k in ks]
    return SonicLimits(field.r[cols],
                       _poly_at_zero(x1, get(field.R, ks1)), _poly_at_zero(x1, get(field.S, ks1)),
                       _poly_at_zero(x2, get(field.R, ks2)), _poly_at_zero(x2, get(field.S, ks2)),
                       _poly_at_zero(x1, get(field.theta, ks1)))


# --------------------------------------------------------------------------
# diagnostics


@dataclass
class RateFit:
    """Least-squares line ``log|R - S| = exponent log t + log constant``."""

    exponent: float
    constant: float
    residual: float
    n_samples: int
    t_lo: float
    t_hi: float
    degenerate: bool = False

    @property
    def decades(self) -> float:
        return float(np.log10(self.t_hi / self.t_lo))

    def as_dict(self):
        return {"exponent": self.exponent, "constant": self.constant, "residual": self.residual,
                "n_samples": self.n_samples, "t_lo": self.t_lo, "t_hi": self.t_hi,
                "decades": self.decades, "degenerate": self.degenerate}


def fit_rate(t, amp) -> RateFit:
    t = np.asarray(t, dtype=float)
    amp = np.asarray(amp, dtype=float)
    if t.size < 8:
        raise DomainError(f"rate fit needs at least 8 levels, got {t.size}")
    if np.any(amp <= 0):
        return RateFit(float("nan"), 0.0, float("nan"), int(t.size), float(t.min()),
                       float(t.max()), degenerate=True)
    x, y = np.log(t), np.log(amp)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return RateFit(float(coef[0]), float(np.exp(coef[1])), float(np.sqrt(np.mean(res ** 2))),
                   int(t.size), float(t.min()), float(t.max()))


def rate_fit(field: RTField, t_lo: float, t_hi: float, cols=None) -> RateFit:
    """Fit of ``sup_r |R - S|`` against ``t`` over the levels in ``[t_lo, t_hi]``."""
    cols = field.common_window() if cols is None else cols
    ks = [k for k in range(field.nlevels) if t_lo * (1 - 1e-12) <= field.t[k] <= t_hi * (1 + 1e-12)]
    amp = [np.max(np.abs(field.R[k, cols] - field.S[k, cols])) for k in ks]
    return fit_rate(field.t[ks], amp)


def rate_fit_columns(field: RTField, t_lo: float, t_hi: float, cols=None):
    """Exponent of ``|R - S|`` against ``t`` column by column; returns ``(r, exponents)``."""
    cols = field.common_window() if cols is None else cols
    ks = [k for k in range(field.nlevels) if t_lo * (1 - 1e-12) <= field.t[k] <= t_hi * (1 + 1e-12)]
    x = np.log(field.t[ks])
    d = np.abs(field.R[ks, cols] - field.S[ks, cols])
    with np.errstate(divide="ignore"):
        y = np.log(d)
    xm = x - x.mean()
    slope = (xm @ (y - y.mean(axis=0))) / (xm @ xm)
    return field.r[cols], slope


def level_sups(field: RTField, deltas, cols=None):
    """Per level: ``sup |V|/t``, ``sup t^d |R_r|``, ``sup t^d |S_r|`` and ``sup |R - S|``."""
    cols = field.common_window() if cols is None else cols
    out = {"t": field.t.copy(), "V_over_t": [], "R_minus_S": []}
    for d in deltas:
        out[f"tdRr_{d!r}"] = []
        out[f"tdSr_{d!r}"] = []
    for k in range(field.nlevels):
        r, t, R, S, _, Rr, Sr = field.level_data(k, cols)
        tk = float(field.t[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            V = 1 / S - 1 / R
        out["V_over_t"].append(float(np.max(np.abs(V))) / tk)
        out["R_minus_S"].append(float(np.max(np.abs(R - S))))
        for d in deltas:
            out[f"tdRr_{d!r}"].append(tk ** d * float(np.max(np.abs(Rr))))
            out[f"tdSr_{d!r}"].append(tk ** d * float(np.max(np.abs(Sr))))
    return {k: np.asarray(v, dtype=float) for k, v in out.items()}


def monitor_constants(field: RTField, delta: float, cols=None) -> MonitorConstants:
    """``K1..K5``, ``M0`` and ``Mhat`` sampled on the marched field.

    ``M0`` is measured on the top level (where ``G`` and ``H`` enter), and
    ``Mhat`` assembled from ``K4``, ``K5`` and ``sup |V|/t`` there, with the
    top level playing the role of the reference height.
    """
    cols = field.common_window() if cols is None else cols
    K1 = K2 = K4 = K5 = 0.0
    K3 = np.inf
    for k in range(field.nlevels):
        r, t, R, S, _, Rr, Sr = field.level_data(k, cols)
        c = coeff_E_h_f_g(r, t, R, S)
        K1 = max(K1, *(float(np.max(np.abs(getattr(c, n)))) for n in ("h", "f3", "g3")))
        K2 = max(K2, *(float(np.max(np.abs(getattr(c, n)))) for n in ("f1", "f2", "g1", "g2")))
        K3 = min(K3, float(np.min(np.abs(c.E))))
        K4 = max(K4, float(np.max(np.abs(l1_minus_one_over_t(r, t, R, S)))))
        _, l2 = coeff_l1_l2(r, t, R, S, Rr, Sr, delta)
        K5 = max(K5, float(np.max(np.abs(l2))))
    r, t, R, S, _, Rr, Sr = field.level_data(0, cols)
    tb = float(field.t[0])
    dq = derived_quantities(r, t, R, S, Rr, Sr)
    scale = K2 * tb ** (2 - delta) * np.exp(K1 * tb)
    M0 = max(float(np.max(np.abs(dq.H))) / scale + 1, float(np.max(np.abs(dq.G))) / scale + 1)
    v_top = float(np.max(np.abs(dq.V))) / tb
    e4 = np.exp(K4 * tb)
    Mhat = e4 * (v_top + e4 * K5 * tb ** (2 - delta) / (2 - delta))
    return MonitorConstants(K1, K2, K3, K4, K5, float(M0), float(Mhat), delta)


def transport_bound(field: RTField, cols=None) -> float:
    """``L = sup (|d-R|, |d+S|)`` over the field."""
    cols = field.common_window() if cols is None else cols
    L = 0.0
    for k in range(field.nlevels):
        r, t, R, S, *_ = field.level_data(k, cols)
        a, b = rt_sources(r, t, R, S)
        L = max(L, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return L


@dataclass
class DiagnosticsReport:
    sups: dict
    rate: RateFit
    rate_columns: tuple
    constants: MonitorConstants
    k_condition: bool
    vbound_holds: bool
    limits: SonicLimits
    w_samples: list
    samples: list
    cauchy: list
    slope_sup: float
    signs: dict
    cone: dict
    deltas: tuple
    extra: dict = field(default_factory=dict)

    def summary(self):
        """Suprema over the whole field of every monitored quantity."""
        out = {"V_over_t": float(np.max(self.sups["V_over_t"]))}
        for d in self.deltas:
            out[f"tdRr_{d!r}"] = float(np.max(self.sups[f"tdRr_{d!r}"]))
            out[f"tdSr_{d!r}"] = float(np.max(self.sups[f"tdSr_{d!r}"]))
        return out

    def as_dict(self):
        r_cols, ex = self.rate_columns
        return {
            "suprema": self.summary(),
            "per_level": {k: [float(x) for x in v] for k, v in self.sups.items()},
            "rate_fit": self.rate.as_dict(),
            "rate_by_column": {"r_min": float(r_cols[0]), "r_max": float(r_cols[-1]),
                               "exponent_min": float(np.min(ex)),
                               "exponent_max": float(np.max(ex))},
            "monitor_constants": self.constants.as_dict(),
            "K3_exceeds_2K2exp_over_delta": bool(self.k_condition),
            "V_over_t_below_Mhat": bool(self.vbound_holds),
            "sonic_limits": {"mismatch": self.limits.mismatch,
                             "r": [float(x) for x in self.limits.r],
                             "R": [float(x) for x in self.limits.R_t],
                             "S": [float(x) for x in self.limits.S_t],
                             "theta": [float(x) for x in self.limits.theta]},
            "w_samples": self.w_samples,
            "level_curves": {"eps": [float(e) for e in slope_table(self.samples)],
                             "cauchy_sup": self.cauchy, "slope_sup": self.slope_sup},
            "signs": self.signs,
            "cone": self.cone,
            **self.extra,
        }


def diagnostics(field: RTField, delta: float, deltas, t_min: float, eps_list,
                rate_window=None) -> DiagnosticsReport:
    """Every regularity quantity monitored on the marched field.

    ``rate_window`` defaults to ``[10 t_min, t0/4]``.
    """
    t0 = float(field.t[0])
    if t0 / t_min < 100 * (1 - 1e-9):
        raise DomainError(f"marched range [{t_min}, {t0}] spans less than 2 decades")
    cols = field.common_window()
    if cols.stop - cols.start < 3:
        raise DomainError("common window too narrow")
    lo, hi = rate_window if rate_window is not None else (10 * t_min, t0 / 4)
    sups = level_sups(field, deltas, cols)
    rate = rate_fit(field, lo, hi, cols)
    rcols = rate_fit_columns(field, lo, hi, cols)
    mc = monitor_constants(field, delta, cols)
    kcond = mc.K3 > 2 / delta * mc.K2 * np.exp(2 * mc.K1 * t0)
    vb = bool(np.max(sups["V_over_t"]) <= mc.Mhat)
    limits = sonic_limits(field, t_min)
    L = transport_bound(field, cols)
    w = []
    for eps in eps_list:
        tb = float(np.sqrt(eps))
        k = field.level_index(tb)
        gap = float(np.max(np.abs(field.R[k, cols] - field.S[k, cols])))
        w.append({"t_b": tb, "w": 2 * L * tb + gap, "L": L})
    samples = sonic_trace(field, eps_list, cols)
    cauchy = cauchy_sequence(samples)
    slope_sup = float(max(abs(s.dtheta_eps) for s in samples))
    good = np.isfinite(field.R)
    signs = {"R_max": float(np.max(field.R[good])), "S_max": float(np.max(field.S[good])),
             "abs_max": float(max(np.max(np.abs(field.R[good])), np.max(np.abs(field.S[good]))))}
    bound = np.ceil(np.round(field.drift, 12)).astype(int)
    cone = {"removed_left": int(field.removed[:, 0].sum()),
            "removed_right": int(field.removed[:, 1].sum()),
            "max_removed_per_step": int(field.removed.max()),
            "within_characteristic_bound": bool(np.all(field.removed <= bound[:, None])),
            "r_final": [float(field.r[cols.start]), float(field.r[cols.stop - 1])]}
    return DiagnosticsReport(sups, rate, rcols, mc, bool(kcond), vb, limits, w, samples, cauchy,
                             slope_sup, signs, cone, tuple(deltas))
