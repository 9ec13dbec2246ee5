"""The planar rarefaction wave ``p = -eta`` and characteristic tracing.

The wave joins the constant states ``p1 < p4 < 0`` across the strip
``-p4 <= eta <= -p1``.  In polar form ``p = -r sin(theta)``, which gives
``R = -2 r cos(theta)`` and ``S = 0`` everywhere inside the strip.
The positive characteristic through the sonic point ``A = (0, -p1)`` is the
circle ``xi^2 + eta^2 = -p1 eta``; negative characteristics are the lines
``eta = const``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import CartPoint, StateW, lambda_inv_polar
from .errors import DomainError, SonicDegeneracyError, StepBudgetExceeded


@dataclass(frozen=True)
class WaveParams:
    p1: float
    p4: float
    kappa: float = 0.5

    def __post_init__(self):
        if not (self.p1 < self.p4 < 0):
            raise DomainError(f"need p1 < p4 < 0, got p1={self.p1}, p4={self.p4}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if abs(self.p4 - self.p1) > self.kappa * abs(self.p1) * (1 + 1e-12):
            raise DomainError(f"|p4 - p1| = {abs(self.p4 - self.p1)} exceeds "
                              f"kappa*|p1| = {self.kappa * abs(self.p1)}")

    @property
    def theta_B(self) -> float:
        return float(np.arcsin(np.sqrt(self.p4 / self.p1)))


@dataclass(frozen=True)
class WaveState:
    p: float
    m: float
    n: float


def wave_state(point: CartPoint, params: WaveParams, tol=1e-12) -> WaveState:
    """Closed-form state ``(p, m, n)`` inside the wave strip."""
    eta = point.eta
    if eta < -params.p4 - tol or eta > -params.p1 + tol:
        raise DomainError(f"eta={eta} outside the wave strip [{-params.p4}, {-params.p1}]")
    p = -eta
    return WaveState(p=p, m=0.0, n=float(np.log(params.p4 / p)))


def wave_RS(theta, params: WaveParams) -> StateW:
    """State on the positive characteristic AB at polar angle ``theta``.

    AB is ``r = -p1 sin(theta)``, so ``p = p1 sin^2``, ``R = p1 sin(2 theta)``, ``S = 0``.
    """
    tb = params.theta_B
    if not (tb - 1e-12 <= theta <= np.pi / 2 + 1e-12):
        raise DomainError(f"theta={theta} outside [theta_B={tb}, pi/2]")
    s = np.sin(theta)
    return StateW(p=params.p1 * s * s, R=params.p1 * np.sin(2 * theta), S=0.0)


def point_A(params: WaveParams) -> CartPoint:
    return CartPoint(0.0, -params.p1)


def point_B(params: WaveParams) -> CartPoint:
    return CartPoint(float(np.sqrt(params.p4 * (params.p1 - params.p4))), -params.p4)


class PlanarWave:
    """Exact solution provider for the wave (valid inside its strip)."""

    def __init__(self, params: WaveParams):
        self.params = params

    def p_cart(self, xi, eta):
        return -np.asarray(eta, dtype=float)

    def p_polar(self, r, theta):
        return -np.asarray(r, dtype=float) * np.sin(theta)

    def rs_polar(self, r, theta):
        r = np.asarray(r, dtype=float)
        return -2 * r * np.cos(theta), np.zeros_like(r * np.cos(theta))

    def rs(self, r, t):
        """``(R, S)`` in the degeneracy coordinates: ``R = -2t sqrt(2r - t^2)``."""
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        return -2 * t * np.sqrt(2 * r - t * t), np.zeros_like(r * t)

    def theta_rt(self, r, t):
        r = np.asarray(r, dtype=float)
        return np.arcsin(1 - np.asarray(t, dtype=float) ** 2 / r)


class MirroredWave(PlanarWave):
    """Reflection ``p = -r sin(pi - theta)`` of the wave about the eta axis.

    Lives at ``theta > pi/2``; there the roles flip: ``R = 0`` and
    ``S = 2 r |cos(theta)| > 0``.  Used only to exercise identities that are
    trivial on the original wave because ``S`` vanishes there.
    """

    def rs_polar(self, r, theta):
        r = np.asarray(r, dtype=float)
        return np.zeros_like(r * np.cos(theta)), -2 * r * np.cos(theta)

    def rs(self, r, t):
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.zeros_like(r * t), 2 * t * np.sqrt(2 * r - t * t)

    def theta_rt(self, r, t):
        return np.pi - super().theta_rt(r, t)


# --------------------------------------------------------------------------
# characteristic tracing in the (xi, eta) plane

def _radicand(xi, eta, p):
    return p * p * (xi * xi + eta * eta - p * p)


def _slope_vectors(xi, eta, p, branch):
    """Two proportional direction vectors for ``d eta/d xi`` with sign ``branch``.

    ``(xi^2 - p^2, xi eta + b sqrt(D))`` and ``(xi eta - b sqrt(D), eta^2 - p^2)``
    describe the same slope; whichever is longer is used.
    """
    sq = np.sqrt(max(_radicand(xi, eta, p), 0.0))
    v1 = np.array([xi * xi - p * p, xi * eta + branch * sq])
    v2 = np.array([xi * eta - branch * sq, eta * eta - p * p])
    return v1 if np.hypot(*v1) >= np.hypot(*v2) else v2


def cartesian_branch(family: int, params: WaveParams) -> int:
    """Sign in front of the square root that reproduces polar family ``family``.

    Calibrated at a reference point inside the wave by comparing with
    ``dr/dtheta = family * lam_inv``.
    """
    if family not in (1, -1):
        raise ValueError("family must be +1 or -1")
    B = point_B(params)
    eta = 0.5 * (-params.p1 - params.p4)
    xi = 0.5 * B.xi
    r, th = np.hypot(xi, eta), np.arctan2(eta, xi)
    p = -eta
    li = lambda_inv_polar(r, p)
    # polar direction (dr, dtheta) = (family*li, 1) mapped to (dxi, deta)
    dr, dth = family * li, 1.0
    d = np.array([dr * np.cos(th) - r * np.sin(th) * dth, dr * np.sin(th) + r * np.cos(th) * dth])
    best = None
    for b in (1, -1):
        v = _slope_vectors(xi, eta, p, b)
        cross = abs(v[0] * d[1] - v[1] * d[0]) / (np.hypot(*v) * np.hypot(*d))
        if best is None or cross < best[0]:
            best = (cross, b)
    return best[1]


@dataclass
class Polyline:
    xi: np.ndarray
    eta: np.ndarray
    p: np.ndarray
    R: np.ndarray
    S: np.ndarray
    stopped_by: str = ""
    arclength: float = 0.0

    @property
    def r(self):
        return np.hypot(self.xi, self.eta)

    @property
    def theta(self):
        return np.arctan2(self.eta, self.xi)

    def rows(self):
        r, th = self.r, self.theta
        for k in range(len(self.xi)):
            yield (self.xi[k], self.eta[k], r[k], th[k], self.p[k], self.R[k], self.S[k])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "eta", "r", "theta", "p", "R", "S"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


@dataclass
class StopEvent:
    """Zero crossing of ``func(xi, eta, p)`` ends a trace."""

    name: str
    func: Callable[[float, float, float], float]


def strip_edge_event(params: WaveParams) -> list:
    return [StopEvent("strip_bottom", lambda x, e, p: e + params.p4),
            StopEvent("strip_top", lambda x, e, p: -params.p1 - e + 1e-14)]


def sonic_event(eps_stop: float) -> StopEvent:
    return StopEvent("sonic", lambda x, e, p: np.hypot(x, e) + p - eps_stop)


def characteristic_trace(start: CartPoint, family: int, p_field: Callable, params: WaveParams,
                         step: float = 1e-3, events: Sequence[StopEvent] = (),
                         max_steps: int = 100_000, from_sonic: bool = False,
                         refine_below: float = 1e-2, direction_hint=None,
                         rs_field: Callable | None = None) -> Polyline:
    """Fixed-step RK4 trace of a characteristic of the self-similar equation.

    The curve is parametrized by arc length; the step is halved once wherever
    ``r + p < refine_below``.  The trace ends at the first sign change of any
    ``events`` function, located to round-off by root-finding on the final
    step length.

    ``from_sonic`` permits starting on the sonic circle (the two families are
    tangent there, so the shared direction is used for the first step).
    ``direction_hint`` picks the orientation of travel at the start; by
    default the trace moves toward decreasing ``eta``.
    """
    branch = cartesian_branch(family, params)

    def pval(x, e):
        return float(p_field(x, e))

    x0, e0 = float(start.xi), float(start.eta)
    p0 = pval(x0, e0)
    gap = x0 * x0 + e0 * e0 - p0 * p0
    scale = max(1.0, x0 * x0 + e0 * e0)
    if gap < -1e-14 * scale:
        raise SonicDegeneracyError(f"start ({x0}, {e0}) lies in the elliptic region")
    if abs(gap) <= 1e-14 * scale and not from_sonic:
        raise SonicDegeneracyError(f"start ({x0}, {e0}) is a sonic point; both families "
                                   "are tangent there (pass from_sonic=True to allow)")

    hint = np.array([0.0, -1.0]) if direction_hint is None else np.asarray(direction_hint, float)

    def unit_dir(x, e, prev):
        v = _slope_vectors(x, e, pval(x, e), branch)
        n = np.hypot(*v)
        if n == 0:
            raise SonicDegeneracyError(f"degenerate characteristic direction at ({x}, {e})")
        v = v / n
        return v if np.dot(v, prev) >= 0 else -v

    def rk4(x, e, h, prev):
        k1 = unit_dir(x, e, prev)
        k2 = unit_dir(x + 0.5 * h * k1[0], e + 0.5 * h * k1[1], k1)
        k3 = unit_dir(x + 0.5 * h * k2[0], e + 0.5 * h * k2[1], k1)
        k4 = unit_dir(x + h * k3[0], e + h * k3[1], k1)
        d = (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        return x + h * d[0], e + h * d[1], k1

    xs, es = [x0], [e0]
    prev = hint
    # orient the first direction by the hint
    prev = unit_dir(x0, e0, hint)
    x, e = x0, e0
    s_total = 0.0
    evals = [ev.func(x, e, p0) for ev in events]
    stopped = ""
    for _ in range(max_steps):
        pc = pval(x, e)
        h = step if np.hypot(x, e) + pc >= refine_below else 0.5 * step
        xn, en, k1 = rk4(x, e, h, prev)
        pn = pval(xn, en)
        hit = None
        for idx, ev in enumerate(events):
            g_new = ev.func(xn, en, pn)
            if np.sign(g_new) != np.sign(evals[idx]) and evals[idx] != 0:
                hit = idx
                break
        if hit is not None:
            ev = events[hit]
            prev_fixed = prev

            def g_of(hh):
                xx, ee, _ = rk4(x, e, hh, prev_fixed)
                return ev.func(xx, ee, pval(xx, ee))

            hh = brentq(g_of, 0.0, h, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            xn, en, _ = rk4(x, e, hh, prev)
            xs.append(xn)
            es.append(en)
            s_total += hh
            stopped = ev.name
            break
        xs.append(xn)
        es.append(en)
        s_total += h
        prev = k1
        x, e = xn, en
        evals = [ev.func(x, e, pn) for ev in events]
    else:
        raise StepBudgetExceeded(f"no stop event after {max_steps} steps")

    xs = np.array(xs)
    es = np.array(es)
    ps = np.array([pval(a, b) for a, b in zip(xs, es)])
    if rs_field is not None:
        R, S = rs_field(np.hypot(xs, es), np.arctan2(es, xs))
        R = np.asarray(R, dtype=float)
        S = np.asarray(S, dtype=float)
    else:
        R = np.full_like(xs, np.nan)
        S = np.full_like(xs, np.nan)
    return Polyline(xs, es, ps, R, S, stopped_by=stopped, arclength=s_total)


def trace_AB(params: WaveParams, step: float = 1e-3) -> Polyline:
    """Positive characteristic from the sonic point A down to the strip edge (point B)."""
    wave = PlanarWave(params)
    return characteristic_trace(point_A(params), +1, wave.p_cart, params, step=step,
                                events=[strip_edge_event(params)[0]], from_sonic=True,
                                direction_hint=(1.0, 0.0), rs_field=wave.rs_polar)
