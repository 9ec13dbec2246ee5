"""Finite-difference certification of the identities the solver relies on.

Every check takes a *solution provider* exposing some of

    p_cart(xi, eta), p_polar(r, theta), rs(r, t) -> (R, S), theta_rt(r, t)

and compares a finite-difference left side with the closed-form right side
from :mod:`sonicpatch.core`.  Characteristic derivatives are taken along
short characteristic segments traced with RK4, never along grid lines.

Residuals are reported per step size; the observed order is the slope of a
log-log fit and is only given when at least three steps were used.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import solve_ivp

from .core import (coeff_E_h_f_g, coeff_l1_l2, lambda_inv_over_t, lambda_inv_polar,
                   lambda_inv_rt, lambda_pm, q_polar, rt_sources)
from .errors import DomainError

T_REFUSE = 1e-4
NOMINAL_ORDER = 2.0
# residuals this small at every step mean the difference quotients are exact
ROUNDOFF = 1e-11

# --------------------------------------------------------------------------
# providers


class ConstantState:
    """``p = c (theta - theta_star)``: an exact solution with ``R = S = c``."""

    def __init__(self, c: float = -0.8, theta_star: float = 0.2):
        if not c < 0:
            raise DomainError("c must be negative")
        self.c = float(c)
        self.theta_star = float(theta_star)

    def p_polar(self, r, theta):
        return self.c * (np.asarray(theta, dtype=float) - self.theta_star) + 0 * np.asarray(r)

    def p_cart(self, xi, eta):
        return self.p_polar(np.hypot(xi, eta), np.arctan2(eta, xi))

    def rs(self, r, t):
        z = np.zeros(np.broadcast(np.asarray(r), np.asarray(t)).shape)
        return z + self.c, z + self.c

    def theta_rt(self, r, t):
        return self.theta_star + (np.asarray(t, dtype=float) ** 2 - np.asarray(r, dtype=float)) / self.c


class SmoothPatch:
    """Smooth solution of the ``(r, t)`` system below a handoff level.

    ``R, S`` and ``theta`` live on Chebyshev-Lobatto nodes of a moving
    interval ``[a(t), b(t)]``.  The left end rides the ``S``-carrying
    characteristic and the right end the ``R``-carrying one, so no boundary
    data is needed.  ``theta`` at the top is integrated from
    ``theta_r = -(1 + p_r)/p_theta`` so the data is compatible; the
    constant is fixed by ``theta_anchor`` at the interval midpoint.
    """

    def __init__(self, r_lo, r_hi, t0, R_top, S_top, theta_anchor, t_end,
                 n_nodes=40, rtol=1e-13, atol=1e-14):
        self.t0 = float(t0)
        self.t_end = float(t_end)
        if not 0 < self.t_end < self.t0:
            raise DomainError("need 0 < t_end < t0")
        n = int(n_nodes)
        self.n = n
        self.xi = np.cos(np.pi * np.arange(n) / (n - 1))[::-1]
        V = C.chebvander(self.xi, n - 1)
        self._vinv = np.linalg.inv(V)
        dV = np.stack([C.chebval(self.xi, C.chebder(np.eye(n)[k])) for k in range(n)], axis=1)
        self._D = dV @ self._vinv
        r = r_lo + (r_hi - r_lo) * (self.xi + 1) / 2
        R, S = np.asarray(R_top(r), dtype=float), np.asarray(S_top(r), dtype=float)
        pr = (R - S) / (2 * self.t0 * lambda_inv_over_t(r, self.t0))
        g = -(1 + pr) / (0.5 * (R + S))
        cg = C.chebint(self._vinv @ g) * (r_hi - r_lo) / 2
        th = C.chebval(self.xi, cg)
        th += theta_anchor - C.chebval(0.0, cg)
        y0 = np.concatenate([[r_lo, r_hi], R, S, th])
        sol = solve_ivp(self._rhs, (self.t0, self.t_end), y0, method="DOP853",
                        rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise DomainError(f"patch integration failed: {sol.message}")
        self._sol = sol.sol
        self.nfev = sol.nfev

    @classmethod
    def from_crossings(cls, cross, t0, t_end, degree=10, margin=0.02, **kw):
        """Least-squares Chebyshev fit of handoff data ``{r, R, S, theta}`` at level ``t0``."""
        r = np.asarray(cross["r"], dtype=float)
        lo, hi = r[0] + margin, r[-1] - margin
        fits = {k: C.Chebyshev.fit(r, cross[k], degree, domain=[r[0], r[-1]]) for k in ("R", "S")}
        mid = 0.5 * (lo + hi)
        anchor = float(np.interp(mid, r, cross["theta"]))
        return cls(lo, hi, t0, fits["R"], fits["S"], anchor, t_end, **kw)

    def _rhs(self, t, y):
        n = self.n
        a, b = y[0], y[1]
        R, S, th = y[2:2 + n], y[2 + n:2 + 2 * n], y[2 + 2 * n:]
        r = a + (b - a) * (self.xi + 1) / 2
        lp, lm = lambda_pm(r, t, R, S)
        sR, sS = rt_sources(r, t, R, S)
        k = 2 / (b - a)
        Rr, Sr, thr = k * (self._D @ R), k * (self._D @ S), k * (self._D @ th)
        at, bt = lp[0], lm[-1]
        rt = at + (bt - at) * (self.xi + 1) / 2
        return np.concatenate([[at, bt], sR - lm * Rr + Rr * rt, sS - lp * Sr + Sr * rt,
                               4 * t / (R + S) + thr * rt])

    def span(self, t):
        y = self._sol(float(t))
        return float(y[0]), float(y[1])

    def _eval(self, r, t):
        r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
        shape = r.shape
        r, t = r.ravel(), t.ravel()
        if np.any(t > self.t0 * (1 + 1e-12)) or np.any(t < self.t_end * (1 - 1e-12)):
            raise DomainError(f"t outside the patch range [{self.t_end}, {self.t0}]")
        Y = np.atleast_2d(self._sol(t).T)
        a, b = Y[:, 0], Y[:, 1]
        if np.any(r < a) or np.any(r > b):
            raise DomainError("r outside the patch at this t")
        x = 2 * (r - a) / (b - a) - 1
        T = C.chebvander(x, self.n - 1)
        n = self.n
        out = []
        for off in (2, 2 + n, 2 + 2 * n):
            coef = Y[:, off:off + n] @ self._vinv.T
            out.append(np.sum(T * coef, axis=1).reshape(shape))
        return out

    def rs(self, r, t):
        R, S, _ = self._eval(r, t)
        return R, S

    def theta_rt(self, r, t):
        return self._eval(r, t)[2]

    def p_polar(self, r, theta, tol=1e-15, max_iter=80):
        """Invert ``theta(r, t) = theta`` for ``t`` (bracketed Newton), then ``p = t^2 - r``."""
        r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
        shape = r.shape
        r, theta = r.ravel().copy(), theta.ravel().copy()
        lo = np.full(r.shape, self.t_end)
        hi = np.full(r.shape, self.t0)
        # theta decreases in t
        f_lo = self.theta_rt(r, lo) - theta
        f_hi = self.theta_rt(r, hi) - theta
        if np.any(f_lo < 0) or np.any(f_hi > 0):
            raise DomainError("theta outside the patch's t-range at this r")
        t = 0.5 * (lo + hi)
        for _ in range(max_iter):
            R, S, th = self._eval(r, t)
            f = th - theta
            lo = np.where(f > 0, t, lo)
            hi = np.where(f > 0, hi, t)
            step = f / (4 * t / (R + S))
            tn = t - step
            bad = (tn <= lo) | (tn >= hi)
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            done = np.abs(tn - t) <= tol * np.maximum(1.0, t)
            t = tn
            if np.all(done):
                break
        else:
            raise DomainError("p_polar inversion did not converge")
        return (t * t - r).reshape(shape)

    def p_cart(self, xi, eta):
        return self.p_polar(np.hypot(xi, eta), np.arctan2(eta, xi))


# --------------------------------------------------------------------------
# finite-difference building blocks


def _rk4(speed, x, s, ds, n=2):
    """Integrate ``dx/ds = speed(x, s)`` from ``s`` over ``ds`` in ``n`` RK4 steps."""
    h = ds / n
    for _ in range(n):
        k1 = speed(x, s)
        k2 = speed(x + 0.5 * h * k1, s + 0.5 * h)
        k3 = speed(x + 0.5 * h * k2, s + 0.5 * h)
        k4 = speed(x + h * k3, s + h)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s = s + h
    return x


def _along(f, speed, x, s, h):
    """Central difference of ``f`` along the curve ``dx/ds = speed``."""
    xp = _rk4(speed, x, s, h)
    xm = _rk4(speed, x, s, -h)
    return (f(xp, s + h) - f(xm, s - h)) / (2 * h)


def _rt_speed(sol, family):
    i = 0 if family > 0 else 1
    return lambda r, t: np.asarray(lambda_pm(r, t, *sol.rs(r, t))[i])


def _polar_speed(sol, family):
    return lambda r, th: family * np.asarray(lambda_inv_polar(r, sol.p_polar(r, th)))


def _check_t(r, t):
    if np.any(np.asarray(t) < T_REFUSE * np.sqrt(r)):
        raise DomainError(f"identity checks need t >= {T_REFUSE} sqrt(r)")


# --------------------------------------------------------------------------
# residuals of the second-order equation


def residual_cartesian(p_field, xi, eta, h):
    """Central-difference left side of the second-order equation for ``p(xi, eta)``."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    P = lambda a, b: np.asarray(p_field(xi + a * h, eta + b * h), dtype=float)
    p = P(0, 0)
    px = (P(1, 0) - P(-1, 0)) / (2 * h)
    py = (P(0, 1) - P(0, -1)) / (2 * h)
    pxx = (P(1, 0) - 2 * p + P(-1, 0)) / h ** 2
    pyy = (P(0, 1) - 2 * p + P(0, -1)) / h ** 2
    pxy = (P(1, 1) - P(1, -1) - P(-1, 1) + P(-1, -1)) / (4 * h * h)
    w = xi * px + eta * py
    return ((p * p - xi * xi) * pxx - 2 * xi * eta * pxy + (p * p - eta * eta) * pyy
            + 2 / p * w * w - 2 * w)


def residual_polar(p_field, r, theta, h):
    """Central-difference left side of the polar form of the equation."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    P = lambda a, b: np.asarray(p_field(r + a * h, theta + b * h), dtype=float)
    p = P(0, 0)
    pr = (P(1, 0) - P(-1, 0)) / (2 * h)
    prr = (P(1, 0) - 2 * p + P(-1, 0)) / h ** 2
    ptt = (P(0, 1) - 2 * p + P(0, -1)) / h ** 2
    return ((p * p - r * r) * prr + p * p / (r * r) * ptt + p * p / r * pr
            + 2 * r * r / p * pr * pr - 2 * r * pr)


def decomposition_check(sol, r, theta, h):
    """Residuals of the two decoupled forms, with ``d+-`` along traced polar characteristics.

    Returns ``(d+d-p - Q(d+p - d-p) d-p,  d-d+p - Q(d-p - d+p) d+p)``.
    """
    r = np.asarray(r, dtype=float)
    p = np.asarray(sol.p_polar(r, theta))
    _check_t(r, np.sqrt(np.maximum(r + p, 0)))
    up, dn = _polar_speed(sol, +1), _polar_speed(sol, -1)
    P = lambda x, th: np.asarray(sol.p_polar(x, th))
    dp = _along(P, up, r, theta, h)
    dm = _along(P, dn, r, theta, h)
    dpdm = _along(lambda x, th: _along(P, dn, x, th, h), up, r, theta, h)
    dmdp = _along(lambda x, th: _along(P, up, x, th, h), dn, r, theta, h)
    Q = q_polar(r, p)
    return dpdm - Q * (dp - dm) * dm, dmdp - Q * (dm - dp) * dp


# --------------------------------------------------------------------------
# (r, t) identities

MUTABLE = ("E", "h", "f1", "f2", "f3", "g1", "g2", "g3", "l1", "l2", "f2_flip")


def _coeffs(r, t, R, S, mutate):
    c = coeff_E_h_f_g(r, t, R, S).as_dict()
    c = {k: np.asarray(v, dtype=float) for k, v in c.items()}
    mutate = dict(mutate or {})
    if mutate.pop("f2_flip", None):
        # the (R - S)/(S - lam_inv) term inside f2 with its sign reversed
        x = (R - S) / (S - lambda_inv_rt(r, t))
        c["f2"] = c["f2"] * (1 - x) / (1 + x)
    for k, fac in mutate.items():
        if k in c:
            c[k] = c[k] * fac
    return c


def commutator_check(sol, r, t, h, mutate=None):
    """Residuals of the speed-commutator ratio and of both second-difference identities.

    Keys: ``commutator`` (ratio minus ``2/t + h``), ``second_diff_R_gap`` and
    ``second_diff_S_gap`` (against ``t^2 E`` times the ``r``-derivative of the first
    characteristic derivative), ``second_diff_R`` and ``second_diff_S`` (against the
    ``f``/``g`` expansions).
    """
    r = np.asarray(r, dtype=float)
    _check_t(r, t)
    up, dn = _rt_speed(sol, +1), _rt_speed(sol, -1)
    Rf = lambda x, s: sol.rs(x, s)[0]
    Sf = lambda x, s: sol.rs(x, s)[1]
    R, S = sol.rs(r, t)
    lp, lm = up(r, t), dn(r, t)
    ratio = (_along(up, dn, r, t, h) - _along(dn, up, r, t, h)) / (lp - lm)
    c = _coeffs(r, t, R, S, mutate)

    dmR = lambda x, s: _along(Rf, dn, x, s, h)
    dpS = lambda x, s: _along(Sf, up, x, s, h)
    lhs_R = _along(dmR, up, r, t, h) - _along(dmR, dn, r, t, h)
    lhs_S = _along(dpS, up, r, t, h) - _along(dpS, dn, r, t, h)
    ddr = lambda f: (f(r + h, t) - f(r - h, t)) / (2 * h)
    Rr, Sr = ddr(Rf), ddr(Sf)
    return {
        "commutator": ratio - (2 / t + c["h"]),
        "second_diff_R_gap": lhs_R - t * t * c["E"] * ddr(dmR),
        "second_diff_R": lhs_R - (t * c["f1"] * Rr + t * c["f2"] * Sr + t * t * c["f3"]),
        "second_diff_S_gap": lhs_S - t * t * c["E"] * ddr(dpS),
        "second_diff_S": lhs_S - (t * c["g1"] * Rr + t * c["g2"] * Sr + t * t * c["g3"]),
    }


def v_evolution_check(sol, r, t, h, delta, mutate=None):
    """``V_t - (l1 V/t + l2 t^(2 - delta))`` with ``V_t`` by central differences at fixed ``r``."""
    r = np.asarray(r, dtype=float)
    _check_t(r, t)

    def V(x, s):
        R, S = sol.rs(x, s)
        return 1 / np.asarray(S) - 1 / np.asarray(R)

    R, S = sol.rs(r, t)
    Rr = (sol.rs(r + h, t)[0] - sol.rs(r - h, t)[0]) / (2 * h)
    Sr = (sol.rs(r + h, t)[1] - sol.rs(r - h, t)[1]) / (2 * h)
    l1, l2 = coeff_l1_l2(r, t, R, S, Rr, Sr, delta)
    mutate = mutate or {}
    l1 = l1 * mutate.get("l1", 1.0)
    l2 = l2 * mutate.get("l2", 1.0)
    Vt = (V(r, t + h) - V(r, t - h)) / (2 * h)
    return Vt - (l1 * V(r, t) / t + l2 * t ** (2 - delta))


# --------------------------------------------------------------------------
# reports


def observed_order(hs, res):
    """Least-squares slope of ``log|res|`` against ``log h``; None below three steps."""
    hs = np.asarray(hs, dtype=float)
    res = np.abs(np.asarray(res, dtype=float))
    if hs.size < 3 or np.any(res == 0):
        return None
    return float(np.polyfit(np.log(hs), np.log(res), 1)[0])


def richardson(values, ratio=2.0, order=2.0):
    """Repeated Richardson extrapolation of values computed at ``h, h/ratio, ...``.

    Each pass removes the next even power (``order, order + 2, ...``).
    """
    v = [np.asarray(x, dtype=float) for x in values]
    k = order
    while len(v) > 1:
        f = ratio ** k
        v = [(f * b - a) / (f - 1) for a, b in zip(v, v[1:])]
        k += 2
    return v[0]


@dataclass
class ResidualReport:
    identity: str
    provider: str
    location: dict
    hs: list
    residuals: list
    nominal_order: float = NOMINAL_ORDER
    extrapolated: float | None = None
    mutation: str | None = None

    @property
    def order(self):
        return observed_order(self.hs, self.residuals)

    @property
    def pair_orders(self):
        out = []
        for (h1, a), (h2, b) in zip(zip(self.hs, self.residuals), zip(self.hs[1:], self.residuals[1:])):
            out.append(float(np.log(abs(a) / abs(b)) / np.log(h1 / h2)) if a and b else None)
        return out

    @property
    def at_roundoff(self) -> bool:
        return max(abs(x) for x in self.residuals) <= ROUNDOFF

    def converges(self, frac=0.9) -> bool:
        if self.at_roundoff:
            return True
        o = self.order
        return o is not None and o >= frac * self.nominal_order

    def as_dict(self):
        return {"identity": self.identity, "provider": self.provider, "location": self.location,
                "h": list(map(float, self.hs)), "residual": list(map(float, self.residuals)),
                "order": self.order, "pair_orders": self.pair_orders,
                "nominal_order": self.nominal_order, "extrapolated": self.extrapolated,
                "at_roundoff": self.at_roundoff, "converges": self.converges(),
                "mutation": self.mutation}


def _sup(x):
    x = np.abs(np.asarray(x, dtype=float))
    return float(np.max(x)), int(np.argmax(x))


def _report(name, provider, pts, hs, vals, mutation=None, extrapolate=False):
    sups = [_sup(v) for v in vals]
    j = sups[-1][1]
    loc = {k: float(np.ravel(v)[j]) for k, v in pts.items()}
    loc["n_points"] = int(np.size(next(iter(pts.values()))))
    ext = None
    if extrapolate:
        ext = float(np.max(np.abs(richardson(vals))))
    return ResidualReport(name, provider, loc, list(hs), [s[0] for s in sups],
                          extrapolated=ext, mutation=mutation)


def rt_reports(sol, provider, r, t, hs, delta, mutate=None, with_v=True):
    """Commutator, second-difference and ``V_t`` reports at points ``(r, t)``."""
    per_h = [commutator_check(sol, r, t, h, mutate) for h in hs]
    tag = None if not mutate else ",".join(f"{k}={v!r}" for k, v in sorted(mutate.items()))
    pts = {"r": r, "t": np.full_like(r, t)}
    reps = [_report(k, provider, pts, hs, [d[k] for d in per_h], tag, extrapolate=True)
            for k in per_h[0]]
    if with_v:
        vals = [v_evolution_check(sol, r, t, h, delta, mutate) for h in hs]
        reps.append(_report("v_evolution", provider, pts, hs, vals, tag, extrapolate=True))
    return reps


def polar_reports(sol, provider, r, theta, hs, extrapolate=False):
    """Cartesian, polar and decomposition reports at polar points ``(r, theta)``."""
    xi, eta = r * np.cos(theta), r * np.sin(theta)
    pts = {"r": r, "theta": theta}
    cart = [residual_cartesian(sol.p_cart, xi, eta, h) for h in hs]
    pol = [residual_polar(sol.p_polar, r, theta, h) for h in hs]
    dec = [decomposition_check(sol, r, theta, h) for h in hs]
    return [_report("cartesian_pde", provider, pts, hs, cart, extrapolate=extrapolate),
            _report("polar_pde", provider, pts, hs, pol, extrapolate=extrapolate),
            _report("plus_decomposition", provider, pts, hs, [d[0] for d in dec]),
            _report("minus_decomposition", provider, pts, hs, [d[1] for d in dec])]


@dataclass
class CanaryResult:
    mutation: str
    detected_by: list
    reports: list = field(repr=False)

    @property
    def detected(self) -> bool:
        return bool(self.detected_by)


def plateaus(base: ResidualReport, mutated: ResidualReport, factor=10.0) -> bool:
    """The mutated residual's ``h -> 0`` limit exceeds ``factor`` times the unmutated one.

    Both limits are Richardson extrapolations; the unmutated one is what the
    identity converges to (zero up to the provider's own defect).
    """
    return mutated.extrapolated > factor * max(base.extrapolated, np.finfo(float).tiny)


def canaries(sol, provider, r, t, hs, delta, base_reports, mutations=None):
    """Re-run the ``(r, t)`` identities with one coefficient perturbed at a time."""
    if mutations is None:
        mutations = [{k: 1.01} for k in MUTABLE if k != "f2_flip"] + [{"f2_flip": True}]
    base = {rep.identity: rep for rep in base_reports}
    out = []
    for m in mutations:
        reps = rt_reports(sol, provider, r, t, hs, delta, mutate=m)
        hit = [rep.identity for rep in reps if plateaus(base[rep.identity], rep)]
        out.append(CanaryResult(",".join(f"{k}={v!r}" for k, v in m.items()), hit, reps))
    return out


def write_json(path, reports, canary_results=(), extra=None):
    doc = {"reports": [r.as_dict() for r in reports],
           "canaries": [{"mutation": c.mutation, "detected_by": c.detected_by,
                         "detected": c.detected} for c in canary_results]}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(_clean(doc), fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_csv(path, reports):
    n = max(len(r.hs) for r in reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["provider", "identity", "order", "nominal_order", "converges", "extrapolated"]
                   + [f"h{k}" for k in range(n)] + [f"residual{k}" for k in range(n)])
        for r in reports:
            pad = [""] * (n - len(r.hs))
            w.writerow([r.provider, r.identity, _fmt(r.order), repr(r.nominal_order),
                        str(r.converges()), _fmt(r.extrapolated)]
                       + [repr(float(h)) for h in r.hs] + pad
                       + [repr(float(x)) for x in r.residuals] + pad)


def _fmt(x):
    return "" if x is None else repr(float(x))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
