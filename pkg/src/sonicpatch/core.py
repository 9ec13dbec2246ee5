"""Domain types and closed-form coefficient functions.

Everything here is a pure function of its arguments.  Functions accept
scalars or numpy arrays (broadcast together) and return the same kind.

Two coordinate systems are used for the hyperbolic part of the flow:

* polar ``(r, theta)`` with the unknown ``p(r, theta) < 0``;
* the degeneracy coordinates ``(r, t)`` with ``t = sqrt(r + p)``, in which
  the sonic line is ``t = 0`` and every coefficient below stays finite.

Near the sonic line only the ``(r, t)`` forms are meaningful; the polar
forms are refused once ``r + p`` drops under ``POLAR_T_FLOOR**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

# relative size under which R + lam_inv or S - lam_inv counts as zero
GUARD_REL = 1e-10
# polar forms are never evaluated closer to the sonic line than this t
POLAR_T_FLOOR = 1e-8


@dataclass(frozen=True)
class CartPoint:
    xi: float
    eta: float

    def __post_init__(self):
        if not (np.isfinite(self.xi) and np.isfinite(self.eta)):
            raise DomainError(f"non-finite point ({self.xi}, {self.eta})")

    def to_polar(self) -> "PolarPoint":
        return PolarPoint(float(np.hypot(self.xi, self.eta)),
                          float(np.arctan2(self.eta, self.xi)))


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"polar radius must be positive, got {self.r}")

    def to_cart(self) -> CartPoint:
        return CartPoint(self.r * np.cos(self.theta), self.r * np.sin(self.theta))


@dataclass(frozen=True)
class RTPoint:
    r: float
    t: float

    def __post_init__(self):
        if not (self.r > 0 and self.t >= 0 and self.t * self.t < self.r):
            raise DomainError(f"need r > 0 and 0 <= t^2 < r, got r={self.r}, t={self.t}")

    @property
    def p(self) -> float:
        return self.t * self.t - self.r


@dataclass(frozen=True)
class StateW:
    """Unknown triple of the first-order system: ``p``, ``R = d+p``, ``S = d-p``."""

    p: float
    R: float
    S: float

    def __post_init__(self):
        if not self.p < 0:
            raise DomainError(f"p must be negative, got {self.p}")

    def as_tuple(self):
        return (self.p, self.R, self.S)


@dataclass(frozen=True)
class DerivedQuantities:
    U: float
    V: float
    G: float
    H: float


@dataclass(frozen=True)
class MonitorConstants:
    """A-posteriori bounds sampled over a subdomain of the near-sonic layer.

    ``K1``: sup of |h|, |f3|, |g3|; ``K2``: sup of |f1|, |f2|, |g1|, |g2|;
    ``K3``: inf of |E|; ``K4``: sup of |(l1 - 1)/t|; ``K5``: sup of |l2|;
    ``M0`` and ``Mhat`` are the seed bound for ``t**delta * R_r`` and the bound
    for ``|V|/t`` assembled from them.
    """

    K1: float
    K2: float
    K3: float
    K4: float
    K5: float
    M0: float
    Mhat: float
    delta: float

    def __post_init__(self):
        for name in ("K1", "K2", "K3", "K4", "K5", "M0", "Mhat"):
            v = getattr(self, name)
            if not v >= 0:
                raise DomainError(f"{name} must be nonnegative, got {v}")
        if not 1.0 < self.delta < 2.0:
            raise DomainError(f"delta must lie in (1, 2), got {self.delta}")

    def as_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("K1", "K2", "K3", "K4", "K5", "M0", "Mhat", "delta")}


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _guard(den, scale, name):
    bad = np.abs(den) < GUARD_REL * scale
    if np.any(bad):
        raise SingularityError(f"denominator {name} vanishes "
                               f"({np.count_nonzero(bad)} point(s))", denominator=name)


# --------------------------------------------------------------------------
# characteristic slope and Q

def lambda_inv_polar(r, p):
    """Characteristic slope ``dr/dtheta = +-lam_inv`` in polar form."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(r <= 0) or np.any(p >= 0):
        raise DomainError("lambda_inv_polar needs r > 0 and p < 0")
    d = (r - p) * (r + p)
    if np.any(d < 0):
        raise DomainError("lambda_inv_polar: r^2 < p^2 (elliptic region)")
    return _out(r / np.abs(p) * np.sqrt(d))


def lambda_inv_rt(r, t):
    """``lam_inv = r t sqrt(2r - t^2) / (r - t^2)``; vanishes on the sonic line."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t * t >= r):
        raise DomainError("lambda_inv_rt needs 0 <= t^2 < r")
    t2 = t * t
    return _out(r * t * np.sqrt(2 * r - t2) / (r - t2))


def lambda_inv_over_t(r, t):
    """Regular factor ``lam_inv / t``; tends to ``sqrt(2r)`` at the sonic line."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t * t >= r):
        raise DomainError("lambda_inv_over_t needs 0 <= t^2 < r")
    t2 = t * t
    return _out(r * np.sqrt(2 * r - t2) / (r - t2))


def q_polar(r, p):
    """``Q = r^2 / (2 p (r^2 - p^2))``; singular on the sonic line."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(r <= 0) or np.any(p >= 0):
        raise DomainError("q_polar needs r > 0 and p < 0")
    if np.any(r + p < POLAR_T_FLOOR ** 2):
        raise SingularityError("q_polar evaluated at (or past) the sonic line; "
                               "use t2q_rt near t = 0", denominator="r^2 - p^2")
    return _out(r * r / (2 * p * ((r - p) * (r + p))))


def q_rt(r, t):
    """``Q = -r^2 / (2 t^2 (r - t^2)(2r - t^2))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise SingularityError("Q is singular at t = 0; use t2q_rt", denominator="t^2")
    return _out(t2q_rt(r, t) / (t * t))


def t2q_rt(r, t):
    """Factored ``t^2 Q``; equals -1/4 on the sonic line."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t * t >= r):
        raise DomainError("t2q_rt needs 0 <= t^2 < r")
    t2 = t * t
    return _out(-r * r / (2 * (r - t2) * (2 * r - t2)))


# --------------------------------------------------------------------------
# (r, t) system: speeds and sources

def lambda_pm(r, t, R, S):
    """Characteristic speeds ``dr/dt`` of the (r, t) system.

    Returns ``(Lambda_plus, Lambda_minus)`` with
    ``Lambda_plus = 2 t lam_inv / (R + lam_inv)`` (carries S) and
    ``Lambda_minus = -2 t lam_inv / (S - lam_inv)`` (carries R).
    """
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    li = np.asarray(lambda_inv_rt(r, t))
    scale = np.maximum(1.0, np.maximum(np.abs(R), np.abs(S)))
    dp = R + li
    dm = S - li
    _guard(dp, scale, "R + lambda_inv")
    _guard(dm, scale, "S - lambda_inv")
    two_t_li = 2 * np.asarray(t, dtype=float) * li
    return _out(two_t_li / dp), _out(-two_t_li / dm)


def rt_sources(r, t, R, S):
    """Right-hand sides of ``d-R`` and ``d+S`` in the (r, t) system.

    ``d-R = 2t/(S - lam_inv) Q (S - R) R`` and
    ``d+S = 2t/(R + lam_inv) Q (R - S) S``, evaluated through ``t^2 Q`` so the
    only singular factor left is ``(S - R)/t``, bounded near the sonic line.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(t <= 0):
        raise SingularityError("rt_sources needs t > 0", denominator="t")
    li = np.asarray(lambda_inv_rt(r, t))
    scale = np.maximum(1.0, np.maximum(np.abs(R), np.abs(S)))
    _guard(R + li, scale, "R + lambda_inv")
    _guard(S - li, scale, "S - lambda_inv")
    c = 2 * np.asarray(t2q_rt(r, t)) * (S - R) / t
    return _out(c * R / (S - li)), _out(-c * S / (R + li))


# --------------------------------------------------------------------------
# coefficient records

@dataclass(frozen=True)
class Coefficients:
    E: object
    h: object
    f1: object
    f2: object
    f3: object
    g1: object
    g2: object
    g3: object

    def as_dict(self):
        return {k: getattr(self, k) for k in ("E", "h", "f1", "f2", "f3", "g1", "g2", "g3")}


def coeff_E_h_f_g(r, t, R, S):
    """Closed forms of ``E``, ``h`` and ``f1..f3``, ``g1..g3``.

    ``Lambda_plus - Lambda_minus = t^2 E``; the commutator ratio of the two
    characteristic derivatives of the speeds is ``2/t + h``; and
    ``(Lambda_plus - Lambda_minus) (d-R)_r = t f1 R_r + t f2 S_r + t^2 f3``,
    ``(Lambda_plus - Lambda_minus) (d+S)_r = t g1 R_r + t g2 S_r + t^2 g3``.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    li = np.asarray(lambda_inv_rt(r, t))
    scale = np.maximum(1.0, np.maximum(np.abs(R), np.abs(S)))
    dp = R + li
    dm = S - li
    _guard(dp, scale, "R + lambda_inv")
    _guard(dm, scale, "S - lambda_inv")

    t2 = t * t
    a = r - t2
    b = 2 * r - t2
    sb = np.sqrt(b)
    E = 2 * r * sb / a * (1 / dp + 1 / dm)

    h = (t * (3 * r - t2) / (a * b)
         + (r ** 3 * (3 * R - 3 * S + 4 * li) + 2 * t * li * (t ** 5 + r * r * t - 3 * r * t ** 3))
         / (dp * dm * a * a * sb))

    g = r * r / (a * b)
    f1 = g * (2 * R - S) / dm * E
    f2 = -R / dm * (1 + (R - S) / dm) * g * E
    f3 = (r * R * (R - S) / (dm * a * a * b * sb)
          * ((r ** 3 - 3 * r * r * t2 + r * t2 * t2) / (dm * a) - t * (3 * r - 2 * t2) / sb) * E)

    g1 = -S / dp * (1 + (S - R) / dp) * g * E
    g2 = g * (2 * S - R) / dp * E
    g3 = (r * S * (S - R) / (dp * a * a * b * sb)
          * ((3 * r * r * t2 - r * t2 * t2 - r ** 3) / (dp * a) - t * (3 * r - 2 * t2) / sb) * E)

    return Coefficients(*(_out(x) for x in (E, h, f1, f2, f3, g1, g2, g3)))


def coeff_l1_l2(r, t, R, S, Rr, Sr, delta):
    """Coefficients of ``V_t = l1 V/t + l2 t^(2 - delta)``.

    ``l1 -> 1`` on the sonic line wherever ``V -> 0``.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    Rr = np.asarray(Rr, dtype=float)
    Sr = np.asarray(Sr, dtype=float)
    if not 1.0 < delta < 2.0:
        raise DomainError(f"delta must lie in (1, 2), got {delta}")
    if np.any(R == 0) or np.any(S == 0):
        raise SingularityError("l1, l2 need R and S nonzero", denominator="R*S")
    li = np.asarray(lambda_inv_rt(r, t))
    scale = np.maximum(1.0, np.maximum(np.abs(R), np.abs(S)))
    _guard(R + li, scale, "R + lambda_inv")
    _guard(S - li, scale, "S - lambda_inv")
    t2 = t * t
    a = r - t2
    b = 2 * r - t2
    V = 1 / S - 1 / R
    ms = 1 - li / S
    pr = 1 + li / R
    l1 = r * r * (2 - li * V) / (a * b * ms * pr)
    td = t ** delta
    l2 = 2 * r * np.sqrt(b) / (a * R * S) * (td * Rr / (ms * R) + td * Sr / (pr * S))
    return _out(l1), _out(l2)


def l1_minus_one_over_t(r, t, R, S):
    """``(l1 - 1)/t`` from its expanded numerator, finite down to ``t = 0``."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    li = np.asarray(lambda_inv_rt(r, t))
    lt = np.asarray(lambda_inv_over_t(r, t))
    t2 = t * t
    V = 1 / S - 1 / R
    c = r * r - 3 * r * t2 + t2 * t2
    num = (t * (3 * r - t2) + lt * V * c
           + (2 * r * r - 3 * r * t2 + t2 * t2) * li * lt / (R * S))
    den = (1 - li / S) * (1 + li / R) * (r - t2) * (2 * r - t2)
    return _out(num / den)


def derived_quantities(r, t, R, S, Rr, Sr):
    """``U = 1/R + 1/S``, ``V = 1/S - 1/R``, ``G = (Lp - Lm) R_r``, ``H = (Lp - Lm) S_r``."""
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    lp, lm = lambda_pm(r, t, R, S)
    d = np.asarray(lp) - np.asarray(lm)
    with np.errstate(divide="ignore"):
        U = 1 / R + 1 / S
        V = 1 / S - 1 / R
    return DerivedQuantities(_out(U), _out(V), _out(d * np.asarray(Rr, dtype=float)),
                             _out(d * np.asarray(Sr, dtype=float)))
