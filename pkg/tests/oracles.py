"""Independent reference values for the tests.

The coefficient formulas are written out again here, independently, and
evaluated in 50-digit arithmetic with mpmath, starting from the polar
``lambda_inv`` and ``Q`` (the package uses the ``(r, t)`` forms).  The wave
values come from ``p = -r sin(theta)`` by hand differentiation.
"""

from __future__ import annotations

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

mp.mp.dps = 50


def _m(x):
    return mp.mpf(float(x))


def lam_inv(r, t):
    r, t = _m(r), _m(t)
    p = t * t - r
    return r / abs(p) * mp.sqrt(r * r - p * p)


def Q(r, t):
    r, t = _m(r), _m(t)
    p = t * t - r
    return r * r / (2 * p * (r * r - p * p))


def speeds(r, t, R, S):
    li = lam_inv(r, t)
    t, R, S = _m(t), _m(R), _m(S)
    return 2 * t * li / (R + li), -2 * t * li / (S - li)


def sources(r, t, R, S):
    li, q = lam_inv(r, t), Q(r, t)
    t, R, S = _m(t), _m(R), _m(S)
    return 2 * t / (S - li) * q * (S - R) * R, 2 * t / (R + li) * q * (R - S) * S


def coefficients(r, t, R, S):
    li = lam_inv(r, t)
    r, t, R, S = _m(r), _m(t), _m(R), _m(S)
    a, b = r - t ** 2, 2 * r - t ** 2
    E = 2 * r * mp.sqrt(b) / a * (1 / (R + li) + 1 / (S - li))
    h = (t * (3 * r - t ** 2) / (a * b)
         + (r ** 3 * (3 * R - 3 * S + 4 * li) + 2 * t * li * (t ** 5 + r ** 2 * t - 3 * r * t ** 3))
         / ((R + li) * (S - li) * a ** 2 * mp.sqrt(b)))
    f1 = r ** 2 * (2 * R - S) / ((S - li) * a * b) * E
    f2 = -R / (S - li) * (1 + (R - S) / (S - li)) * r ** 2 / (a * b) * E
    f3 = (r * R * (R - S) / ((S - li) * a ** 2 * b ** mp.mpf(1.5))
          * ((-3 * r ** 2 * t ** 2 + r * t ** 4 + r ** 3) / ((S - li) * a)
             - t * (3 * r - 2 * t ** 2) / mp.sqrt(b)) * E)
    g1 = -S / (R + li) * (1 + (S - R) / (R + li)) * r ** 2 / (a * b) * E
    g2 = r ** 2 * (2 * S - R) / ((R + li) * a * b) * E
    g3 = (r * S * (S - R) / ((R + li) * a ** 2 * b ** mp.mpf(1.5))
          * ((3 * r ** 2 * t ** 2 - r * t ** 4 - r ** 3) / ((R + li) * a)
             - t * (3 * r - 2 * t ** 2) / mp.sqrt(b)) * E)
    return dict(E=E, h=h, f1=f1, f2=f2, f3=f3, g1=g1, g2=g2, g3=g3)


def l1_l2(r, t, R, S, Rr, Sr, delta):
    li = lam_inv(r, t)
    r, t, R, S, Rr, Sr, d = (_m(x) for x in (r, t, R, S, Rr, Sr, delta))
    V = 1 / S - 1 / R
    ms, pr = 1 - li / S, 1 + li / R
    a, b = r - t ** 2, 2 * r - t ** 2
    l1 = r ** 2 * (2 - li * V) / (a * b * ms * pr)
    l2 = 2 * r * mp.sqrt(b) / (a * R * S) * (t ** d * Rr / (ms * R) + t ** d * Sr / (pr * S))
    return l1, l2


def v_rate_first_form(r, t, R, S, Rr, Sr):
    """``V_t`` in unexpanded form, with ``(1/R)_r = -R_r/R^2``."""
    li, q = lam_inv(r, t), Q(r, t)
    t, R, S, Rr, Sr = (_m(x) for x in (t, R, S, Rr, Sr))
    V = 1 / S - 1 / R
    ms, pr = 1 - li / S, 1 + li / R
    return (2 * t * q * V * (-2 + li * V) / (ms * pr)
            - 2 * t * li / S / ms * (-Rr / R ** 2)
            - 2 * t * li / R / pr * (-Sr / S ** 2))


def close(a, b, rel=1e-10, abs_=0.0):
    a, b = float(a), float(b)
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_)


# --------------------------------------------------------------------------
# wave


def wave_rt(r, t):
    """Wave ``(R, S, theta)`` at ``(r, t)`` by hand: ``R = -2 r cos(theta)``, ``sin(theta) = 1 - t^2/r``."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    s = 1 - t * t / r
    return -2 * r * np.sqrt(1 - s * s), np.zeros_like(r * t), np.arcsin(s)


def wave_level_theta(r, eps):
    return np.arcsin(1 - eps / r)


def wave_level_slope(r, eps):
    return (eps / r ** 2) / np.sqrt(1 - (1 - eps / r) ** 2)


# --------------------------------------------------------------------------
# boundary BC by an adaptive high-order integrator


def bc_reference(r_B, p_B, R_B, theta_B, profile, thetas):
    def rhs(th, y):
        r, p, R = y
        li = r / abs(p) * np.sqrt(r * r - p * p)
        q = r * r / (2 * p * (r * r - p * p))
        S = profile(th)
        return [-li, S, q * (S - R) * R]

    sol = solve_ivp(rhs, (theta_B, thetas[-1]), [r_B, p_B, R_B], method="DOP853",
                    rtol=1e-13, atol=1e-14, t_eval=thetas)
    return sol.y
