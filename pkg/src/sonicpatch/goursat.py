"""Goursat problem on the curvilinear triangle ABC, solved on a characteristic mesh.

Data: the wave supplies ``R`` (and ``S = 0``) on the positive characteristic
AB; the negative characteristic BC is generated from B by prescribing
``S(theta)`` and integrating the compatibility ODEs for ``(r, p, R)``.

Mesh indexing: node ``(i, j)`` is the intersection of the positive
characteristic leaving BC seed ``i`` with the negative characteristic
leaving AB seed ``j``.  Its negative-family parent is ``(i-1, j)``, its
positive-family parent ``(i, j-1)``.  Along every strand ``theta`` grows.
Nodes are filled by anti-diagonals ``i + j = const``; nodes on one
anti-diagonal are independent and are updated together.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import StateW, lambda_inv_polar, q_polar
from .errors import ConvergenceError, DomainError, MeshError, SonicPatchError
from .wave import WaveParams, wave_RS


@dataclass(frozen=True)
class GammaMinusProfile:
    """Prescribed ``S`` along BC: ``S = -s0 (theta_B - theta)/(theta_B - theta_C)``.

    ``theta_C`` is the nominal angle at which ``S`` reaches ``-s0``; the true
    sonic end of BC is wherever the generated curve meets ``r + p = 0``.
    """

    s0: float
    theta_B: float
    theta_C: float

    def __post_init__(self):
        if self.s0 < 0:
            raise DomainError("s0 must be nonnegative")
        if self.theta_C == self.theta_B:
            raise DomainError("theta_C must differ from theta_B")

    def __call__(self, theta):
        return -self.s0 * (self.theta_B - theta) / (self.theta_B - self.theta_C)

    def derivative(self, theta):
        return -self.s0 / (self.theta_C - self.theta_B) + 0 * np.asarray(theta, dtype=float)


@dataclass
class CharNode:
    i: int
    j: int
    theta: float
    r: float
    state: StateW
    parent_minus: tuple | None
    parent_plus: tuple | None

    @property
    def t(self):
        return float(np.sqrt(max(self.r + self.state.p, 0.0)))


@dataclass
class BoundaryStrand:
    """Seeds along one boundary characteristic; the last one may lie below the handoff level."""

    theta: np.ndarray
    r: np.ndarray
    p: np.ndarray
    R: np.ndarray
    S: np.ndarray

    def __len__(self):
        return len(self.theta)


def _transport_rhs(theta, y, profile):
    r, p, R = y
    li = lambda_inv_polar(r, p)
    Q = q_polar(r, p)
    S = profile(theta)
    return np.array([-li, S, Q * (S - R) * R])


def gamma_minus_generate(B_state: StateW, theta_B: float, r_B: float, profile: GammaMinusProfile,
                         n_steps: int, dtheta: float, eps_stop: float, substeps: int = 16):
    """Negative characteristic BC with its data, integrated from B.

    Integrates ``dr/dtheta = -lam_inv``, ``dp/dtheta = S(theta)``,
    ``dR/dtheta = Q (S - R) R`` with classical RK4 (``substeps`` per seed
    interval).  Seeds are spaced ``dtheta`` apart; generation stops after
    ``n_steps`` intervals or at the first seed with ``r + p < eps_stop``
    (that seed is kept and marks the end of the strand).
    """
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    th = theta_B
    y = np.array([r_B, B_state.p, B_state.R], dtype=float)
    out = [(th, *y, profile(th))]
    h = dtheta / substeps
    for _ in range(n_steps):
        if y[0] + y[1] < eps_stop:
            break
        for _ in range(substeps):
            try:
                k1 = _transport_rhs(th, y, profile)
                k2 = _transport_rhs(th + h / 2, y + h / 2 * k1, profile)
                k3 = _transport_rhs(th + h / 2, y + h / 2 * k2, profile)
                k4 = _transport_rhs(th + h, y + h * k3, profile)
            except SonicPatchError as exc:
                raise MeshError(f"BC integration reached the sonic line near theta={th:.6g}: {exc}",
                                index=(len(out), 0)) from exc
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            th = th + h
        out.append((th, *y, profile(th)))
    a = np.array(out)
    return BoundaryStrand(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4])


def ab_level_angle(params: WaveParams, level: float) -> float:
    """Angle where AB meets ``r + p = level^2`` (AB has ``r + p = -p1 s (1 - s)``, ``s = sin``)."""
    disc = 1 - 4 * level * level / abs(params.p1)
    if disc < 0:
        raise DomainError(f"level t={level} lies above every point of AB")
    return float(np.arcsin(0.5 * (1 + np.sqrt(disc))))


def bc_level_point(B_state: StateW, theta_B: float, r_B: float, profile: GammaMinusProfile,
                   level: float):
    """``(theta, r)`` where the generated BC meets ``r + p = level^2`` (adaptive high-order solve)."""
    def rhs(th, y):
        return _transport_rhs(th, y, profile)

    def hit(th, y):
        return y[0] + y[1] - level * level

    hit.terminal = True
    sol = solve_ivp(rhs, (theta_B, theta_B + np.pi), [r_B, B_state.p, B_state.R],
                    method="DOP853", events=hit, rtol=1e-12, atol=1e-14)
    if not sol.t_events[0].size:
        raise DomainError("BC never reaches the handoff level")
    return float(sol.t_events[0][0]), float(sol.y_events[0][0][0])


def bc_level_angle(B_state, theta_B, r_B, profile, level) -> float:
    return bc_level_point(B_state, theta_B, r_B, profile, level)[0]


def level_span(params: WaveParams, profile: GammaMinusProfile, level: float):
    """Radii where the level ``r + p = level^2`` meets BC and AB: ``(r_C, r_A)``."""
    tb = params.theta_B
    w = wave_RS(tb, params)
    rB = -params.p1 * np.sin(tb)
    B = StateW(w.p, w.R, float(profile(tb)))
    r_c = bc_level_point(B, tb, rB, profile, level)[1]
    r_a = -params.p1 * np.sin(ab_level_angle(params, level))
    return r_c, float(r_a)


def gamma_plus_seeds(params: WaveParams, n: int, eps_stop: float, dtheta=None) -> BoundaryStrand:
    """Seeds on AB from the exact wave, spaced ``dtheta`` from B (default ``(pi/2 - theta_B)/n``)."""
    tb = params.theta_B
    dth = (np.pi / 2 - tb) / n if dtheta is None else dtheta
    rows = []
    for j in range(4 * n + 1):
        if tb + j * dth > np.pi / 2:
            break
        th = tb + j * dth
        w = wave_RS(min(th, np.pi / 2), params)
        r = -params.p1 * np.sin(th)
        rows.append((th, r, w.p, w.R, w.S))
        if r + w.p < eps_stop:
            break
    a = np.array(rows)
    return BoundaryStrand(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4])


# --------------------------------------------------------------------------
# interior nodes

def _sources(r, p, R, S):
    li = np.asarray(lambda_inv_polar(r, p))
    Q = np.asarray(q_polar(r, p))
    return li, Q * (S - R) * R, Q * (R - S) * S


def _massau(a, b, tol=1e-12, max_iter=50, relax=0.5, level=0.0):
    """Vectorized predictor-corrector for new nodes from parent arrays.

    ``a`` and ``b`` are 5-tuples ``(theta, r, p, R, S)`` of equal-length arrays:
    ``a`` the negative-family parent, ``b`` the positive-family parent.
    The corrector is a relaxed fixed-point sweep; nodes still unsettled after
    ``max_iter`` sweeps get up to ``max_iter`` Newton steps on the same
    discrete equations.  Returns the 5 arrays of the new nodes, a mask of
    dropped nodes (values NaN) and the number of sweeps.  A node is dropped
    only when it has no acceptable root and its last iterate lies below
    ``r + p = level``; otherwise non-convergence raises.
    """
    tha, ra, pa, Ra, Sa = (np.atleast_1d(np.asarray(x, dtype=float)) for x in a)
    thb, rb, pb, Rb, Sb = (np.atleast_1d(np.asarray(x, dtype=float)) for x in b)
    la, Fa, _ = _sources(ra, pa, Ra, Sa)
    lb, _, Gb = _sources(rb, pb, Rb, Sb)

    def position(La, Lb, idx):
        den = La + Lb
        same = den == 0
        den = np.where(same, 1.0, den)
        th = np.where(same, 0.5 * (tha[idx] + thb[idx]),
                      (ra[idx] - rb[idx] + Lb * thb[idx] + La * tha[idx]) / den)
        return th, rb[idx] + Lb * (th - thb[idx])

    def corrector(x, idx):
        lam, F, G = _sources(x[1], x[2], x[3], x[4])
        th, r = position(0.5 * (la[idx] + lam), 0.5 * (lb[idx] + lam), idx)
        da, db = th - tha[idx], th - thb[idx]
        R = Ra[idx] + 0.5 * (Fa[idx] + F) * da
        S = Sb[idx] + 0.5 * (Gb[idx] + G) * db
        p = 0.5 * (pb[idx] + 0.5 * (Rb[idx] + R) * db + pa[idx] + 0.5 * (Sa[idx] + S) * da)
        return np.array([th, r, p, R, S])

    every = np.arange(tha.size)
    th, r = position(la, lb, every)
    x = np.array([th, r, 0.5 * (pb + Rb * (th - thb) + pa + Sa * (th - tha)),
                  Ra + Fa * (th - tha), Sb + Gb * (th - thb)])
    dead = np.zeros(th.shape, dtype=bool)
    pending = np.ones(th.shape, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        dead |= x[1] + x[2] <= 0
        pending &= ~dead
        idx = np.nonzero(pending)[0]
        if idx.size == 0:
            break
        step = corrector(x[:, idx], idx) - x[:, idx]
        x[:, idx] += relax * step
        done = np.max(np.abs(step) / np.maximum(1.0, np.abs(x[:, idx])), axis=0) < tol
        pending[idx[done]] = False
    if np.any(pending):
        idx = np.nonzero(pending)[0]
        x[:, idx], ok = _newton_polish(x[:, idx], lambda y, c: corrector(y, idx[c]), tol, max_iter)
        unsettled = idx[~ok]
        if np.any(x[1, unsettled] + x[2, unsettled] >= level):
            raise ConvergenceError(f"Massau corrector did not converge in {max_iter} iterations")
        dead[unsettled] = True
    x[:, dead] = np.nan
    return tuple(x), dead, it


def _newton_polish(x, corrector, tol, max_iter):
    """Newton on ``corrector(x, cols) - x = 0`` column by column, keeping ``r + p > 0``."""
    x = x.copy()
    ok = np.zeros(x.shape[1], dtype=bool)
    for _ in range(max_iter):
        act = ~ok
        if not np.any(act):
            break
        cols = np.nonzero(act)[0]
        y = x[:, cols]
        try:
            res = corrector(y, cols) - y
            jac = np.empty((y.shape[1], 5, 5))
            for k in range(5):
                h = 1e-7 * np.maximum(1.0, np.abs(y[k]))
                yk = y.copy()
                yk[k] += h
                jac[:, :, k] = ((corrector(yk, cols) - yk) - res).T / h[:, None]
            dx = np.linalg.solve(jac, -res.T[..., None])[..., 0].T
        except (SonicPatchError, np.linalg.LinAlgError):
            break
        lam = np.ones(y.shape[1])
        for _ in range(40):
            bad = y[1] + lam * dx[1] + y[2] + lam * dx[2] <= 0
            if not np.any(bad):
                break
            lam = np.where(bad, 0.5 * lam, lam)
        y = y + lam * dx
        x[:, cols] = y
        conv = (np.max(np.abs(dx) / np.maximum(1.0, np.abs(y)), axis=0) < tol) & (lam == 1.0)
        ok[cols[conv]] = True
    return x, ok


def interior_node(a: CharNode, b: CharNode, tol=1e-12, max_iter=50, relax=0.5) -> CharNode:
    """New mesh node from its negative-family parent ``a`` and positive-family parent ``b``.

    Position from the trapezoidal intersection of ``dr/dtheta = +lam_inv``
    (through ``b``) and ``dr/dtheta = -lam_inv`` (through ``a``); ``R`` is
    carried along the negative characteristic from ``a``, ``S`` along the
    positive one from ``b``, and ``p`` is the mean of its two characteristic
    estimates (``dp = R dtheta`` along +, ``dp = S dtheta`` along -).
    """
    pa = (a.theta, a.r, a.state.p, a.state.R, a.state.S)
    pb = (b.theta, b.r, b.state.p, b.state.R, b.state.S)
    try:
        (th, r, p, R, S), dead, _ = _massau(pa, pb, tol, max_iter, relax)
    except ConvergenceError as exc:
        raise MeshError(str(exc), index=(b.i, a.j)) from exc
    if dead[0]:
        raise MeshError("node lies beyond the sonic line", index=(b.i, a.j))
    return CharNode(b.i, a.j, float(th[0]), float(r[0]),
                    StateW(float(p[0]), float(R[0]), float(S[0])),
                    parent_minus=(a.i, a.j), parent_plus=(b.i, b.j))


def _signed_area(c, b, n, a):
    pts = [c, b, n, a]
    s = 0.0
    for k in range(4):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % 4]
        s = s + x0 * y1 - x1 * y0
    return 0.5 * s


@dataclass
class CharacteristicMesh:
    theta: np.ndarray
    r: np.ndarray
    p: np.ndarray
    R: np.ndarray
    S: np.ndarray
    terminal: np.ndarray
    t0: float
    params: WaveParams
    iterations: int = 0
    discarded: int = 0

    @property
    def exists(self):
        return np.isfinite(self.theta)

    @property
    def active(self):
        return self.exists & ~self.terminal

    @property
    def t(self):
        with np.errstate(invalid="ignore"):
            return np.sqrt(np.clip(self.r + self.p, 0, None))

    @property
    def shape(self):
        return self.theta.shape

    def node(self, i, j) -> CharNode:
        if not self.exists[i, j]:
            raise KeyError((i, j))
        pm = (i - 1, j) if i > 0 else None
        pp = (i, j - 1) if j > 0 else None
        if i == 0:
            pm = None
        if j == 0:
            pp = None
        return CharNode(i, j, float(self.theta[i, j]), float(self.r[i, j]),
                        StateW(float(self.p[i, j]), float(self.R[i, j]), float(self.S[i, j])),
                        parent_minus=pm, parent_plus=pp)

    def count(self):
        return int(np.count_nonzero(self.exists))

    def rows(self):
        xi = self.r * np.cos(self.theta)
        eta = self.r * np.sin(self.theta)
        t = self.t
        for i, j in zip(*np.nonzero(self.exists)):
            yield (int(i), int(j), self.theta[i, j], self.r[i, j], xi[i, j], eta[i, j],
                   self.p[i, j], self.R[i, j], self.S[i, j], t[i, j])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "theta", "r", "xi", "eta", "p", "R", "S", "t"])
            for row in self.rows():
                w.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])

    def level_crossings(self, level=None, order=3):
        """Points where mesh strands cross ``r + p = level^2`` (default the handoff level).

        For every strand edge joining an active node to a node below the
        level, ``theta, r, R, S`` are interpolated as functions of
        ``t = sqrt(r + p)`` through that edge and up to ``order - 1`` more
        nodes back along the strand (Lagrange, evaluated at the level).
        The data are smooth in ``t`` but only Holder-1/2 in ``r + p``.
        Returns a dict of arrays sorted by ``r``.
        """
        lev = self.t0 if level is None else level
        lev2 = lev * lev
        g = self.t - lev
        ex = self.exists
        out = []
        ni, nj = self.shape
        for (di, dj) in ((1, 0), (0, 1)):
            src = self.active[: ni - di, : nj - dj]
            dst = ex[di:, dj:]
            m = src & dst & (g[: ni - di, : nj - dj] >= 0) & (g[di:, dj:] < 0)
            for i, j in zip(*np.nonzero(m)):
                idx = [(i + di, j + dj), (i, j)]
                for k in range(1, order):
                    a, b = i - k * di, j - k * dj
                    if a < 0 or b < 0 or not ex[a, b]:
                        break
                    idx.append((a, b))
                gs = np.array([g[q] for q in idx])
                if len(gs) > 2 and not np.all(np.diff(gs) > 0):
                    idx, gs = idx[:2], gs[:2]
                w = _lagrange_weights(gs, 0.0)
                out.append([sum(wk * arr[q] for wk, q in zip(w, idx))
                            for arr in (self.theta, self.r, self.R, self.S)])
        if not out:
            raise DomainError(f"no mesh strand crosses r + p = {lev2!r}")
        a = np.array(out)
        a = a[np.argsort(a[:, 1], kind="stable")]
        keep = np.concatenate([[True], np.diff(a[:, 1]) > 1e-12])
        a = a[keep]
        return {"theta": a[:, 0], "r": a[:, 1], "R": a[:, 2], "S": a[:, 3]}


def _lagrange_weights(nodes, x):
    w = np.ones(len(nodes))
    for k, xk in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != k:
                w[k] *= (x - xm) / (xk - xm)
    return w


def build_mesh(params: WaveParams, profile: GammaMinusProfile, n_plus: int, n_minus: int,
               t0: float, tol=1e-12, max_iter=50, relax=0.5, bc_substeps=16) -> CharacteristicMesh:
    """Fill ABC down to the handoff level ``r + p = t0^2``.

    Each boundary gets ``n`` seed intervals over its arc above the level
    (plus the seeds needed to step just below it), so meshes with ``n`` and
    ``2n`` share every other seed and their nodes ``(i, j)`` and ``(2i, 2j)``
    sit on the same pair of characteristics.
    """
    if n_plus < 1 or n_minus < 1:
        raise DomainError("mesh sizes must be positive")
    eps = t0 * t0
    tb = params.theta_B
    B = wave_RS(tb, params)
    rB = -params.p1 * np.sin(tb)
    if rB + B.p <= eps:
        raise DomainError(f"handoff level t0={t0} lies above B (r+p at B is {rB + B.p})")
    B = StateW(B.p, B.R, float(profile(tb)))
    # seed spacing: n intervals over the part of each boundary above the level
    ab = gamma_plus_seeds(params, n_plus, eps, dtheta=(ab_level_angle(params, t0) - tb) / n_plus)
    bc = gamma_minus_generate(B, tb, rB, profile, 4 * n_minus,
                              (bc_level_angle(B, tb, rB, profile, t0) - tb) / n_minus, eps,
                              substeps=bc_substeps)
    ni, nj = len(bc), len(ab)
    arrs = {k: np.full((ni, nj), np.nan) for k in ("theta", "r", "p", "R", "S")}
    for k in arrs:
        arrs[k][0, :] = getattr(ab, k)
        arrs[k][:, 0] = getattr(bc, k)
    # B itself: AB supplies R, BC supplies S
    arrs["S"][0, 0] = bc.S[0]
    theta, r, p, R, S = (arrs[k] for k in ("theta", "r", "p", "R", "S"))
    terminal = np.zeros((ni, nj), dtype=bool)
    terminal[0, :] = (r[0, :] + p[0, :]) < eps
    terminal[:, 0] = (r[:, 0] + p[:, 0]) < eps
    total_it = 0
    discarded = 0
    for k in range(2, ni + nj - 1):
        ii = np.arange(max(1, k - nj + 1), min(ni - 1, k - 1) + 1)
        if ii.size == 0:
            continue
        jj = k - ii
        ok = (np.isfinite(theta[ii - 1, jj]) & ~terminal[ii - 1, jj]
              & np.isfinite(theta[ii, jj - 1]) & ~terminal[ii, jj - 1])
        if not np.any(ok):
            continue
        ii, jj = ii[ok], jj[ok]
        a = (theta[ii - 1, jj], r[ii - 1, jj], p[ii - 1, jj], R[ii - 1, jj], S[ii - 1, jj])
        b = (theta[ii, jj - 1], r[ii, jj - 1], p[ii, jj - 1], R[ii, jj - 1], S[ii, jj - 1])
        try:
            (thn, rn, pn, Rn, Sn), dead, it = _massau(a, b, tol, max_iter, relax, level=eps)
        except ConvergenceError as exc:
            raise MeshError(str(exc), index=(int(ii[0]), int(jj[0])))
        total_it += it
        # partial cells at the sonic line are dropped, not interpolated
        discarded += int(np.count_nonzero(dead))
        live = ~dead
        ii, jj, thn, rn, pn, Rn, Sn = (x[live] for x in (ii, jj, thn, rn, pn, Rn, Sn))
        if ii.size == 0:
            continue
        area = _signed_area((theta[ii - 1, jj - 1], r[ii - 1, jj - 1]),
                            (theta[ii, jj - 1], r[ii, jj - 1]), (thn, rn),
                            (theta[ii - 1, jj], r[ii - 1, jj]))
        if np.any(area <= 0):
            bad = int(np.argmax(area <= 0))
            raise MeshError("mesh fold-over (nonpositive cell area)", index=(int(ii[bad]), int(jj[bad])))
        theta[ii, jj], r[ii, jj], p[ii, jj], R[ii, jj], S[ii, jj] = thn, rn, pn, Rn, Sn
        terminal[ii, jj] = (rn + pn) < eps
    return CharacteristicMesh(theta, r, p, R, S, terminal, t0, params, iterations=total_it,
                              discarded=discarded)


def solve(config) -> CharacteristicMesh:
    """Characteristic-mesh solution of the Goursat problem for ``config``."""
    params = config.wave_params()
    return build_mesh(params, config.profile(), config.mesh_n_plus, config.mesh_n_minus, config.t0,
                      tol=config.tol, max_iter=config.max_iter, relax=config.relax)
