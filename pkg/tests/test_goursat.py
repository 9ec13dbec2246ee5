from __future__ import annotations

import csv

import numpy as np
import pytest

import oracles
from sonicpatch.config import SolverConfig
from sonicpatch.core import StateW
from sonicpatch.errors import MeshError
from sonicpatch.goursat import (CharNode, GammaMinusProfile, build_mesh, gamma_minus_generate,
                                interior_node, level_span)
from sonicpatch.wave import WaveParams, wave_RS

P = WaveParams(-2.0, -1.0)
TB = P.theta_B
RB = 2 * np.sin(TB)


def _B(profile):
    w = wave_RS(TB, P)
    return StateW(w.p, w.R, float(profile(TB)))


def _wave_mesh(n, t0=0.2):
    return build_mesh(P, GammaMinusProfile(0.0, TB, np.pi / 2), n, n, t0)


def test_profile_endpoints():
    prof = GammaMinusProfile(1.0, TB, np.pi / 2)
    assert prof(TB) == 0.0
    assert prof(np.pi / 2) == pytest.approx(-1.0)
    assert prof.derivative(1.0) == pytest.approx(-1.0 / (np.pi / 2 - TB))


def test_bc_starts_at_B_and_matches_reference():
    prof = GammaMinusProfile(1.0, TB, np.pi / 2)
    bc = gamma_minus_generate(_B(prof), TB, RB, prof, 40, 0.01, eps_stop=0.04)
    assert bc.theta[0] == TB and bc.r[0] == RB
    assert bc.p[0] == pytest.approx(-1.0) and bc.R[0] == pytest.approx(-2.0)
    ref = oracles.bc_reference(RB, -1.0, -2.0, TB, prof, bc.theta)
    assert np.max(np.abs(bc.r - ref[0])) < 1e-9
    assert np.max(np.abs(bc.p - ref[1])) < 1e-9
    assert np.max(np.abs(bc.R - ref[2])) < 1e-8
    assert np.all(bc.R < 0) and np.all(bc.S <= 0)


def test_bc_with_zero_profile_follows_the_wave():
    prof = GammaMinusProfile(0.0, TB, np.pi / 2)
    bc = gamma_minus_generate(_B(prof), TB, RB, prof, 30, 0.01, eps_stop=0.04)
    # S = 0 keeps p = p4 and the curve on eta = -p4
    assert np.max(np.abs(bc.p + 1.0)) < 1e-15
    assert np.max(np.abs(bc.r * np.sin(bc.theta) - 1.0)) < 1e-10
    assert np.max(np.abs(bc.R + 2 * bc.r * np.cos(bc.theta))) < 1e-9


def test_zero_profile_mesh_is_the_wave():
    m = _wave_mesh(16)
    ex = m.exists
    th, r = m.theta[ex], m.r[ex]
    assert np.max(np.abs(m.p[ex] + r * np.sin(th))) < 1e-3
    assert np.max(np.abs(m.R[ex] + 2 * r * np.cos(th))) < 5e-3
    assert np.max(np.abs(m.S[ex])) < 1e-12


def test_zero_profile_mesh_converges_second_order():
    errs = []
    for n in (8, 16, 32):
        m = _wave_mesh(n)
        ex = m.exists
        errs.append(np.max(np.abs(m.R[ex] + 2 * m.r[ex] * np.cos(m.theta[ex]))))
    for a, b in zip(errs, errs[1:]):
        assert a / b > 3.0


def test_interior_node_local_error():
    errs = []
    for n in (8, 16, 32):
        m = _wave_mesh(n)
        a, b = m.node(0, 1), m.node(1, 0)
        # exact parents, so the error is the one-step error
        for nd in (a, b):
            nd.state = StateW(-nd.r * np.sin(nd.theta), -2 * nd.r * np.cos(nd.theta), 0.0)
        c = interior_node(a, b)
        assert (c.i, c.j) == (1, 1)
        assert c.parent_minus == (0, 1) and c.parent_plus == (1, 0)
        errs.append(abs(c.state.R + 2 * c.r * np.cos(c.theta)))
    for x, y in zip(errs, errs[1:]):
        assert x / y > 4.0


def test_interior_node_with_identical_parents():
    m = _wave_mesh(8)
    a = m.node(3, 3)
    c = interior_node(a, a)
    assert c.theta == pytest.approx(a.theta, abs=1e-14)
    assert c.r == pytest.approx(a.r, abs=1e-14)
    assert c.state.R == pytest.approx(a.state.R, abs=1e-14)


def test_interior_node_failure_reports_location():
    m = _wave_mesh(8)
    with pytest.raises(MeshError) as exc:
        interior_node(m.node(1, 2), m.node(2, 1), tol=1e-300, max_iter=1)
    assert "(i=" in str(exc.value)


def test_reference_mesh_signs_and_determinism():
    cfg = SolverConfig(n_plus=16, n_minus=16)
    a = build_mesh(cfg.wave_params(), cfg.profile(), 16, 16, cfg.t0)
    b = build_mesh(cfg.wave_params(), cfg.profile(), 16, 16, cfg.t0)
    ex = a.exists
    assert np.all(a.R[ex] <= 0) and np.all(a.S[ex] <= 0)
    for k in ("theta", "r", "p", "R", "S"):
        assert np.array_equal(getattr(a, k), getattr(b, k), equal_nan=True)


def test_boundaries_are_the_data():
    cfg = SolverConfig(n_plus=16, n_minus=16)
    m = build_mesh(cfg.wave_params(), cfg.profile(), 16, 16, cfg.t0)
    j = np.isfinite(m.theta[0])
    th = m.theta[0, j]
    assert np.allclose(m.R[0, j][1:], P.p1 * np.sin(2 * th[1:]), atol=1e-14)
    assert np.all(m.S[0, j][1:] == 0)
    prof = cfg.profile()
    i = np.isfinite(m.theta[:, 0])
    assert np.allclose(m.S[i, 0], prof(m.theta[i, 0]), atol=1e-14)


def test_level_crossings_on_the_wave():
    m = _wave_mesh(32)
    c = m.level_crossings()
    # on the level t = t0, the wave has sin(theta) = 1 - t0^2/r
    assert np.all(np.diff(c["r"]) > 0)
    assert np.max(np.abs(np.sin(c["theta"]) - (1 - 0.04 / c["r"]))) < 1e-4
    R_ex, _, _ = oracles.wave_rt(c["r"], 0.2)
    assert np.max(np.abs(c["R"] - R_ex)) < 1e-3
    rc, ra = level_span(P, GammaMinusProfile(0.0, TB, np.pi / 2), 0.2)
    assert c["r"][0] == pytest.approx(rc, abs=1e-3)
    assert c["r"][-1] == pytest.approx(ra, abs=1e-3)


def test_mesh_csv(tmp_path):
    m = _wave_mesh(8)
    path = tmp_path / "mesh.csv"
    m.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "j", "theta", "r", "xi", "eta", "p", "R", "S", "t"]
    assert len(rows) == m.count() + 1


def test_node_accessor():
    m = _wave_mesh(8)
    n = m.node(2, 3)
    assert isinstance(n, CharNode)
    assert n.parent_minus == (1, 3) and n.parent_plus == (2, 2)
    assert m.node(0, 0).parent_minus is None
