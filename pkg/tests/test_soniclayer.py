from __future__ import annotations

import csv

import numpy as np
import pytest

import oracles
from sonicpatch import soniclayer as sl
from sonicpatch.errors import CFLError, DomainError
from sonicpatch.goursat import GammaMinusProfile, build_mesh
from sonicpatch.verify import ConstantState
from sonicpatch.wave import PlanarWave, WaveParams

P = WaveParams(-2.0, -1.0)
T0 = 0.2


def wave_field(dr, lo=1.2, hi=1.8, t0=T0):
    r = np.arange(round(lo / dr), round(hi / dr) + 1) * dr
    R, S, th = oracles.wave_rt(r, t0)
    return sl.field_from_profiles(r, t0, R, S, th)


def wave_march(k, t_min=2e-3, stops=(0.05, 0.02)):
    return sl.rt_march(wave_field(0.01 / k), t_min, ratio=1 - 0.1 / k, cfl=0.9,
                       stops=stops)


def wave_error(fld, t):
    k = fld.level_index(t)
    w = fld.window(k)
    R, _, th = oracles.wave_rt(fld.r[w], t)
    return (float(np.max(np.abs(fld.R[k, w] - R))), float(np.max(np.abs(fld.S[k, w]))),
            float(np.max(np.abs(fld.theta[k, w] - th))))


def test_grid_windows_nest():
    coarse = sl.grid_window(1.03, 1.97, 0.06, 0.005, 1)
    fine = sl.grid_window(1.03, 1.97, 0.06, 0.005, 4)
    assert coarse[0] >= 1.09 - 1e-12 and coarse[-1] <= 1.91 + 1e-12
    assert np.allclose(fine[::4], coarse, rtol=0, atol=1e-14)
    with pytest.raises(DomainError):
        sl.grid_window(1.0, 1.1, 0.04, 0.01)


def test_handoff_of_wave_mesh_converges():
    errs = []
    prof = GammaMinusProfile(0.0, P.theta_B, np.pi / 2)
    grid = sl.grid_window(1.05, 1.95, 0.06, 0.005)
    for n in (8, 16, 32):
        top = sl.handoff(build_mesh(P, prof, n, n, T0), grid)
        R, S, th = oracles.wave_rt(grid, T0)
        errs.append(np.max(np.abs(top.R[0] - R)))
        assert np.max(np.abs(top.S[0])) < 1e-12
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_handoff_rejects_uncovered_grid():
    prof = GammaMinusProfile(0.0, P.theta_B, np.pi / 2)
    m = build_mesh(P, prof, 8, 8, T0)
    with pytest.raises(DomainError):
        sl.handoff(m, np.linspace(0.5, 1.5, 11))


def test_constant_state_is_preserved():
    c = ConstantState()
    r = np.linspace(1.2, 1.8, 61)
    th0 = c.theta_rt(r, T0)
    top = sl.field_from_profiles(r, T0, np.full_like(r, c.c), np.full_like(r, c.c), th0)
    fld = sl.rt_march(top, 2e-3, stops=(0.02,))
    ok = np.isfinite(fld.R)
    assert np.max(np.abs(fld.R[ok] - c.c)) < 1e-13
    assert np.max(np.abs(fld.S[ok] - c.c)) < 1e-13
    k = fld.level_index(0.02)
    w = fld.window(k)
    assert np.max(np.abs(fld.theta[k, w] - c.theta_rt(fld.r[w], 0.02))) < 1e-13


def test_wave_march_second_order():
    errs = [wave_error(wave_march(k), 0.02) for k in (1, 2, 4)]
    for (a, sa, ta), (b, sb, tb) in zip(errs, errs[1:]):
        assert a / b == pytest.approx(4.0, rel=0.25)
        assert sa == 0.0 and sb == 0.0
    assert errs[-1][0] < 1e-4
    assert errs[-1][2] < 1e-4


def test_wave_march_lands_on_stops():
    fld = wave_march(1)
    for t in (0.05, 0.02, 2e-3):
        fld.level_index(t)
    assert fld.t[-1] == 2e-3
    assert np.all(np.diff(fld.t) < 0)


def test_march_cfl_violation():
    with pytest.raises(CFLError):
        sl.rt_march(wave_field(0.01), 0.01, schedule=[0.01])


def test_march_argument_checks():
    with pytest.raises(DomainError):
        sl.rt_march(wave_field(0.01), 0.3)
    with pytest.raises(DomainError):
        sl.rt_march(wave_field(0.01), 0.01, schedule=[0.15, 0.16])


def test_march_window_can_close():
    r = np.arange(5) * 0.001 + 1.5
    R, S, th = oracles.wave_rt(r, 0.2)
    top = sl.field_from_profiles(r, 0.2, R, S, th)
    with pytest.raises(DomainError, match="window closed"):
        sl.rt_march(top, 1e-3)


def test_cone_bookkeeping():
    fld = wave_march(1)
    bound = np.ceil(np.round(fld.drift, 12)).astype(int)
    assert np.all(fld.removed <= bound[:, None])
    assert np.all(np.diff(fld.lo) >= 0) and np.all(np.diff(fld.hi) <= 0)


def test_sonic_trace_on_wave():
    eps = [0.04, 0.0025, 0.0004]
    errs = []
    for k in (1, 2):
        fld = wave_march(k, stops=[np.sqrt(e) for e in eps])
        samples = sl.sonic_trace(fld, eps)
        assert len({s.eps for s in samples}) == 3
        for s in samples:
            assert s.theta_eps == pytest.approx(oracles.wave_level_theta(s.r, s.eps), abs=1e-4)
        errs.append(max(abs(s.dtheta_eps / oracles.wave_level_slope(s.r, s.eps) - 1)
                        for s in samples))
    # 1 + p_r cancels to O(t^2), so relative slope errors grow like 1/t^2
    assert errs[1] < 1e-2
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)


def test_sonic_trace_needs_stored_level():
    fld = wave_march(1)
    with pytest.raises(DomainError, match="not bracketed"):
        sl.sonic_trace(fld, [0.001])


def test_sonic_trace_exact_matches_closed_form():
    r = np.array([1.3, 1.5, 1.7])
    samples = sl.sonic_trace_exact(PlanarWave(P), r, [0.01, 0.0001])
    for s in samples:
        assert s.theta_eps == pytest.approx(oracles.wave_level_theta(s.r, s.eps), abs=1e-14)
        assert s.dtheta_eps == pytest.approx(oracles.wave_level_slope(s.r, s.eps), rel=1e-9)


def test_level_slope_rejects_sonic_line():
    with pytest.raises(DomainError):
        sl.level_slope(1.5, 0.0, -1.0, -1.0)


def test_cauchy_sequence_on_wave_is_decreasing():
    eps = [0.04 * 0.5 ** k for k in range(6)]
    samples = sl.sonic_trace_exact(PlanarWave(P), np.linspace(1.3, 1.7, 9), eps)
    seq = sl.cauchy_sequence(samples)
    assert len(seq) == 5
    assert all(b < a for a, b in zip(seq, seq[1:]))


def test_poly_at_zero_is_exact_for_quadratics():
    x = [0.1, 0.2, 0.4]
    y = [np.array([3 + 2 * v - v * v]) for v in x]
    assert sl._poly_at_zero(x, y)[0] == pytest.approx(3.0, abs=1e-14)


def test_rate_fit_on_wave():
    fld = wave_march(2)
    fit = sl.rate_fit(fld, 0.02, 0.05)
    assert fit.exponent == pytest.approx(1.0, abs=0.01)
    # |R - S|/t tends to 2 sqrt(2 r) on the wave; sup over the window is at its right end
    r_max = fld.r[fld.common_window()][-1]
    assert fit.constant == pytest.approx(2 * np.sqrt(2 * r_max), rel=0.02)
    assert not fit.degenerate and fit.decades == pytest.approx(np.log10(2.5))


def test_rate_fit_degenerate_on_constant_state():
    fit = sl.fit_rate(np.geomspace(1e-3, 1e-1, 10), np.zeros(10))
    assert fit.degenerate and np.isnan(fit.exponent)
    with pytest.raises(DomainError):
        sl.fit_rate([0.1, 0.2], [1.0, 2.0])


def test_level_sups_on_constant_state():
    r = np.linspace(1.2, 1.8, 61)
    top = sl.field_from_profiles(r, T0, -0.8 + 0 * r, -0.8 + 0 * r, 0.5 + 0 * r)
    fld = sl.rt_march(top, 2e-3)
    sups = sl.level_sups(fld, (1.5,))
    assert np.max(sups["V_over_t"]) < 1e-11 and np.max(sups["R_minus_S"]) < 1e-13
    assert np.max(sups["tdRr_1.5"]) < 1e-11


def test_sonic_limits_on_wave():
    t_min = 2e-3
    stops = sl.stop_levels(T0, t_min)
    fld = sl.rt_march(wave_field(0.005), t_min, ratio=0.95, stops=stops)
    lim = sl.sonic_limits(fld, t_min)
    # R and S both vanish on the sonic line for the wave
    assert np.max(np.abs(lim.R_t)) < 1e-6
    assert np.all(lim.S_t == 0) and np.all(lim.S_t2 == 0)
    # R is odd in t here, so the t^2 ladder keeps an O(t_min) bias
    assert np.all(np.abs(lim.R_t2) <= 2 * np.sqrt(2 * lim.r) * t_min)
    assert np.max(np.abs(np.sin(lim.theta) - 1)) < 1e-5


def test_reference_diagnostics(reference_run):
    d = reference_run.diagnostics
    assert d.cone["within_characteristic_bound"]
    assert 0.9 <= d.rate.exponent <= 1.1
    assert d.signs["R_max"] <= 0 and d.signs["S_max"] <= 0
    assert len(d.cauchy) >= 4
    doc = d.as_dict()
    assert set(doc["suprema"]) == {"V_over_t", "tdRr_1.1", "tdSr_1.1", "tdRr_1.5", "tdSr_1.5",
                                   "tdRr_1.9", "tdSr_1.9"}
    assert doc["monitor_constants"]["delta"] == 1.5


def test_diagnostics_needs_two_decades():
    fld = wave_march(1, t_min=0.01, stops=())
    with pytest.raises(DomainError):
        sl.diagnostics(fld, 1.5, (1.5,), 0.01, [0.04])


def test_field_csv(tmp_path):
    fld = wave_march(1, t_min=0.05, stops=())
    path = tmp_path / "field.csv"
    fld.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "t", "p", "R", "S", "V_over_t", "Rr", "Sr"]
    n = sum(int(fld.hi[k] - fld.lo[k]) for k in range(fld.nlevels))
    assert len(rows) == n + 1


class _FlatMesh:
    """Stand-in mesh whose level crossings carry constant data."""

    t0 = T0

    def level_crossings(self):
        r = np.linspace(1.0, 2.0, 9)
        return {"r": r, "theta": 0.5 + 0 * r, "R": -0.8 + 0 * r, "S": -0.6 + 0 * r}


def test_handoff_of_constant_data_is_exact():
    grid = np.linspace(1.05, 1.95, 31)
    top = sl.handoff(_FlatMesh(), grid)
    assert np.all(top.R[0] == -0.8) and np.all(top.S[0] == -0.6)
    assert np.all(top.theta[0] == 0.5) and top.t[0] == T0


def test_sonic_trace_hits_stored_level_exactly():
    fld = wave_march(1)
    k = fld.level_index(0.05)
    cols = fld.common_window()
    samples = sl.sonic_trace(fld, [0.05 ** 2], cols)
    assert np.array_equal([s.theta_eps for s in samples], fld.theta[k, cols])
