"""Stage functions behind the command line: trace, solve, march, diagnose, verify.

Each stage recomputes what it depends on (everything is deterministic), so
every subcommand can run on its own.  Artifacts are written with
round-trip float precision; the manifest lists their SHA-256 digests next to
the config hash.  The wall-clock time goes to a separate file so that
identical configs give byte-identical manifests.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import goursat, soniclayer, verify
from .config import SolverConfig
from .wave import PlanarWave, trace_AB

ARTIFACTS = {
    "trace": ["trace.csv"],
    "solve": ["mesh.csv"],
    "march": ["field.csv"],
    "diagnose": ["diagnostics.json"],
    "verify": ["verify.json", "verify.csv"],
}
STAGES = ("trace", "solve", "march", "diagnose", "verify")

# where the identities are sampled on the computed patch
RT_T_FRACTION = 0.5
POLAR_T_FRACTION = 0.8
POLAR_H_SCALE = 0.5
PATCH_T_END_FRACTION = 0.25
N_PATCH_POINTS = 5
N_WAVE_POINTS = 100
EDGE = 0.15


@dataclass
class Run:
    """Lazily computed pipeline products for one config."""

    config: SolverConfig
    timings: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict)

    def _get(self, key, fn):
        if key not in self._cache:
            t = time.perf_counter()
            self._cache[key] = fn()
            self.timings[key] = time.perf_counter() - t
        return self._cache[key]

    @property
    def trace(self):
        return self._get("trace", lambda: trace_AB(self.config.wave_params()))

    @property
    def mesh(self):
        return self._get("mesh", lambda: goursat.solve(self.config))

    @property
    def grid(self):
        cfg = self.config
        rc, ra = goursat.level_span(cfg.wave_params(), cfg.profile(), cfg.t0)
        return soniclayer.grid_window(rc, ra, cfg.r_margin, cfg.dr, cfg.refine)

    @property
    def field(self):
        def go():
            cfg = self.config
            top = soniclayer.handoff(self.mesh, self.grid)
            stops = soniclayer.stop_levels(cfg.t0, cfg.t_min, cfg.eps_schedule())
            return soniclayer.rt_march(top, cfg.t_min, cfg.march_ratio, cfg.cfl, stops)
        return self._get("field", go)

    @property
    def diagnostics(self):
        cfg = self.config
        return self._get("diagnostics", lambda: soniclayer.diagnostics(
            self.field, cfg.delta, cfg.deltas, cfg.t_min, cfg.eps_schedule()))

    @property
    def patch(self):
        cfg = self.config
        return self._get("patch", lambda: verify.SmoothPatch.from_crossings(
            self.mesh.level_crossings(), cfg.t0, PATCH_T_END_FRACTION * cfg.t0,
            degree=cfg.smooth_degree))


# --------------------------------------------------------------------------
# acceptance-style checks on a single run


def boundary_sup(mesh) -> float:
    vals = np.concatenate([mesh.R[0, :], mesh.S[0, :], mesh.R[:, 0], mesh.S[:, 0]])
    return float(np.max(np.abs(vals[np.isfinite(vals)])))


def sign_check(mesh, fld) -> dict:
    ok_m = mesh.exists
    ok_f = np.isfinite(fld.R)
    allv = np.concatenate([mesh.R[ok_m], mesh.S[ok_m], fld.R[ok_f], fld.S[ok_f]])
    bsup = boundary_sup(mesh)
    amax = float(np.max(np.abs(allv)))
    return {"max_R_S": float(np.max(allv)), "nonpositive": bool(np.all(allv <= 0)),
            "abs_max": amax, "boundary_sup": bsup, "bounded": bool(amax <= 2 * bsup)}


def strictly_decreasing(seq) -> bool:
    return all(b < a for a, b in zip(seq, seq[1:]))


def strict_checks(cfg: SolverConfig, run: Run) -> dict:
    """Pass/fail of every threshold that one run can decide on its own."""
    d = run.diagnostics
    signs = sign_check(run.mesh, run.field)
    cauchy = d.cauchy
    checks = {
        "rate_exponent": (cfg.rate_lo <= d.rate.exponent <= cfg.rate_hi,
                          f"{d.rate.exponent!r} in [{cfg.rate_lo!r}, {cfg.rate_hi!r}]"),
        "sonic_matching": (d.limits.worst() <= cfg.match_tol * abs(cfg.p1),
                           f"{d.limits.worst()!r} <= {cfg.match_tol * abs(cfg.p1)!r}"),
        "signs": (signs["nonpositive"], f"max(R, S) = {signs['max_R_S']!r}"),
        "bounded": (signs["bounded"],
                    f"{signs['abs_max']!r} <= 2 * {signs['boundary_sup']!r}"),
        "cauchy_first_4": (len(cauchy) >= 4 and strictly_decreasing(cauchy[:4]),
                           ", ".join(repr(c) for c in cauchy[:4])),
        "slope_finite": (bool(np.isfinite(d.slope_sup)), repr(d.slope_sup)),
        "cone": (d.cone["within_characteristic_bound"],
                 f"removed {d.cone['removed_left']} left, {d.cone['removed_right']} right"),
    }
    return {k: {"pass": bool(v[0]), "detail": v[1]} for k, v in checks.items()}


def diagnostics_doc(cfg: SolverConfig, run: Run) -> dict:
    d = run.diagnostics
    doc = d.as_dict()
    doc["signs_mesh_and_field"] = sign_check(run.mesh, run.field)
    doc["cauchy_decreasing_all"] = strictly_decreasing(d.cauchy)
    doc["mesh"] = {"shape": list(run.mesh.shape), "nodes": run.mesh.count(),
                   "discarded": run.mesh.discarded, "iterations": run.mesh.iterations}
    doc["levels"] = int(run.field.nlevels)
    doc["checks"] = strict_checks(cfg, run)
    return doc


# --------------------------------------------------------------------------
# identity certification


def wave_points(cfg: SolverConfig, n=N_WAVE_POINTS):
    """Deterministic sample of polar points inside the wave region of ``ABC``."""
    params = cfg.wave_params()
    rng = np.random.default_rng(12345)
    eta = rng.uniform(-params.p4 + 0.05, -params.p1 * 0.95, n)
    s = rng.uniform(np.sin(params.theta_B) + 0.05, 0.95, n)
    r = eta / s
    return r, np.arcsin(s)


def verify_reports(cfg: SolverConfig, run: Run):
    """All identity reports plus the mutation canaries."""
    hs = cfg.fd_steps()
    wave = PlanarWave(cfg.wave_params())
    r, th = wave_points(cfg)
    hw = hs[:3]
    reports = [
        verify._report("polar_pde", "wave", {"r": r, "theta": th}, hw,
                       [verify.residual_polar(wave.p_polar, r, th, h) for h in hw],
                       extrapolate=True),
        verify._report("cartesian_pde", "wave", {"r": r, "theta": th}, hw,
                       [verify.residual_cartesian(wave.p_cart, r * np.cos(th), r * np.sin(th), h)
                        for h in hw], extrapolate=True),
    ]
    sp = run.patch
    t_rt = RT_T_FRACTION * cfg.t0
    a, b = sp.span(t_rt)
    rr = np.linspace(a + EDGE, b - EDGE, N_PATCH_POINTS)
    base = verify.rt_reports(sp, "patch", rr, t_rt, hs, cfg.delta)
    reports += base
    t_p = POLAR_T_FRACTION * cfg.t0
    a, b = sp.span(t_p)
    rp = np.linspace(a + EDGE, b - EDGE, N_PATCH_POINTS)
    reports += verify.polar_reports(sp, "patch", rp, sp.theta_rt(rp, t_p),
                                    [POLAR_H_SCALE * h for h in hs])
    cans = verify.canaries(sp, "patch", rr, t_rt, hs, cfg.delta, base)
    return reports, cans


# --------------------------------------------------------------------------
# writing


def _sha(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(verify._clean(doc), fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def execute(command: str, cfg: SolverConfig, out: str, strict: bool = False) -> dict:
    """Run one subcommand (or ``all``), write its artifacts and the manifest.

    Returns ``{"artifacts": [...], "violations": [...], "run": Run}``.
    """
    stages = STAGES if command == "all" else (command,)
    os.makedirs(out, exist_ok=True)
    run = Run(cfg)
    written = []
    violations = []
    for st in stages:
        paths = [os.path.join(out, name) for name in ARTIFACTS[st]]
        if st == "trace":
            run.trace.to_csv(paths[0])
        elif st == "solve":
            run.mesh.to_csv(paths[0])
        elif st == "march":
            run.field.to_csv(paths[0])
        elif st == "diagnose":
            doc = diagnostics_doc(cfg, run)
            write_json(paths[0], doc)
            violations += [k for k, v in doc["checks"].items() if not v["pass"]]
        elif st == "verify":
            reports, cans = verify_reports(cfg, run)
            summary = {
                "all_converge": all(r.converges() for r in reports if r.provider == "patch"),
                "all_canaries_detected": all(c.detected for c in cans),
                "wave_polar_extrapolated": reports[0].extrapolated,
            }
            verify.write_json(paths[0], reports, cans, extra={"summary": summary})
            verify.write_csv(paths[1], reports)
        written += paths
    write_manifest(out, command, cfg, written)
    return {"artifacts": written, "violations": violations if strict else [], "run": run,
            "all_violations": violations}


def write_manifest(out, command, cfg: SolverConfig, paths):
    lines = [f"command = {command}", f"config_hash = {cfg.hash()}", ""]
    for p in paths:
        lines.append(f"{_sha(p)}  {os.path.basename(p)}")
    lines += ["", "# canonical config", cfg.canonical().rstrip("\n")]
    with open(os.path.join(out, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out, "timestamp.txt"), "w") as fh:
        fh.write(datetime.datetime.now(datetime.timezone.utc).isoformat() + "\n")
