"""The ten acceptance criteria, shared by ``dislocbc verify`` and the test-suite.

Each criterion returns a :class:`CriterionResult` holding the measured value,
the threshold, the tables it produced and its wall time.  Only the
deterministic parts go into ``report.json``; wall times go to ``run_info.json``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cellsolve import CellProblem, assemble_predictor, minimize, strain_magnitude
from .greens import ContinuumGF, lattice_gf_oracle
from .harness import (
    DECAY_TARGET,
    ENERGY_TARGET,
    GEOMETRY_TARGET,
    StudyConfig,
    StudyReport,
    _jsonable,
    convergence_sweep,
    emit_reports,
    exponential_fit,
    fit_loglog,
    load_config,
    manufactured_table,
    ring_envelope,
    spectral_truncation,
    table_csv,
)
from .lattice import SiteIndex, hessian_apply, sites_in_ball
from .models import build_model
from .moments import CMPField, cutoff, truncated_moment
from .spectral import SpectralConfig, assemble_rhs, solve_predictor
from .svg import Series, plot_svg

__all__ = ["CRITERIA", "CriterionResult", "run_suite", "run_verify"]

SWEEP_RADII = [16, 24, 32, 48, 64]
R_DOM = 100.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    value: object
    threshold: str
    runtime: float = 0.0
    runtime_limit: float | None = None
    tables: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def runtime_ok(self) -> bool:
        return self.runtime_limit is None or self.runtime <= self.runtime_limit

    @property
    def ok(self) -> bool:
        return self.passed and self.runtime_ok

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        val = self.value
        if isinstance(val, float):
            val = f"{val:.4g}"
        elif isinstance(val, (list, tuple)):
            val = "[" + ", ".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in val) + "]"
        lim = f" (limit {self.runtime_limit:g} s)" if self.runtime_limit else ""
        return f"[{tag}] {self.number:2d} {self.name}: {val} vs {self.threshold}; {self.runtime:.1f} s{lim}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "runtime_limit": self.runtime_limit, "details": self.details,
                "tables": sorted(self.tables)}


# -- criteria -------------------------------------------------------------------------------


def criterion_gradient(seed: int = 0, trials: int = 20, R: float = 12.0, h: float = 1e-5) -> CriterionResult:
    """Analytic gradient against central differences of the energy on random compact correctors."""
    model = build_model()
    prob = CellProblem(model, 0, R, assemble_predictor(0, model.predictor))
    rng = np.random.default_rng(seed)
    dist = np.linalg.norm(model.spec.positions(prob.free_sites) - model.spec.core, axis=1)
    support = dist <= R / 2
    rows, worst = [], 0.0
    for trial in range(trials):
        w = np.where(support, rng.normal(scale=0.1, size=len(dist)), 0.0)
        _, g = prob.energy_grad(w)
        fd = np.empty_like(g)
        for j in range(len(w)):
            e = np.zeros_like(w)
            e[j] = h
            fd[j] = (prob.energy_grad(w + e, False)[0] - prob.energy_grad(w - e, False)[0]) / (2 * h)
        err = float(np.max(np.abs(g - fd)) / np.max(np.abs(fd)))
        rows.append([trial, err])
        worst = max(worst, err)
    return CriterionResult(1, "gradient consistency", worst < 1e-6, worst, "relative inf-error < 1e-6",
                           runtime_limit=10.0,
                           tables={"c01_gradient": {"header": ["trial", "relative_error"], "rows": rows}})


def criterion_green(R: float = 48.0) -> CriterionResult:
    """``H[g e_k](l) = e_k delta_{l,0}`` for the clamped lattice Green's function."""
    model = build_model()
    spec, pot = model.spec, model.potential
    rows, worst = [], 0.0
    for k in range(spec.components):
        sites, g = lattice_gf_oracle(spec, pot, k, R)
        ring, Hg = hessian_apply(spec, pot, sites, g)
        idx = SiteIndex(ring).lookup(sites)
        target = np.zeros((len(sites), spec.components))
        target[SiteIndex(sites).lookup(np.zeros((1, 2), dtype=int))[0], k] = 1.0
        err = float(np.max(np.abs(Hg[idx] - target)))
        rows.append([k, len(sites), err])
        worst = max(worst, err)
    return CriterionResult(2, "lattice Green identity", worst < 1e-8, worst, "max |H g - e_k delta| < 1e-8",
                           runtime_limit=60.0,
                           tables={"c02_green": {"header": ["k", "n_sites", "max_residual"], "rows": rows}})


def criterion_spectral() -> CriterionResult:
    rows = manufactured_table(range(4, 41, 4))
    fit = exponential_fit(rows)
    err32 = dict(rows)[32]
    ok = err32 < 1e-10 and fit["r2"] >= 0.98
    return CriterionResult(3, "spectral manufactured solution", ok, [err32, fit["r2"]],
                           "error(N_pde=32) < 1e-10 and log-linear R^2 >= 0.98", runtime_limit=30.0,
                           tables={"c03_spectral": {"header": ["N_pde", "max_error"], "rows": rows}},
                           details={"fit": fit})


def criterion_truncation() -> CriterionResult:
    model = build_model()
    rows = spectral_truncation(model, SpectralConfig(), [160.0], 40.0)
    change = rows[0][2]
    return CriterionResult(4, "predictor truncation", change < 0.01, change,
                           "relative change of u1 on B_40 (R_c 160 -> 320) < 0.01", runtime_limit=60.0,
                           tables={"c04_truncation": {"header": ["R_c", "R_c_doubled", "relative_change", "max_u1"],
                                                      "rows": rows}})


def _sweep():
    cfg = StudyConfig(load_config(overrides=[f"radii={json.dumps(SWEEP_RADII)}", f"reference_radius={R_DOM}"],
                                  study="geometry_convergence"))
    t0 = time.perf_counter()
    sw = convergence_sweep(cfg)
    sw["wall"] = time.perf_counter() - t0
    sw["ref_wall"] = sw["ref"]["timings"]["T_tot"] + sw["ref"]["timings"]["T_post"]
    return sw


def criterion_decay(sw) -> CriterionResult:
    lo, hi = 8.0, 33.0
    slopes, tables, fits = [], {}, {}
    for p in (0, 1):
        dist, mag = strain_magnitude(sw["ref"][f"p{p}"])
        rs, env = ring_envelope(dist, mag, lo, hi)
        fit = fit_loglog(rs, env)
        fits[f"p{p}"] = fit
        slopes.append(fit["slope"])
        tables[f"c05_envelope_p{p}"] = {"header": ["distance", "envelope"],
                                        "rows": [[a, b] for a, b in zip(rs, env)]}
    ok = all(abs(s - DECAY_TARGET[p][0]) <= DECAY_TARGET[p][1] for p, s in enumerate(slopes))
    return CriterionResult(5, "decay exponents", ok, slopes, "-2 +- 0.3 (p=0), -3 +- 0.3 (p=1) over [8, 33]",
                           runtime=sw["ref_wall"], runtime_limit=900.0, tables=tables, details={"fits": fits})


def _rows(sw, key):
    return {p: ([r["R"] for r in sw["rows"] if r["p"] == p], [r[key] for r in sw["rows"] if r["p"] == p])
            for p in (0, 1)}


def _sweep_table(sw):
    header = ["R", "p", "N_at", "geometry_error", "energy_error", "energy", "residual"]
    return {"header": header, "rows": [[r[h] for h in header] for r in sw["rows"]]}


def criterion_geometry(sw) -> CriterionResult:
    geo = _rows(sw, "geometry_error")
    fits = {f"p{p}": fit_loglog(*geo[p]) for p in (0, 1)}
    slopes = [fits["p0"]["slope"], fits["p1"]["slope"]]
    below = all(b < a for R, a, b in zip(geo[0][0], geo[0][1], geo[1][1]) if R >= 16)
    ok = below and all(abs(s - GEOMETRY_TARGET[p][0]) <= GEOMETRY_TARGET[p][1] for p, s in enumerate(slopes))
    return CriterionResult(6, "geometry-error rates", ok, slopes,
                           "-1 +- 0.25 (p=0), -2 +- 0.25 (p=1); p=1 below p=0", runtime=sw["wall"],
                           runtime_limit=1800.0, tables={"c06_c07_sweep": _sweep_table(sw)},
                           details={"fits": fits, "p1_below_p0": below})


def criterion_energy(sw) -> CriterionResult:
    en = _rows(sw, "energy_error")
    fits = {f"p{p}": fit_loglog(*en[p]) for p in (0, 1)}
    slopes = [fits["p0"]["slope"], fits["p1"]["slope"]]
    ratio = max(r["energy_error"] / (10 * r["geometry_error"] ** 2) for r in sw["rows"])
    ok = ratio <= 1 and all(abs(s - ENERGY_TARGET[p][0]) <= ENERGY_TARGET[p][1] for p, s in enumerate(slopes))
    return CriterionResult(7, "energy-error rates", ok, slopes + [ratio],
                           "-2 +- 0.5 (p=0), -4 +- 0.5 (p=1); energy_err <= 10 geometry_err^2", runtime=sw["wall"],
                           runtime_limit=1800.0, details={"fits": fits, "max_ratio": ratio})


def naive_moment(spec, potential, values: dict, i: int, R: float) -> np.ndarray:
    """Double loop over sites and bonds with exactly rounded sums (oracle for the moment)."""
    Kb = potential.bond_stiffness_at_zero()
    N = spec.components
    zero = np.zeros(N)
    get = lambda s: values.get(s, zero)
    sites = sites_in_ball(spec, 2 * R / 3)
    terms = {}
    for s in map(tuple, sites):
        x = spec.positions(np.array(s)) - spec.core
        eta = float(cutoff(np.hypot(*x), R))
        if eta == 0.0:
            continue
        f = np.zeros(N)
        for r, o in enumerate(spec.offsets):
            plus = (s[0] + o[0], s[1] + o[1])
            minus = (s[0] - o[0], s[1] - o[1])
            f += -Kb[r] @ (get(plus) - get(s)) + Kb[r] @ (get(s) - get(minus))
        w = f * eta
        mono = x if i == 1 else np.outer(x, x)
        for idx in np.ndindex(*((N,) + mono.shape)):
            terms.setdefault(idx, []).append(w[idx[0]] * mono[idx[1:]])
    shape = (N,) + (2,) * i
    out = np.zeros(shape)
    for idx, vals in terms.items():
        out[idx] = math.fsum(vals)
    return out


def criterion_moments(seed: int = 1) -> CriterionResult:
    model = build_model()
    spec, pot = model.spec, model.potential
    rng = np.random.default_rng(seed)
    R = 32.0
    rows, worst = [], 0.0
    for trial in range(3):
        sites = sites_in_ball(spec, 14.0)
        vals = rng.normal(size=(len(sites), spec.components))
        table = {tuple(s): v for s, v in zip(sites.tolist(), vals)}

        def field_fn(q, table=table):
            return np.array([table.get(tuple(s), np.zeros(spec.components)) for s in q.tolist()])

        for i in (1, 2):
            fast = truncated_moment(spec, pot, field_fn, i, R)
            slow = naive_moment(spec, pot, table, i, R)
            err = float(np.max(np.abs(fast - slow)) / max(1.0, float(np.max(np.abs(slow)))))
            rows.append([trial, i, err])
            worst = max(worst, err)
    planted = np.array([[0.3, -0.2]])
    gf = ContinuumGF(model.tensors.scalar_matrix())
    cmp = CMPField(gf, spec.core, planted)
    I1 = truncated_moment(spec, pot, lambda q: cmp(spec.positions(q)), 1, 64.0)
    rec = -I1
    rel = float(np.linalg.norm(rec - planted) / np.linalg.norm(planted))
    ok = worst < 1e-12 and rel < 0.05
    return CriterionResult(8, "moment oracle", ok, [worst, rel],
                           "|fast - naive| < 1e-12 (relative); planted a1 recovered within 5% at R=64",
                           tables={"c08_moments": {"header": ["trial", "i", "relative_difference"], "rows": rows}},
                           details={"planted": planted.tolist(), "recovered": rec.tolist()})


def criterion_degenerate(R: float = 32.0) -> CriterionResult:
    """Even potential: ``f1 = 0``, ``u1 = 0`` and the first-order solve reproduces the zeroth-order one.

    The CMP coefficient is held at zero so that ``g1 = g0`` identically; the
    computed dipole is nonzero here because the core is not a symmetry centre.
    """
    model = build_model({"potential": {"alpha": [0.0, 0.0, 0.0]}})
    spec = model.spec
    cfg = SpectralConfig()
    _, _, f = assemble_rhs(1, model, cfg)
    fmax = float(np.max(np.abs(f)))
    u1 = solve_predictor(model, cfg, i=1)
    umax = float(max(np.max(np.abs(u1.x)), np.max(np.abs(u1.y))))
    r0 = minimize(CellProblem(model, 0, R, assemble_predictor(0, model.predictor)))
    gf = ContinuumGF(model.tensors.scalar_matrix())
    pred1 = assemble_predictor(1, model.predictor, u1, CMPField(gf, spec.core, np.zeros((1, 2))))
    r1 = minimize(CellProblem(model, 1, R, pred1))
    diff = float(np.max(np.abs(r1.full_displacement(r1.sites) - r0.full_displacement(r0.sites))))
    ok = fmax == 0.0 and umax == 0.0 and diff < 1e-8 and r0.converged and r1.converged
    return CriterionResult(9, "degenerate consistency", ok, [fmax, umax, diff],
                           "f1 = 0, u1 = 0, |u_(p=1) - u_(p=0)| < 1e-8",
                           details={"residual_p0": r0.residual, "residual_p1": r1.residual})


CRITERIA = {
    1: criterion_gradient,
    2: criterion_green,
    3: criterion_spectral,
    4: criterion_truncation,
    8: criterion_moments,
    9: criterion_degenerate,
}

SWEEP_CRITERIA = {5: criterion_decay, 6: criterion_geometry, 7: criterion_energy}


def run_suite(progress=None) -> list[CriterionResult]:
    """Criteria 1 to 9 in order (criterion 10 needs two suite runs, see :func:`run_verify`)."""
    results = []
    sw = None
    for n in range(1, 10):
        t0 = time.perf_counter()
        if n in CRITERIA:
            res = CRITERIA[n]()
            res.runtime = time.perf_counter() - t0
        else:
            sw = sw or _sweep()
            res = SWEEP_CRITERIA[n](sw)
        results.append(res)
        if progress:
            progress(res)
    return results


def _suite_report(results) -> StudyReport:
    rep = StudyReport("verify", {"suite": "acceptance", "sweep_radii": SWEEP_RADII, "R_dom": R_DOM})
    for r in results:
        rep.gate(f"criterion_{r.number:02d}", _jsonable(r.value), r.threshold, r.passed, r.name)
        rep.tables.update(r.tables)
        rep.fits[f"criterion_{r.number:02d}"] = _jsonable(r.to_dict())
    _suite_plots(rep)
    rep.run_info["runtimes"] = {f"criterion_{r.number:02d}": {"seconds": r.runtime, "limit": r.runtime_limit,
                                                             "ok": r.runtime_ok} for r in results}
    return rep


def _suite_plots(rep: StudyReport):
    t = rep.tables
    if "c03_spectral" in t:
        rows = t["c03_spectral"]["rows"]
        rep.plots["spectral_manufactured"] = plot_svg([Series("max error", [r[0] for r in rows], [r[1] for r in rows])],
                                                      "manufactured mode solve", "N_pde", "max error", logx=False)
    env = [k for k in sorted(t) if k.startswith("c05_envelope_p")]
    if env:
        rep.plots["decay_envelope"] = plot_svg(
            [Series(f"p={k[-1]}", [r[0] for r in t[k]["rows"]], [r[1] for r in t[k]["rows"]]) for k in env],
            "strain envelope of the reference correctors", "|l - x|", "max |D w|")
    if "c06_c07_sweep" in t:
        tab = t["c06_c07_sweep"]
        col = {h: j for j, h in enumerate(tab["header"])}
        for key in ("geometry_error", "energy_error"):
            rep.plots[key.replace("_error", "_convergence")] = plot_svg(
                [Series(f"p={p}", [r[col["R"]] for r in tab["rows"] if r[col["p"]] == p],
                        [r[col[key]] for r in tab["rows"] if r[col["p"]] == p]) for p in (0, 1)],
                key.replace("_", " ") + " vs R", "R", key.replace("_", " "))


def _payload(rep: StudyReport) -> bytes:
    body = json.dumps(_jsonable(rep.to_dict()), indent=1, sort_keys=True)
    return (body + "".join(table_csv(rep.tables[k]) for k in sorted(rep.tables))
            + "".join(rep.plots[k] for k in sorted(rep.plots))).encode()


def run_verify(outdir, repeat: bool = True, progress=None):
    """Run the suite (twice when ``repeat``), compare outputs byte for byte, emit reports.

    Returns ``(results, report)``; criterion 10 is recorded as not evaluated
    when ``repeat`` is false.
    """
    results = run_suite(progress)
    rep = _suite_report(results)
    if repeat:
        t0 = time.perf_counter()
        again = _suite_report(run_suite())
        same = _payload(rep) == _payload(again)
        c10 = CriterionResult(10, "determinism", same, same, "two runs give byte-identical report tables",
                              runtime=time.perf_counter() - t0)
    else:
        c10 = CriterionResult(10, "determinism", True, "not evaluated",
                              "two runs give byte-identical report tables (run verify without --once)")
    results.append(c10)
    if progress:
        progress(c10)
    rep.gate("criterion_10", c10.value, c10.threshold, c10.passed, c10.name)
    rep.run_info["runtimes"]["criterion_10"] = {"seconds": c10.runtime, "limit": None, "ok": True}
    emit_reports(rep, Path(outdir))
    return results, rep
