"""Far-field predictors, the clamped Galerkin cell problem and the two-stage algorithm.

The cell problem minimises ``E(g + w)`` over correctors ``w`` supported on
``Lambda cap B_R`` with the far-field predictor ``g`` clamping every other
site.  The minimiser is a preconditioned L-BFGS run followed by Newton steps
with a sparse direct solve of the nonlinear Hessian.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .greens import ContinuumGF
from .lattice import (
    BondTable,
    EvaluationError,
    SiteIndex,
    assemble_hessian,
    assemble_reference_hessian,
    sites_in_ball,
)
from .moments import CMPField, MomentSet, coeffs_from_moments, moment_iteration, truncated_moment
from .spectral import SpectralConfig, SpectralSolution, solve_predictor

__all__ = [
    "AssemblyError",
    "CellProblem",
    "EquilibriumResult",
    "FarField",
    "SolverConfig",
    "algorithm41",
    "assemble_predictor",
    "energy_error",
    "geometry_error",
    "minimize",
    "strain_magnitude",
]


class AssemblyError(ValueError):
    """Predictor of the requested order lacks one of its components."""


class FarField:
    """``g_p(x) = u0(x) + sum_{i <= p} u_i(x) + CMP(x)``; ``u_i`` vanish outside ``B_{R_c}``."""

    def __init__(self, u0, u1: SpectralSolution | None = None, cmp: CMPField | None = None):
        self.u0 = u0
        self.u1 = u1
        self.cmp = cmp
        self.core = u0.core

    @property
    def burgers_vector(self):
        return self.u0.burgers_vector

    @property
    def b12(self):
        return tuple(int(v) for v in self.u0.b12)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        out = np.asarray(self.u0(x), dtype=float).reshape(len(x), -1)
        if self.u1 is not None:
            out = out + self.u1(x, outside="zero")
        if self.cmp is not None:
            out = out + self.cmp(x)
        return out


def assemble_predictor(p: int, u0, u1: SpectralSolution | None = None, cmp: CMPField | None = None) -> FarField:
    """Far-field predictor of order ``p``; ``p >= 1`` needs ``u1`` and the CMP coefficients."""
    if p == 0:
        return FarField(u0)
    if p == 1:
        if u1 is None or cmp is None:
            raise AssemblyError("order 1 predictor needs u1 and the CMP coefficients")
        return FarField(u0, u1, cmp)
    raise AssemblyError(f"predictor order {p} is not implemented")


@dataclass
class SolverConfig:
    lbfgs_memory: int = 20
    preconditioner: str = "reference_hessian_diagonal"
    force_tol: float = 1e-8
    lbfgs_tol: float = 1e-6
    max_iterations: int = 20000
    newton_refine_steps: int = 2
    newton_max_steps: int = 10
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        if self.force_tol <= 0 or self.lbfgs_memory < 1:
            raise ValueError("need force_tol > 0 and lbfgs_memory >= 1")
        if self.preconditioner not in ("none", "reference_hessian_diagonal", "reference_hessian_ichol"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class CellProblem:
    model: object
    p: int
    R: float
    predictor: FarField
    moments: MomentSet | None = None
    energy_radius: float | None = None

    def __post_init__(self):
        spec = self.model.spec
        self.free_sites = sites_in_ball(spec, self.R)
        reach = self.R + spec.max_range + np.linalg.norm(spec.positions(np.array(self.predictor.b12))) + 1e-9
        self.centres = sites_in_ball(spec, reach)
        self.table = BondTable.build(spec, self.centres, self.predictor.burgers_vector, self.predictor.b12)
        self.free_rows = SiteIndex(self.table.all_sites).lookup(self.free_sites)
        self.N = spec.components
        self.g_all = self.predictor(spec.positions(self.table.all_sites))

    def full_values(self, w: np.ndarray) -> np.ndarray:
        U = self.g_all.copy()
        U[self.free_rows] += np.reshape(w, (-1, self.N))
        return U

    def energy_grad(self, w: np.ndarray, want_grad: bool = True):
        E, G = self.table.energy_gradient(self.model.potential, self.full_values(w), want_grad)
        return E, (G[self.free_rows].ravel() if want_grad else None)

    def hessian(self, w: np.ndarray) -> sp.csr_matrix:
        return assemble_hessian(self.table, self.model.potential, self.full_values(w), self.free_rows)

    def predictor_energy(self) -> float:
        """``sum_{|l| <= R_E} [V(D g) - V(D u0)]``: the far-field part of the energy difference."""
        if self.p == 0 or self.energy_radius is None:
            return 0.0
        tab, X, U0, U1, E0 = _tail_data(self.model, self.predictor, self.energy_radius)
        U = U0 + U1 + self.predictor.cmp(X)
        return tab.energy_gradient(self.model.potential, U, False)[0] - E0


_TAIL_CACHE: dict = {}


def _tail_data(model, pred: FarField, radius: float):
    """Bond table and the ``a``-independent predictor values on ``B_radius`` (memoised)."""
    key = (id(model), id(pred.u1), float(radius))
    hit = _TAIL_CACHE.get(key)
    if hit is not None and hit[0] is model and hit[1] is pred.u1:
        return hit[2]
    spec = model.spec
    sites = sites_in_ball(spec, radius)
    tab = BondTable.build(spec, sites, pred.burgers_vector, pred.b12)
    X = spec.positions(tab.all_sites)
    U0 = np.asarray(pred.u0(X), dtype=float).reshape(len(X), -1)
    U1 = pred.u1(X, outside="zero")
    E0 = tab.energy_gradient(model.potential, U0, False)[0]
    _TAIL_CACHE.clear()  # one entry is enough; the arrays are large
    _TAIL_CACHE[key] = (model, pred.u1, (tab, X, U0, U1, E0))
    return tab, X, U0, U1, E0


@dataclass
class EquilibriumResult:
    p: int
    R: float
    sites: np.ndarray
    corrector: np.ndarray
    energy: float
    residual: float
    iterations: int
    newton_steps: int
    converged: bool
    timings: dict = field(default_factory=dict)
    residual_history: list = field(default_factory=list)
    problem: CellProblem | None = None
    message: str = ""

    def full_displacement(self, sites) -> np.ndarray:
        """``g + w`` at integer ``sites``."""
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
        spec = self.problem.model.spec
        U = self.problem.predictor(spec.positions(sites))
        idx = SiteIndex(self.sites).lookup(sites)
        ok = idx >= 0
        U[ok] += self.corrector[idx[ok]]
        return U

    def corrector_at(self, sites) -> np.ndarray:
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
        idx = SiteIndex(self.sites).lookup(sites)
        out = np.zeros((len(sites), self.corrector.shape[1]))
        out[idx >= 0] = self.corrector[idx[idx >= 0]]
        return out

    def to_dict(self, include_corrector: bool = True) -> dict:
        d = {
            "p": self.p, "R": self.R, "energy": self.energy, "residual": self.residual,
            "iterations": self.iterations, "newton_steps": self.newton_steps,
            "converged": self.converged, "message": self.message,
            "timings": dict(self.timings),
        }
        if self.problem is not None and self.problem.moments is not None:
            d["a1"] = np.asarray(self.problem.moments.a1).tolist()
        if include_corrector:
            d["sites"] = self.sites.tolist()
            d["corrector"] = self.corrector.tolist()
        return d


# -- minimiser -------------------------------------------------------------------------------


class _Preconditioner:
    def __init__(self, problem: CellProblem, kind: str):
        self.kind = kind
        if kind == "none":
            return
        H = assemble_reference_hessian(problem.model.spec, problem.model.potential, problem.free_sites).tocsc()
        if kind == "reference_hessian_diagonal":
            self.dinv = 1.0 / H.diagonal()
        else:
            self.ilu = spla.spilu(H, drop_tol=1e-5, fill_factor=20)

    def apply(self, g):
        if self.kind == "none":
            return g.copy()
        if self.kind == "reference_hessian_diagonal":
            return self.dinv * g
        return self.ilu.solve(g)


def _lbfgs(problem: CellProblem, w: np.ndarray, cfg: SolverConfig, history: list):
    P = _Preconditioner(problem, cfg.preconditioner)
    E, g = problem.energy_grad(w)
    S, Y, RHO = [], [], []
    it = 0
    history.append(float(np.max(np.abs(g))) if g.size else 0.0)
    while it < cfg.max_iterations and history[-1] >= cfg.lbfgs_tol:
        # two-loop recursion
        q = g.copy()
        alph = []
        for s, y, rho in zip(reversed(S), reversed(Y), reversed(RHO)):
            a = rho * s.dot(q)
            alph.append(a)
            q -= a * y
        d = P.apply(q)
        if S:
            gamma = S[-1].dot(Y[-1]) / Y[-1].dot(P.apply(Y[-1]))
            d *= gamma
        for (s, y, rho), a in zip(zip(S, Y, RHO), reversed(alph)):
            b = rho * y.dot(d)
            d += (a - b) * s
        d = -d
        slope = g.dot(d)
        if slope >= 0:
            S, Y, RHO = [], [], []
            d = -P.apply(g)
            slope = g.dot(d)
        step = 1.0
        for _ in range(cfg.max_backtracks):
            try:
                E_new, g_new = problem.energy_grad(w + step * d)
                if E_new <= E + cfg.armijo_c1 * step * slope:
                    break
            except EvaluationError:
                pass
            step *= cfg.backtrack
        else:
            return w, E, g, it, "line search failed"
        s = step * d
        y = g_new - g
        sy = s.dot(y)
        if sy > 1e-300:
            S.append(s)
            Y.append(y)
            RHO.append(1.0 / sy)
            if len(S) > cfg.lbfgs_memory:
                S.pop(0), Y.pop(0), RHO.pop(0)
        w = w + s
        E, g = E_new, g_new
        it += 1
        history.append(float(np.max(np.abs(g))))
    return w, E, g, it, "ok" if history[-1] < cfg.lbfgs_tol else "max iterations"


def _newton(problem: CellProblem, w, g, cfg: SolverConfig, history: list, min_steps: int):
    steps = 0
    res = float(np.max(np.abs(g))) if g.size else 0.0
    while steps < cfg.newton_max_steps and (res >= cfg.force_tol or steps < min_steps):
        H = problem.hessian(w).tocsc()
        dx = spla.splu(H).solve(-g)
        step = 1.0
        for _ in range(cfg.max_backtracks):
            try:
                _, g_new = problem.energy_grad(w + step * dx)
                res_new = float(np.max(np.abs(g_new)))
                if res_new < res or res_new < cfg.force_tol * 1e-3:
                    break
            except EvaluationError:
                pass
            step *= cfg.backtrack
        else:
            break
        w = w + step * dx
        g, res = g_new, res_new
        steps += 1
        history.append(res)
        if res < 1e-14:
            break
    return w, g, steps


def minimize(problem: CellProblem, config: SolverConfig | None = None, w0=None) -> EquilibriumResult:
    """Solve ``delta E(g + w)[v] = 0`` for all ``v`` supported in ``B_R``."""
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    n = len(problem.free_sites) * problem.N
    w = np.zeros(n) if w0 is None else np.asarray(w0, dtype=float).ravel().copy()
    history: list = []
    E_ref, _ = problem.energy_grad(np.zeros(n), False)
    w, E, g, iters, msg = _lbfgs(problem, w, cfg, history)
    w, g, nsteps = _newton(problem, w, g, cfg, history, cfg.newton_refine_steps if history[-1] >= cfg.force_tol else 0)
    E, g = problem.energy_grad(w)
    res = float(np.max(np.abs(g))) if g.size else 0.0
    t_min = time.perf_counter() - t0
    t1 = time.perf_counter()
    energy = E - E_ref + problem.predictor_energy()
    t_energy = time.perf_counter() - t1
    converged = res < cfg.force_tol
    if not converged and msg == "ok":
        msg = "newton refinement did not reach force_tol"
    return EquilibriumResult(
        p=problem.p, R=problem.R, sites=problem.free_sites, corrector=w.reshape(-1, problem.N),
        energy=float(energy), residual=res, iterations=iters, newton_steps=nsteps, converged=converged,
        timings={"T_min": t_min, "T_energy": t_energy}, residual_history=history, problem=problem,
        message=msg,
    )


# -- algorithm -------------------------------------------------------------------------------


def algorithm41(model, R: float, spectral: SpectralConfig | None = None, solver: SolverConfig | None = None,
                energy_radius: float | None = None, use_moment_iteration: bool = False,
                tol_mom: float = 1e-8, max_iter_mom: int = 8, cutoff_profile: str = "quintic",
                u1: SpectralSolution | None = None) -> dict:
    """Zeroth-order solve, ``u1`` spectral solve, ``a1 = -I_{1,R}[w0 - u1]``, first-order solve.

    Returns a dict with ``p0``, ``p1`` (EquilibriumResult), ``moments`` (MomentSet),
    ``u1`` and ``timings`` (``T_tot``, ``T_bc``, ``T_min``).  Passing ``u1``
    skips the spectral solve (its time is then not part of ``T_bc``).
    """
    spectral = spectral or SpectralConfig()
    solver = solver or SolverConfig()
    spec = model.spec
    t_start = time.perf_counter()

    prob0 = CellProblem(model, 0, R, assemble_predictor(0, model.predictor))
    res0 = minimize(prob0, solver)

    t_bc0 = time.perf_counter()
    if u1 is None:
        u1 = solve_predictor(model, spectral, i=1)
    gf = ContinuumGF(model.tensors.C2 if spec.components == 2 else model.tensors.scalar_matrix())

    def moment_of(w_fn):
        return truncated_moment(spec, model.potential, w_fn, 1, R, cutoff_profile)

    I1 = moment_of(lambda s: res0.corrector_at(s) - u1(spec.positions(s), outside="zero"))
    a1, _ = coeffs_from_moments(I1, p=1)
    moments = MomentSet(I1=I1, a1=a1, R_used=R, history=[a1.copy()], sweeps=1)
    t_bc = time.perf_counter() - t_bc0

    def solve_p1(a, w_init):
        pred = assemble_predictor(1, model.predictor, u1, CMPField(gf, spec.core, a))
        prob = CellProblem(model, 1, R, pred, energy_radius=None)
        return prob, minimize(prob, solver, w_init)

    if use_moment_iteration:
        state = {}

        def update(a):
            prob, res = solve_p1(a, None if "res" not in state else state["res"].corrector.ravel())
            state["res"] = res
            cmp = CMPField(gf, spec.core, a)
            return moment_of(lambda s: res.corrector_at(s) + cmp(spec.positions(s)))

        t_it = time.perf_counter()
        moments = moment_iteration(update, a1, R, tol_mom, max_iter_mom)
        t_bc += time.perf_counter() - t_it  # sweeps include their cell solves
        a1 = moments.a1

    pred1 = assemble_predictor(1, model.predictor, u1, CMPField(gf, spec.core, a1))
    prob1 = CellProblem(model, 1, R, pred1, moments, energy_radius)
    # warm start: keep the p = 0 displacement, re-expressed relative to the new predictor
    shift = (prob1.g_all[prob1.free_rows] - prob0.g_all[prob0.free_rows]).ravel()
    res1 = minimize(prob1, solver, res0.corrector.ravel() - shift)
    # the far-field energy tail is post-processing, not part of the solve pipeline
    t_post = res0.timings["T_energy"] + res1.timings["T_energy"]
    t_tot = time.perf_counter() - t_start - t_post
    return {
        "p0": res0, "p1": res1, "moments": moments, "u1": u1,
        "timings": {"T_tot": t_tot, "T_bc": t_bc, "T_min": res0.timings["T_min"] + res1.timings["T_min"],
                    "T_post": t_post},
    }


# -- analysis ---------------------------------------------------------------------------------


def _bond_difference(spec, sites_R, a: EquilibriumResult, b: EquilibriumResult):
    tab = BondTable.build(spec, sites_R, a.problem.predictor.burgers_vector, a.problem.predictor.b12)
    inside = SiteIndex(sites_R).lookup(tab.all_sites) >= 0
    Da = tab.stencils(a.full_displacement(tab.all_sites))
    Db = tab.stencils(b.full_displacement(tab.all_sites))
    keep = inside[tab.partner]
    return (Da - Db)[keep]


def geometry_error(ref: EquilibriumResult, res: EquilibriumResult) -> float:
    """``||D u_ref - D u_R||_{l2}`` over bonds with both ends in ``B_R`` of the smaller domain."""
    spec = res.problem.model.spec
    diff = _bond_difference(spec, res.sites, ref, res)
    return float(np.sqrt(np.sum(diff**2)))


def energy_error(ref: EquilibriumResult, res: EquilibriumResult) -> float:
    return abs(ref.energy - res.energy)


def strain_magnitude(res: EquilibriumResult, sites=None):
    """``(|l - x_hat|, |D w(l)|)`` for the corrector, ``|D w|^2 = sum_rho |D_rho w|^2``."""
    spec = res.problem.model.spec
    sites = res.sites if sites is None else np.asarray(sites)
    tab = BondTable.build(spec, sites, None, (0, 0))
    D = tab.stencils(res.corrector_at(tab.all_sites))
    mag = np.sqrt(np.sum(D**2, axis=(1, 2)))
    dist = np.linalg.norm(spec.positions(sites) - spec.core, axis=1)
    return dist, mag


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]
