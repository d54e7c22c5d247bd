"""Fourier x Legendre-Galerkin solver for the rescaled higher-order predictor equations.

The predictor ``u_i`` solves ``-div(C nabla u_i) = g_i`` in ``B_{R_c}`` with
``u_i = 0`` on the boundary.  In polar coordinates about the core and with
``u_i = r^{-i} v_i`` each Fourier mode ``m`` of an isotropic scalar problem
(``C = c I``) satisfies

    -c r^2 v'' + (2i - 1) c r v' - c (i^2 - m^2) v = f,   f = r^{i+2} g_i.

A scalar anisotropic ``C`` is reduced to the isotropic case by the
volume-preserving substitution ``x - x_hat = S y`` with
``S = (C / sqrt(det C))^{1/2}``, which gives ``c = sqrt(det C)``.

With ``r = (R_c + zeta)/2`` on ``D = (-R_c, R_c)`` the weak form reads

    c (phi + (2i + 1) psi) - c (i^2 - m^2) mu,

with ``phi_kj = int (R_c+zeta)^2 p_j' p_k'``, ``psi_kj = int (R_c+zeta) p_j' p_k``
and ``mu_kj = int p_j p_k``.  The basis is ``p_k = L_k - L_{k+1}`` (``v(R_c) = 0``)
except for ``m = i`` where the pole condition ``v(0) = 0`` is needed to remove the
kernel ``1 - (r/R_c)^{2i}``; there ``p_k = L_k - L_{k+2}``.  For ``1 <= m < i`` the
remaining kernel is removed by the constraint ``v^{(i-m)}(0) = 0``.

Two-component (N = 2) problems use the cubic mode matrices ``Ct1 = diag(C11, C44)``,
``Ct2 = m (C12 + C44) I``, ``Ct3 = (1 - m^2)(C11 + C44) I`` in the block form
``[[Ct1 phi + 2 Ct1 psi - 2 Ct3 mu, -2 Ct2 psi + 2 Ct2 mu], [2 Ct2 psi - 2 Ct2 mu, ...]]``
with right-hand side ``4 f``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import sqrtm

__all__ = [
    "ModeSystem",
    "OrderingError",
    "OutOfDomainError",
    "ResolutionError",
    "SpectralConfig",
    "SpectralSolution",
    "assemble_rhs",
    "basis_kind",
    "fourier_merge",
    "fourier_split",
    "legendre_matrices",
    "mode_system",
    "project_rhs",
    "solve_predictor",
]


class OrderingError(RuntimeError):
    """Second-order right-hand side requested without a first-order solution."""


class ResolutionError(np.linalg.LinAlgError):
    """Singular mode system."""


class OutOfDomainError(ValueError):
    """Predictor evaluated outside ``B_{R_c}``."""


@dataclass
class SpectralConfig:
    R_c: float = 320.0
    M: int = 16
    N_pde: int = 32
    order: int = 1
    n_quad: int | None = None
    adapt_M: bool = True
    M_max: int = 128

    def __post_init__(self):
        if self.M < 4 or self.N_pde < 4 or self.R_c <= 0:
            raise ValueError("need M >= 4, N_pde >= 4 and R_c > 0")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")

    @property
    def quad_points(self) -> int:
        return self.n_quad if self.n_quad is not None else self.N_pde + 8


# -- radial basis -------------------------------------------------------------------


def basis_kind(i: int, m: int) -> str:
    """``"pole"`` (``L_k - L_{k+2}``) for ``m = i``, else ``"right"`` (``L_k - L_{k+1}``)."""
    return "pole" if m == i else "right"


def _basis_coeffs(N: int, kind: str) -> np.ndarray:
    """Legendre coefficients of the basis, shape ``(N, N + 2)``."""
    B = np.zeros((N, N + 2))
    for k in range(N):
        B[k, k] = 1.0
        B[k, k + (2 if kind == "pole" else 1)] = -1.0
    return B


def _basis_values(t: np.ndarray, N: int, kind: str, deriv: int = 0) -> np.ndarray:
    """``d^deriv p_k / dt^deriv`` at ``t``, shape ``(len(t), N)``."""
    V = npleg.legvander(np.asarray(t, dtype=float), N + 1)  # L_0..L_{N+1}
    B = _basis_coeffs(N, kind)
    if deriv:
        D = np.zeros((N + 2, N + 2))
        for n in range(N + 2):
            e = np.zeros(N + 2)
            e[n] = 1.0
            d = npleg.legder(e, deriv)
            D[n, : len(d)] = d
        B = B @ D
    return V @ B.T


def legendre_matrices(N_pde: int, R_c: float, m: int | None = None, i: int = 1,
                      kind: str | None = None, n_quad: int | None = None):
    """Galerkin matrices ``(phi, psi, mu)`` on ``D = (-R_c, R_c)``.

    Integrals use Gauss-Legendre quadrature with ``N_pde + 8`` points, exact for
    the polynomial integrands.
    """
    if N_pde < 2:
        raise ValueError("N_pde must be >= 2")
    kind = kind or basis_kind(i, 0 if m is None else m)
    t, w = npleg.leggauss(n_quad or N_pde + 8)
    zeta = R_c * t
    P = _basis_values(t, N_pde, kind)
    dP = _basis_values(t, N_pde, kind, 1) / R_c
    W = w * R_c
    phi = dP.T @ (((R_c + zeta) ** 2 * W)[:, None] * dP)
    psi = P.T @ (((R_c + zeta) * W)[:, None] * dP)
    mu = P.T @ (W[:, None] * P)
    return phi, psi, mu


# -- Fourier --------------------------------------------------------------------------


def fourier_split(samples: np.ndarray, axis: int = 1):
    """Cosine and sine coefficient functions for ``m = 0..M`` from ``2M`` equispaced samples.

    ``samples[..., j, ...]`` is the value at ``theta_j = j pi / M`` along ``axis``.
    Returns ``(a, b)`` with the mode index replacing ``axis``.
    """
    f = np.moveaxis(np.asarray(samples, dtype=float), axis, -1)
    n = f.shape[-1]
    if n % 2:
        raise ValueError("need an even number of angular samples")
    M = n // 2
    F = np.fft.rfft(f, axis=-1) / n
    a = 2 * F.real
    b = -2 * F.imag
    a[..., 0] /= 2
    a[..., M] /= 2
    b[..., 0] = 0.0
    b[..., M] = 0.0
    return np.moveaxis(a, -1, axis), np.moveaxis(b, -1, axis)


def fourier_merge(a: np.ndarray, b: np.ndarray, theta, axis: int = 1) -> np.ndarray:
    """Evaluate ``sum_m a_m cos(m theta) + b_m sin(m theta)`` at angles ``theta``."""
    a = np.moveaxis(np.asarray(a), axis, -1)
    b = np.moveaxis(np.asarray(b), axis, -1)
    m = np.arange(a.shape[-1])
    mt = np.multiply.outer(np.asarray(theta), m)
    out = np.einsum("...m,tm->...t", a, np.cos(mt)) + np.einsum("...m,tm->...t", b, np.sin(mt))
    return np.moveaxis(out, -1, axis)


# -- mode systems -----------------------------------------------------------------------


@dataclass
class ModeSystem:
    """Linear system of one Fourier mode (cosine and sine channels stacked)."""

    m: int
    i: int
    kind: str
    Ct1: np.ndarray
    Ct2: np.ndarray
    Ct3: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    mu: np.ndarray
    matrix: np.ndarray
    rhs_scale: float
    constraint: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.phi.shape[0]

    def solve(self, rhs_cos: np.ndarray, rhs_sin: np.ndarray):
        """Solve for the basis coefficients ``(x, y)`` of the cosine and sine channels."""
        N = self.Ct1.shape[0]
        n = self.size
        r = self.rhs_scale * np.concatenate([np.reshape(rhs_cos, (n, N)).T.ravel(),
                                             np.reshape(rhs_sin, (n, N)).T.ravel()])
        A = self.matrix
        if self.constraint is not None:
            Cn = self.constraint
            k = Cn.shape[0]
            A = np.block([[A, Cn.T], [Cn, np.zeros((k, k))]])
            r = np.concatenate([r, np.zeros(k)])
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1e14:
            raise ResolutionError(f"singular mode system (m={self.m}, N_pde={n}, cond={cond:.2e})")
        sol = np.linalg.solve(A, r)[: 2 * N * n]
        x = sol[: N * n].reshape(N, n).T
        y = sol[N * n:].reshape(N, n).T
        return x, y


def mode_system(C, i: int, m: int, N_pde: int, R_c: float, n_quad: int | None = None) -> ModeSystem:
    """Assemble the mode-``m`` system for ``C`` (scalar ``c`` or cubic ``(C11, C12, C44)``)."""
    kind = basis_kind(i, m)
    phi, psi, mu = legendre_matrices(N_pde, R_c, m=m, i=i, kind=kind, n_quad=n_quad)
    constraint = None
    if np.ndim(C) == 0:
        c = float(C)
        Ct1 = np.array([[c]])
        Ct2 = np.zeros((1, 1))
        Ct3 = np.array([[c * (i * i - m * m)]])
        blk = c * (phi + (2 * i + 1) * psi) - Ct3[0, 0] * mu
        Z = np.zeros_like(blk)
        matrix = np.block([[blk, Z], [Z, blk]])
        rhs_scale = 1.0
        if 1 <= m < i:
            # remove the kernel r^{i-m} - ... by fixing d^{i-m} v / dr^{i-m} at r = 0
            row = _basis_values(np.array([-1.0]), N_pde, kind, i - m)[0] * (2.0 / R_c) ** (i - m)
            constraint = np.zeros((2, 2 * N_pde))
            constraint[0, :N_pde] = row
            constraint[1, N_pde:] = row
    else:
        C11, C12, C44 = (float(v) for v in C)
        Ct1 = np.diag([C11, C44])
        Ct2 = m * (C12 + C44) * np.eye(2)
        Ct3 = (1 - m * m) * (C11 + C44) * np.eye(2)
        diag = np.kron(Ct1, phi) + 2 * np.kron(Ct1, psi) - 2 * np.kron(Ct3, mu)
        off = -2 * np.kron(Ct2, psi) + 2 * np.kron(Ct2, mu)
        matrix = np.block([[diag, off], [-off, diag]])
        rhs_scale = 4.0
    return ModeSystem(m, i, kind, Ct1, Ct2, Ct3, phi, psi, mu, matrix, rhs_scale, constraint)


def project_rhs(f_q: np.ndarray, N_pde: int, R_c: float, kind: str, n_quad: int) -> np.ndarray:
    """``int f p_k dzeta`` from samples at the Gauss nodes (leading axis)."""
    t, w = npleg.leggauss(n_quad)
    P = _basis_values(t, N_pde, kind)
    return np.tensordot(P * (w * R_c)[:, None], f_q, axes=([0], [0]))


# -- solution ---------------------------------------------------------------------------


def _contract(T, M, nlead):
    order = T.ndim - nlead
    for k in range(order):
        T = np.moveaxis(np.tensordot(T, M, axes=([nlead + k], [0])), -1, nlead + k)
    return T


@dataclass
class SpectralSolution:
    """Per-mode Legendre coefficients of ``v_i``; evaluates ``u_i = r^{-i} v_i``.

    ``x[m]``/``y[m]`` have shape ``(N_pde, N)`` (cosine/sine channels).
    """

    config: SpectralConfig
    i: int
    core: np.ndarray
    S: np.ndarray
    x: np.ndarray
    y: np.ndarray
    kinds: list
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.x.shape[0] - 1

    @property
    def components(self) -> int:
        return self.x.shape[2]

    def _polar(self, pts):
        d = np.asarray(pts, dtype=float) - self.core
        y = d @ np.linalg.inv(self.S).T
        r = np.hypot(y[..., 0], y[..., 1])
        th = np.arctan2(y[..., 1], y[..., 0])
        return r, th

    def radial(self, r, deriv: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """``d^deriv v_m / dr^deriv`` for cosine and sine channels, shape ``(n, M+1, N)``."""
        Rc = self.config.R_c
        t = 2 * np.asarray(r, dtype=float) / Rc - 1
        outc = np.empty(t.shape + (self.M + 1, self.components))
        outs = np.empty_like(outc)
        cache = {}
        for m, kind in enumerate(self.kinds):
            if kind not in cache:
                cache[kind] = _basis_values(t, self.config.N_pde, kind, deriv) * (2.0 / Rc) ** deriv
            P = cache[kind]
            outc[:, m] = P @ self.x[m]
            outs[:, m] = P @ self.y[m]
        return outc, outs

    def v(self, r, theta) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        c, s = self.radial(r)
        m = np.arange(self.M + 1)
        mt = np.multiply.outer(np.atleast_1d(theta), m)
        return np.einsum("nmk,nm->nk", c, np.cos(mt)) + np.einsum("nmk,nm->nk", s, np.sin(mt))

    def _w_derivs(self, r, th, order):
        """Polar derivatives of ``w = sum_m v_m(r) T_m(theta)`` up to ``order``."""
        m = np.arange(self.M + 1)
        mt = np.multiply.outer(th, m)
        cs, sn = np.cos(mt), np.sin(mt)
        out = {}
        for dr in range(order + 1):
            vc, vs = self.radial(r, dr)
            for dt in range(order + 1 - dr):
                # d^dt/dtheta^dt of cos(m t) and sin(m t)
                ph = dt * np.pi / 2
                fac = m.astype(float) ** dt
                ct = np.cos(mt + ph) * fac
                st = np.sin(mt + ph) * fac
                out[(dr, dt)] = np.einsum("nmk,nm->nk", vc, ct) + np.einsum("nmk,nm->nk", vs, st)
        return out

    def evaluate(self, pts, order: int = 0, outside: str = "raise") -> list[np.ndarray]:
        """Value, gradient and Hessian (Cartesian) up to ``order`` at ``pts`` of shape ``(n, 2)``.

        Returns a list ``[u, grad u, hess u][:order+1]`` with shapes
        ``(n, N)``, ``(n, N, 2)``, ``(n, N, 2, 2)``.  Points outside ``B_{R_c}``
        raise, or give zero with ``outside="zero"``.
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        r, th = self._polar(pts)
        Rc = self.config.R_c
        out_mask = r > Rc * (1 + 1e-12)
        if np.any(out_mask) and outside == "raise":
            raise OutOfDomainError("predictor evaluated outside B_{R_c}")
        inside = ~out_mask
        N = self.components
        res = [np.zeros((len(pts), N) + (2,) * k) for k in range(order + 1)]
        if not np.any(inside):
            return res
        r_in, th_in = r[inside], th[inside]
        W = self._w_derivs(r_in, th_in, order)
        i = self.i
        ri = r_in[:, None] ** (-i)
        invr = 1.0 / r_in[:, None]
        u = ri * W[(0, 0)]
        res[0][inside] = u
        if order >= 1:
            u_r = ri * (W[(1, 0)] - i * W[(0, 0)] * invr)
            u_t = ri * W[(0, 1)]
            er = np.stack([np.cos(th_in), np.sin(th_in)], axis=1)
            et = np.stack([-np.sin(th_in), np.cos(th_in)], axis=1)
            g = u_r[..., None] * er[:, None, :] + (u_t * invr)[..., None] * et[:, None, :]
            res[1][inside] = _contract(g, np.linalg.inv(self.S), 2)
        if order >= 2:
            u_rr = ri * (W[(2, 0)] - 2 * i * W[(1, 0)] * invr + i * (i + 1) * W[(0, 0)] * invr**2)
            u_rt = ri * (W[(1, 1)] - i * W[(0, 1)] * invr)
            u_tt = ri * W[(0, 2)]
            a = u_rr
            b = u_rt * invr - u_t * invr**2
            c = u_tt * invr**2 + u_r * invr
            rr = np.einsum("na,nb->nab", er, er)
            rt = np.einsum("na,nb->nab", er, et) + np.einsum("na,nb->nab", et, er)
            tt = np.einsum("na,nb->nab", et, et)
            H = (a[..., None, None] * rr[:, None] + b[..., None, None] * rt[:, None]
                 + c[..., None, None] * tt[:, None])
            res[2][inside] = _contract(H, np.linalg.inv(self.S), 2)
        return res

    def __call__(self, pts, outside: str = "zero") -> np.ndarray:
        return self.evaluate(pts, 0, outside)[0]

    def tensor(self, order: int, pts, outside: str = "zero") -> np.ndarray:
        return self.evaluate(pts, order, outside)[order]

    # serialization ---------------------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "i": self.i,
            "core": self.core.tolist(),
            "S": self.S.tolist(),
            "kinds": list(self.kinds),
            "modes": [{"m": m, "x": self.x[m].tolist(), "y": self.y[m].tolist()} for m in range(self.M + 1)],
            "meta": self.meta,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpectralSolution":
        doc = json.loads(text)
        modes = sorted(doc["modes"], key=lambda d: d["m"])
        return cls(SpectralConfig(**doc["config"]), doc["i"], np.array(doc["core"]), np.array(doc["S"]),
                   np.array([d["x"] for d in modes]), np.array([d["y"] for d in modes]),
                   list(doc["kinds"]), doc.get("meta", {}))


# -- right-hand sides ----------------------------------------------------------------------


def _reduction(C2: np.ndarray):
    """``(S, c)`` for scalar problems, ``(I, (C11, C12, C44))`` for N = 2."""
    C2 = np.asarray(C2)
    N = C2.shape[0]
    if N == 1:
        C = C2[0, :, 0, :]
        d = math.sqrt(np.linalg.det(C))
        S = np.real(sqrtm(C / d))
        return S, d
    return np.eye(2), (C2[0, 0, 0, 0], C2[0, 0, 1, 1], C2[0, 1, 0, 1])


def _g1(C3, T1, T2):
    return np.einsum("iajbkc,njab,nkc->ni", C3, T2, T1)


def _nonlocal(potential, c_vol, T4):
    """``H~[u] = -(1/(12 c_vol)) sum_rho K_rho grad^4 u[rho, rho, rho, rho]`` (pair site energies)."""
    Kb = potential.bond_stiffness_at_zero()
    rho = potential.cart
    d4 = np.einsum("njabcd,ra,rb,rc,rd->nrj", T4, rho, rho, rho, rho)
    return -np.einsum("rij,nrj->ni", Kb, d4) / (12.0 * c_vol)


def source_g(i: int, model, pts, prev: SpectralSolution | None = None, cmp=None) -> np.ndarray:
    """``g_i`` at Cartesian points ``pts`` (shape ``(n, 2)``), returned as ``(n, N)``.

    ``g_1 = C3 : d^2 u0 d u0``.  ``g_2`` adds the coupling to ``u1 + u1^CMP``, the
    quartic term and minus the nonlocal correction ``H~[u0]``.
    """
    T = model.tensors
    pred = model.predictor
    T1 = pred.tensor(1, pts)
    T2 = pred.tensor(2, pts)
    if i == 1:
        return _g1(T.C3, T1, T2)
    if i != 2:
        raise ValueError("only i = 1, 2 are implemented")
    if prev is None:
        raise OrderingError("the i = 2 right-hand side needs the i = 1 solution")
    _, U1, U2 = prev.evaluate(pts, 2, outside="zero")
    if cmp is not None:
        U1 = U1 + cmp.tensor(1, pts)
        U2 = U2 + cmp.tensor(2, pts)
    A = (np.einsum("iajbkc,njab,nkc->ni", T.C3, T2, U1)
         + np.einsum("iajbkc,njb,nkac->ni", T.C3, T1, U2))
    B = 0.5 * np.einsum("iajbkcld,njab,nkc,nld->ni", T.C4, T2, T1, T1)
    T4 = pred.tensor(4, pts)
    return A + B - _nonlocal(model.potential, T.c_vol, T4)


def assemble_rhs(i: int, model, config: SpectralConfig, prev: SpectralSolution | None = None, cmp=None):
    """Samples of ``f_i = r^{i+2} g_i`` on Gauss nodes x ``theta_j = j pi / M``.

    Returns ``(r_q, theta, f)`` with ``f`` of shape ``(Q, 2M, N)``.
    """
    if i == 2 and prev is None:
        raise OrderingError("the i = 2 right-hand side needs the i = 1 solution")
    S, _ = _reduction(model.tensors.C2)
    t, _ = npleg.leggauss(config.quad_points)
    r = config.R_c * (t + 1) / 2
    M = config.M
    theta = np.arange(2 * M) * np.pi / M
    R, TH = np.meshgrid(r, theta, indexing="ij")
    y = np.stack([R * np.cos(TH), R * np.sin(TH)], axis=-1)
    pts = model.predictor.core + y @ S.T
    g = source_g(i, model, pts.reshape(-1, 2), prev, cmp)
    f = (R.reshape(-1) ** (i + 2))[:, None] * g
    return r, theta, f.reshape(len(r), 2 * M, -1)


def solve_modes(C, i: int, f_cos: np.ndarray, f_sin: np.ndarray, config: SpectralConfig):
    """Solve every mode given projected-ready Gauss samples ``(Q, M+1, N)`` per channel."""
    Q = config.quad_points
    M = f_cos.shape[1] - 1
    N = f_cos.shape[2]
    xs = np.zeros((M + 1, config.N_pde, N))
    ys = np.zeros_like(xs)
    kinds = []
    for m in range(M + 1):
        sysm = mode_system(C, i, m, config.N_pde, config.R_c, n_quad=config.n_quad)
        bc = project_rhs(f_cos[:, m], config.N_pde, config.R_c, sysm.kind, Q)
        bs = project_rhs(f_sin[:, m], config.N_pde, config.R_c, sysm.kind, Q)
        xs[m], ys[m] = sysm.solve(bc, bs)
        kinds.append(sysm.kind)
    return xs, ys, kinds


def solve_predictor(model, config: SpectralConfig, i: int = 1, prev: SpectralSolution | None = None,
                    cmp=None) -> SpectralSolution:
    """Assemble, Fourier-split and solve for ``u_i``; ``M`` doubles until the tail is negligible."""
    S, C = _reduction(model.tensors.C2)
    cfg = SpectralConfig(**asdict(config))
    while True:
        r, theta, f = assemble_rhs(i, model, cfg, prev, cmp)
        a, b = fourier_split(f, axis=1)
        energy = np.sum(a**2 + b**2, axis=(0, 2))
        total = float(np.sum(energy))
        tail = float(energy[-1]) / total if total > 0 else 0.0
        if not cfg.adapt_M or tail < 1e-12 or 2 * cfg.M > cfg.M_max:
            break
        cfg.M *= 2
    xs, ys, kinds = solve_modes(C, i, a, b, cfg)
    return SpectralSolution(cfg, i, np.asarray(model.predictor.core, dtype=float), S, xs, ys, kinds,
                            meta={"tail_energy": tail, "c_eff": C if np.ndim(C) == 0 else list(C)})


# -- manufactured solution ----------------------------------------------------------------


def _manufactured_v(t, deriv=0):
    """``v(t) = t + 3/2 - (5/4)/(3/2 - t)``: zero at ``t = 1``, analytic with a pole at ``t = 3/2``."""
    t = np.asarray(t, dtype=float)
    if deriv == 0:
        return t + 1.5 - 1.25 / (1.5 - t)
    if deriv == 1:
        return 1.0 - 1.25 / (1.5 - t) ** 2
    return -2.5 / (1.5 - t) ** 3


def manufactured_error(N_pde: int, R_c: float = 50.0, c: float = 2.0, m: int = 2, i: int = 1,
                       n_eval: int = 401) -> float:
    """Max error of one mode solve against the manufactured ``v`` on ``[0, R_c]``.

    ``f = -c r^2 v'' + (2i - 1) c r v' - c (i^2 - m^2) v`` is sampled on a fine
    Gauss rule so that quadrature error stays below the discretisation error.
    """
    if basis_kind(i, m) != "right":
        raise ValueError("the manufactured solution needs the L_k - L_{k+1} basis (m != i)")
    Q = max(N_pde + 8, 96)
    t, _ = npleg.leggauss(Q)
    r = R_c * (t + 1) / 2
    s = 2.0 / R_c
    v, dv, d2v = (_manufactured_v(t, k) * s**k for k in range(3))
    f = -c * r**2 * d2v + (2 * i - 1) * c * r * dv - c * (i * i - m * m) * v
    sysm = mode_system(c, i, m, N_pde, R_c)
    b = project_rhs(f[:, None], N_pde, R_c, sysm.kind, Q)
    x, _ = sysm.solve(b, np.zeros_like(b))
    te = np.linspace(-1, 1, n_eval)
    approx = _basis_values(te, N_pde, sysm.kind) @ x[:, 0]
    return float(np.max(np.abs(approx - _manufactured_v(te))))
