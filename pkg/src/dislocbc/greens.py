"""Continuum Green's functions of ``-div C nabla`` and a lattice Green's function oracle.

Convention: ``-div(C nabla G) = +delta I`` and the additive constant is fixed by
requiring the angular mean of ``G`` over the unit circle of the normalised
coordinates ``y = C^{-1/2} x`` to vanish (the ordinary unit circle when ``C`` is
isotropic).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla
from scipy.linalg import sqrtm

from ._cplx import LOG_R, ReSeries, mono
from .lattice import LatticeSpec, SiteIndex, assemble_reference_hessian, sites_in_ball
from .potential import SitePotential

__all__ = [
    "AssemblyError",
    "ContinuumGF",
    "SingularityError",
    "StabilityError",
    "flux",
    "lattice_gf_oracle",
]


class SingularityError(ValueError):
    """Green's function evaluated at the origin."""


class AssemblyError(ValueError):
    """Elasticity tensor not strongly elliptic."""


class StabilityError(RuntimeError):
    """Clamped lattice Hessian is singular."""


def _contract(T, M, nlead):
    order = T.ndim - nlead
    for k in range(order):
        T = np.moveaxis(np.tensordot(T, M, axes=([nlead + k], [0])), -1, nlead + k)
    return T


class ContinuumGF:
    """Green's function ``G_0`` and its derivatives for an elasticity tensor.

    Parameters
    ----------
    C : array
        ``(N, 2, N, 2)`` tensor (or ``(2, 2)`` for N = 1).
    kind : {"scalar_anisotropic", "plane_strain_isotropic", "barnett_quadrature"}
    n_quad : int
        Trapezoid points for the angular representation (barnett kind only).
    """

    def __init__(self, C, kind: str | None = None, n_quad: int = 256, tol: float = 1e-16):
        C = np.asarray(C, dtype=float)
        if C.shape == (2, 2):
            C = C.reshape(1, 2, 1, 2)
        self.C = C
        self.N = C.shape[0]
        if kind is None:
            kind = "scalar_anisotropic" if self.N == 1 else "plane_strain_isotropic"
        self.kind = kind
        N = self.N
        if kind == "scalar_anisotropic":
            if N != 1:
                raise ValueError("scalar kind needs N = 1")
            C2 = C[0, :, 0, :]
            self.M = np.real(np.linalg.inv(sqrtm(C2)))
            self._series = [[LOG_R.scaled(-1.0 / (2 * np.pi * np.sqrt(np.linalg.det(C2))))]]
        elif kind == "plane_strain_isotropic":
            if N != 2:
                raise ValueError("plane-strain kind needs N = 2")
            lam, mu = C[0, 0, 1, 1], C[0, 1, 0, 1]
            if abs(C[0, 0, 0, 0] - lam - 2 * mu) > 1e-8 * abs(C[0, 0, 0, 0]):
                raise ValueError("plane-strain kind needs an isotropic tensor")
            nu = lam / (2 * (lam + mu))
            pre = -1.0 / (8 * np.pi * mu * (1 - nu))
            # x_i x_j / r^2 - delta_ij / 2 in terms of cos 2t, sin 2t
            xx = mono(0.5, 1, -1)
            xy = mono(-0.5j, 1, -1)
            diag = LOG_R.scaled(3 - 4 * nu)
            self._series = [[(diag + xx.scaled(-1.0)).scaled(pre), xy.scaled(-pre)],
                            [xy.scaled(-pre), (diag + xx).scaled(pre)]]
            self.M = np.eye(2)
        elif kind == "barnett_quadrature":
            self._series = self._barnett_series(n_quad, tol)
            self.M = np.eye(2)
        else:
            raise ValueError(f"unknown Green's function kind {kind!r}")

    def _barnett_series(self, n_quad, tol):
        """``G = -(1/4 pi^2) oint K(n)^{-1} ln|n.x| dphi`` with the log integrated exactly.

        ``K(n)^{-1}`` is sampled at ``n_quad`` points (periodic trapezoid rule =
        DFT); using ``ln|cos s| = -ln 2 - sum_m (-1)^m cos(2 m s)/m`` gives
        ``G = -(1/2 pi) [k_0 ln r - sum_m ((-1)^m/m) Re(k_{2m} e^{2 i m t})]``.
        """
        N = self.N
        phi = 2 * np.pi * np.arange(n_quad) / n_quad
        n = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        K = np.einsum("iajb,qa,qb->qij", self.C, n, n)
        ev = np.linalg.eigvalsh(K)
        if np.min(ev) <= 0:
            raise AssemblyError("acoustic tensor is not positive definite")
        Kinv = np.linalg.inv(K)
        coef = np.fft.fft(Kinv, axis=0) / n_quad  # k_m = mean(Kinv e^{-i m phi})
        scale = np.max(np.abs(coef[0]))
        out = [[None] * N for _ in range(N)]
        for i in range(N):
            for j in range(N):
                s = LOG_R.scaled(-np.real(coef[0, i, j]) / (2 * np.pi))
                for m in range(1, n_quad // 4):
                    k2m = coef[2 * m, i, j]  # coefficient of e^{2 i m phi}
                    if abs(k2m) < tol * scale:
                        continue
                    s = s + mono(((-1) ** m / m) * k2m / (2 * np.pi), m, -m)
                out[i][j] = s
        return out

    # evaluation -------------------------------------------------------------------
    def _z(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.hypot(x[..., 0], x[..., 1]) == 0.0):
            raise SingularityError("Green's function is singular at the origin")
        y = x @ self.M.T
        return y[..., 0] + 1j * y[..., 1]

    def tensor(self, order: int, x) -> np.ndarray:
        """``nabla^order G_0(x)``, shape ``x.shape[:-1] + (N, N) + (2,)*order``."""
        z = self._z(x)
        N = self.N
        rows = []
        for i in range(N):
            cols = []
            for j in range(N):
                s: ReSeries = self._series[i][j]
                if order == 0:
                    cols.append(s.derivative(0, 0, z, theta=np.zeros(z.shape)))
                else:
                    cols.append(_contract(s.tensor(order, z), self.M, z.ndim))
            rows.append(np.stack(cols, axis=z.ndim))
        return np.stack(rows, axis=z.ndim)

    def g0(self, x):
        return self.tensor(0, x)

    def grad_g0(self, x):
        return self.tensor(1, x)

    def hess_g0(self, x):
        return self.tensor(2, x)

    def third_g0(self, x):
        return self.tensor(3, x)


def flux(gf: ContinuumGF, radius: float = 3.0, n: int = 512) -> np.ndarray:
    """``oint C[nabla G] nu dsigma`` on a circle (trapezoid rule); equals ``-I``."""
    t = 2 * np.pi * np.arange(n) / n
    nu = np.stack([np.cos(t), np.sin(t)], axis=1)
    dG = gf.grad_g0(radius * nu)  # (n, N, N, 2) = d_b G_{jk}
    sigma = np.einsum("iajb,njkb->nika", gf.C, dG)
    return np.einsum("nika,na->ik", sigma, nu) * radius * (2 * np.pi / n)


def lattice_gf_oracle(spec: LatticeSpec, potential: SitePotential, k: int, radius: float):
    """Clamped solve of ``H g = e_k delta_0`` on the ball of ``radius`` about the origin.

    Returns ``(sites, values)`` with ``values`` of shape ``(n, N)``.
    """
    sites = sites_in_ball(spec, radius, center=np.zeros(2))
    N = spec.components
    H = assemble_reference_hessian(spec, potential, sites).tocsc()
    rhs = np.zeros(len(sites) * N)
    origin = SiteIndex(sites).lookup(np.zeros((1, 2), dtype=int))[0]
    rhs[origin * N + k] = 1.0
    try:
        lu = spla.splu(H)
    except RuntimeError as exc:
        raise StabilityError(f"clamped Hessian is singular: {exc}") from exc
    g = lu.solve(rhs)
    if not np.all(np.isfinite(g)):
        raise StabilityError("clamped Hessian is singular")
    return sites, g.reshape(-1, N)
