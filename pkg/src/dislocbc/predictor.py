"""Zeroth-order linear-elastic dislocation predictors.

Screw (N = 1): ``u = b/(2 pi) * arg(M (x - x_hat))`` with ``M = C^{-1/2}``, the
angle measured from the image of the cut direction so it lies in ``(0, 2 pi)``.

Edge (N = 2): the isotropic plane-strain solution ``u_lin`` composed with the
inverse of the core regularisation ``xi(x) = x - b12 eta(|x - x_hat|/r_hat) arg(x - x_hat)/(2 pi)``.
Both jump by ``-b`` from below to above the cut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm

from ._cplx import COS2, LOG_R, SIN2, THETA, ReSeries, angle_from_cut

__all__ = [
    "BranchCutError",
    "EdgePredictor",
    "XiInversionError",
    "ScrewPredictor",
    "burgers_circuit",
    "smoothstep",
    "traction_moment",
]


class BranchCutError(ValueError):
    """Evaluation requested on the branch cut itself."""


class XiInversionError(RuntimeError):
    """Newton iteration for the inverse core map failed."""


def smoothstep(s, deriv: int = 0):
    """Quintic ramp ``s^3 (6 s^2 - 15 s + 10)`` clamped to [0, 1], and its derivatives."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s, 0.0, 1.0)
    inside = (s > 0.0) & (s < 1.0)
    if deriv == 0:
        return t**3 * (6 * t**2 - 15 * t + 10)
    if deriv == 1:
        return np.where(inside, 30 * t**2 * (t - 1) ** 2, 0.0)
    if deriv == 2:
        return np.where(inside, 60 * t * (t - 1) * (2 * t - 1), 0.0)
    raise ValueError("deriv must be 0, 1 or 2")


def _check_cut(d: np.ndarray):
    on = (np.abs(d[..., 1]) < 1e-14) & (d[..., 0] >= 0)
    if np.any(on):
        raise BranchCutError("point lies on the branch cut")


def _contract(T: np.ndarray, M: np.ndarray, nlead: int) -> np.ndarray:
    """Apply ``M^T`` to every trailing spatial index: ``T_x = T_y . M`` slot-wise."""
    order = T.ndim - nlead
    for k in range(order):
        T = np.moveaxis(np.tensordot(T, M, axes=([nlead + k], [0])), -1, nlead + k)
    return T


@dataclass
class ScrewPredictor:
    """Antiplane screw dislocation for a scalar (possibly anisotropic) ``C``."""

    burgers: float
    core: np.ndarray
    C: np.ndarray

    components = 1

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=float)
        self.C = np.asarray(self.C, dtype=float).reshape(2, 2)
        self.M = np.real(np.linalg.inv(sqrtm(self.C)))
        e = self.M @ np.array([1.0, 0.0])
        self._cut_angle = np.arctan2(e[1], e[0])
        self._series = THETA.scaled(self.burgers / (2 * np.pi))
        self.b12 = (0, 0)

    @property
    def burgers_vector(self) -> np.ndarray:
        return np.array([self.burgers])

    def _local(self, x, check=True):
        d = np.asarray(x, dtype=float) - self.core
        if check:
            _check_cut(d)
        y = d @ self.M.T
        return y[..., 0] + 1j * y[..., 1]

    def angle(self, x) -> np.ndarray:
        z = self._local(x)
        return np.mod(np.angle(z) - self._cut_angle, 2 * np.pi)

    def __call__(self, x) -> np.ndarray:
        return self.u0(x)

    def u0(self, x) -> np.ndarray:
        """Displacement, shape ``x.shape[:-1] + (1,)``."""
        return (self.burgers / (2 * np.pi) * self.angle(x))[..., None]

    def tensor(self, order: int, x) -> np.ndarray:
        """``nabla^order u0``, shape ``x.shape[:-1] + (1,) + (2,)*order`` (order >= 1)."""
        if order < 1:
            return self.u0(x)
        # derivatives are single valued, so points on the cut are allowed here
        z = self._local(x, check=False)
        T = self._series.tensor(order, z)
        return np.expand_dims(_contract(T, self.M, z.ndim), z.ndim)

    def grad(self, x) -> np.ndarray:
        return self.tensor(1, x)

    grad_lin = grad


@dataclass
class EdgePredictor:
    """Isotropic plane-strain edge dislocation with Burgers vector ``b e_1``."""

    burgers: float
    core: np.ndarray
    lam: float
    mu: float
    r_hat: float = 4.0
    b12: tuple = (1, 0)

    components = 2

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=float)
        if self.mu <= 0 or self.lam + self.mu <= 0:
            raise ValueError("elastic constants are not strongly elliptic")
        nu = self.nu
        s = self.burgers / (2 * np.pi)
        self._ux = (THETA + SIN2.scaled(1.0 / (4 * (1 - nu)))).scaled(s)
        self._uy = (LOG_R.scaled((1 - 2 * nu) / (2 * (1 - nu))) + COS2.scaled(1.0 / (4 * (1 - nu)))).scaled(-s)

    @classmethod
    def from_cubic(cls, burgers, core, C11, C12, C44, rtol=1e-8, **kw):
        if abs(C11 - C12 - 2 * C44) > rtol * max(abs(C11), 1.0):
            raise ValueError("edge predictor requires isotropic elastic constants (C11 - C12 = 2 C44)")
        return cls(burgers, core, lam=C12, mu=C44, **kw)

    @property
    def nu(self) -> float:
        return self.lam / (2 * (self.lam + self.mu))

    @property
    def burgers_vector(self) -> np.ndarray:
        return np.array([self.burgers, 0.0])

    # u_lin ------------------------------------------------------------------
    def _z(self, X, check=True):
        d = np.asarray(X, dtype=float) - self.core
        if check:
            _check_cut(d)
        return d[..., 0] + 1j * d[..., 1], angle_from_cut(d[..., 0], d[..., 1])

    def u_lin(self, X) -> np.ndarray:
        z, th = self._z(X)
        return np.stack([self._ux.derivative(0, 0, z, th), self._uy.derivative(0, 0, z, th)], axis=-1)

    def tensor_lin(self, order: int, X) -> np.ndarray:
        """``nabla^order u_lin`` (order >= 1), shape ``(..., 2) + (2,)*order``."""
        z, _ = self._z(X, check=False)
        return np.stack([self._ux.tensor(order, z), self._uy.tensor(order, z)], axis=z.ndim)

    def tensor(self, order: int, x) -> np.ndarray:
        """Derivatives of the linear-elastic far field used by the predictor equations."""
        return self.tensor_lin(order, x)

    def grad_lin(self, X) -> np.ndarray:
        return self.tensor_lin(1, X)

    # core map -----------------------------------------------------------------
    def _eta_theta(self, X):
        d = np.asarray(X, dtype=float) - self.core
        r = np.hypot(d[..., 0], d[..., 1])
        th = angle_from_cut(d[..., 0], d[..., 1])
        eta = smoothstep(r / self.r_hat)
        deta = smoothstep(r / self.r_hat, 1) / self.r_hat
        # gradients of eta and theta w.r.t. X
        geta = deta[..., None] * d / r[..., None]
        gth = np.stack([-d[..., 1], d[..., 0]], axis=-1) / (r**2)[..., None]
        return eta, th, geta, gth

    def xi(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        eta, th, _, _ = self._eta_theta(X)
        out = X.copy()
        out[..., 0] -= self.burgers * eta * th / (2 * np.pi)
        return out

    def xi_jacobian(self, X) -> np.ndarray:
        eta, th, geta, gth = self._eta_theta(X)
        g = (geta * th[..., None] + eta[..., None] * gth) * (self.burgers / (2 * np.pi))
        J = np.broadcast_to(np.eye(2), X.shape[:-1] + (2, 2)).copy()
        J[..., 0, :] -= g
        return J

    def xi_inverse(self, x, tol: float = 1e-13, max_iter: int = 60) -> np.ndarray:
        """Solve ``xi(X) = x``; ``X_2 = x_2`` so this is a scalar Newton iteration in ``X_1``."""
        x = np.asarray(x, dtype=float)
        _check_cut(x - self.core)
        X = x.copy()
        eta, th, _, _ = self._eta_theta(X)
        X[..., 0] += self.burgers * eta * th / (2 * np.pi)
        for _ in range(max_iter):
            F = self.xi(X)[..., 0] - x[..., 0]
            if np.all(np.abs(F) < tol):
                return X
            J = self.xi_jacobian(X)[..., 0, 0]
            step = F / J
            step = np.clip(step, -0.25, 0.25)
            X[..., 0] -= step
        if np.all(np.abs(self.xi(X)[..., 0] - x[..., 0]) < 1e3 * tol):
            return X
        raise XiInversionError("core-map inversion did not converge")

    # predictor ------------------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        return self.u0(x)

    def u0(self, x) -> np.ndarray:
        return self.u_lin(self.xi_inverse(x))

    def grad(self, x) -> np.ndarray:
        """``nabla u0 = nabla u_lin(X) (D xi(X))^{-1}`` with ``X = xi^{-1}(x)``."""
        X = self.xi_inverse(x)
        G = self.tensor_lin(1, X)
        Jinv = np.linalg.inv(self.xi_jacobian(X))
        return np.einsum("...ij,...jk->...ik", G, Jinv)

    def stiffness(self) -> np.ndarray:
        """Isotropic ``C_{i a j b}`` tensor."""
        d = np.eye(2)
        return (self.lam * np.einsum("ia,jb->iajb", d, d)
                + self.mu * (np.einsum("ij,ab->iajb", d, d) + np.einsum("ib,aj->iajb", d, d)))


def burgers_circuit(pred, radius: float, n: int = 4096) -> np.ndarray:
    """Clockwise loop integral of ``nabla u_lin`` from just below to just above the cut.

    Equals ``u(x+) - u(x-) = -b`` for a loop enclosing the core.  (For the edge
    predictor ``u0 = u_lin o xi^{-1}`` the core map shifts the lower lip by
    ``b12``, so the circuit is taken on ``u_lin``.)
    """
    # open loop: theta from 2 pi - 0 down to 0 + (midpoint rule on the periodic integrand)
    t = (np.arange(n) + 0.5) / n * 2 * np.pi
    pts = pred.core + radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    tang = radius * np.stack([-np.sin(t), np.cos(t)], axis=1)
    G = pred.grad_lin(pts)
    return -np.einsum("nij,nj->i", G, tang) * (2 * np.pi / n)


def traction_moment(pred, C: np.ndarray, radius: float = 1.0, n: int = 2048) -> np.ndarray:
    """``oint C[nabla u_lin] nu dsigma`` over a circle around the core (trapezoid rule)."""
    t = np.arange(n) / n * 2 * np.pi + np.pi / n
    nu = np.stack([np.cos(t), np.sin(t)], axis=1)
    pts = pred.core + radius * nu
    G = pred.grad_lin(pts)
    N = G.shape[1]
    C = np.asarray(C).reshape(N, 2, N, 2)
    sigma = np.einsum("iajb,njb->nia", C, G)
    return np.einsum("nia,na->i", sigma, nu) * radius * (2 * np.pi / n)
