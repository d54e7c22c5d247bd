"""Truncated force moments, continuous multipole (CMP) fields and the moment iteration.

``I_{i,R}[u] = sum_l H[u](l) (x) (l - x_hat)^{(x) i} eta_R(l)`` with ``H`` the
reference Hessian.  Because ``H`` annihilates affine fields and ``eta_R`` is
constant inside ``B_{R/3}``, only the annulus ``R/3 < |l - x_hat| < 2R/3``
contributes; ``a1 = -I1`` recovers the dipole coefficient of ``a : nabla G``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import LatticeSpec, SiteIndex, sites_in_ball
from .potential import SitePotential
from .predictor import smoothstep

__all__ = [
    "CMPField",
    "DivergenceError",
    "MomentSet",
    "RankDeficientError",
    "UnderResolvedError",
    "coeffs_from_moments",
    "cutoff",
    "discrete_b_from_moments",
    "hessian_action",
    "moment_iteration",
    "truncated_moment",
]


class UnderResolvedError(ValueError):
    """Truncation radius too small compared with the interaction range."""


class DivergenceError(RuntimeError):
    """Moment iteration blew up; ``history`` holds the coefficient snapshots."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, message, nullity):
        super().__init__(f"{message} (null-space dimension {nullity})")
        self.nullity = nullity


def cutoff(dist, R: float, profile: str = "quintic") -> np.ndarray:
    """``eta_R``: 1 for ``dist <= R/3``, 0 for ``dist >= 2R/3``, smooth monotone ramp between."""
    s = (np.asarray(dist, dtype=float) - R / 3) / (R / 3)
    if profile == "quintic":
        return 1.0 - smoothstep(s)
    if profile == "cubic":
        t = np.clip(s, 0.0, 1.0)
        return 1.0 - t * t * (3 - 2 * t)
    raise ValueError(f"unknown cutoff profile {profile!r}")


def hessian_action(spec: LatticeSpec, potential: SitePotential, sites, u: Callable) -> np.ndarray:
    """``H[u](l)`` at ``sites`` for a field given as a callable on integer sites."""
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    off = spec.offsets
    ring = np.unique(np.concatenate([sites, (sites[:, None] - off[None]).reshape(-1, 2)]), axis=0)
    ext = np.unique(np.concatenate([ring, (ring[:, None] + off[None]).reshape(-1, 2)]), axis=0)
    U = np.asarray(u(ext), dtype=float).reshape(len(ext), -1)
    idx = SiteIndex(ext)
    Kb = potential.bond_stiffness_at_zero()
    ring_i = idx.lookup(ring)
    D = U[idx.lookup(ring[:, None] + off[None])] - U[ring_i][:, None, :]
    A = np.einsum("rij,nrj->nri", Kb, D)
    ridx = SiteIndex(ring)
    out = -A[ridx.lookup(sites)].sum(axis=1)
    for r, o in enumerate(off):
        out += A[ridx.lookup(sites - o), r]
    return out


def truncated_moment(spec: LatticeSpec, potential: SitePotential, u: Callable, i: int, R: float,
                     profile: str = "quintic") -> np.ndarray:
    """``I_{i,R}[u]``; shape ``(N, 2)`` for ``i = 1`` and ``(N, 2, 2)`` for ``i = 2``."""
    if i not in (1, 2):
        raise ValueError("only i = 1, 2 are supported")
    if R < 3 * spec.max_range:
        raise UnderResolvedError(f"R = {R} is below three interaction ranges")
    sites = sites_in_ball(spec, 2 * R / 3)
    x = spec.positions(sites) - spec.core
    eta = cutoff(np.linalg.norm(x, axis=1), R, profile)
    keep = eta > 0
    sites, x, eta = sites[keep], x[keep], eta[keep]
    F = hessian_action(spec, potential, sites, u)
    w = F * eta[:, None]
    if i == 1:
        return _tree_sum(np.einsum("nk,na->nka", w, x))
    return _tree_sum(np.einsum("nk,na,nb->nkab", w, x, x))


def _tree_sum(terms: np.ndarray) -> np.ndarray:
    """Pairwise reduction along axis 0 in a fixed order (bit-reproducible)."""
    t = terms
    while len(t) > 1:
        if len(t) % 2:
            t = np.concatenate([t, np.zeros((1,) + t.shape[1:])])
        t = t[0::2] + t[1::2]
    return t[0] if len(t) else np.zeros(terms.shape[1:])


def coeffs_from_moments(I1, I2=None, p: int = 1):
    """``a1 = -I1`` and, for ``p = 2``, ``a2 = sym(I2) / 2``."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    a1 = -np.asarray(I1, dtype=float)
    if p == 1:
        return a1, None
    I2 = np.asarray(I2, dtype=float)
    return a1, 0.25 * (I2 + np.swapaxes(I2, -1, -2))


def discrete_b_from_moments(I, i: int, S) -> np.ndarray:
    """Solve ``I_{k..} = (-1)^i i! sum_{rho in S} b_{k,rho} rho^{(x) i}`` for ``b`` (least norm).

    ``S`` holds Cartesian generating vectors; returns ``b`` of shape ``(N, |S|)``.
    """
    S = np.asarray(S, dtype=float).reshape(-1, 2)
    I = np.asarray(I, dtype=float)
    N = I.shape[0]
    fac = (-1) ** i * (1 if i == 1 else 2)
    if i == 1:
        D = fac * S.T  # rows alpha
        rows = 2
        target = I.reshape(N, 2)
    elif i == 2:
        comps = [(0, 0), (0, 1), (1, 1)]
        D = fac * np.array([[s[a] * s[b] for s in S] for a, b in comps])
        rows = 3
        Isym = 0.5 * (I + np.swapaxes(I, -1, -2))
        target = np.stack([Isym[:, a, b] for a, b in comps], axis=1)
    else:
        raise ValueError("i must be 1 or 2")
    rank = np.linalg.matrix_rank(D)
    if rank < rows:
        raise RankDeficientError("generating set cannot represent the moment", D.shape[1] - rank)
    return np.linalg.lstsq(D, target.T, rcond=None)[0].T


class CMPField:
    """``u^CMP_i(x) = sum_{k,j} a1_{kj} d_j G_{ik}(x - x_hat)`` (+ ``a2_{kjl} d_j d_l G_{ik}``)."""

    def __init__(self, gf, core, a1, a2=None):
        self.gf = gf
        self.core = np.asarray(core, dtype=float)
        self.a1 = np.asarray(a1, dtype=float)
        self.a2 = None if a2 is None else np.asarray(a2, dtype=float)

    def tensor(self, order: int, x) -> np.ndarray:
        """``nabla^order u^CMP`` with shape ``(n, N) + (2,)*order``."""
        d = np.asarray(x, dtype=float) - self.core
        G1 = self.gf.tensor(order + 1, d)  # (n, N, N, 2, ...) with first derivative slot = j
        out = np.einsum("nikj...,kj->ni...", G1, self.a1)
        if self.a2 is not None:
            G2 = self.gf.tensor(order + 2, d)
            out = out + np.einsum("nikjl...,kjl->ni...", G2, self.a2)
        return out

    def __call__(self, x) -> np.ndarray:
        return self.tensor(0, x)


@dataclass
class MomentSet:
    I1: np.ndarray
    a1: np.ndarray
    R_used: float
    I2: np.ndarray | None = None
    a2: np.ndarray | None = None
    history: list = field(default_factory=list)
    converged: bool = True
    sweeps: int = 0

    def to_dict(self) -> dict:
        conv = lambda a: None if a is None else np.asarray(a).tolist()
        return {
            "I1": conv(self.I1), "a1": conv(self.a1), "I2": conv(self.I2), "a2": conv(self.a2),
            "R_used": self.R_used, "history": [conv(h) for h in self.history],
            "converged": self.converged, "sweeps": self.sweeps,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def moment_iteration(update: Callable[[np.ndarray], np.ndarray], a0, R: float,
                     tol_mom: float = 1e-8, max_iter: int = 8) -> MomentSet:
    """Fixed-point sweeps ``a <- update(a)`` with a Cauchy stopping rule.

    ``update(a)`` re-solves the cell problem with coefficients ``a`` and returns
    the new truncated moment ``I1``; the coefficient is ``-I1``.  Stops when
    ``max|a_new - a| < tol_mom * max(1, max|a_new|)``.  Raises
    ``DivergenceError`` when a step is non-finite or more than doubles the
    previous one.
    """
    a = np.asarray(a0, dtype=float)
    history = [a.copy()]
    I1 = -a
    prev_change = np.inf
    for sweep in range(1, max_iter + 1):
        I1 = np.asarray(update(a), dtype=float)
        a_new = -I1
        history.append(a_new.copy())
        nn = np.max(np.abs(a_new))
        change = np.max(np.abs(a_new - a))
        if not np.isfinite(change) or change > 2.0 * prev_change:
            raise DivergenceError(f"moment iteration diverged at sweep {sweep}", history)
        prev_change = change
        a = a_new
        if change < tol_mom * max(1.0, nn):
            return MomentSet(I1, a, R, history=history, converged=True, sweeps=sweep)
    return MomentSet(I1, a, R, history=history, converged=False, sweeps=max_iter)
