"""Site energies built from per-bond pair terms, and their Cauchy-Born tensors.

A site energy is ``V(Du) = sum_rho phi_rho(x_rho)`` where the bond argument
``x_rho`` is the scalar difference ``D_rho u`` for antiplane models (N=1) and
the bond stretch ``|A rho + D_rho u| - |A rho|`` for in-plane models (N=2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "CBTensors",
    "ExtrapolationError",
    "PairPotential",
    "SitePotential",
    "SymmetryError",
    "TabulatedPotential",
    "load_tabulated",
    "odd_angular_pattern",
]


class SymmetryError(ValueError):
    """Raised when cubic constants are requested from a non-cubic tensor."""

    def __init__(self, message: str, asymmetry: float):
        super().__init__(f"{message} (relative asymmetry {asymmetry:.3e})")
        self.asymmetry = asymmetry


class ExtrapolationError(ValueError):
    """Tabulated potential evaluated outside its knot range."""


def _sym(t: np.ndarray) -> np.ndarray:
    k = t.ndim
    perms = list(itertools.permutations(range(k)))
    return sum(np.transpose(t, p) for p in perms) / len(perms)


def _stretch_derivatives(rho: np.ndarray):
    """Derivatives of ``e(s) = |rho + s| - |rho|`` at ``s = 0`` up to order 4."""
    r = np.linalg.norm(rho)
    n = rho / r
    d = np.eye(2)
    e1 = n
    e2 = (d - np.outer(n, n)) / r
    dn = np.einsum("ij,k->ijk", d, n)
    e3 = -(dn + np.transpose(dn, (0, 2, 1)) + np.transpose(dn, (1, 2, 0))
           - 3.0 * np.einsum("i,j,k->ijk", n, n, n)) / r**2
    dd = np.einsum("ij,kl->ijkl", d, d)
    dnn = np.einsum("ij,k,l->ijkl", d, n, n)
    e4 = (-(dd + np.transpose(dd, (0, 2, 1, 3)) + np.transpose(dd, (0, 2, 3, 1)))
          + 6.0 * _sym(dnn)
          - 15.0 * np.einsum("i,j,k,l->ijkl", n, n, n, n)) / r**3
    return e1, e2, e3, e4


@dataclass
class CBTensors:
    """Cauchy-Born derivative tensors at F = 0, indexed ``(i, alpha, j, beta, ...)``."""

    c_vol: float
    C2: np.ndarray
    C3: np.ndarray
    C4: np.ndarray

    @property
    def components(self) -> int:
        return self.C2.shape[0]

    def matrix(self) -> np.ndarray:
        """C2 flattened to a ``(2N, 2N)`` matrix acting on flattened gradients."""
        n = self.components
        return self.C2.reshape(2 * n, 2 * n)

    def scalar_matrix(self) -> np.ndarray:
        """The 2x2 conductivity-type matrix of an antiplane model."""
        if self.components != 1:
            raise ValueError("scalar_matrix only defined for N = 1")
        return self.C2[0, :, 0, :]

    def cubic_constants(self, rtol: float = 1e-10) -> tuple[float, float, float]:
        """Return ``(C11, C12, C44)`` for an N = 2 tensor with cubic symmetry."""
        if self.components != 2:
            raise ValueError("cubic constants need N = 2")
        C = self.C2
        c11, c12, c44 = C[0, 0, 0, 0], C[0, 0, 1, 1], C[0, 1, 0, 1]
        ref = np.zeros_like(C)
        ref[0, 0, 0, 0] = ref[1, 1, 1, 1] = c11
        ref[0, 0, 1, 1] = ref[1, 1, 0, 0] = c12
        for idx in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)]:
            ref[idx] = c44
        scale = np.max(np.abs(C))
        asym = float(np.max(np.abs(C - ref)) / scale)
        if asym > rtol:
            raise SymmetryError("elasticity tensor is not cubic", asym)
        return float(c11), float(c12), float(c44)


class SitePotential:
    """Base class: a sum of per-bond terms over the interaction range.

    Subclasses provide ``phi(x, deriv)`` evaluated per offset (last axis of
    ``x`` runs over the offsets) and ``derivatives_at_zero()``.
    """

    kind = "abstract"

    def __init__(self, offsets, basis, components: int):
        self.offsets = np.asarray(offsets, dtype=int)
        self.basis = np.asarray(basis, dtype=float)
        self.cart = self.offsets @ self.basis.T
        self.components = int(components)
        if self.components not in (1, 2):
            raise ValueError("components must be 1 or 2")
        self.c_vol = abs(float(np.linalg.det(self.basis)))
        self.bond_length = np.linalg.norm(self.cart, axis=1)

    # per-offset scalar profile ------------------------------------------------
    def phi(self, x: np.ndarray, deriv: int = 0) -> np.ndarray:
        raise NotImplementedError

    def derivatives_at_zero(self) -> np.ndarray:
        """Array ``(K, 5)`` of ``phi_rho^(k)(0)``, k = 0..4."""
        raise NotImplementedError

    def phi_bond(self, x: np.ndarray, r: np.ndarray, deriv: int = 0) -> np.ndarray:
        """``phi_{rho_r}^{(deriv)}(x)`` for a flat list of bonds with offset indices ``r``."""
        x = np.asarray(x, dtype=float)
        r = np.asarray(r)
        out = np.empty_like(x)
        K = len(self.offsets)
        for q in np.unique(r):
            sel = r == q
            full = np.zeros((int(sel.sum()), K))
            full[:, q] = x[sel]
            out[sel] = self.phi(full, deriv)[:, q]
        return out

    # bond arguments -------------------------------------------------------------
    def bond_argument(self, stencil: np.ndarray):
        """Return the per-offset argument and its gradient w.r.t. the stencil.

        ``stencil`` has shape ``(..., K, N)``.  The gradient has the same shape.
        """
        stencil = np.asarray(stencil, dtype=float)
        if self.components == 1:
            return stencil[..., 0], np.ones_like(stencil)
        y = self.cart + stencil
        ly = np.linalg.norm(y, axis=-1)
        return ly - self.bond_length, y / ly[..., None]

    def site_energy(self, stencil) -> float:
        x, _ = self.bond_argument(stencil)
        return float(np.sum(self.phi(x, 0), axis=-1))

    def site_gradient(self, stencil) -> np.ndarray:
        x, dx = self.bond_argument(stencil)
        return self.phi(x, 1)[..., None] * dx

    def site_hessian_at_zero(self) -> np.ndarray:
        """``nabla^2 V(0)`` as a ``(K*N, K*N)`` matrix (block diagonal for pair terms)."""
        K, N = len(self.offsets), self.components
        d2 = self.derivatives_at_zero()[:, 2]
        out = np.zeros((K * N, K * N))
        for r in range(K):
            if N == 1:
                blk = np.array([[d2[r]]])
            else:
                n = self.cart[r] / self.bond_length[r]
                blk = d2[r] * np.outer(n, n)
            out[r * N:(r + 1) * N, r * N:(r + 1) * N] = blk
        return out

    def bond_stiffness_at_zero(self) -> np.ndarray:
        """Per-offset ``(N, N)`` blocks of ``nabla^2 V(0)``."""
        K, N = len(self.offsets), self.components
        H = self.site_hessian_at_zero()
        return np.stack([H[r * N:(r + 1) * N, r * N:(r + 1) * N] for r in range(K)])

    # Cauchy-Born ---------------------------------------------------------------
    def cb_density(self, F) -> float:
        F = np.asarray(F, dtype=float).reshape(self.components, 2)
        stencil = self.cart @ F.T
        return self.site_energy(stencil) / self.c_vol

    def _bond_taylor(self, r: int):
        """Derivative tensors (orders 2..4) of the bond term w.r.t. the bond vector."""
        p = self.derivatives_at_zero()[r]
        if self.components == 1:
            return [np.full((1,) * k, p[k]) for k in (2, 3, 4)]
        e1, e2, e3, e4 = _stretch_derivatives(self.cart[r])
        p1, p2, p3, p4 = p[1], p[2], p[3], p[4]
        g2 = p2 * np.outer(e1, e1) + p1 * e2
        g3 = (p3 * np.einsum("i,j,k->ijk", e1, e1, e1)
              + 3.0 * p2 * _sym(np.einsum("ij,k->ijk", e2, e1)) + p1 * e3)
        g4 = (p4 * np.einsum("i,j,k,l->ijkl", e1, e1, e1, e1)
              + 6.0 * p3 * _sym(np.einsum("ij,k,l->ijkl", e2, e1, e1))
              + p2 * (3.0 * _sym(np.einsum("ij,kl->ijkl", e2, e2))
                      + 4.0 * _sym(np.einsum("ijk,l->ijkl", e3, e1)))
              + p1 * e4)
        return [g2, g3, g4]

    def cb_tensors(self) -> CBTensors:
        N = self.components
        acc = {2: 0.0, 3: 0.0, 4: 0.0}
        for r in range(len(self.offsets)):
            rho = self.cart[r]
            for k, g in zip((2, 3, 4), self._bond_taylor(r)):
                # C_k[(i1,a1),...,(ik,ak)] = g[i1..ik] rho_a1 ... rho_ak
                t = g
                for _ in range(k):
                    t = np.multiply.outer(t, rho)
                # reorder (i1..ik, a1..ak) -> (i1,a1,...,ik,ak)
                order = [ax for pair in zip(range(k), range(k, 2 * k)) for ax in pair]
                acc[k] = acc[k] + np.transpose(t, order)
        shape = lambda k: (N, 2) * k
        return CBTensors(
            c_vol=self.c_vol,
            C2=np.asarray(acc[2]).reshape(shape(2)) / self.c_vol,
            C3=np.asarray(acc[3]).reshape(shape(3)) / self.c_vol,
            C4=np.asarray(acc[4]).reshape(shape(4)) / self.c_vol,
        )


def odd_angular_pattern(cart: np.ndarray) -> np.ndarray:
    """``cos 3phi + sin 3phi`` per bond: odd under rho -> -rho, invariant under 120 deg."""
    phi = np.arctan2(cart[:, 1], cart[:, 0])
    return np.round(np.cos(3 * phi) + np.sin(3 * phi), 12)


class PairPotential(SitePotential):
    """``phi_rho(x) = k/2 x^2 + alpha x^3 + beta/4 x^4`` with per-offset coefficients.

    For N = 1 the point symmetry ``V(A) = V((-A_{-rho})_rho)`` requires
    ``alpha_{-rho} = -alpha_rho``; this is checked at construction.
    """

    kind = "pair_nonlinear"

    def __init__(self, offsets, basis, components, k, alpha, beta):
        super().__init__(offsets, basis, components)
        K = len(self.offsets)
        self.k = np.broadcast_to(np.asarray(k, dtype=float), (K,)).copy()
        self.alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (K,)).copy()
        self.beta = np.broadcast_to(np.asarray(beta, dtype=float), (K,)).copy()
        if np.any(self.k <= 0):
            raise ValueError("pair stiffness must be positive")
        self._check_point_symmetry()

    def _check_point_symmetry(self):
        index = {tuple(o): r for r, o in enumerate(self.offsets)}
        sign = -1.0 if self.components == 1 else 1.0
        for r, o in enumerate(self.offsets):
            m = index.get(tuple(-o))
            if m is None:
                raise ValueError(f"interaction range not closed under negation: {tuple(o)}")
            if (not math.isclose(self.k[r], self.k[m]) or not math.isclose(self.beta[r], self.beta[m])
                    or not math.isclose(self.alpha[r], sign * self.alpha[m], abs_tol=1e-15)):
                raise ValueError(f"coefficients violate point symmetry at offset {tuple(o)}")

    @classmethod
    def from_shells(cls, offsets, basis, components, shell, k, alpha, beta, alpha_pattern=None):
        """Build from per-shell coefficients; ``alpha_pattern`` multiplies alpha per bond."""
        shell = np.asarray(shell, dtype=int)
        k = np.asarray(k, dtype=float)[shell]
        a = np.asarray(alpha, dtype=float)[shell]
        b = np.asarray(beta, dtype=float)[shell]
        if alpha_pattern is not None:
            a = a * alpha_pattern
        return cls(offsets, basis, components, k, a, b)

    def phi(self, x, deriv=0):
        return self._poly(x, self.k, self.alpha, self.beta, deriv)

    def phi_bond(self, x, r, deriv=0):
        return self._poly(np.asarray(x, dtype=float), self.k[r], self.alpha[r], self.beta[r], deriv)

    @staticmethod
    def _poly(x, k, a, b, deriv):
        if deriv == 0:
            return 0.5 * k * x**2 + a * x**3 + 0.25 * b * x**4
        if deriv == 1:
            return k * x + 3 * a * x**2 + b * x**3
        if deriv == 2:
            return k + 6 * a * x + 3 * b * x**2
        if deriv == 3:
            return 6 * a + 6 * b * x
        if deriv == 4:
            return 6 * b + 0 * x
        raise ValueError("deriv must be 0..4")

    def derivatives_at_zero(self):
        return np.stack([np.zeros_like(self.k), np.zeros_like(self.k), self.k,
                         6 * self.alpha, 6 * self.beta], axis=1)

    def coefficient_arrays(self):
        return self.k, self.alpha, self.beta


class TabulatedPotential(SitePotential):
    """Per-offset cubic-spline profiles with a quartic patch around 0.

    Each table is tilted so that ``phi(0) = phi'(0) = 0``.  Within
    ``|x| <= blend`` the profile is replaced by a least-squares quartic through
    the neighbouring knots, which makes the derivatives at 0 well defined up to
    fourth order.
    """

    kind = "tabulated"

    def __init__(self, offsets, basis, components, tables, blend: float | None = None, fit_points: int = 5):
        super().__init__(offsets, basis, components)
        self._splines = []
        self._quartic = np.zeros((len(self.offsets), 5))
        self._range = np.zeros((len(self.offsets), 2))
        self.blend = np.zeros(len(self.offsets))
        for r, (s, v) in enumerate(tables):
            s = np.asarray(s, dtype=float)
            v = np.asarray(v, dtype=float)
            order = np.argsort(s)
            s, v = s[order], v[order]
            if not (s[0] < 0.0 < s[-1]):
                raise ValueError("table must bracket x = 0")
            near = np.argsort(np.abs(s))[: 2 * fit_points]
            coef = np.polynomial.polynomial.polyfit(s[near], v[near], 4)
            tilt = coef[:2].copy()
            v = v - tilt[0] - tilt[1] * s
            coef[:2] = 0.0
            self._quartic[r] = coef
            self._splines.append(CubicSpline(s, v, bc_type="not-a-knot"))
            self._range[r] = (s[0], s[-1])
            self.blend[r] = blend if blend is not None else np.max(np.abs(s[near])) / 2.0

    def phi(self, x, deriv=0):
        x = np.asarray(x, dtype=float)
        out = np.empty(np.broadcast_shapes(x.shape, (len(self.offsets),)))
        xb = np.broadcast_to(x, out.shape)
        for r in range(len(self.offsets)):
            xr = xb[..., r]
            lo, hi = self._range[r]
            if np.any(xr < lo) or np.any(xr > hi):
                raise ExtrapolationError(
                    f"offset {tuple(self.offsets[r])}: argument outside table [{lo}, {hi}]")
            poly = np.polynomial.Polynomial(self._quartic[r]).deriv(deriv)
            inner = np.abs(xr) <= self.blend[r]
            out[..., r] = np.where(inner, poly(xr), self._splines[r](xr, deriv) if deriv <= 3 else 0.0)
        return out

    def derivatives_at_zero(self):
        c = self._quartic
        fact = np.array([1, 1, 2, 6, 24], dtype=float)
        return c * fact


def load_tabulated(path, lattice) -> TabulatedPotential:
    """Read a tabulated potential file.

    Format: blocks introduced by a header line ``shell <rho_x> <rho_y>`` (integer
    lattice offsets) followed by ``x value`` pairs.  ``#`` starts a comment.
    Offsets must cover the lattice interaction range.
    """
    blocks: dict[tuple[int, int], list[tuple[float, float]]] = {}
    current = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "shell":
            current = (int(parts[1]), int(parts[2]))
            blocks[current] = []
        else:
            if current is None:
                raise ValueError(f"{path}: data before first 'shell' header")
            blocks[current].append((float(parts[0]), float(parts[1])))
    tables = []
    for o in lattice.offsets:
        key = (int(o[0]), int(o[1]))
        if key not in blocks:
            raise ValueError(f"{path}: no table for offset {key}")
        arr = np.array(blocks[key])
        tables.append((arr[:, 0], arr[:, 1]))
    return TabulatedPotential(lattice.offsets, lattice.basis, lattice.components, tables)
