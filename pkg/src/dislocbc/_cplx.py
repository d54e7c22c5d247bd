"""Closed-form spatial derivatives of fields written as ``Re(sum c_k f_k(z))``.

Every analytic field used by the far-field predictors and continuum Green's
functions in 2D is a real part of a short combination of ``log z`` and
monomials ``z**a * conj(z)**b``.  Derivatives of any order follow from the
Wirtinger calculus, ``d/dx = d/dz + d/dzbar`` and ``d/dy = i (d/dz - d/dzbar)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np


def _falling(a: int, s: int) -> float:
    out = 1.0
    for k in range(s):
        out *= a - k
    return out


@dataclass
class ReSeries:
    """Real part of a linear combination of ``log z`` and ``z^a zbar^b`` terms."""

    logs: complex = 0.0
    monomials: list[tuple[complex, int, int]] = field(default_factory=list)

    def scaled(self, factor: complex) -> "ReSeries":
        return ReSeries(self.logs * factor, [(c * factor, a, b) for c, a, b in self.monomials])

    def __add__(self, other: "ReSeries") -> "ReSeries":
        return ReSeries(self.logs + other.logs, self.monomials + other.monomials)

    def _zz_derivative(self, s: int, t: int, z: np.ndarray, theta) -> np.ndarray:
        out = np.zeros(np.shape(z), dtype=complex)
        if self.logs != 0.0 and t == 0:
            if s == 0:
                if theta is None:
                    raise ValueError("value of a log term needs an explicit branch angle")
                out += self.logs * (np.log(np.abs(z)) + 1j * theta)
            else:
                out += self.logs * ((-1) ** (s - 1) * factorial(s - 1)) * z ** (-s)
        zb = np.conj(z)
        for c, a, b in self.monomials:
            fa = _falling(a, s)
            fb = _falling(b, t)
            if fa == 0.0 or fb == 0.0:
                continue
            out += c * fa * fb * z ** (a - s) * zb ** (b - t)
        return out

    def derivative(self, p: int, q: int, z, theta=None) -> np.ndarray:
        """``d^p/dx^p d^q/dy^q`` of the real field at complex points ``z``."""
        z = np.asarray(z, dtype=complex)
        total = np.zeros(z.shape, dtype=complex)
        for j in range(p + 1):
            for k in range(q + 1):
                w = comb(p, j) * comb(q, k) * (-1) ** (q - k)
                total += w * self._zz_derivative(j + k, p - j + q - k, z, theta)
        return np.real((1j) ** q * total)

    def tensor(self, order: int, z, theta=None) -> np.ndarray:
        """Full symmetric derivative tensor, shape ``z.shape + (2,)*order``."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape + (2,) * order)
        cache: dict[int, np.ndarray] = {}
        for idx in itertools.product(range(2), repeat=order):
            q = sum(idx)
            if q not in cache:
                cache[q] = self.derivative(order - q, q, z, theta)
            out[(Ellipsis,) + idx] = cache[q]
        return out


def angle_from_cut(dx, dy) -> np.ndarray:
    """Polar angle in ``(0, 2*pi)`` measured from the +x axis (the branch cut)."""
    theta = np.arctan2(dy, dx)
    return np.where(theta < 0.0, theta + 2.0 * np.pi, theta)


def log_term(coef: complex) -> ReSeries:
    return ReSeries(logs=coef)


def mono(coef: complex, a: int, b: int) -> ReSeries:
    return ReSeries(monomials=[(coef, a, b)])


# Building blocks (all real fields)
THETA = log_term(-1j)            # arg z
LOG_R = log_term(1.0)            # ln |z|
COS2 = mono(1.0, 1, -1)          # cos 2 theta = Re(z / zbar)
SIN2 = mono(-1j, 1, -1)          # sin 2 theta = Im(z / zbar)
