"""2D projected Bravais lattices, slip-aware bond tables, energy, forces and Hessians.

Sites are integer pairs ``l`` with positions ``A l``.  The dislocation core
``x_hat`` sits off-lattice; the branch cut is the half-line
``{x : x_2 = x_hat_2, x_1 >= x_hat_1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import kernels
from .potential import PairPotential, SitePotential

__all__ = [
    "BondTable",
    "EvaluationError",
    "Field",
    "LatticeSpec",
    "SiteIndex",
    "UnsupportedConfiguration",
    "assemble_hessian",
    "assemble_reference_hessian",
    "cut_crossing",
    "energy_difference",
    "gradient",
    "hessian_apply",
    "sites_in_ball",
    "slip_apply",
    "stencil",
]


class EvaluationError(FloatingPointError):
    """Non-finite site energy; the line search treats this as a failed step."""


class UnsupportedConfiguration(ValueError):
    """Operation not defined for this lattice/dislocation combination."""


@dataclass(frozen=True)
class LatticeSpec:
    """Bravais basis, interaction range (lattice offsets), component count and core."""

    basis: np.ndarray
    offsets: np.ndarray
    components: int
    core: np.ndarray
    shell: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.basis, dtype=float).reshape(2, 2)
        R = np.asarray(self.offsets, dtype=int).reshape(-1, 2)
        core = np.asarray(self.core, dtype=float).reshape(2)
        shell = np.zeros(len(R), dtype=int) if self.shell is None else np.asarray(self.shell, dtype=int)
        object.__setattr__(self, "basis", A)
        object.__setattr__(self, "offsets", R)
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "shell", shell)
        if abs(np.linalg.det(A)) < 1e-12:
            raise ValueError("lattice basis is singular")
        if self.components not in (1, 2):
            raise ValueError("components must be 1 or 2")
        keys = {tuple(o) for o in R}
        if any((-o[0], -o[1]) not in keys for o in R) or (0, 0) in keys:
            raise ValueError("interaction range must be closed under negation and exclude 0")
        minors = {abs(int(R[i, 0] * R[j, 1] - R[i, 1] * R[j, 0])) for i in range(len(R)) for j in range(len(R))}
        if np.gcd.reduce(list(minors)) != 1:
            raise ValueError("interaction range does not span the lattice")
        self._check_cut()

    def _check_cut(self, box: int = 200):
        i = np.arange(-box, box + 1)
        I, J = np.meshgrid(i, i, indexing="ij")
        pos = np.stack([I.ravel(), J.ravel()], axis=1) @ self.basis.T
        on_line = np.abs(pos[:, 1] - self.core[1]) < 1e-12
        if np.any(on_line & (pos[:, 0] >= self.core[0] - 1e-12)):
            raise ValueError("branch cut passes through a lattice site; move the core")
        # a bond through the core has an ambiguous slip-aware difference (+-b/2)
        near = pos[np.linalg.norm(pos - self.core, axis=1) <= self.max_range + 1]
        P = np.repeat(near, len(R := self.cart), axis=0)
        D = np.tile(R, (len(near), 1))
        t = np.clip(np.einsum("na,na->n", self.core - P, D) / np.einsum("na,na->n", D, D), 0.0, 1.0)
        if np.min(np.linalg.norm(P + t[:, None] * D - self.core, axis=1)) < 1e-9:
            raise ValueError("a bond passes through the dislocation core; move the core")

    @property
    def cart(self) -> np.ndarray:
        return self.offsets @ self.basis.T

    @property
    def max_range(self) -> float:
        return float(np.max(np.linalg.norm(self.cart, axis=1)))

    @property
    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    def positions(self, sites) -> np.ndarray:
        return np.asarray(sites, dtype=float) @ self.basis.T

    @classmethod
    def triangular(cls, shells: int = 3, components: int = 1, core_frac=(0.65, 0.45)) -> "LatticeSpec":
        """Triangular lattice with the first ``shells`` neighbour shells (1 to 3)."""
        A = np.array([[1.0, 0.5], [0.0, np.sqrt(3.0) / 2.0]])
        return cls._with_shells(A, shells, components, core_frac)

    @classmethod
    def square(cls, shells: int = 1, components: int = 1, core_frac=(0.65, 0.45)) -> "LatticeSpec":
        """Square lattice with the first ``shells`` neighbour shells (1 or 2)."""
        return cls._with_shells(np.eye(2), shells, components, core_frac)

    @classmethod
    def _with_shells(cls, A, shells, components, core_frac):
        i = np.arange(-4, 5)
        I, J = np.meshgrid(i, i, indexing="ij")
        cand = np.stack([I.ravel(), J.ravel()], axis=1)
        cand = cand[np.any(cand != 0, axis=1)]
        d = np.round(np.linalg.norm(cand @ A.T, axis=1), 10)
        levels = np.unique(d)[:shells]
        keep = np.isin(d, levels)
        off, dist = cand[keep], d[keep]
        ang = np.arctan2(*(off @ A.T)[:, ::-1].T) % (2 * np.pi)
        order = np.lexsort((np.round(ang, 10), dist))
        off, dist = off[order], dist[order]
        shell = np.searchsorted(levels, dist)
        core = A @ np.asarray(core_frac, dtype=float)
        return cls(A, off, components, core, shell)


class SiteIndex:
    """Vectorized lookup of integer sites in a sorted table."""

    _SHIFT = 1 << 20

    def __init__(self, sites):
        self.sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
        keys = self._key(self.sites)
        self._order = np.argsort(keys, kind="stable")
        self._keys = keys[self._order]

    @classmethod
    def _key(cls, s):
        s = np.asarray(s, dtype=np.int64)
        return (s[..., 0] + cls._SHIFT) * (2 * cls._SHIFT) + (s[..., 1] + cls._SHIFT)

    def lookup(self, query) -> np.ndarray:
        """Row index for each query site, ``-1`` where absent."""
        q = self._key(query)
        if len(self._keys) == 0:
            return np.full(q.shape, -1, dtype=np.int64)
        pos = np.searchsorted(self._keys, q)
        pos = np.clip(pos, 0, len(self._keys) - 1)
        hit = self._keys[pos] == q
        return np.where(hit, self._order[pos], -1)

    def __len__(self):
        return len(self.sites)


def _lexsort_sites(sites: np.ndarray) -> np.ndarray:
    sites = np.unique(np.asarray(sites, dtype=np.int64).reshape(-1, 2), axis=0)
    return sites


def sites_in_ball(spec: LatticeSpec, radius: float, include_buffer: bool = False, center=None) -> np.ndarray:
    """All sites with ``|A l - x_hat| <= radius`` (plus one interaction range).

    Returned as an ``(n, 2)`` integer array in lexicographic order.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = spec.core if center is None else np.asarray(center, dtype=float)
    rad = radius + (spec.max_range if include_buffer else 0.0)
    Ainv = np.linalg.inv(spec.basis)
    # bounding box in lattice coordinates
    ext = rad * np.linalg.norm(Ainv, axis=1) + 2
    c_lat = Ainv @ c
    lo = np.floor(c_lat - ext).astype(int)
    hi = np.ceil(c_lat + ext).astype(int)
    I, J = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    cand = np.stack([I.ravel(), J.ravel()], axis=1)
    d = np.linalg.norm(cand @ spec.basis.T - c, axis=1)
    return _lexsort_sites(cand[d <= rad + 1e-12])


def cut_crossing(spec: LatticeSpec, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """+1 where the bond start->end crosses the cut upwards, -1 downwards, else 0."""
    p = np.asarray(start, dtype=float)
    q = np.asarray(end, dtype=float)
    dyp = p[..., 1] - spec.core[1]
    dyq = q[..., 1] - spec.core[1]
    straddle = dyp * dyq < 0
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(straddle, dyp / (dyp - dyq), 0.0)
    xc = p[..., 0] + t * (q[..., 0] - p[..., 0])
    hit = straddle & (xc >= spec.core[0])
    return np.where(hit, np.where(dyp < 0, 1, -1), 0).astype(int)


@dataclass
class BondTable:
    """Slip-aware directed bonds ``(l, partner(l, rho))`` for a list of centre sites.

    A bond crossing the cut upwards is redirected to ``l + rho + b12`` and its
    difference shifted by ``+b``; downwards to ``l + rho - b12`` with ``-b``.
    """

    spec: LatticeSpec
    centres: np.ndarray
    all_sites: np.ndarray
    site_idx: np.ndarray
    partner: np.ndarray
    jump: np.ndarray

    @classmethod
    def build(cls, spec: LatticeSpec, centres, burgers=None, b12=(0, 0)) -> "BondTable":
        centres = np.asarray(centres, dtype=np.int64).reshape(-1, 2)
        N = spec.components
        burgers = np.zeros(N) if burgers is None else np.asarray(burgers, dtype=float).reshape(N)
        b12 = np.asarray(b12, dtype=np.int64).reshape(2)
        ends = centres[:, None, :] + spec.offsets[None, :, :]
        cross = cut_crossing(spec, spec.positions(centres)[:, None, :], spec.positions(ends))
        if np.any(burgers != 0):
            ends = ends + cross[..., None] * b12
            jump = cross[..., None] * burgers
        else:
            jump = np.zeros(ends.shape[:2] + (N,))
        all_sites = _lexsort_sites(np.concatenate([centres, ends.reshape(-1, 2)]))
        index = SiteIndex(all_sites)
        return cls(spec, centres, all_sites, index.lookup(centres), index.lookup(ends), jump)

    def stencils(self, U_all: np.ndarray) -> np.ndarray:
        """``(n, K, N)`` slip-aware differences for values on ``all_sites``."""
        U_all = np.asarray(U_all, dtype=float).reshape(len(self.all_sites), -1)
        return U_all[self.partner] - U_all[self.site_idx][:, None, :] + self.jump

    def energy_gradient(self, potential: SitePotential, U_all, want_grad: bool = True):
        """Total ``sum_l V(D u(l))`` over the centres and its gradient on ``all_sites``."""
        U_all = np.asarray(U_all, dtype=float).reshape(len(self.all_sites), -1)
        if isinstance(potential, PairPotential):
            E, G = kernels.pair_energy_gradient(U_all, self.site_idx, self.partner, self.jump,
                                                potential.cart, *potential.coefficient_arrays(),
                                                want_grad=want_grad)
        else:
            s = self.stencils(U_all)
            E = float(np.sum(potential.phi(potential.bond_argument(s)[0], 0)))
            G = None
            if want_grad:
                g = potential.site_gradient(s)
                m = len(self.all_sites)
                G = np.empty((m, U_all.shape[1]))
                for c in range(U_all.shape[1]):
                    G[:, c] = (np.bincount(self.partner.ravel(), g[..., c].ravel(), minlength=m)
                               - np.bincount(self.site_idx, g[..., c].sum(axis=1), minlength=m))
        if not np.isfinite(E):
            raise EvaluationError("non-finite site energy")
        return E, G

    def site_energies(self, potential: SitePotential, U_all) -> np.ndarray:
        s = self.stencils(U_all)
        return np.sum(potential.phi(potential.bond_argument(s)[0], 0), axis=-1)


@dataclass
class Field:
    """Displacement ``u = predictor + corrector`` on the lattice.

    ``predictor`` maps ``(n, 2)`` Cartesian points to ``(n, N)`` values; the
    corrector is stored on ``sites`` and is zero elsewhere.
    """

    spec: LatticeSpec
    predictor: Callable[[np.ndarray], np.ndarray]
    sites: np.ndarray
    corrector: np.ndarray
    free_radius: float
    burgers: np.ndarray | None = None
    b12: tuple = (0, 0)

    def __post_init__(self):
        self.sites = np.asarray(self.sites, dtype=np.int64).reshape(-1, 2)
        N = self.spec.components
        self.corrector = np.asarray(self.corrector, dtype=float).reshape(len(self.sites), N)
        self._index = SiteIndex(self.sites)
        d = np.linalg.norm(self.spec.positions(self.sites) - self.spec.core, axis=1)
        outside = d > self.free_radius + 1e-12
        if np.any(self.corrector[outside] != 0.0):
            raise ValueError("corrector must vanish outside the free radius")

    def corrector_at(self, sites) -> np.ndarray:
        idx = self._index.lookup(sites)
        out = np.zeros((len(idx), self.spec.components))
        ok = idx >= 0
        out[ok] = self.corrector[idx[ok]]
        return out

    def __call__(self, sites) -> np.ndarray:
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
        pred = np.asarray(self.predictor(self.spec.positions(sites)), dtype=float).reshape(len(sites), -1)
        return pred + self.corrector_at(sites)

    def table(self, centres) -> BondTable:
        return BondTable.build(self.spec, centres, self.burgers, self.b12)


def stencil(u: Field, site) -> dict:
    """Slip-aware stencil ``{rho: D_rho u(l)}`` at a single site."""
    tab = u.table(np.asarray(site).reshape(1, 2))
    s = tab.stencils(u(tab.all_sites))[0]
    return {tuple(int(v) for v in o): s[r] for r, o in enumerate(u.spec.offsets)}


def energy_difference(u: Field, domain, potential: SitePotential) -> float:
    """``sum_{l in domain} [V(D u(l)) - V(D u_0(l))]`` with ``u_0`` the predictor alone."""
    tab = u.table(domain)
    U = u(tab.all_sites)
    U0 = np.asarray(u.predictor(u.spec.positions(tab.all_sites)), dtype=float).reshape(U.shape)
    return tab.energy_gradient(potential, U, False)[0] - tab.energy_gradient(potential, U0, False)[0]


def gradient(u: Field, free_sites, potential: SitePotential) -> np.ndarray:
    """``dE/du(l)`` at the free sites, flattened as ``(l, k)``."""
    free_sites = np.asarray(free_sites, dtype=np.int64).reshape(-1, 2)
    spec = u.spec
    b12 = np.asarray(u.b12, dtype=np.int64)
    shifts = np.concatenate([np.zeros((1, 2), np.int64), -spec.offsets, -spec.offsets + b12, -spec.offsets - b12])
    # superset of the centres whose stencils reach a free site
    domain = _lexsort_sites((free_sites[:, None, :] + shifts[None]).reshape(-1, 2))
    tab = u.table(domain)
    _, G = tab.energy_gradient(potential, u(tab.all_sites))
    idx = SiteIndex(tab.all_sites).lookup(free_sites)
    return G[idx].ravel()


def _compact_support(spec, sites):
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    return _lexsort_sites(np.concatenate([sites, (sites[:, None] + spec.offsets[None]).reshape(-1, 2)]))


def hessian_apply(spec: LatticeSpec, potential: SitePotential, sites, values):
    """Apply ``H[v](l) = sum_rho [A_rho(l - rho) - A_rho(l)]``, ``A_rho = nabla^2 V(0)[Dv]``.

    Returns ``(out_sites, out_values)`` with ``out_sites`` the support of ``v``
    dilated by two interaction ranges.
    """
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    N = spec.components
    v = np.asarray(values, dtype=float).reshape(len(sites), N)
    Kb = potential.bond_stiffness_at_zero()
    ring1 = _compact_support(spec, sites)
    ring2 = _compact_support(spec, ring1)
    idx_v = SiteIndex(sites)

    def val(q):
        i = idx_v.lookup(q)
        out = np.zeros(q.shape[:-1] + (N,))
        out[i >= 0] = v[i[i >= 0]]
        return out

    # A_rho(l) on ring1 (zero elsewhere since Dv vanishes there)
    V1 = val(ring1)
    D = val(ring1[:, None, :] + spec.offsets[None]) - V1[:, None, :]
    Arho = np.einsum("rij,nrj->nri", Kb, D)
    idx1 = SiteIndex(ring1)
    out = np.zeros((len(ring2), N))
    for r, o in enumerate(spec.offsets):
        j = idx1.lookup(ring2 - o)
        ok = j >= 0
        out[ok] += Arho[j[ok], r]
    j = idx1.lookup(ring2)
    ok = j >= 0
    out[ok] -= Arho[j[ok]].sum(axis=1)
    return ring2, out


def _bond_pairs(spec, free_sites):
    """Directed bonds touching ``free_sites``: start/end indices into free list (-1 = clamped)."""
    free_sites = np.asarray(free_sites, dtype=np.int64).reshape(-1, 2)
    idx = SiteIndex(free_sites)
    ext = _lexsort_sites(np.concatenate([free_sites, (free_sites[:, None] - spec.offsets[None]).reshape(-1, 2)]))
    ends = ext[:, None, :] + spec.offsets[None]
    i = np.repeat(idx.lookup(ext)[:, None], len(spec.offsets), axis=1)
    j = idx.lookup(ends)
    r = np.broadcast_to(np.arange(len(spec.offsets)), i.shape)
    keep = (i >= 0) | (j >= 0)
    return i[keep], j[keep], r[keep]


def _assemble_blocks(i, j, blocks, n, N):
    """Sum ``g g^T (x) block`` with ``g = e_j - e_i`` over bonds; -1 indices are dropped."""
    rows, cols, vals = [], [], []
    for (a, sa), (b, sb) in [((i, 1), (i, 1)), ((j, 1), (j, 1)), ((i, 1), (j, -1)), ((j, -1), (i, 1))]:
        ok = (a >= 0) & (b >= 0)
        for p in range(N):
            for q in range(N):
                rows.append(a[ok] * N + p)
                cols.append(b[ok] * N + q)
                vals.append(sa * sb * blocks[ok, p, q])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n * N, n * N))


def assemble_reference_hessian(spec: LatticeSpec, potential: SitePotential, free_sites) -> sp.csr_matrix:
    """Reference Hessian restricted to ``free_sites`` (all other sites clamped to 0)."""
    i, j, r = _bond_pairs(spec, free_sites)
    Kb = potential.bond_stiffness_at_zero()
    return _assemble_blocks(i, j, Kb[r], len(free_sites), spec.components)


def bond_hessian_blocks(potential: SitePotential, s: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Per-bond ``d^2 phi_rho / ds^2`` blocks at stencil entries ``s`` (shape (n, N))."""
    if potential.components == 1:
        x = s[:, 0]
        return potential.phi_bond(x, r, 2)[:, None, None]
    y = potential.cart[r] + s
    L = np.linalg.norm(y, axis=1)
    n = y / L[:, None]
    x = L - potential.bond_length[r]
    d1 = potential.phi_bond(x, r, 1)
    d2 = potential.phi_bond(x, r, 2)
    nn = np.einsum("bi,bj->bij", n, n)
    return d2[:, None, None] * nn + (d1 / L)[:, None, None] * (np.eye(2) - nn)


def assemble_hessian(table: BondTable, potential: SitePotential, U_all, free_rows) -> sp.csr_matrix:
    """Nonlinear Hessian of ``sum_l V(D u(l))`` w.r.t. ``U_all[free_rows]``.

    ``free_rows`` lists rows of ``table.all_sites`` that are free, in the order
    of the returned matrix.
    """
    N = potential.components
    m = len(table.all_sites)
    pos = np.full(m, -1, dtype=np.int64)
    pos[np.asarray(free_rows)] = np.arange(len(free_rows))
    s = table.stencils(U_all)
    n, K = table.partner.shape
    i = np.repeat(pos[table.site_idx], K)
    j = pos[table.partner.ravel()]
    r = np.tile(np.arange(K), n)
    keep = (i >= 0) | (j >= 0)
    blocks = bond_hessian_blocks(potential, s.reshape(-1, N)[keep], r[keep])
    return _assemble_blocks(i[keep], j[keep], blocks, len(free_rows), N)


def slip_apply(spec: LatticeSpec, sites, values, b12, mode: str = "S", fill: float = np.nan) -> np.ndarray:
    """Slip operator ``S`` (or its inverse ``R``) on a stored field.

    ``S u(l) = u(l)`` above the cut and ``u(l - b12)`` below it; ``R`` uses
    ``l + b12``.  Values missing from the table are set to ``fill``.
    """
    if spec.components != 2:
        raise UnsupportedConfiguration("slip operator requires N = 2 (edge dislocation)")
    if mode not in ("S", "R"):
        raise ValueError("mode must be 'S' or 'R'")
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    v = np.asarray(values, dtype=float).reshape(len(sites), -1)
    below = spec.positions(sites)[:, 1] < spec.core[1]
    shift = np.asarray(b12, dtype=np.int64) * (1 if mode == "S" else -1)
    src = np.where(below[:, None], sites - shift, sites)
    idx = SiteIndex(sites).lookup(src)
    out = np.full_like(v, fill)
    out[idx >= 0] = v[idx[idx >= 0]]
    return out
