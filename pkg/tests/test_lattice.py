import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dislocbc.lattice import (
    Field,
    LatticeSpec,
    UnsupportedConfiguration,
    assemble_hessian,
    assemble_reference_hessian,
    energy_difference,
    gradient,
    hessian_apply,
    sites_in_ball,
    slip_apply,
    stencil,
)


def _screw_field(model, sites=None, corrector=None, R=6.0):
    spec = model.spec
    if sites is None:
        sites = sites_in_ball(spec, R)
        corrector = np.zeros((len(sites), 1))
    return Field(spec, model.predictor, sites, corrector, R, model.burgers_vector, (0, 0))


# -- geometry -----------------------------------------------------------------


def test_sites_in_ball_square_example():
    spec = LatticeSpec(np.eye(2), [[1, 0], [-1, 0], [0, 1], [0, -1]], 1, [0.5, 0.25])
    got = sites_in_ball(spec, 1.4)
    # brute force over a box
    want = [(i, j) for i in range(-3, 4) for j in range(-3, 4)
            if math.hypot(i - 0.5, j - 0.25) <= 1.4]
    assert sorted(map(tuple, got.tolist())) == sorted(want)
    assert got.tolist() == sorted(got.tolist())


@settings(max_examples=30, deadline=None)
@given(radius=st.floats(0.3, 9.0), cx=st.floats(0.05, 0.95), cy=st.floats(0.05, 0.95))
def test_sites_in_ball_matches_brute_force(radius, cx, cy):
    spec = LatticeSpec.triangular(shells=1)
    got = {tuple(s) for s in sites_in_ball(spec, radius, center=spec.basis @ [cx, cy]).tolist()}
    c = spec.basis @ [cx, cy]
    want = {(i, j) for i in range(-15, 16) for j in range(-15, 16)
            if np.linalg.norm(spec.basis @ [i, j] - c) <= radius + 1e-12}
    assert got == want


def test_sites_in_ball_small_radius_and_errors():
    spec = LatticeSpec.triangular()
    assert len(sites_in_ball(spec, 0.1)) == 0
    with pytest.raises(ValueError):
        sites_in_ball(spec, 0.0)
    assert np.array_equal(sites_in_ball(spec, 7.0), sites_in_ball(spec, 7.0))


@pytest.mark.parametrize("kwargs, match", [
    (dict(basis=[[1, 2], [2, 4]], offsets=[[1, 0], [-1, 0]]), "singular"),
    (dict(basis=np.eye(2), offsets=[[1, 0], [0, 1], [0, -1]]), "negation"),
    (dict(basis=np.eye(2), offsets=[[2, 0], [-2, 0], [0, 1], [0, -1]]), "span"),
])
def test_spec_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        LatticeSpec(components=1, core=[0.5, 0.25], **kwargs)


def test_cut_through_site_rejected():
    with pytest.raises(ValueError, match="branch cut"):
        LatticeSpec(np.eye(2), [[1, 0], [-1, 0], [0, 1], [0, -1]], 1, [0.5, 0.0])


def test_bond_through_core_rejected():
    # a second-shell triangular bond passes through (0.5, 0.25)
    with pytest.raises(ValueError, match="bond passes through"):
        LatticeSpec.triangular(shells=3, core_frac=(0.5 - 0.25 / math.sqrt(3), 0.25 * 2 / math.sqrt(3)))


# -- stencils -------------------------------------------------------------------


def test_stencil_constant_and_affine(model):
    spec = model.spec
    sites = sites_in_ball(spec, 5.0)
    F = np.array([0.3, -0.7])
    const = Field(spec, lambda x: np.full((len(x), 1), 2.5), sites, np.zeros((len(sites), 1)), 5.0)
    lin = Field(spec, lambda x: (x @ F)[:, None], sites, np.zeros((len(sites), 1)), 5.0)
    for rho, d in stencil(const, (1, 1)).items():
        assert d[0] == 0.0
    for rho, d in stencil(lin, (1, 1)).items():
        assert d[0] == pytest.approx(F @ spec.basis @ rho, abs=1e-13)


def test_slip_aware_stencil_bounded_and_consistent(model):
    # independent oracle: the slip-aware difference is the representative of
    # u(l + rho) - u(l) modulo b of least magnitude
    u = _screw_field(model, R=30.0)
    tab = u.table(sites_in_ball(model.spec, 30.0))
    S = tab.stencils(u(tab.all_sites))
    assert np.max(np.abs(S)) < 0.5
    raw = u(tab.centres[:, None, :] + model.spec.offsets[None]).reshape(S.shape) - u(tab.centres)[:, None, :]
    np.testing.assert_allclose(S, raw - np.round(raw), atol=1e-13)


def _naive_phi(pot, r, x):
    return 0.5 * pot.k[r] * x * x + pot.alpha[r] * x**3 + 0.25 * pot.beta[r] * x**4


def test_energy_difference_naive_oracle(model, rng):
    spec, pot = model.spec, model.potential
    sites = sites_in_ball(spec, 3.0)
    w = 0.1 * rng.standard_normal((len(sites), 1))
    u = Field(spec, model.predictor, sites, w, 3.0, model.burgers_vector)
    domain = [(i, j) for i in range(-2, 3) for j in range(-2, 3)]
    total = []
    lookup = {tuple(s): w[n, 0] for n, s in enumerate(sites.tolist())}
    for site in domain:
        x0 = float(model.predictor(spec.positions(site)[None])[0, 0])
        for r, o in enumerate(spec.offsets):
            q = (site[0] + int(o[0]), site[1] + int(o[1]))
            x1 = float(model.predictor(spec.positions(q)[None])[0, 0])
            d0 = (x1 - x0) - round(x1 - x0)
            d = d0 + lookup.get(q, 0.0) - lookup.get(site, 0.0)
            total.append(_naive_phi(pot, r, d) - _naive_phi(pot, r, d0))
    assert energy_difference(u, domain, pot) == pytest.approx(math.fsum(total), rel=1e-12, abs=1e-14)


def test_energy_difference_zero_corrector(model):
    u = _screw_field(model)
    assert energy_difference(u, sites_in_ball(model.spec, 4.0), model.potential) == 0.0


def test_compact_perturbation_of_flat_state_costs_energy(model, rng):
    spec = model.spec
    sites = sites_in_ball(spec, 4.0)
    v = 0.05 * rng.standard_normal((len(sites), 1))
    u = Field(spec, lambda x: np.zeros((len(x), 1)), sites, v, 4.0)
    assert energy_difference(u, sites_in_ball(spec, 4.0, include_buffer=True), model.potential) > 0


# -- forces and Hessians -----------------------------------------------------------


def test_gradient_vanishes_in_reference_state(model):
    spec = model.spec
    sites = sites_in_ball(spec, 5.0)
    u = Field(spec, lambda x: np.zeros((len(x), 1)), sites, np.zeros((len(sites), 1)), 5.0)
    assert np.all(gradient(u, sites, model.potential) == 0.0)


@pytest.mark.parametrize("kind", ["screw", "edge"])
def test_gradient_finite_differences(kind, model, edge_model, rng):
    m = model if kind == "screw" else edge_model
    spec, N = m.spec, m.spec.components
    R = 5.0
    sites = sites_in_ball(spec, R)
    w = 0.02 * rng.standard_normal((len(sites), N))

    def energy(wv):
        u = Field(spec, m.predictor, sites, wv, R, m.burgers_vector, m.b12)
        return energy_difference(u, sites_in_ball(spec, R + 2 * spec.max_range + 2), m.potential)

    g = gradient(Field(spec, m.predictor, sites, w, R, m.burgers_vector, m.b12), sites, m.potential)
    h = 1e-6
    for n in rng.choice(len(sites) * N, 6, replace=False):
        e = np.zeros(len(sites) * N)
        e[n] = h
        fd = (energy(w + e.reshape(w.shape)) - energy(w - e.reshape(w.shape))) / (2 * h)
        assert fd == pytest.approx(g[n], abs=1e-7)


@pytest.mark.parametrize("components", [1, 2])
def test_hessian_apply_against_assembled_matrix(components, model, edge_model, rng):
    m = model if components == 1 else edge_model
    spec, pot = m.spec, m.potential
    sites = sites_in_ball(spec, 3.0)
    v = rng.standard_normal((len(sites), components))
    out_sites, Hv = hessian_apply(spec, pot, sites, v)
    # zero-padded matrix on the output support
    H = assemble_reference_hessian(spec, pot, out_sites)
    pad = np.zeros((len(out_sites), components))
    idx = {tuple(s): n for n, s in enumerate(out_sites.tolist())}
    for n, s in enumerate(sites.tolist()):
        pad[idx[tuple(s)]] = v[n]
    np.testing.assert_allclose(Hv.ravel(), H @ pad.ravel(), atol=1e-12)
    # force balance
    np.testing.assert_allclose(Hv.sum(axis=0), 0.0, atol=1e-12)


def test_hessian_apply_constant_and_symmetry(model, rng):
    spec, pot = model.spec, model.potential
    sites = sites_in_ball(spec, 3.0)
    ones = np.ones((len(sites), 1))
    _, Hc = hessian_apply(spec, pot, sites, ones)
    # a constant on the ball is only non-affine at its rim
    assert abs(Hc.sum()) < 1e-12
    a, b = rng.standard_normal((2, len(sites), 1))
    s1, Ha = hessian_apply(spec, pot, sites, a)
    s2, Hb = hessian_apply(spec, pot, sites, b)
    idx = {tuple(s): n for n, s in enumerate(s1.tolist())}
    rows = [idx[tuple(s)] for s in sites.tolist()]
    assert float(np.sum(Ha[rows] * b)) == pytest.approx(float(np.sum(Hb[rows] * a)), rel=1e-12)


def test_assembled_hessian_matches_gradient_differences(model, rng):
    from dislocbc.cellsolve import CellProblem, assemble_predictor

    prob = CellProblem(model, 0, 6.0, assemble_predictor(0, model.predictor))
    w = 0.01 * rng.standard_normal(len(prob.free_sites))
    H = prob.hessian(w).toarray()
    h = 1e-6
    for n in rng.choice(len(w), 5, replace=False):
        e = np.zeros_like(w)
        e[n] = h
        col = (prob.energy_grad(w + e)[1] - prob.energy_grad(w - e)[1]) / (2 * h)
        np.testing.assert_allclose(H[:, n], col, atol=1e-7)
    np.testing.assert_allclose(H, H.T, atol=1e-13)


def test_reference_hessian_is_stable(model, edge_model):
    for m in (model, edge_model):
        H = assemble_reference_hessian(m.spec, m.potential, sites_in_ball(m.spec, 6.0)).toarray()
        assert np.min(np.linalg.eigvalsh(H)) > 0


def test_assemble_hessian_reduces_to_reference(model):
    from dislocbc.lattice import BondTable

    spec = model.spec
    free = sites_in_ball(spec, 4.0)
    tab = BondTable.build(spec, sites_in_ball(spec, 4.0 + spec.max_range))
    rows = [int(np.flatnonzero((tab.all_sites == s).all(axis=1))[0]) for s in free]
    H = assemble_hessian(tab, model.potential, np.zeros((len(tab.all_sites), 1)), rows)
    H0 = assemble_reference_hessian(spec, model.potential, free)
    np.testing.assert_allclose(H.toarray(), H0.toarray(), atol=1e-14)


# -- slip operator ---------------------------------------------------------------------


def test_slip_requires_two_components(model):
    with pytest.raises(UnsupportedConfiguration):
        slip_apply(model.spec, [[0, 0]], [[1.0]], (1, 0))


def test_slip_round_trip_and_affine(edge_model, rng):
    spec = edge_model.spec
    sites = sites_in_ball(spec, 8.0)
    v = rng.standard_normal((len(sites), 2))
    back = slip_apply(spec, sites, slip_apply(spec, sites, v, (1, 0), "S"), (1, 0), "R")
    ok = np.all(np.isfinite(back), axis=1)
    assert ok.mean() > 0.8
    np.testing.assert_array_equal(back[ok], v[ok])
    const = slip_apply(spec, sites, np.full((len(sites), 2), 3.0), (1, 0))
    ok = np.all(np.isfinite(const), axis=1)
    assert np.all(const[ok] == 3.0)
    F = np.array([[0.2, -0.1], [0.4, 0.3]])
    x = spec.positions(sites)
    Su = slip_apply(spec, sites, x @ F.T, (1, 0))
    below = x[:, 1] < spec.core[1]
    ok = np.all(np.isfinite(Su), axis=1)
    np.testing.assert_allclose(Su[ok & below], (x[ok & below] - spec.basis @ [1, 0]) @ F.T, atol=1e-13)
    np.testing.assert_allclose(Su[ok & ~below], x[ok & ~below] @ F.T, atol=1e-13)
