import numpy as np
import pytest

from dislocbc.greens import (
    AssemblyError,
    ContinuumGF,
    SingularityError,
    flux,
    lattice_gf_oracle,
)
from dislocbc.lattice import sites_in_ball


def test_laplace_closed_form():
    gf = ContinuumGF(np.eye(2))
    x = np.array([[3.0, 4.0], [0.0, 0.5]])
    np.testing.assert_allclose(gf.g0(x)[:, 0, 0], -np.log([5.0, 0.5]) / (2 * np.pi), atol=1e-15)
    np.testing.assert_allclose(gf.grad_g0(x)[:, 0, 0], -x / (2 * np.pi * np.sum(x**2, axis=1))[:, None],
                               atol=1e-15)
    with pytest.raises(SingularityError):
        gf.g0(np.zeros((1, 2)))


@pytest.mark.parametrize("C", [np.eye(2), np.array([[2.0, 0.3], [0.3, 0.7]])])
def test_scalar_flux_and_parity(C):
    gf = ContinuumGF(C)
    np.testing.assert_allclose(flux(gf, 2.0), [[-1.0]], atol=1e-12)
    x = np.random.default_rng(0).standard_normal((10, 2))
    np.testing.assert_allclose(gf.g0(x), gf.g0(-x), atol=1e-14)
    np.testing.assert_allclose(gf.grad_g0(x), -gf.grad_g0(-x), atol=1e-14)
    # angular mean zero on the unit circle of the normalised coordinates y = M x
    t = 2 * np.pi * np.arange(256) / 256
    y = np.stack([np.cos(t), np.sin(t)], 1)
    assert abs(gf.g0(y @ np.linalg.inv(gf.M).T).mean()) < 1e-12


def test_isotropic_kelvin_flux_and_equilibrium(edge_model):
    C = edge_model.predictor.stiffness()
    gf = ContinuumGF(C)
    np.testing.assert_allclose(flux(gf, 3.0), -np.eye(2), atol=1e-12)
    pts = np.array([[1.3, -0.4], [-2.0, 5.0]])
    div = np.einsum("iajb,njkab->nik", C, gf.tensor(2, pts))
    assert np.max(np.abs(div)) < 1e-13


def test_barnett_quadrature_matches_kelvin(edge_model):
    C = edge_model.predictor.stiffness()
    kelvin, barnett = ContinuumGF(C), ContinuumGF(C, kind="barnett_quadrature", n_quad=128)
    pts = np.random.default_rng(2).uniform(-4, 4, (20, 2))
    for k in range(3):
        np.testing.assert_allclose(barnett.tensor(k, pts), kelvin.tensor(k, pts), atol=1e-12)


def test_barnett_anisotropic_flux_and_derivatives(rng):
    # a cubic tensor away from isotropy
    C = np.zeros((2, 2, 2, 2))
    C[0, 0, 0, 0] = C[1, 1, 1, 1] = 3.0
    C[0, 0, 1, 1] = C[1, 1, 0, 0] = 1.2
    for idx in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)]:
        C[idx] = 0.6
    gf = ContinuumGF(C, kind="barnett_quadrature")
    np.testing.assert_allclose(flux(gf, 2.0, 1024), -np.eye(2), atol=1e-10)
    x = rng.uniform(0.5, 2, (5, 2))
    h = 1e-6
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (gf.tensor(1, x + e) - gf.tensor(1, x - e)) / (2 * h)
        np.testing.assert_allclose(gf.tensor(2, x)[..., a], fd, atol=1e-7)
    bad = C.copy()
    bad[0, 1, 0, 1] = bad[1, 0, 1, 0] = -1.0
    with pytest.raises(AssemblyError):
        ContinuumGF(bad, kind="barnett_quadrature")


def test_lattice_gf_oracle(model):
    spec, pot = model.spec, model.potential
    sites, g = lattice_gf_oracle(spec, pot, 0, 20.0)
    # point symmetry of the triangular lattice
    lookup = {tuple(s): v for s, v in zip(sites.tolist(), g[:, 0])}
    assert all(abs(v - lookup[(-a, -b)]) < 1e-13 for (a, b), v in lookup.items())
    # the discrete Laplacian of g is a unit impulse away from the clamp
    from dislocbc.moments import hessian_action

    inner = sites_in_ball(spec, 12.0, center=np.zeros(2))
    Hg = hessian_action(spec, pot, inner, lambda q: np.array([[lookup.get(tuple(s), 0.0)] for s in q.tolist()]))
    target = np.array([[1.0 if tuple(s) == (0, 0) else 0.0] for s in inner.tolist()])
    np.testing.assert_allclose(Hg, target, atol=1e-12)


def test_lattice_gf_approaches_continuum(model):
    # differences g(l) - g(l') far from the origin approach G0 differences
    spec, pot = model.spec, model.potential
    sites, g = lattice_gf_oracle(spec, pot, 0, 80.0)
    gf = ContinuumGF(model.tensors.scalar_matrix())
    x = spec.positions(sites)
    r = np.linalg.norm(x, axis=1)
    errs = []
    for lo in (4.0, 8.0, 16.0):
        ring = (r > lo) & (r < lo + 2)
        d = g[ring, 0] - g[ring, 0].mean()
        c = gf.g0(x[ring])[:, 0, 0]
        errs.append(np.max(np.abs(d - (c - c.mean()))))
    assert errs[0] > errs[1] > errs[2]
