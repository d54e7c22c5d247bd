import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dislocbc.lattice import LatticeSpec
from dislocbc.models import build_model
from dislocbc.potential import (
    CBTensors,
    ExtrapolationError,
    PairPotential,
    SymmetryError,
    load_tabulated,
)


def _fd_tensor(f, n, order, h=1e-3):
    """Central-difference derivative tensor of ``f`` at 0 by recursion."""
    if order == 0:
        return np.asarray(f(np.zeros(n)))
    inner = lambda x: _fd_tensor(lambda y: f(x + y), n, order - 1, h)
    out = []
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        # fourth-order stencil
        out.append((-inner(2 * e) + 8 * inner(e) - 8 * inner(-e) + inner(-2 * e)) / (12 * h))
    return np.stack(out, axis=-1)


def test_reference_state(model):
    pot = model.potential
    K = len(pot.offsets)
    assert pot.site_energy(np.zeros((K, 1))) == 0.0
    assert np.all(pot.site_gradient(np.zeros((K, 1))) == 0.0)


def test_site_hessian_finite_differences(edge_model, rng):
    pot = edge_model.potential
    K = len(pot.offsets)
    H = pot.site_hessian_at_zero()
    h = 1e-5
    for n in rng.choice(2 * K, 5, replace=False):
        e = np.zeros(2 * K)
        e[n] = h
        col = (pot.site_gradient(e.reshape(K, 2)) - pot.site_gradient(-e.reshape(K, 2))).ravel() / (2 * h)
        np.testing.assert_allclose(H[:, n], col, atol=1e-8)


@pytest.mark.parametrize("kind", ["screw", "edge"])
def test_cb_tensors_match_finite_differences(kind, model, edge_model):
    m = model if kind == "screw" else edge_model
    pot, T = m.potential, m.tensors
    n = 2 * pot.components
    W = lambda f: pot.cb_density(f.reshape(pot.components, 2))
    shape = lambda k: (pot.components, 2) * k
    np.testing.assert_allclose(_fd_tensor(W, n, 2).reshape(shape(2)), T.C2, atol=1e-8)
    np.testing.assert_allclose(_fd_tensor(W, n, 3).reshape(shape(3)), T.C3, atol=1e-6)
    np.testing.assert_allclose(_fd_tensor(W, n, 4, h=2e-2).reshape(shape(4)), T.C4, atol=1e-4)


def test_cb_symmetries(model, even_model):
    T = model.tensors
    C = T.matrix()
    np.testing.assert_allclose(C, C.T, atol=1e-14)
    assert np.min(np.linalg.eigvalsh(C)) > 0
    # threefold symmetry with three shells makes the scalar matrix isotropic
    c = T.scalar_matrix()
    np.testing.assert_allclose(c, c[0, 0] * np.eye(2), atol=1e-13)
    assert np.max(np.abs(T.C3)) > 1e-3
    assert np.max(np.abs(even_model.tensors.C3)) == 0.0


def test_even_potential_density_is_even(even_model, rng):
    pot = even_model.potential
    for _ in range(5):
        F = 0.1 * rng.standard_normal((1, 2))
        assert pot.cb_density(F) == pytest.approx(pot.cb_density(-F), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=18, max_size=18))
def test_point_symmetry_of_site_energy(vals):
    pot = build_model().potential
    A = np.array(vals).reshape(18, 1)
    index = {tuple(o): r for r, o in enumerate(pot.offsets)}
    flipped = np.stack([-A[index[tuple(-o)]] for o in pot.offsets])
    assert pot.site_energy(A) == pytest.approx(pot.site_energy(flipped), rel=1e-12, abs=1e-15)


def test_point_symmetry_enforced():
    spec = LatticeSpec.triangular(shells=1)
    with pytest.raises(ValueError, match="point symmetry"):
        PairPotential(spec.offsets, spec.basis, 1, 1.0, 0.3, 0.0)


def test_cubic_constants(edge_model):
    C11, C12, C44 = edge_model.tensors.cubic_constants()
    # pair potentials on the triangular lattice satisfy the Cauchy relation
    assert C12 == pytest.approx(C44, rel=1e-12)
    assert C11 - C12 == pytest.approx(2 * C44, rel=1e-12)


def test_cubic_constants_reject_asymmetric_tensor(edge_model):
    T = edge_model.tensors
    C2 = T.C2.copy()
    C2[0, 0, 0, 0] *= 1.01
    with pytest.raises(SymmetryError) as info:
        CBTensors(T.c_vol, C2, T.C3, T.C4).cubic_constants()
    assert info.value.asymmetry > 1e-10


def test_plane_wave_homogenisation(model):
    # symbol of the lattice Hessian at small wavevector versus k . C k
    pot, spec = model.potential, model.spec
    c = model.tensors.scalar_matrix()
    for k in ([0.05, 0.0], [0.03, 0.04]):
        k = np.array(k)
        omega = sum(2 * pot.k[r] * (1 - np.cos(k @ rho)) for r, rho in enumerate(spec.cart)) / spec.cell_volume
        assert omega == pytest.approx(k @ c @ k, rel=0.02)


def test_tabulated_potential(tmp_path, model):
    spec, pot = model.spec, model.potential
    x = np.linspace(-0.6, 0.6, 241)
    lines = []
    for r, o in enumerate(spec.offsets):
        lines.append(f"shell {o[0]} {o[1]}")
        lines += [f"{float(a)!r} {float(b)!r}" for a, b in zip(x, pot.phi_bond(x, np.full(len(x), r)))]
    path = tmp_path / "pot.tab"
    path.write_text("# pair table\n" + "\n".join(lines) + "\n")
    tab = load_tabulated(path, spec)
    np.testing.assert_allclose(tab.derivatives_at_zero()[:, 2:], pot.derivatives_at_zero()[:, 2:], atol=1e-8)
    s = np.random.default_rng(3).uniform(-0.5, 0.5, (4, len(spec.offsets), 1))
    np.testing.assert_allclose([tab.site_energy(a) for a in s], [pot.site_energy(a) for a in s], rtol=1e-6)
    with pytest.raises(ExtrapolationError):
        tab.site_energy(np.full((len(spec.offsets), 1), 0.7))


def test_tabulated_missing_offset(tmp_path, model):
    path = tmp_path / "pot.tab"
    path.write_text("shell 1 0\n-1 0.5\n0 0\n1 0.5\n")
    with pytest.raises(ValueError, match="no table"):
        load_tabulated(path, model.spec)
