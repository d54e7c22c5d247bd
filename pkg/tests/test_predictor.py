import numpy as np
import pytest

from dislocbc.predictor import (
    BranchCutError,
    EdgePredictor,
    burgers_circuit,
    smoothstep,
    traction_moment,
)


def _ring(core, r, n=64):
    t = (np.arange(n) + 0.37) * 2 * np.pi / n
    return core + r * np.stack([np.cos(t), np.sin(t)], axis=1)


def test_screw_jump_across_cut(model):
    pred = model.predictor
    c = pred.core
    for dx in (0.3, 2.0, 17.0):
        above = pred.u0(c + [[dx, 1e-9]])
        below = pred.u0(c + [[dx, -1e-9]])
        assert (above - below).item() == pytest.approx(-1.0, abs=1e-8)
    with pytest.raises(BranchCutError):
        pred.u0(c + [[1.0, 0.0]])


def test_screw_gradient_matches_finite_differences(model):
    pred = model.predictor
    pts = _ring(pred.core, 3.0, 16)
    pts = pts[np.abs(pts[:, 1] - pred.core[1]) > 0.1]
    h = 1e-6
    G = pred.grad(pts)[:, 0]
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (pred.u0(pts + e) - pred.u0(pts - e))[:, 0] / (2 * h)
        np.testing.assert_allclose(G[:, a], fd, atol=1e-8)


def test_screw_is_harmonic_and_decays(model):
    pred = model.predictor
    c = model.tensors.scalar_matrix()
    for r in (1.5, 10.0, 100.0):
        pts = _ring(pred.core, r)
        H = pred.tensor(2, pts)[:, 0]
        assert np.max(np.abs(np.einsum("ab,nab->n", c, H))) < 1e-12 / r**2
        assert np.max(np.linalg.norm(pred.grad(pts)[:, 0], axis=1)) == pytest.approx(1 / (2 * np.pi * r), rel=1e-12)


@pytest.mark.parametrize("kind", ["screw", "edge"])
def test_burgers_circuit(kind, model, edge_model):
    m = model if kind == "screw" else edge_model
    for r in (1.0, 7.5):
        np.testing.assert_allclose(burgers_circuit(m.predictor, r), -m.burgers_vector, atol=1e-10)


@pytest.mark.parametrize("kind", ["screw", "edge"])
def test_traction_moment_vanishes(kind, model, edge_model):
    m = model if kind == "screw" else edge_model
    C = m.tensors.C2 if kind == "screw" else m.predictor.stiffness()
    assert np.max(np.abs(traction_moment(m.predictor, C, radius=2.0))) < 1e-12


def test_edge_linear_field_is_equilibrated(edge_model):
    pred = edge_model.predictor
    C = pred.stiffness()
    pts = _ring(pred.core, 6.0)
    H = pred.tensor_lin(2, pts)
    div = np.einsum("iajb,njab->ni", C, H)
    assert np.max(np.abs(div)) < 1e-12


def test_edge_core_map(edge_model):
    pred = edge_model.predictor
    pts = _ring(pred.core, 2.0, 40)
    X = pred.xi_inverse(pts)
    np.testing.assert_allclose(pred.xi(X), pts, atol=1e-12)
    # identity inside the core
    inner = _ring(pred.core, 1e-3, 8)
    inner = inner[np.abs(inner[:, 1] - pred.core[1]) > 1e-6]
    np.testing.assert_allclose(pred.xi(inner), inner, atol=1e-12)
    # far away xi is a rigid shift by -b12 * theta / 2pi
    far = pred.core + np.array([[-20.0, 0.5]])
    th = np.arctan2(0.5, -20.0)
    np.testing.assert_allclose(pred.xi(far)[0], far[0] - [th / (2 * np.pi), 0.0], atol=1e-12)


def test_edge_core_map_shifts_lower_lip(edge_model):
    # below the cut the reference point is displaced by b12 = (1, 0)
    pred = edge_model.predictor
    c = pred.core
    x_above = c + np.array([[10.0, 1e-9]])
    x_below = c + np.array([[10.0, -1e-9]])
    X_above, X_below = pred.xi_inverse(x_above), pred.xi_inverse(x_below)
    assert X_below[0, 0] - X_above[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert X_below[0, 1] == pytest.approx(X_above[0, 1] - 2e-9, abs=1e-15)


def test_edge_gradient_chain_rule(edge_model):
    pred = edge_model.predictor
    pts = _ring(pred.core, 3.0, 12)
    pts = pts[np.abs(pts[:, 1] - pred.core[1]) > 0.2]
    G = pred.grad(pts)
    h = 1e-6
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (pred.u0(pts + e) - pred.u0(pts - e)) / (2 * h)
        np.testing.assert_allclose(G[..., a], fd, atol=1e-7)


def test_edge_requires_isotropy():
    with pytest.raises(ValueError, match="isotropic"):
        EdgePredictor.from_cubic(1.0, [0.3, 0.2], 3.0, 1.0, 0.5)


def test_smoothstep():
    s = np.linspace(-0.5, 1.5, 401)
    v = smoothstep(s)
    assert v[0] == 0.0 and v[-1] == 1.0
    assert np.all(np.diff(v) >= 0)
    for k in (1, 2):
        assert smoothstep(0.0, k) == 0.0 and smoothstep(1.0, k) == 0.0
    h = 1e-6
    x = np.linspace(0.05, 0.95, 19)
    np.testing.assert_allclose(smoothstep(x, 1), (smoothstep(x + h) - smoothstep(x - h)) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(smoothstep(x, 2), (smoothstep(x + h, 1) - smoothstep(x - h, 1)) / (2 * h), atol=1e-7)
