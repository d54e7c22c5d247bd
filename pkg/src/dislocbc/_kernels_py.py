"""Vectorized NumPy implementation of the bond-sum kernels.

Mirrors the compiled ``_kernels`` extension exactly; selected when the
extension is unavailable.
"""

import numpy as np


def _stencil(U, site_idx, partner, jump):
    return U[partner] - U[site_idx][:, None, :] + jump


def pair_energy_gradient(U, site_idx, partner, jump, cart, k, a, b, want_grad=True):
    """Energy and gradient of ``sum_l sum_rho phi_rho(x_rho(l))`` for the polynomial pair form.

    Parameters
    ----------
    U : (m, N) array
        Displacements at all referenced sites.
    site_idx : (n,) int array
        Rows of ``U`` holding the stencil centres.
    partner : (n, K) int array
        Rows of ``U`` holding the (slip-aware) bond partners.
    jump : (n, K, N) array
        Constant added to each difference (Burgers jump across the cut).
    cart : (K, 2) array
        Reference bond vectors.
    k, a, b : (K,) arrays
        Polynomial coefficients of ``phi = k/2 x^2 + a x^3 + b/4 x^4``.

    Returns
    -------
    energy : float
    grad : (m, N) array or None
    """
    m, N = U.shape
    s = _stencil(U, site_idx, partner, jump)
    if N == 1:
        x = s[..., 0]
    else:
        y = cart + s
        L = np.sqrt(y[..., 0] ** 2 + y[..., 1] ** 2)
        x = L - np.sqrt(cart[:, 0] ** 2 + cart[:, 1] ** 2)
    x2 = x * x
    energy = float(np.sum(x2 * (0.5 * k + x * (a + 0.25 * b * x))))
    if not want_grad:
        return energy, None
    dphi = x * (k + x * (3.0 * a + b * x))
    if N == 1:
        g = dphi[..., None]
    else:
        g = (dphi / L)[..., None] * y
    grad = np.empty((m, N))
    n, K = partner.shape
    for c in range(N):
        gc = g[..., c]
        grad[:, c] = (np.bincount(partner.ravel(), weights=gc.ravel(), minlength=m)
                      - np.bincount(site_idx, weights=gc.sum(axis=1), minlength=m))
    return energy, grad
