"""Select the compiled bond kernels when available, else the NumPy fallback.

Set ``DISLOCBC_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("DISLOCBC_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def pair_energy_gradient(U, site_idx, partner, jump, cart, k, a, b, want_grad=True, backend=None):
    """Dispatch to the selected backend; arrays are coerced to the compiled layout."""
    impl = _impl if backend is None else {"python": _kernels_py, "cython": _compiled_or_raise()}[backend]
    return impl.pair_energy_gradient(
        np.ascontiguousarray(U, dtype=np.float64),
        np.ascontiguousarray(site_idx, dtype=np.int64),
        np.ascontiguousarray(partner, dtype=np.int64),
        np.ascontiguousarray(jump, dtype=np.float64),
        np.ascontiguousarray(cart, dtype=np.float64),
        np.ascontiguousarray(k, dtype=np.float64),
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        want_grad,
    )


def _compiled_or_raise():
    if BACKEND != "cython":
        raise ImportError("compiled kernels not built")
    return _impl
