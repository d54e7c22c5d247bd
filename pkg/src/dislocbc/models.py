"""Ready-made lattice/potential/dislocation combinations used by the studies.

The default model is an antiplane screw dislocation on the triangular lattice
with three neighbour shells and a polynomial pair potential whose cubic
coefficients alternate in sign with period 60 degrees.  That pattern keeps the
potential point symmetric, gives a nonzero third-order Cauchy-Born tensor and
keeps the linearised problem isotropic.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec
from .potential import CBTensors, PairPotential, SitePotential, load_tabulated, odd_angular_pattern
from .predictor import EdgePredictor, ScrewPredictor

__all__ = ["DEFAULT_MODEL", "Model", "build_model"]

DEFAULT_MODEL = {
    "lattice": {"type": "triangular", "shells": 3, "core_frac": [0.65, 0.45]},
    "potential": {
        "kind": "pair",
        "k": [1.0, 0.25, 0.1],
        "alpha": [0.2, 0.05, 0.02],
        "beta": [0.5, 0.1, 0.05],
        "pattern": "threefold",
    },
    "dislocation": {"kind": "screw", "burgers": 1.0, "eta_radius": 4.0},
}


@dataclass
class Model:
    spec: LatticeSpec
    potential: SitePotential
    predictor: object
    tensors: CBTensors
    config: dict

    @property
    def burgers_vector(self) -> np.ndarray:
        return self.predictor.burgers_vector

    @property
    def b12(self):
        return tuple(int(v) for v in self.predictor.b12)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (over or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def build_model(config: dict | None = None) -> Model:
    """Instantiate a model from a (partial) configuration merged over ``DEFAULT_MODEL``."""
    cfg = _merge(DEFAULT_MODEL, config or {})
    lat, pot, dis = cfg["lattice"], cfg["potential"], cfg["dislocation"]
    N = 1 if dis["kind"] == "screw" else 2
    if dis["kind"] not in ("screw", "edge"):
        raise ValueError(f"unknown dislocation kind {dis['kind']!r}")
    maker = {"triangular": LatticeSpec.triangular, "square": LatticeSpec.square}[lat["type"]]
    spec = maker(shells=lat["shells"], components=N, core_frac=tuple(lat["core_frac"]))

    if pot["kind"] == "pair":
        pattern = None
        if N == 1:
            if pot.get("pattern", "threefold") == "threefold":
                pattern = odd_angular_pattern(spec.cart)
            elif np.any(np.asarray(pot["alpha"]) != 0):
                raise ValueError("antiplane cubic terms need an odd angular pattern")
        potential = PairPotential.from_shells(spec.offsets, spec.basis, N, spec.shell,
                                              pot["k"], pot["alpha"], pot["beta"], pattern)
    elif pot["kind"] == "tabulated":
        potential = load_tabulated(pot["file"], spec)
    else:
        raise ValueError(f"unknown potential kind {pot['kind']!r}")

    tensors = potential.cb_tensors()
    if N == 1:
        predictor = ScrewPredictor(float(dis["burgers"]), spec.core, tensors.scalar_matrix())
    else:
        C11, C12, C44 = tensors.cubic_constants(rtol=1e-8)
        predictor = EdgePredictor.from_cubic(float(dis["burgers"]), spec.core, C11, C12, C44,
                                             r_hat=float(dis["eta_radius"]), b12=(1, 0))
    return Model(spec, potential, predictor, tensors, cfg)
