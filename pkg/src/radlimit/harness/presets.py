"""Initial-condition presets.

Each preset returns fluid data and a kinetic datum that are strictly
positive, with the lower bound ``a`` reported alongside. Spatial variation
is in x_1 only, so presets work on slab and full grids alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, StateValidityError
from ..euler import planck
from ..mesh import FluidState, KineticField


@dataclass
class InitialData:
    fluid: FluidState
    h: KineticField
    lower_bound: float
    params: dict


def _equilibrium(grid, quad, c_planck, p):
    fluid = FluidState(grid, p["rho0"], np.zeros((3,) + grid.shape), p["theta0"])
    h = KineticField.isotropic(grid, quad, planck(fluid.theta, c_planck))
    return fluid, h


def _smooth_fluid(grid, p):
    x = grid.coordinates()[0]
    rho = 1.0 + p["rho_amp"] * np.sin(x)
    u = np.zeros((3,) + grid.shape)
    u[0] = p["u_amp"] * np.sin(x)
    theta = 1.0 + p["theta_amp"] * np.cos(x)
    return FluidState(grid, rho, u, theta)


def _smooth(grid, quad, c_planck, p):
    fluid = _smooth_fluid(grid, p)
    x = grid.coordinates()[0][..., None]
    w1 = quad.nodes[:, 0]
    hbar = p["fbar0"] + p["fbar_amp"] * np.sin(x)
    values = hbar + p["anisotropy"] * (1.0 + 0.5 * np.cos(x)) * w1
    return fluid, KineticField(grid, quad, np.broadcast_to(values, grid.shape + (quad.size,)).copy())


def _layer_probe(grid, quad, c_planck, p):
    fluid = _smooth_fluid(grid, p)
    x = grid.coordinates()[0][..., None]
    w1 = quad.nodes[:, 0]
    hbar = p["fbar0"] + p["fbar_amp"] * np.sin(x)
    odd = p["anisotropy"] * (1.0 + 0.25 * np.cos(x)) * w1
    even = p["even_anisotropy"] * 0.5 * (3.0 * w1**2 - 1.0)
    return fluid, KineticField(grid, quad, np.broadcast_to(hbar + odd + even, grid.shape + (quad.size,)).copy())


_SMOOTH_DEFAULTS = {
    "rho_amp": 0.2,
    "u_amp": 0.1,
    "theta_amp": 0.2,
    "fbar0": 1.0,
    "fbar_amp": 0.3,
    "anisotropy": 0.2,
}

PRESETS = {
    "equilibrium": (_equilibrium, {"rho0": 1.0, "theta0": 1.0}),
    "smooth-1d": (_smooth, dict(_SMOOTH_DEFAULTS)),
    "isotropic-h": (_smooth, {**_SMOOTH_DEFAULTS, "anisotropy": 0.0}),
    "layer-probe": (
        _layer_probe,
        {**_SMOOTH_DEFAULTS, "fbar0": 2.0, "anisotropy": 0.8, "even_anisotropy": 0.3},
    ),
}


def preset_parameters(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return dict(PRESETS[name][1])


def build_preset(name: str, grid, quad, c_planck: float = 1.0, overrides: dict | None = None) -> InitialData:
    """Instantiate a preset; unknown override keys are configuration errors."""
    params = preset_parameters(name)
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ConfigurationError(f"preset {name!r} has no parameter {key!r}; known: {sorted(params)}")
        params[key] = float(value)
    builder = PRESETS[name][0]
    try:
        fluid, h = builder(grid, quad, c_planck, params)
    except StateValidityError as exc:
        raise ConfigurationError(f"preset {name!r} with {params} is not strictly positive: {exc}") from exc
    lower = float(min(fluid.rho.min(), fluid.theta.min(), h.values.min()))
    if not lower > 0:
        raise ConfigurationError(f"preset {name!r} with {params} is not strictly positive (min {lower:.4g})")
    return InitialData(fluid, h, lower, params)
