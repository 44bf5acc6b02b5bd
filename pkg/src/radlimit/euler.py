"""Finite-volume compressible Euler with radiative momentum/energy sources.

Constitutive relations have every constant set to one: e = theta and
P = rho * theta. Adiabatic exponent is gamma = 1 + R/C_V = 2, so the sound
speed is sqrt(2 theta). Total energy E = rho |u|^2 / 2 + rho theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .angular import moment0, moment1
from .errors import CFLViolation, ContractViolation, DomainError, StateValidityError
from .mesh import FluidState, KineticField, PeriodicGrid, _shift

GAMMA_EFF = 2.0
RECONSTRUCTIONS = ("first-order", "muscl")


@dataclass
class ConservativeState:
    """Conservative variables; ``m`` has shape ``(3,) + grid.shape``."""

    grid: PeriodicGrid
    rho: np.ndarray
    m: np.ndarray
    E: np.ndarray

    def copy(self) -> "ConservativeState":
        return ConservativeState(self.grid, self.rho.copy(), self.m.copy(), self.E.copy())

    def internal_energy(self) -> np.ndarray:
        return self.E - 0.5 * (self.m**2).sum(axis=0) / self.rho

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.rho[None], self.m, self.E[None]])

    @classmethod
    def from_stacked(cls, grid, U) -> "ConservativeState":
        return cls(grid, U[0].copy(), U[1:4].copy(), U[4].copy())


@dataclass
class RadiativeSources:
    """Momentum source ``S_F`` (3, ...) and energy source ``S_E`` per cell."""

    S_F: np.ndarray
    S_E: np.ndarray

    @classmethod
    def from_kinetic(cls, f: KineticField, theta, eps: float, c_planck: float = 1.0) -> "RadiativeSources":
        """S_F = (1/eps + eps) <w (f - <f>)>, S_E = <f> - B(theta)."""
        fbar = moment0(f.quad, f.values)
        anis = f.values - fbar[..., None]
        S_F = (1.0 / eps + eps) * np.moveaxis(moment1(f.quad, anis), -1, 0)
        S_E = fbar - planck(theta, c_planck)
        return cls(S_F, S_E)

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "RadiativeSources":
        return cls(np.zeros((3,) + grid.shape), np.zeros(grid.shape))


def planck(theta, c_planck: float = 1.0):
    """Frequency-integrated Planck function ``B(theta) = C theta^4``."""
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr <= 0):
        raise DomainError(f"planck needs theta > 0, got min {theta_arr.min():.6g}")
    if not c_planck > 0:
        raise DomainError(f"planck constant must be positive, got {c_planck}")
    out = c_planck * theta_arr**4
    return float(out) if np.ndim(theta) == 0 else out


def planck_frequency_integral(theta: float) -> float:
    """Adaptive quadrature of int_0^inf nu^3 / (exp(nu/theta) - 1) dnu."""
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")

    def integrand(nu):
        if nu == 0.0:
            return 0.0
        x = nu / theta  # e^{-x} form avoids overflow in the tail
        return nu**3 * math.exp(-x) / -math.expm1(-x)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return value


def primitive_to_conservative(state: FluidState) -> ConservativeState:
    if np.any(state.rho <= 0) or np.any(state.theta <= 0):
        raise StateValidityError("primitive state needs rho > 0 and theta > 0")
    rho = state.rho.copy()
    m = rho * state.u
    E = 0.5 * rho * (state.u**2).sum(axis=0) + rho * state.theta
    return ConservativeState(state.grid, rho, m, E)


def conservative_to_primitive(cons: ConservativeState) -> FluidState:
    if np.any(cons.rho <= 0):
        raise StateValidityError(f"nonpositive density, min={cons.rho.min():.6g}")
    eint = cons.internal_energy()
    if np.any(eint <= 0):
        raise StateValidityError(f"nonpositive internal energy, min={eint.min():.6g}")
    u = cons.m / cons.rho
    return FluidState(cons.grid, cons.rho.copy(), u, eint / cons.rho)


def max_wavespeed(cons: ConservativeState) -> np.ndarray:
    """Per-axis max of |u_d| + sqrt(2 theta)."""
    prim = conservative_to_primitive(cons)
    c = np.sqrt(GAMMA_EFF * prim.theta)
    return np.array([np.max(np.abs(prim.u[ax]) + c) for ax in cons.grid.axes])


def fluid_stable_dt(cons: ConservativeState, cfl: float = 1.0) -> float:
    return cfl * cons.grid.h / float(max_wavespeed(cons).sum())


def _physical_flux(U, ax):
    rho, m, E = U[0], U[1:4], U[4]
    u = m / rho
    p = E - 0.5 * (m**2).sum(axis=0) / rho  # rho*theta = internal energy for gamma = 2
    flux = np.empty_like(U)
    flux[0] = m[ax]
    flux[1:4] = m * u[ax]
    flux[1 + ax] += p
    flux[4] = (E + p) * u[ax]
    return flux, np.abs(u[ax]) + np.sqrt(GAMMA_EFF * p / rho)


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_states(U, ax, reconstruction):
    """Left/right conservative states at faces i+1/2 along ``ax``."""
    if reconstruction == "first-order":
        return U, _shift(U, 1, ax + 1)
    # minmod-limited linear reconstruction on primitive variables (rho, u, p)
    rho = U[0]
    u = U[1:4] / rho
    p = U[4] - 0.5 * rho * (u**2).sum(axis=0)
    W = np.concatenate([rho[None], u, p[None]])
    slope = _minmod(W - _shift(W, -1, ax + 1), _shift(W, 1, ax + 1) - W)
    WL = W + 0.5 * slope
    WR = _shift(W - 0.5 * slope, 1, ax + 1)

    def to_cons(Wf):
        r, v, pr = Wf[0], Wf[1:4], Wf[4]
        return np.concatenate([r[None], r * v, (pr + 0.5 * r * (v**2).sum(axis=0))[None]])

    return to_cons(WL), to_cons(WR)


def _rusanov_rhs(U, grid, reconstruction):
    dU = np.zeros_like(U)
    for ax in grid.axes:
        UL, UR = _face_states(U, ax, reconstruction)
        FL, sL = _physical_flux(UL, ax)
        FR, sR = _physical_flux(UR, ax)
        smax = np.maximum(sL, sR)
        face = 0.5 * (FL + FR) - 0.5 * smax * (UR - UL)
        dU -= (face - _shift(face, -1, ax + 1)) / grid.h
    return dU


def rusanov_flux_step(
    cons: ConservativeState, dt: float, *, reconstruction: str = "first-order", check_cfl: bool = True
) -> ConservativeState:
    """Local Lax-Friedrichs update of the hyperbolic part on the periodic grid.

    ``first-order`` is a single forward-Euler step; ``muscl`` uses minmod
    limited primitive reconstruction with a two-stage SSP Runge-Kutta step.
    """
    if not dt > 0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    if reconstruction not in RECONSTRUCTIONS:
        raise ContractViolation(f"reconstruction must be one of {RECONSTRUCTIONS}")
    grid = cons.grid
    if check_cfl:
        limit = fluid_stable_dt(cons)
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolation("fluid step exceeds CFL limit", suggested_dt=limit, module="fluid_euler")
    U = cons.stacked()
    if reconstruction == "first-order":
        U_new = U + dt * _rusanov_rhs(U, grid, reconstruction)
    else:
        # second-order SSP Runge-Kutta (Heun); forward Euler is unstable with MUSCL
        U1 = U + dt * _rusanov_rhs(U, grid, reconstruction)
        U_new = 0.5 * U + 0.5 * (U1 + dt * _rusanov_rhs(U1, grid, reconstruction))
    out = ConservativeState.from_stacked(grid, U_new)
    if np.any(out.rho <= 0) or np.any(out.internal_energy() <= 0):
        raise StateValidityError("Rusanov step produced nonpositive density or internal energy")
    return out


def apply_sources(cons: ConservativeState, sources: RadiativeSources, dt: float) -> ConservativeState:
    """m += dt S_F and E += dt S_E.

    In total-energy form the work term S_F . u of the internal-energy equation
    cancels against the kinetic-energy change caused by the momentum source,
    so E only receives <f> - B(theta).
    """
    return ConservativeState(
        cons.grid,
        cons.rho.copy(),
        cons.m + dt * np.asarray(sources.S_F),
        cons.E + dt * np.asarray(sources.S_E),
    )
