"""Diffusion-limit system, zeroth-order initial layer and convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .angular import moment0, moment1
from .errors import ContractViolation, DomainError, NumericFailure
from .euler import (
    RadiativeSources,
    apply_sources,
    conservative_to_primitive,
    planck,
    primitive_to_conservative,
    rusanov_flux_step,
)
from .mesh import (
    FluidState,
    KineticField,
    PeriodicGrid,
    gradient_central,
    kinetic_norms,
    laplacian,
    norms,
    pad_vector,
)

LINEAR_SOLVE_TOL = 1e-10


@dataclass
class LimitState:
    fluid: FluidState
    fbar: np.ndarray
    time: float = 0.0

    def copy(self) -> "LimitState":
        return LimitState(self.fluid.copy(), self.fbar.copy(), self.time)


@lru_cache(maxsize=32)
def _laplacian_matrix(dim: int, cells: int) -> sparse.csr_matrix:
    """Sparse matrix of ``mesh.laplacian`` (wide periodic stencil)."""
    h = 2.0 * np.pi / cells
    i = np.arange(cells)
    rows = np.concatenate([i, i, i])
    cols = np.concatenate([(i + 2) % cells, (i - 2) % cells, i])
    data = np.concatenate([np.ones(cells), np.ones(cells), -2.0 * np.ones(cells)]) / (4.0 * h**2)
    one_d = sparse.coo_matrix((data, (rows, cols)), shape=(cells, cells)).tocsr()  # duplicates summed
    eye = sparse.identity(cells, format="csr")
    total = sparse.csr_matrix((cells**dim, cells**dim))
    for ax in range(dim):
        term = sparse.identity(1, format="csr")
        for other in range(dim):
            term = sparse.kron(term, one_d if other == ax else eye, format="csr")
        total = total + term
    return total.tocsr()


def solve_fbar(grid: PeriodicGrid, rhs, dt: float, x0=None, *, maxiter: int = 10_000) -> tuple[np.ndarray, dict]:
    """Conjugate-gradient solve of ((1 + dt) I - (dt/3) Lap) x = rhs."""
    L = _laplacian_matrix(grid.dim, grid.cells)
    A = (1.0 + dt) * sparse.identity(L.shape[0], format="csr") - (dt / 3.0) * L
    b = np.asarray(rhs, dtype=float).reshape(-1)
    guess = b / (1.0 + dt) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    x, info = cg(A, b, x0=guess, rtol=0.0, atol=0.1 * LINEAR_SOLVE_TOL, maxiter=maxiter)
    residual = float(np.max(np.abs(b - A @ x))) if b.size else 0.0
    if info != 0 or residual > LINEAR_SOLVE_TOL:
        raise NumericFailure(
            f"fbar linear solve did not converge (info={info}, residual={residual:.3e})",
            module="diffusion_limit",
        )
    return x.reshape(grid.shape), {"residual": residual}


def limit_step(
    state: LimitState,
    dt: float,
    *,
    c_planck: float = 1.0,
    reconstruction: str = "first-order",
    freeze_fluid: bool = False,
) -> LimitState:
    """Fluid step with limit sources, then implicit Euler for fbar.

    Momentum receives -(1/3) grad_c fbar and total energy fbar - B(theta); the
    fbar equation uses B at the post-fluid temperature, so (u, fbar, theta) =
    (0, B(theta*), theta*) is an exact fixed point.
    """
    if not dt > 0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    grid = state.fluid.grid
    if freeze_fluid:
        fluid = state.fluid.copy()
    else:
        cons = primitive_to_conservative(state.fluid)
        grad = pad_vector(grid, gradient_central(grid, state.fbar))
        sources = RadiativeSources(-grad / 3.0, state.fbar - planck(state.fluid.theta, c_planck))
        cons = rusanov_flux_step(cons, dt, reconstruction=reconstruction)
        cons = apply_sources(cons, sources, dt)
        fluid = conservative_to_primitive(cons)
    rhs = state.fbar + dt * planck(fluid.theta, c_planck)
    fbar, _ = solve_fbar(grid, rhs, dt, x0=state.fbar)
    return LimitState(fluid, fbar, state.time + dt)


def run_limit(initial: LimitState, schedule, *, output_times=None, c_planck=1.0, reconstruction="first-order", freeze_fluid=False):
    """Drive ``limit_step`` over a ``(dt, is_output)`` schedule; returns snapshots."""
    state = initial.copy()
    out = [state.copy()]
    for k, (dt, is_output) in enumerate(schedule):
        try:
            state = limit_step(state, dt, c_planck=c_planck, reconstruction=reconstruction, freeze_fluid=freeze_fluid)
        except NumericFailure as exc:
            raise NumericFailure(str(exc), module="diffusion_limit", step=k) from exc
        if is_output:
            out.append(state.copy())
    return out


# --- initial layer ---------------------------------------------------------------------


@dataclass
class InitialLayer:
    """Zeroth-order layer e^{-tau} (h - <h>) for tau = t / eps^2."""

    h: KineticField

    def __post_init__(self):
        self._anisotropy = self.h.values - self.h.fbar[..., None]

    def __call__(self, tau: float) -> KineticField:
        return initial_layer_eval(self, tau)


def initial_layer_eval(layer: InitialLayer, tau: float) -> KineticField:
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    return KineticField(layer.h.grid, layer.h.quad, math.exp(-tau) * layer._anisotropy)


def remainder_diagnostic(kinetic_snapshots, limit_snapshots, layer: InitialLayer, eps: float, *, window: float = 10.0) -> dict:
    """Norms of f^eps - fbar - f_layer at each common snapshot time.

    ``kinetic_snapshots`` holds objects with ``time`` and either ``radiation``
    (a CoupledState) or ``values``; ``limit_snapshots`` are LimitStates (or
    pairs ``(time, fbar)``) at the same times. Snapshots with
    ``t >= window * eps^2`` form the windowed set.
    """
    limit_by_time = {}
    for s in limit_snapshots:
        t, fbar = (s.time, s.fbar) if hasattr(s, "fbar") else s
        limit_by_time[round(t, 12)] = fbar
    rows = []
    for snap in kinetic_snapshots:
        t = snap.time
        f = snap.radiation if hasattr(snap, "radiation") else snap.field
        key = round(t, 12)
        if key not in limit_by_time:
            continue
        tau = t / eps**2
        remainder = f.values - limit_by_time[key][..., None] - initial_layer_eval(layer, tau).values
        n = kinetic_norms(KineticField(f.grid, f.quad, remainder))
        rows.append({"t": t, "tau": tau, "remainder_Linf": n["Linf"], "remainder_L2": n["L2"], "windowed": t >= window * eps**2})
    if not rows:
        raise ContractViolation("kinetic and limit snapshots share no common times")
    windowed = [r for r in rows if r["windowed"]]
    return {
        "rows": rows,
        "max_Linf": max(r["remainder_Linf"] for r in rows),
        "max_L2": max(r["remainder_L2"] for r in rows),
        "windowed_max_Linf": max((r["remainder_Linf"] for r in windowed), default=float("nan")),
        "windowed_max_L2": max((r["remainder_L2"] for r in windowed), default=float("nan")),
    }


def flux_limit_diagnostic(f: KineticField, eps: float) -> dict:
    """Residual J + (1/3) grad_c <f> with J = (1/eps) <w f>."""
    grid = f.grid
    J = np.moveaxis(moment1(f.quad, f.values), -1, 0) / eps
    fbar = moment0(f.quad, f.values)
    residual = J + pad_vector(grid, gradient_central(grid, fbar)) / 3.0
    return {"J": J, "residual": residual, **{f"residual_{k}": v for k, v in norms(grid, residual).items()}}


def fbar_bounds_ok(fbar_old, emission, fbar_new, tol: float = 1e-12) -> bool:
    """Discrete maximum principle of the implicit fbar update with frozen B."""
    lo = min(float(np.min(fbar_old)), float(np.min(emission)))
    hi = max(float(np.max(fbar_old)), float(np.max(emission)))
    return bool(np.min(fbar_new) >= lo - tol and np.max(fbar_new) <= hi + tol)


__all__ = [
    "LimitState",
    "InitialLayer",
    "limit_step",
    "run_limit",
    "solve_fbar",
    "initial_layer_eval",
    "remainder_diagnostic",
    "flux_limit_diagnostic",
    "fbar_bounds_ok",
    "laplacian",
]
