"""Solvers for the scaled kinetic equation

    eps^2 df/dt + eps w.grad f + f - <f> + eps^2 f = F      (F = eps^2 B(theta) in the coupled system)

Two independent routes:

* ``picard_solve`` -- the characteristics / Duhamel fixed-point iteration with
  the lagged angular average. Slow, but each iterate is an explicit integral,
  which makes it a good oracle for positivity and contraction.
* ``imex_step`` -- explicit advection, implicit relaxation. The implicit part is
  "diagonal plus angular projection", so it is solved in closed form per cell.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .angular import AngularQuadrature
from .errors import CFLViolation, ContractViolation, NumericFailure
from .mesh import (
    KineticField,
    PeriodicGrid,
    _shift,
    central_transport,
    upwind_transport,
)

ADVECTION_MODES = ("ap", "upwind", "frozen")


@dataclass(frozen=True)
class EpsilonParams:
    """Scaling parameter and time-step policy for the kinetic solver.

    ``advection`` selects the spatial treatment of ``(1/eps) w.grad f``:

    ``upwind``  plain upwinding of f. Monotone (nonnegative update coefficients
                at CFL <= 1) but its numerical diffusion grows like h/eps.
    ``ap``      central differences on the isotropic part <f>, upwinding on
                f - <f>. Same CFL, and the eps -> 0 limit is the discrete
                diffusion operator ``laplacian``/3.
    ``frozen``  the advected field is replaced by the closure
                <f> - eps w.grad_c <f>; the time step no longer scales with eps.

    ``startup`` grades the first steps from ``startup * eps^2`` up to the
    policy step so the O(eps^2) initial layer is resolved in time; ``None``
    gives a uniform schedule.
    """

    eps: float
    t_end: float = 1.0
    cfl: float = 0.5
    dt: float | None = None
    advection: str = "ap"
    startup: float | None = 0.05

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ContractViolation(f"eps must lie in (0, 1], got {self.eps}")
        if not self.t_end > 0:
            raise ContractViolation(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and not self.dt > 0:
            raise ContractViolation(f"dt must be positive, got {self.dt}")
        if not self.cfl > 0:
            raise ContractViolation(f"cfl must be positive, got {self.cfl}")
        if self.advection not in ADVECTION_MODES:
            raise ContractViolation(f"advection must be one of {ADVECTION_MODES}, got {self.advection!r}")
        if self.startup is not None and not self.startup > 0:
            raise ContractViolation(f"startup must be positive or None, got {self.startup}")
        if self.advection != "frozen" and self.dt is None and self.cfl > 1.0:
            raise ContractViolation("explicit advection requires cfl <= 1")

    def max_stable_dt(self, grid: PeriodicGrid, quad: AngularQuadrature) -> float:
        if self.advection == "frozen":
            # explicit step of the (1/3) div_c grad_c diffusion, symbol <= dim/(3 h^2)
            return 6.0 * grid.h**2 / grid.dim
        speed = float(np.max(np.abs(quad.nodes[:, : grid.dim]).sum(axis=1)))
        return self.eps * grid.h / speed

    def startup_dt(self) -> float | None:
        return None if self.startup is None else self.startup * self.eps**2

    def kinetic_dt(self, grid: PeriodicGrid, quad: AngularQuadrature) -> float:
        """Fixed ``dt`` if given, else ``cfl`` times the stability limit."""
        if self.dt is not None:
            return float(self.dt)
        return self.cfl * self.max_stable_dt(grid, quad)


# --- IMEX stepper ---------------------------------------------------------------


def central_transport_nodes(grid: PeriodicGrid, quad: AngularQuadrature, values) -> np.ndarray:
    """``w_q . grad_c v_q`` for per-node values ``grid.shape + (Q,)``."""
    out = np.zeros(values.shape)
    for ax in grid.axes:
        diff = (_shift(values, 1, ax) - _shift(values, -1, ax)) / (2.0 * grid.h)
        out += quad.nodes[:, ax] * diff
    return out


def transport_operator(f: KineticField, eps: float, advection: str = "ap") -> np.ndarray:
    """Discrete ``w . grad f`` used by ``imex_step`` for the chosen mode."""
    grid, quad = f.grid, f.quad
    fbar = f.fbar
    if advection == "upwind":
        return upwind_transport(grid, quad, f.values)
    if advection == "ap":
        return central_transport(grid, quad, fbar) + upwind_transport(grid, quad, f.values - fbar[..., None])
    if advection == "frozen":
        first = central_transport(grid, quad, fbar)
        return first - eps * central_transport_nodes(grid, quad, first)
    raise ContractViolation(f"unknown advection mode {advection!r}")


def planck_emission(theta, c_planck: float = 1.0) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise NumericFailure(f"temperature must stay positive, min={theta.min():.6g}", module="transport_kinetic")
    return c_planck * theta**4


def imex_step(
    f: KineticField,
    theta,
    params: EpsilonParams,
    dt: float,
    *,
    c_planck: float = 1.0,
    source=None,
    check_cfl: bool = True,
) -> KineticField:
    """One IMEX step of the kinetic equation.

    With ``g = f - (dt/eps) A(f) + (dt/eps^2) F`` the implicit relaxation has
    the closed-form solution ``<f'> = <g>/(1+dt)`` and
    ``f' = (g + (dt/eps^2) <f'>) / (1 + dt/eps^2 + dt)``.

    ``F`` defaults to ``eps^2 B(theta)`` (per cell); pass ``source`` to supply
    an arbitrary per-(cell, node) right-hand side instead.
    """
    if not dt > 0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    eps = params.eps
    if check_cfl:
        limit = params.max_stable_dt(f.grid, f.quad)
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolation("kinetic step exceeds CFL limit", suggested_dt=limit, module="transport_kinetic")
    g = _explicit_part(f, theta, params, dt, c_planck, source)
    return KineticField(f.grid, f.quad, _relax(f.quad, g, eps, dt))


def _explicit_part(f, theta, params, dt, c_planck, source):
    eps = params.eps
    g = f.values - (dt / eps) * transport_operator(f, eps, params.advection)
    if source is None:
        g = g + dt * planck_emission(theta, c_planck)[..., None]
    else:
        g = g + (dt / eps**2) * np.broadcast_to(np.asarray(source, dtype=float), f.values.shape)
    return g


def _relax(quad: AngularQuadrature, g, eps, dt):
    gbar = g @ quad.weights
    fbar_new = gbar / (1.0 + dt)
    kappa = dt / eps**2
    return (g + kappa * fbar_new[..., None]) / (1.0 + kappa + dt)


def moment_identity_residual(
    f_old: KineticField,
    f_new: KineticField,
    emission_bar,
    params: EpsilonParams,
    dt: float,
) -> float:
    """Max residual of the discrete zeroth-moment balance over one step.

    Checks ``<f'> - <f> + dt * div J = dt * (<F>/eps^2 - <f'>)`` with
    ``div J = (1/eps) <A(f)>``, written undivided by ``dt``.
    """
    div_j = (f_old.quad.weights @ np.moveaxis(transport_operator(f_old, params.eps, params.advection), -1, 0)) / params.eps
    lhs = f_new.fbar - f_old.fbar + dt * div_j
    rhs = dt * (np.asarray(emission_bar) - f_new.fbar)
    return float(np.max(np.abs(lhs - rhs)))


def imex_coefficients(grid: PeriodicGrid, quad: AngularQuadrature, params: EpsilonParams, dt: float) -> dict:
    """Coefficients of the upwind IMEX update written as a linear combination.

    ``g_i = c_self f_i + sum_d c_d f_upstream(d) + dt F``; the relaxation then
    mixes g with <g> using positive weights. Every coefficient is
    nonnegative exactly when ``dt * sum_d |w_d| <= eps h``.
    """
    lam = dt / (params.eps * grid.h)
    abs_w = np.abs(quad.nodes[:, : grid.dim])
    self_coeff = 1.0 - lam * abs_w.sum(axis=1)
    upstream = lam * abs_w
    kappa = dt / params.eps**2
    relax = np.array([1.0 / (1.0 + kappa + dt), kappa / ((1.0 + dt) * (1.0 + kappa + dt))])
    return {
        "self": self_coeff,
        "upstream": upstream,
        "relaxation": relax,
        "min": float(min(self_coeff.min(), upstream.min(), relax.min())),
    }


@dataclass
class KineticTrajectory:
    times: list[float]
    fields: list[KineticField]
    dt: float
    cfl_used: float
    steps: int


def step_schedule(
    t_end: float, dt_max: float, output_times=(), *, dt_first: float | None = None, growth: float = 2.0
) -> list[tuple[float, bool]]:
    """Sub-steps that land exactly on every requested output time.

    Returns ``(dt, is_output)`` pairs; each segment between consecutive
    output times is split into ``ceil(length / dt_max)`` equal steps. With
    ``dt_first`` the schedule opens with steps ``dt_first * growth^k`` until
    they reach ``dt_max``.
    """
    if growth <= 1.0:
        raise ContractViolation(f"growth must exceed 1, got {growth}")
    marks = sorted({float(t) for t in output_times if 0 < t < t_end} | {float(t_end)})
    schedule, start = [], 0.0
    step = dt_first if dt_first is not None and dt_first < dt_max else None
    for mark in marks:
        while step is not None and start + 2.0 * step < mark:
            schedule.append((step, False))
            start += step
            step = step * growth if step * growth < dt_max else None
        length = mark - start
        n = max(1, math.ceil(length / dt_max * (1.0 - 1e-12)))
        dt = length / n
        schedule.extend((dt, i == n - 1) for i in range(n))
        start = mark
    return schedule


def advance_kinetic(
    f: KineticField,
    theta_provider,
    params: EpsilonParams,
    *,
    snapshot_times=(),
    c_planck: float = 1.0,
    source=None,
) -> KineticTrajectory:
    """Time loop over ``imex_step`` with a frozen or time-dependent temperature.

    ``theta_provider`` is either an array or a callable ``t -> theta``.
    """
    dt_max = params.kinetic_dt(f.grid, f.quad)
    schedule = step_schedule(params.t_end, dt_max, snapshot_times, dt_first=params.startup_dt())
    t = 0.0
    times, fields = [0.0], [f.copy()]
    for k, (dt, is_output) in enumerate(schedule):
        theta = theta_provider(t) if callable(theta_provider) else theta_provider
        f = imex_step(f, theta, params, dt, c_planck=c_planck, source=source)
        t += dt
        if not np.all(np.isfinite(f.values)):
            raise NumericFailure("non-finite intensity", module="transport_kinetic", step=k)
        if is_output:
            times.append(t)
            fields.append(f.copy())
    dt_used = max(dt for dt, _ in schedule)
    return KineticTrajectory(times, fields, dt_used, dt_used / params.max_stable_dt(f.grid, f.quad), len(schedule))


def l2_energy_bound(h: KineticField, sources, dt: float, eps: float) -> float:
    """Right-hand side of the L2 estimate: ||h||^2 + (2/eps^4) sum_n ||F_n||^2 dt."""
    w = h.quad.weights
    vol = h.grid.cell_volume
    total = float(((h.values**2) @ w).sum() * vol)
    for F in sources:
        F = np.broadcast_to(np.asarray(F, dtype=float), h.values.shape)
        total += 2.0 / eps**4 * float(((F**2) @ w).sum() * vol) * dt
    return total


# --- Picard / characteristics oracle -----------------------------------------------


@dataclass
class LinearTransportProblem:
    """Initial datum ``h`` and source ``F`` for the linear kinetic equation.

    ``source`` may be None, an array of shape ``grid.shape + (Q,)`` (constant
    in time), or a callable ``t -> array``.
    """

    h: KineticField
    eps: float
    source: object = None

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ContractViolation(f"eps must lie in (0, 1], got {self.eps}")

    def source_at(self, t: float) -> np.ndarray:
        shape = self.h.values.shape
        if self.source is None:
            return np.zeros(shape)
        value = self.source(t) if callable(self.source) else self.source
        return np.broadcast_to(np.asarray(value, dtype=float), shape)

    def source_sup(self, times) -> float:
        if self.source is None:
            return 0.0
        if not callable(self.source):
            return float(np.max(np.abs(self.source)))
        return max(float(np.max(np.abs(self.source_at(t)))) for t in times)


@dataclass
class PicardDiagnostics:
    sup_differences: list[float]
    ratios: list[float]
    contraction_bound: float
    panels: int
    times: np.ndarray
    history: np.ndarray = field(repr=False)
    warnings: list[str] = field(default_factory=list)


def default_panels(t_end: float, eps: float) -> int:
    return int(min(1_000_000, max(64, math.ceil(8.0 * t_end / eps**2))))


def _interp_stencil(grid: PeriodicGrid, displacement):
    """Periodic multilinear interpolation of u(x_i - d) as corner gathers.

    ``displacement`` has shape ``(Q, dim)``. Returns a list of
    ``(flat_index, weight)`` pairs, each of shape ``(n_cells, Q)``.
    """
    n = grid.cells
    idx = np.indices(grid.shape).reshape(grid.dim, -1)  # (dim, n_cells)
    shifts = displacement / grid.h  # (Q, dim)
    base = np.floor(shifts)
    frac = shifts - base
    corners = []
    for corner in itertools.product((0, 1), repeat=grid.dim):
        weight = np.ones((idx.shape[1], shifts.shape[0]))
        flat = np.zeros((idx.shape[1], shifts.shape[0]), dtype=np.int64)
        for ax, c in enumerate(corner):
            src = (idx[ax][:, None] - base[None, :, ax].astype(np.int64) - c) % n
            weight = weight * (frac[None, :, ax] if c else 1.0 - frac[None, :, ax])
            flat = flat * n + src
        corners.append((flat, weight))
    return corners


def _gather(values, corners, q_index):
    """Interpolate ``values`` (leading axes..., n_cells, Q) at the stencil."""
    out = None
    for flat, weight in corners:
        term = values[..., flat, q_index] * weight
        out = term if out is None else out + term
    return out


def picard_solve(
    problem: LinearTransportProblem,
    t_end: float,
    n_iterations: int,
    panels: int | None = None,
    *,
    tol: float | None = None,
) -> tuple[KineticField, PicardDiagnostics]:
    """Iterate the Duhamel formula along straight characteristics.

    Iterate k solves the equation with <f> lagged at iterate k-1 and f_0 = 0:

        f_k(t,x,w) = h(x - (t/eps) w, w) exp(-(1+eps^2) t/eps^2)
                     + int_0^{t/eps^2} (<f_{k-1}> + F)(eps^2 s, x - eps (t/eps^2 - s) w)
                                       exp(-(1+eps^2)(t/eps^2 - s)) ds

    The s-integral uses the composite midpoint rule on a uniform time grid; the
    lagged average at a panel midpoint is the mean of its two end values.
    Foot points are found by periodic multilinear interpolation.
    """
    if not t_end > 0:
        raise ContractViolation(f"t_end must be positive, got {t_end}")
    if n_iterations < 1:
        raise ContractViolation("n_iterations must be >= 1")
    eps = problem.eps
    h = problem.h
    grid, quad = h.grid, h.quad
    panels = default_panels(t_end, eps) if panels is None else int(panels)
    if panels < 1:
        raise ContractViolation("need at least one time panel")
    Q = quad.size
    n_cells = int(np.prod(grid.shape))
    a = 1.0 + eps**2
    dtau = t_end / panels  # physical time per panel
    ds = dtau / eps**2  # fast time per panel
    times = np.arange(panels + 1) * dtau
    dirs = quad.nodes[:, : grid.dim]
    q_index = np.arange(Q)[None, :]

    # transported initial term, identical for every iterate
    h_flat = h.values.reshape(n_cells, Q)
    initial = np.empty((panels + 1, n_cells, Q))
    for m, t in enumerate(times):
        corners = _interp_stencil(grid, (t / eps) * dirs)
        initial[m] = _gather(h_flat, corners, q_index) * math.exp(-a * t / eps**2)

    mids = times[:-1] + 0.5 * dtau
    source_mid = np.stack([problem.source_at(t).reshape(n_cells, Q) for t in mids])
    lag_stencils = [
        _interp_stencil(grid, ((lag - 0.5) * ds * eps) * dirs) for lag in range(1, panels + 1)
    ]
    lag_weights = ds * np.exp(-a * (np.arange(1, panels + 1) - 0.5) * ds)

    history = np.zeros((panels + 1, n_cells, Q))
    sup_diffs, ratios, notes = [], [], []
    for k in range(1, n_iterations + 1):
        fbar_prev = history @ quad.weights  # (M+1, n_cells)
        integrand = 0.5 * (fbar_prev[:-1] + fbar_prev[1:])[..., None] + source_mid  # (M, n_cells, Q)
        new = initial.copy()
        for lag in range(1, panels + 1):
            # contributions from panel j = m - lag to every target time m >= lag
            new[lag:] += lag_weights[lag - 1] * _gather(integrand[: panels + 1 - lag], lag_stencils[lag - 1], q_index)
        if not np.all(np.isfinite(new)):
            bad = np.argwhere(~np.isfinite(new))[0]
            raise NumericFailure(
                "non-finite value in Duhamel iterate",
                module="transport_kinetic",
                step=k,
                location={"time_index": int(bad[0]), "cell": int(bad[1]), "node": int(bad[2])},
            )
        diff = float(np.max(np.abs(new - history)))
        if sup_diffs and sup_diffs[-1] > 0:
            ratios.append(diff / sup_diffs[-1])
        sup_diffs.append(diff)
        history = new
        if diff == 0.0:
            break
    if tol is not None and sup_diffs[-1] > tol:
        notes.append(
            f"last iterate change {sup_diffs[-1]:.3e} exceeds tol {tol:.3e}; increase n_iterations"
        )
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    diagnostics = PicardDiagnostics(
        sup_differences=sup_diffs,
        ratios=ratios,
        contraction_bound=1.0 / a,
        panels=panels,
        times=times,
        history=history.reshape((panels + 1,) + grid.shape + (Q,)),
        warnings=notes,
    )
    final = KineticField(grid, quad, history[-1].reshape(grid.shape + (Q,)))
    return final, diagnostics


def linfty_bound(problem: LinearTransportProblem, solution) -> tuple[bool, float]:
    """Check ``||f||_inf <= ((1+eps^2)/eps^2) (||h||_inf + ||F||_inf)``.

    ``solution`` is a KineticField, a PicardDiagnostics (whole history) or an
    array. Returns ``(holds, slack)``.
    """
    if isinstance(solution, PicardDiagnostics):
        values, times = solution.history, solution.times
    elif isinstance(solution, KineticField):
        values, times = solution.values, [0.0]
    else:
        values, times = np.asarray(solution), [0.0]
    eps = problem.eps
    bound = (1.0 + eps**2) / eps**2 * (
        float(np.max(np.abs(problem.h.values))) + problem.source_sup(times)
    )
    slack = bound - float(np.max(np.abs(values)))
    return slack >= 0.0, slack
