"""Operator-split integration of the coupled fluid / radiation system.

One step is fluid(dt/2) -> kinetic(dt) -> fluid(dt/2). Each fluid half step
is a Rusanov update followed by the radiative sources frozen at the start of
that half step; the kinetic step sees the temperature after the first half.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CFLViolation, NumericFailure, StateValidityError
from .euler import (
    RadiativeSources,
    apply_sources,
    conservative_to_primitive,
    fluid_stable_dt,
    primitive_to_conservative,
    rusanov_flux_step,
)
from .mesh import (
    FluidState,
    KineticField,
    gradient_central,
    write_fluid_snapshot,
    write_kinetic_snapshot,
)
from .transport import EpsilonParams, imex_step, step_schedule


@dataclass
class CoupledState:
    fluid: FluidState
    radiation: KineticField
    time: float = 0.0

    def __post_init__(self):
        if self.fluid.grid != self.radiation.grid:
            raise ValueError("fluid and radiation must live on the same grid")

    @property
    def grid(self):
        return self.fluid.grid

    def copy(self) -> "CoupledState":
        return CoupledState(self.fluid.copy(), self.radiation.copy(), self.time)


def _fluid_half(cons, f, theta, eps, dt, c_planck, reconstruction):
    sources = RadiativeSources.from_kinetic(f, theta, eps, c_planck)
    cons = rusanov_flux_step(cons, dt, reconstruction=reconstruction)
    return apply_sources(cons, sources, dt)


def step_coupled(
    state: CoupledState,
    params: EpsilonParams,
    dt: float,
    *,
    c_planck: float = 1.0,
    reconstruction: str = "first-order",
    step_index: int | None = None,
) -> CoupledState:
    """Advance the coupled state by one Strang-split step of size ``dt``."""
    eps = params.eps
    try:
        cons = primitive_to_conservative(state.fluid)
        cons = _fluid_half(cons, state.radiation, state.fluid.theta, eps, 0.5 * dt, c_planck, reconstruction)
        theta_mid = conservative_to_primitive(cons).theta
        f_new = imex_step(state.radiation, theta_mid, params, dt, c_planck=c_planck)
        cons = _fluid_half(cons, f_new, theta_mid, eps, 0.5 * dt, c_planck, reconstruction)
        fluid = conservative_to_primitive(cons)
    except CFLViolation as exc:
        raise CFLViolation(
            f"coupled step rejected ({exc})", suggested_dt=exc.suggested_dt, module=exc.module or "coupled_system", step=step_index
        ) from exc
    return CoupledState(fluid, f_new, state.time + dt)


# --- invariants ----------------------------------------------------------------------


def invariants(state: CoupledState, eps: float) -> dict:
    """Discrete totals conserved by the continuous system."""
    grid = state.grid
    vol = grid.cell_volume
    fl = state.fluid
    f = state.radiation
    mass = float(fl.rho.sum() * vol)
    mom = (fl.rho * fl.u).reshape(3, -1).sum(axis=1) + eps * f.first_moment.reshape(3, -1).sum(axis=1)
    energy = (0.5 * fl.rho * (fl.u**2).sum(axis=0) + fl.rho * fl.theta + f.fbar).sum()
    return {"mass": mass, "momentum_rad": mom * vol, "energy_total": float(energy * vol)}


@dataclass
class InvariantLedger:
    times: list[float]
    mass: list[float]
    momentum_rad: list[np.ndarray]
    energy_total: list[float]

    def drift(self) -> dict:
        """Max absolute deviation from the t=0 value, per quantity."""
        mass = np.abs(np.array(self.mass) - self.mass[0])
        mom = np.abs(np.array(self.momentum_rad) - self.momentum_rad[0]).max(axis=1)
        energy = np.abs(np.array(self.energy_total) - self.energy_total[0])
        return {"mass": float(mass.max()), "momentum_rad": float(mom.max()), "energy_total": float(energy.max())}

    def relative_drift(self) -> dict:
        d = self.drift()
        mom_scale = max(float(np.abs(self.momentum_rad[0]).max()), 1e-300)
        return {
            "mass": d["mass"] / abs(self.mass[0]),
            "momentum_rad": d["momentum_rad"] / mom_scale,
            "energy_total": d["energy_total"] / abs(self.energy_total[0]),
        }

    def rows(self):
        for t, m, p, e in zip(self.times, self.mass, self.momentum_rad, self.energy_total):
            yield (t, m, float(p[0]), float(p[1]), float(p[2]), e)

    def write_csv(self, path, config_hash: str = "") -> Path:
        path = Path(path)
        lines = [f"# config_hash={config_hash}", "t,mass,momentum_rad_x,momentum_rad_y,momentum_rad_z,energy_total"]
        lines.extend(",".join(repr(float(v)) for v in row) for row in self.rows())
        path.write_text("\n".join(lines) + "\n")
        return path


def invariant_report(trajectory, eps: float) -> InvariantLedger:
    """Ledger of invariants over a sequence of CoupledState snapshots."""
    states = trajectory.states if hasattr(trajectory, "states") else list(trajectory)
    ledger = InvariantLedger([], [], [], [])
    for s in states:
        inv = invariants(s, eps)
        ledger.times.append(s.time)
        ledger.mass.append(inv["mass"])
        ledger.momentum_rad.append(np.asarray(inv["momentum_rad"]))
        ledger.energy_total.append(inv["energy_total"])
    return ledger


# --- driver ------------------------------------------------------------------------------


@dataclass
class Trajectory:
    states: list[CoupledState]
    dt: float
    steps: int
    stats: dict = field(default_factory=dict)
    schedule: list = field(default_factory=list)

    @property
    def times(self) -> list[float]:
        return [s.time for s in self.states]

    def at(self, t: float) -> CoupledState:
        for s in self.states:
            if abs(s.time - t) <= 1e-12 * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")


def coupled_dt(state: CoupledState, params: EpsilonParams, fluid_cfl: float = 0.5) -> float:
    """Largest step allowed by both the kinetic policy and the fluid CFL."""
    kinetic = params.kinetic_dt(state.grid, state.radiation.quad)
    fluid = fluid_stable_dt(primitive_to_conservative(state.fluid), fluid_cfl)
    return min(kinetic, fluid)


def _max_gradient(fluid: FluidState) -> float:
    return float(np.abs(gradient_central(fluid.grid, fluid.theta)).max())


def run_simulation(
    initial: CoupledState,
    params: EpsilonParams,
    *,
    snapshot_times=(),
    c_planck: float = 1.0,
    reconstruction: str = "first-order",
    fluid_cfl: float = 0.5,
    ledger_every: int = 0,
    dump_dir=None,
) -> tuple[Trajectory, InvariantLedger]:
    """Integrate to ``params.t_end`` recording snapshots at the requested times.

    The step sequence depends only on the inputs, so repeated runs are
    bit-identical. If the fluid loses positivity the last good state is dumped
    to ``dump_dir`` (when given) and a NumericFailure is raised.
    """
    start = _time.perf_counter()
    dt_max = coupled_dt(initial, params, fluid_cfl)
    schedule = step_schedule(params.t_end, dt_max, snapshot_times, dt_first=params.startup_dt())
    state = initial.copy()
    snapshots = [state.copy()]
    ledger_states = [state.copy()]
    grad0 = max(_max_gradient(state.fluid), 1e-300)
    grad_growth = 1.0
    for k, (dt, is_output) in enumerate(schedule):
        try:
            new = step_coupled(state, params, dt, c_planck=c_planck, reconstruction=reconstruction, step_index=k)
        except StateValidityError as exc:
            if dump_dir is not None:
                dump_dir = Path(dump_dir)
                dump_dir.mkdir(parents=True, exist_ok=True)
                write_fluid_snapshot(dump_dir / "failure_fluid.csv", state.fluid, t=state.time, step=k)
                write_kinetic_snapshot(dump_dir / "failure_kinetic.csv", state.radiation, t=state.time, step=k)
            raise NumericFailure(str(exc), module="coupled_system", step=k) from exc
        if not np.all(np.isfinite(new.radiation.values)):
            raise NumericFailure("non-finite radiation field", module="coupled_system", step=k)
        state = new
        if is_output:
            snapshots.append(state.copy())
            grad_growth = max(grad_growth, _max_gradient(state.fluid) / grad0)
        if is_output or (ledger_every and (k + 1) % ledger_every == 0):
            ledger_states.append(state.copy())
    ledger = invariant_report(_dedupe(ledger_states), params.eps)
    stats = {
        "wall_seconds": _time.perf_counter() - start,
        "steps": len(schedule),
        "dt": max(dt for dt, _ in schedule),
        "gradient_growth": grad_growth,
    }
    return Trajectory(snapshots, stats["dt"], len(schedule), stats, schedule), ledger


def _dedupe(states):
    out = []
    for s in states:
        if not out or s.time != out[-1].time:
            out.append(s)
    return out
