"""Epsilon sweeps: kinetic vs limit runs, layer probes and order fitting."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..coupled import CoupledState, run_simulation
from ..errors import NUMERIC_ERRORS, ContractViolation, NumericFailure
from ..limit import InitialLayer, LimitState, flux_limit_diagnostic, remainder_diagnostic, run_limit
from ..mesh import norms
from .config import SCHEMA_VERSION, RunConfig
from .presets import build_preset

ROUNDING_FLOOR = 1e-12
FIELDS = ("fbar", "theta", "u", "rho")


def fit_order(pairs) -> dict:
    """Least-squares slope of log(error) against log(eps).

    ``monotone`` is True when errors strictly decrease as eps decreases;
    otherwise ``flag`` is set to ``"non-monotone"``.
    """
    pairs = sorted(((float(e), float(err)) for e, err in pairs), reverse=True)
    if len(pairs) < 3:
        raise ContractViolation(f"fit_order needs at least 3 (eps, error) pairs, got {len(pairs)}")
    eps, err = np.array(pairs).T
    if np.any(eps <= 0) or np.any(err <= 0):
        raise ContractViolation("fit_order needs positive eps and errors")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    monotone = bool(np.all(np.diff(err) < 0))
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "residual": residual,
        "monotone": monotone,
        "flag": None if monotone else "non-monotone",
        "n": len(pairs),
    }


def fit_or_flag(pairs, floor: float = ROUNDING_FLOOR) -> dict:
    """``fit_order`` unless every error sits at rounding level (then flagged, not fitted)."""
    pairs = list(pairs)
    if pairs and max(err for _, err in pairs) <= floor:
        return {"slope": None, "intercept": None, "residual": None, "monotone": None, "flag": "indeterminate", "n": len(pairs)}
    if len(pairs) < 3:
        return {"slope": None, "intercept": None, "residual": None, "monotone": None, "flag": "too-few-points", "n": len(pairs)}
    if min(err for _, err in pairs) <= 0:
        return {"slope": None, "intercept": None, "residual": None, "monotone": None, "flag": "zero-error", "n": len(pairs)}
    return fit_order(pairs)


# --- one sweep member ------------------------------------------------------------------


def _field_errors(ks, ls) -> dict:
    grid = ks.fluid.grid
    diffs = {
        "fbar": ks.radiation.fbar - ls.fbar,
        "theta": ks.fluid.theta - ls.fluid.theta,
        "u": ks.fluid.u - ls.fluid.u,
        "rho": ks.fluid.rho - ls.fluid.rho,
    }
    return {name: norms(grid, d) for name, d in diffs.items()}


def run_member(cfg: RunConfig, eps: float) -> dict:
    """Coupled and limit runs from identical data on an identical step schedule."""
    grid, quad = cfg.grid(), cfg.quadrature()
    init = build_preset(cfg.preset, grid, quad, cfg.c_planck, cfg.preset_params)
    params = cfg.params(eps)
    flux_time = min(cfg.flux_time, cfg.t_end)
    snaps = sorted(set(cfg.snapshot_times) | ({flux_time} if flux_time < cfg.t_end else set()))
    traj, ledger = run_simulation(
        CoupledState(init.fluid, init.h),
        params,
        snapshot_times=snaps,
        c_planck=cfg.c_planck,
        reconstruction=cfg.reconstruction,
        fluid_cfl=cfg.fluid_cfl,
    )
    try:
        limit = run_limit(
            LimitState(init.fluid, init.h.fbar), traj.schedule, c_planck=cfg.c_planck, reconstruction=cfg.reconstruction
        )
    except NUMERIC_ERRORS as exc:
        raise NumericFailure(str(exc), module="diffusion_limit", step=getattr(exc, "step", None)) from exc
    window = cfg.layer_window * eps**2
    snapshots = []
    for ks, ls in zip(traj.states, limit):
        errs = _field_errors(ks, ls)
        flux = flux_limit_diagnostic(ks.radiation, eps)
        snapshots.append({"t": ks.time, "errors": errs, "flux_residual_L2": flux["residual_L2"], "flux_residual_Linf": flux["residual_Linf"]})
    errors = {}
    for name in FIELDS:
        row = {"L2": snapshots[-1]["errors"][name]["L2"], "Linf": snapshots[-1]["errors"][name]["Linf"]}
        for norm in ("L2", "Linf"):
            row[f"{norm}_max"] = max(s["errors"][name][norm] for s in snapshots)
            row[f"{norm}_windowed_max"] = max((s["errors"][name][norm] for s in snapshots if s["t"] >= window), default=float("nan"))
        errors[name] = row
    rem = remainder_diagnostic(traj.states, limit, InitialLayer(init.h), eps, window=cfg.layer_window)
    flux_at = next(s for s in snapshots if abs(s["t"] - flux_time) <= 1e-12)
    return {
        "eps": eps,
        "steps": traj.steps,
        "dt_max": traj.dt,
        "errors": errors,
        "remainder": {k: rem[k] for k in ("max_Linf", "max_L2", "windowed_max_Linf", "windowed_max_L2")},
        "flux_residual_L2": flux_at["flux_residual_L2"],
        "flux_residual_Linf": flux_at["flux_residual_Linf"],
        "drift": ledger.drift(),
        "snapshots": [{"t": s["t"], "flux_residual_L2": s["flux_residual_L2"], **{f"{n}_L2": s["errors"][n]["L2"] for n in FIELDS}} for s in snapshots],
        "lower_bound": init.lower_bound,
    }


def run_layer_member(cfg: RunConfig, eps: float) -> dict:
    """Short run resolving tau = t / eps^2 up to ``layer_span``."""
    grid, quad = cfg.grid(), cfg.quadrature()
    init = build_preset(cfg.preset, grid, quad, cfg.c_planck, cfg.preset_params)
    t_end = cfg.layer_span * eps**2
    params = cfg.params(eps, t_end=t_end, dt=eps**2 / cfg.layer_steps_per_eps2, startup=None)
    m = cfg.layer_snapshots_per_eps2
    snaps = [k * eps**2 / m for k in range(1, int(round(cfg.layer_span * m)))]
    traj, _ = run_simulation(
        CoupledState(init.fluid, init.h),
        params,
        snapshot_times=snaps,
        c_planck=cfg.c_planck,
        reconstruction=cfg.reconstruction,
        fluid_cfl=cfg.fluid_cfl,
    )
    limit = run_limit(LimitState(init.fluid, init.h.fbar), traj.schedule, c_planck=cfg.c_planck, reconstruction=cfg.reconstruction)
    layer = InitialLayer(init.h)
    rem = remainder_diagnostic(traj.states, limit, layer, eps, window=cfg.layer_window)
    flux = [flux_limit_diagnostic(s.radiation, eps)["residual_L2"] for s in traj.states]
    rows = [
        {"eps": eps, "t": r["t"], "tau": r["tau"], "remainder_Linf": r["remainder_Linf"], "remainder_L2": r["remainder_L2"], "flux_residual_L2": fl}
        for r, fl in zip(rem["rows"], flux)
    ]
    # raw anisotropy at tau = 1 against e^{-1} (h - <h>)
    s1 = traj.at(eps**2).radiation
    aniso = s1.values - s1.fbar[..., None]
    expected = layer(1.0).values
    rel = float(np.abs(aniso - expected).max() / np.abs(expected).max()) if np.abs(expected).max() > 0 else float("nan")
    return {
        "eps": eps,
        "steps": traj.steps,
        "rows": rows,
        "max_Linf": rem["max_Linf"],
        "max_L2": rem["max_L2"],
        "windowed_max_Linf": rem["windowed_max_Linf"],
        "anisotropy_tau1_rel_error": rel,
        "lower_bound": init.lower_bound,
    }


# --- reports -----------------------------------------------------------------------------


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "version": __version__, "schema_version": SCHEMA_VERSION, "numpy": np.__version__}


@dataclass
class ConvergenceReport:
    config: dict
    provenance: dict
    members: list
    fits: dict = field(default_factory=dict)
    failure: dict | None = None

    @property
    def partial(self) -> bool:
        return self.failure is not None

    @property
    def eps(self) -> list:
        return [m["eps"] for m in self.members]

    def series(self, key: str) -> list[tuple[float, float]]:
        """``(eps, value)`` pairs for a dotted key such as ``errors.fbar.L2``."""
        out = []
        for m in self.members:
            v = m
            for part in key.split("."):
                v = v[part]
            out.append((m["eps"], v))
        return out

    def as_dict(self) -> dict:
        return {
            "kind": "convergence",
            "config": self.config,
            "provenance": self.provenance,
            "partial": self.partial,
            "failure": self.failure,
            "members": self.members,
            "fits": self.fits,
        }


@dataclass
class LayerReport:
    config: dict
    provenance: dict
    members: list
    fits: dict = field(default_factory=dict)
    failure: dict | None = None

    @property
    def partial(self) -> bool:
        return self.failure is not None

    def as_dict(self) -> dict:
        return {
            "kind": "layer",
            "config": self.config,
            "provenance": self.provenance,
            "partial": self.partial,
            "failure": self.failure,
            "members": self.members,
            "fits": self.fits,
        }


CONVERGENCE_FITS = (
    [f"errors.{n}.{norm}" for n in FIELDS for norm in ("L2", "Linf", "L2_windowed_max", "Linf_windowed_max", "L2_max", "Linf_max")]
    + ["remainder.max_Linf", "remainder.windowed_max_Linf", "remainder.windowed_max_L2", "flux_residual_L2"]
)


def _failure_info(eps, exc) -> dict:
    return {
        "eps": eps,
        "type": type(exc).__name__,
        "module": getattr(exc, "module", None),
        "step": getattr(exc, "step", None),
        "message": str(exc),
    }


def _map_members(func, cfg: RunConfig):
    """Run ``func(cfg, eps)`` over the eps list; stop at the first failure in eps order."""
    results, failure = [], None
    if cfg.workers > 1 and len(cfg.eps) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(cfg.eps))) as pool:
            futures = [pool.submit(func, cfg, eps) for eps in cfg.eps]
            for eps, fut in zip(cfg.eps, futures):
                try:
                    results.append(fut.result())
                except NUMERIC_ERRORS as exc:
                    failure = _failure_info(eps, exc)
                    break
    else:
        for eps in cfg.eps:
            try:
                results.append(func(cfg, eps))
            except NUMERIC_ERRORS as exc:
                failure = _failure_info(eps, exc)
                break
    return results, failure


def epsilon_sweep(cfg: RunConfig) -> ConvergenceReport:
    """Kinetic-vs-limit errors for every eps; orders fitted when >= 3 members succeed."""
    members, failure = _map_members(run_member, cfg)
    report = ConvergenceReport(cfg.as_dict(), _provenance(cfg), members, failure=failure)
    for key in CONVERGENCE_FITS:
        pairs = [(e, v) for e, v in report.series(key) if not math.isnan(v)]
        report.fits[key] = fit_or_flag(pairs)
    return report


def layer_sweep(cfg: RunConfig) -> LayerReport:
    """Initial-layer remainders; the order is measured and reported, never asserted."""
    members, failure = _map_members(run_layer_member, cfg)
    report = LayerReport(cfg.as_dict(), _provenance(cfg), members, failure=failure)
    for key in ("max_Linf", "max_L2", "windowed_max_Linf"):
        pairs = [(m["eps"], m[key]) for m in members if not math.isnan(m[key])]
        report.fits[key] = fit_or_flag(pairs)
    return report
