"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 failed assertion (``converge --assert`` and the validate commands).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .. import __version__
from ..angular import quadrature_deviation
from ..coupled import CoupledState, run_simulation
from ..errors import NUMERIC_ERRORS, ConfigurationError, ContractViolation
from ..euler import fluid_stable_dt, planck_frequency_integral, primitive_to_conservative
from ..limit import LimitState, run_limit
from ..mesh import write_fluid_snapshot, write_kinetic_snapshot
from ..transport import step_schedule
from .config import load_config
from .presets import build_preset
from .report import csv_text, write_convergence, write_json, write_layer
from .sweep import epsilon_sweep, layer_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4
QUADRATURE_TOL = 1e-13
PLANCK_TOL = 1e-8
PLANCK_THETAS = (0.5, 1.0, 2.0)


def _pick_eps(cfg, eps):
    return cfg.eps[0] if eps is None else eps


def _out(cfg, args) -> Path:
    path = Path(args.output_dir) if args.output_dir else cfg.output_path()
    path.mkdir(parents=True, exist_ok=True)
    return path


def _initial(cfg):
    grid, quad = cfg.grid(), cfg.quadrature()
    return build_preset(cfg.preset, grid, quad, cfg.c_planck, cfg.preset_params)


def cmd_run(cfg, args) -> int:
    out = _out(cfg, args)
    eps = _pick_eps(cfg, args.eps)
    init = _initial(cfg)
    traj, ledger = run_simulation(
        CoupledState(init.fluid, init.h),
        cfg.params(eps),
        snapshot_times=cfg.snapshot_times,
        c_planck=cfg.c_planck,
        reconstruction=cfg.reconstruction,
        fluid_cfl=cfg.fluid_cfl,
        ledger_every=args.ledger_every,
        dump_dir=out / "failure",
    )
    h = cfg.config_hash()
    final = traj.states[-1]
    write_fluid_snapshot(out / "run_fluid.csv", final.fluid, t=final.time, config_hash=h)
    write_kinetic_snapshot(out / "run_kinetic.csv", final.radiation, t=final.time, config_hash=h)
    ledger.write_csv(out / "run_invariants.csv", h)
    summary = {
        "kind": "run",
        "eps": eps,
        "config_hash": h,
        "version": __version__,
        "steps": traj.steps,
        "dt_max": traj.dt,
        "t_end": final.time,
        "lower_bound": init.lower_bound,
        "drift": ledger.drift(),
        "gradient_growth": traj.stats["gradient_growth"],
    }
    write_json(out / "run.json", summary)
    print(f"run: eps={eps} steps={traj.steps} drift={summary['drift']} -> {out}")
    return EXIT_OK


def cmd_limit(cfg, args) -> int:
    out = _out(cfg, args)
    init = _initial(cfg)
    dt = cfg.dt or fluid_stable_dt(primitive_to_conservative(init.fluid), cfg.fluid_cfl)
    schedule = step_schedule(cfg.t_end, dt, cfg.snapshot_times)
    snaps = run_limit(LimitState(init.fluid, init.h.fbar), schedule, c_planck=cfg.c_planck, reconstruction=cfg.reconstruction)
    h = cfg.config_hash()
    final = snaps[-1]
    write_fluid_snapshot(out / "limit_fluid.csv", final.fluid, t=final.time, config_hash=h)
    rows = [{"cell_index": i, "fbar": float(v)} for i, v in enumerate(final.fbar.reshape(-1))]
    (out / "limit_fbar.csv").write_text(csv_text(("cell_index", "fbar"), rows, h))
    write_json(out / "limit.json", {"kind": "limit", "config_hash": h, "version": __version__, "steps": len(schedule), "t_end": final.time, "snapshot_times": [s.time for s in snaps]})
    print(f"limit: steps={len(schedule)} -> {out}")
    return EXIT_OK


def cmd_invariants(cfg, args) -> int:
    out = _out(cfg, args)
    eps = _pick_eps(cfg, args.eps)
    init = _initial(cfg)
    _, ledger = run_simulation(
        CoupledState(init.fluid, init.h),
        cfg.params(eps),
        c_planck=cfg.c_planck,
        reconstruction=cfg.reconstruction,
        fluid_cfl=cfg.fluid_cfl,
        ledger_every=max(1, args.every),
        dump_dir=out / "failure",
    )
    h = cfg.config_hash()
    ledger.write_csv(out / "invariants.csv", h)
    write_json(out / "invariants.json", {"kind": "invariants", "eps": eps, "config_hash": h, "drift": ledger.drift(), "relative_drift": ledger.relative_drift()})
    print(f"invariants: eps={eps} drift={ledger.drift()} -> {out}")
    return EXIT_OK


def check_convergence(report, min_order: float) -> list[str]:
    """Assertion messages for the sweep (empty list means pass)."""
    problems = []
    if report.partial:
        problems.append(f"sweep incomplete: {report.failure}")
    for key in ("errors.fbar.L2", "errors.theta.L2", "flux_residual_L2"):
        fit = report.fits[key]
        if fit["slope"] is None:
            problems.append(f"{key}: order not fitted ({fit['flag']})")
            continue
        if not fit["monotone"]:
            problems.append(f"{key}: errors not strictly decreasing in eps")
        if fit["slope"] < min_order:
            problems.append(f"{key}: fitted order {fit['slope']:.3f} < {min_order}")
    return problems


def cmd_converge(cfg, args) -> int:
    out = _out(cfg, args)
    report = epsilon_sweep(cfg)
    paths = write_convergence(report, out)
    for key in ("errors.fbar.L2", "errors.theta.L2", "flux_residual_L2"):
        fit = report.fits[key]
        slope = "n/a" if fit["slope"] is None else f"{fit['slope']:.3f}"
        print(f"converge: {key} order={slope} flag={fit['flag']}")
    print(f"converge: wrote {', '.join(str(p) for p in paths)}")
    if report.partial:
        f = report.failure
        print(f"converge: numeric failure at eps={f['eps']} module={f['module']} step={f['step']}: {f['message']}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.assert_:
        problems = check_convergence(report, args.min_order)
        for p in problems:
            print(f"converge: ASSERTION FAILED {p}", file=sys.stderr)
        if problems:
            return EXIT_ASSERT
    return EXIT_OK


def cmd_layer(cfg, args) -> int:
    out = _out(cfg, args)
    report = layer_sweep(cfg)
    paths = write_layer(report, out)
    fit = report.fits["max_Linf"]
    slope = "n/a" if fit["slope"] is None else f"{fit['slope']:.3f}"
    print(f"layer: measured order of max Linf remainder {slope} (flag={fit['flag']})")
    for m in report.members:
        print(f"layer: eps={m['eps']} max_Linf={m['max_Linf']:.4e} anisotropy@tau=1 rel err={m['anisotropy_tau1_rel_error']:.3e}")
    print(f"layer: wrote {', '.join(str(p) for p in paths)}")
    if report.partial:
        f = report.failure
        print(f"layer: numeric failure at eps={f['eps']} module={f['module']} step={f['step']}: {f['message']}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_validate_quadrature(cfg, args) -> int:
    quad = cfg.quadrature()
    dev = quadrature_deviation(quad)
    worst = max(dev.values())
    print(json.dumps({"quadrature": quad.describe(), "deviation": dev}, sort_keys=True))
    ok = worst <= QUADRATURE_TOL
    print(f"validate-quadrature: max deviation {worst:.3e} ({'PASS' if ok else 'FAIL'}, tol {QUADRATURE_TOL:g})")
    return EXIT_OK if ok else EXIT_ASSERT


def planck_check(thetas=PLANCK_THETAS) -> list[dict]:
    exact = math.pi**4 / 15.0
    rows = []
    for theta in thetas:
        ratio = planck_frequency_integral(theta) / theta**4
        rows.append({"theta": theta, "ratio": ratio, "abs_error": abs(ratio - exact)})
    return rows


def cmd_validate_planck(cfg, args) -> int:
    exact = math.pi**4 / 15.0
    print(f"validate-planck: pi^4/15 = {exact:.10f}")
    rows = planck_check()
    for r in rows:
        print(f"validate-planck: theta={r['theta']:g} integral/theta^4={r['ratio']:.12f} error={r['abs_error']:.2e}")
    ok = max(r["abs_error"] for r in rows) <= PLANCK_TOL
    print(f"validate-planck: {'PASS' if ok else 'FAIL'} (tol {PLANCK_TOL:g})")
    return EXIT_OK if ok else EXIT_ASSERT


COMMANDS = {
    "run": cmd_run,
    "limit": cmd_limit,
    "converge": cmd_converge,
    "layer": cmd_layer,
    "invariants": cmd_invariants,
    "validate-quadrature": cmd_validate_quadrature,
    "validate-planck": cmd_validate_planck,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("-o", "--output-dir", help="output directory (overrides config and environment)")

    parser = argparse.ArgumentParser(prog="radlimit", description="Radiative Euler / diffusion-limit simulator and convergence harness.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="coupled kinetic/fluid run at one eps")
    p.add_argument("--eps", type=float, help="eps value (default: first of kinetic.eps)")
    p.add_argument("--ledger-every", type=int, default=0, help="record invariants every N steps")
    sub.add_parser("limit", parents=[common], help="diffusion-limit run")
    p = sub.add_parser("converge", parents=[common], help="eps sweep against the limit solver")
    p.add_argument("--assert", dest="assert_", action="store_true", help="exit 4 unless orders reach --min-order")
    p.add_argument("--min-order", type=float, default=0.8)
    sub.add_parser("layer", parents=[common], help="initial-layer remainder sweep")
    p = sub.add_parser("invariants", parents=[common], help="conservation ledger of one run")
    p.add_argument("--eps", type=float)
    p.add_argument("--every", type=int, default=10)
    sub.add_parser("validate-quadrature", parents=[common], help="check angular moment identities")
    sub.add_parser("validate-planck", parents=[common], help="check the Planck frequency integral")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if getattr(args, "eps", None) is not None and not 0 < args.eps <= 1:
            raise ConfigurationError(f"--eps must lie in (0, 1], got {args.eps}")
        return COMMANDS[args.command](cfg, args)
    except (ConfigurationError, ContractViolation) as exc:
        print(f"radlimit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        module = getattr(exc, "module", None)
        step = getattr(exc, "step", None)
        print(f"radlimit: numeric failure in module={module} step={step}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
