"""Acceptance suite: twelve criteria at their stated tolerances.

Each test prints one ``[PASS]`` / ``[FAIL]`` line (output capture is bypassed
for that line) and then asserts.
"""

import math
import time

import numpy as np
import pytest

from radlimit.angular import default_quadrature, quadrature_deviation
from radlimit.coupled import CoupledState, coupled_dt, run_simulation, step_coupled
from radlimit.euler import planck_frequency_integral
from radlimit.harness.config import RunConfig
from radlimit.harness.presets import build_preset
from radlimit.harness.sweep import epsilon_sweep, fit_order, layer_sweep
from radlimit.limit import LimitState, run_limit
from radlimit.mesh import KineticField, PeriodicGrid, norms
from radlimit.transport import (
    EpsilonParams,
    LinearTransportProblem,
    advance_kinetic,
    imex_step,
    moment_identity_residual,
    picard_solve,
)

pytestmark = pytest.mark.slow

SWEEP_EPS = (0.1, 0.05, 0.025, 0.0125)


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return emit


def strictly_decreasing(values):
    return all(a > b for a, b in zip(values, values[1:]))


@pytest.fixture(scope="module")
def convergence_report():
    cfg = RunConfig(preset="smooth-1d", eps=SWEEP_EPS, t_end=0.5, flux_time=0.25)
    start = time.perf_counter()
    report = epsilon_sweep(cfg)
    return report, time.perf_counter() - start


# 1 -------------------------------------------------------------------------------------


def test_criterion_01_quadrature_identities(verdict):
    quad = default_quadrature()
    dev = quadrature_deviation(quad)
    ok = max(dev["weight_sum"], dev["first_moment"], dev["second_moment"]) <= 1e-13
    verdict(
        1,
        ok,
        f"{quad.size} nodes, |<1>-1|={dev['weight_sum']:.1e} |<w>|={dev['first_moment']:.1e} "
        f"|<ww>-I/3|={dev['second_moment']:.1e} (tol 1e-13)",
    )


# 2 -------------------------------------------------------------------------------------


def test_criterion_02_planck_integral(verdict):
    exact = math.pi**4 / 15
    errs = {theta: abs(planck_frequency_integral(theta) / theta**4 - exact) for theta in (0.5, 1.0, 2.0)}
    worst = max(errs.values())
    verdict(2, worst <= 1e-8, f"max |integral/theta^4 - pi^4/15| = {worst:.2e} over theta in (0.5, 1, 2) (tol 1e-8)")


# 3 -------------------------------------------------------------------------------------


def test_criterion_03_picard_contraction(verdict):
    rng = np.random.default_rng(3)
    quad = default_quadrature()
    g = PeriodicGrid(1, 8)
    worst_margin, used = -np.inf, 0
    for eps in (1.0, 0.5, 0.1):
        bound = 1 / (1 + eps**2)
        for _ in range(20):
            h = KineticField(g, quad, rng.random((8, quad.size)))
            F = rng.random((8, quad.size))
            _, diag = picard_solve(LinearTransportProblem(h, eps, F), 0.05, 6, panels=64)
            # ratios of differences already at rounding level carry no information
            ratios = [r for r, d in zip(diag.ratios, diag.sup_differences) if d > 1e-12]
            used += len(ratios)
            worst_margin = max(worst_margin, max(ratios) - bound)
    ok = used > 0 and worst_margin <= 1e-10
    verdict(3, ok, f"max(ratio - 1/(1+eps^2)) = {worst_margin:.3e} over {used} ratios, 60 trials (tol 1e-10)")


# 4 -------------------------------------------------------------------------------------


def test_criterion_04_positivity(verdict):
    rng = np.random.default_rng(4)
    quad = default_quadrature()
    g = PeriodicGrid(1, 8)
    lo_picard = lo_imex = np.inf
    for trial in range(100):
        eps = float(rng.choice([1.0, 0.5, 0.1, 0.02]))
        sparse = rng.random((8, quad.size)) > 0.3
        h = KineticField(g, quad, rng.random((8, quad.size)) * sparse)
        F = rng.random((8, quad.size)) * (rng.random((8, quad.size)) > 0.3)
        _, diag = picard_solve(LinearTransportProblem(h, eps, F), 0.02, 3, panels=32)
        lo_picard = min(lo_picard, float(diag.history.min()))
        p = EpsilonParams(eps, t_end=0.02, cfl=float(rng.uniform(0.1, 1.0)), advection="upwind", startup=None)
        tr = advance_kinetic(h, None, p, source=F * eps**2, snapshot_times=[0.005, 0.01, 0.015])
        lo_imex = min(lo_imex, min(float(f.values.min()) for f in tr.fields))
    ok = lo_picard >= -1e-12 and lo_imex >= -1e-12
    verdict(4, ok, f"100 trials: min Picard {lo_picard:.2e}, min IMEX {lo_imex:.2e} (tol -1e-12)")


# 5 -------------------------------------------------------------------------------------


def test_criterion_05_isotropic_decay(verdict):
    quad = default_quadrature()
    g = PeriodicGrid(1, 4)
    c = 1.7
    exact = c * math.exp(-1.0)
    h = KineticField.isotropic(g, quad, c)
    rel = {}
    for eps in (1.0, 0.1, 1e-3):
        p = EpsilonParams(eps, t_end=1.0, dt=1e-3, startup=None)
        f = advance_kinetic(h, None, p, source=0.0).fields[-1]
        rel[f"imex eps={eps:g}"] = float(np.max(np.abs(f.values / exact - 1)))
    for eps in (1.0, 0.5):
        f, _ = picard_solve(LinearTransportProblem(h, eps), 1.0, 40, panels=400)
        rel[f"picard eps={eps:g}"] = float(np.max(np.abs(f.values / exact - 1)))
    worst = max(rel.values())
    verdict(5, worst <= 1e-3, "relative error at t=1: " + ", ".join(f"{k} {v:.1e}" for k, v in rel.items()) + " (tol 1e-3)")


# 6 -------------------------------------------------------------------------------------


def test_criterion_06_moment_identity(verdict):
    quad = default_quadrature()
    g = PeriodicGrid(1, 64)
    x = g.coordinates()[0]
    theta = 1 + 0.2 * np.cos(x)
    f = KineticField.from_function(g, quad, lambda xs, w: 1 + 0.3 * np.sin(xs[0]) + 0.2 * np.cos(xs[0]) * w[:, 0])
    worst = 0.0
    for eps, mode in ((0.05, "ap"), (0.2, "upwind")):
        p = EpsilonParams(eps, advection=mode)
        dt = p.max_stable_dt(g, quad)
        state = f
        for _ in range(500):
            new = imex_step(state, theta, p, dt)
            worst = max(worst, moment_identity_residual(state, new, theta**4, p, dt))
            state = new
    verdict(6, worst <= 1e-13, f"max per-step residual over 2 x 500 steps = {worst:.2e} (tol 1e-13)")


# 7 -------------------------------------------------------------------------------------


def test_criterion_07_conservation(verdict):
    quad = default_quadrature()
    d = build_preset("smooth-1d", PeriodicGrid(1, 64), quad)
    dts = (2e-3, 1e-3, 5e-4, 2.5e-4)
    worst_mass, orders = 0.0, {}
    for eps in (0.1, 0.025):
        energy, momentum = [], []
        for dt in dts:
            p = EpsilonParams(eps, t_end=0.5, dt=dt, startup=None)
            _, ledger = run_simulation(CoupledState(d.fluid, d.h), p, ledger_every=50)
            drift = ledger.drift()
            worst_mass = max(worst_mass, drift["mass"])
            energy.append(drift["energy_total"])
            momentum.append(drift["momentum_rad"])
        orders[f"eps={eps:g} energy"] = fit_order(zip(dts, energy))["slope"]
        orders[f"eps={eps:g} momentum"] = fit_order(zip(dts, momentum))["slope"]
    ok = worst_mass <= 1e-12 and min(orders.values()) >= 0.8
    detail = ", ".join(f"{k} order {v:.3f}" for k, v in orders.items())
    verdict(7, ok, f"mass drift {worst_mass:.1e} (tol 1e-12); {detail} (min 0.8)")


# 8 -------------------------------------------------------------------------------------


def test_criterion_08_diffusion_limit(verdict, convergence_report):
    report, seconds = convergence_report
    parts, ok = [], report.eps == list(SWEEP_EPS)
    for key in ("errors.fbar.L2", "errors.theta.L2"):
        values = [v for _, v in report.series(key)]
        slope = fit_order(report.series(key))["slope"]
        ok = ok and strictly_decreasing(values) and slope >= 0.8
        parts.append(f"{key.split('.')[1]} errors {['%.2e' % v for v in values]} order {slope:.3f}")
    verdict(8, ok, "; ".join(parts) + f" (min order 0.8, {seconds:.0f} s)")


# 9 -------------------------------------------------------------------------------------


def test_criterion_09_initial_layer(verdict):
    cfg = RunConfig(preset="layer-probe", eps=SWEEP_EPS)
    report = layer_sweep(cfg)
    maxima = [m["max_Linf"] for m in report.members]
    smallest = report.members[-1]["anisotropy_tau1_rel_error"]
    ok = len(maxima) == len(SWEEP_EPS) and strictly_decreasing(maxima) and smallest <= 0.2
    verdict(
        9,
        ok,
        f"max L-inf remainder {['%.3e' % v for v in maxima]}; anisotropy at tau=1, eps={SWEEP_EPS[-1]}: rel err {smallest:.3f} (tol 0.2)",
    )


# 10 ------------------------------------------------------------------------------------


def test_criterion_10_flux_limit(verdict, convergence_report):
    report, _ = convergence_report
    series = report.series("flux_residual_L2")
    values = [v for _, v in series]
    slope = fit_order(series)["slope"]
    ok = strictly_decreasing(values) and slope >= 0.8
    verdict(10, ok, f"flux residual at t=0.25 {['%.2e' % v for v in values]} order {slope:.3f} (min 0.8)")


# 11 ------------------------------------------------------------------------------------


def _limit_fbar(n, quad, schedule):
    d = build_preset("smooth-1d", PeriodicGrid(1, n), quad)
    return run_limit(LimitState(d.fluid, d.h.fbar), schedule)[-1].fbar


def test_criterion_11_ap_consistency(verdict):
    quad = default_quadrature()
    n = 64
    g = PeriodicGrid(1, n)
    d = build_preset("smooth-1d", g, quad)
    p = EpsilonParams(1e-6, t_end=0.5, dt=2.5e-4, advection="frozen")
    traj, _ = run_simulation(CoupledState(d.fluid, d.h), p)
    coarse = _limit_fbar(n, quad, traj.schedule)
    fine = _limit_fbar(2 * n, quad, traj.schedule)
    diff = norms(g, traj.states[-1].radiation.fbar - coarse)["L2"]
    # self-convergence: limit on n cells vs cell averages of the limit on 2n cells
    self_err = norms(g, coarse - 0.5 * (fine[0::2] + fine[1::2]))["L2"]
    ratio = diff / self_err
    verdict(11, ratio <= 5.0, f"||fbar_kin - fbar_lim||_L2 = {diff:.2e}, self-convergence {self_err:.2e}, ratio {ratio:.2f} (max 5)")


# 12 ------------------------------------------------------------------------------------


def test_criterion_12_equilibrium(verdict):
    quad = default_quadrature()
    d = build_preset("equilibrium", PeriodicGrid(1, 64), quad)
    worst = 0.0
    for eps in SWEEP_EPS:
        state = CoupledState(d.fluid, d.h)
        p = EpsilonParams(eps)
        dt = coupled_dt(state, p)
        for k in range(1000):
            state = step_coupled(state, p, dt, step_index=k)
        worst = max(
            worst,
            float(np.abs(state.radiation.values - d.h.values).max()),
            float(np.abs(state.fluid.rho - d.fluid.rho).max()),
            float(np.abs(state.fluid.u).max()),
            float(np.abs(state.fluid.theta - d.fluid.theta).max()),
        )
    verdict(12, worst <= 1e-12, f"max change after 1000 coupled steps over eps {SWEEP_EPS}: {worst:.2e} (tol 1e-12)")
