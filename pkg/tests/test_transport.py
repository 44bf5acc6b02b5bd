import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radlimit.angular import build_quadrature
from radlimit.errors import CFLViolation, ContractViolation, NumericFailure
from radlimit.mesh import KineticField, PeriodicGrid, kinetic_norms
from radlimit.transport import (
    EpsilonParams,
    LinearTransportProblem,
    advance_kinetic,
    default_panels,
    imex_coefficients,
    imex_step,
    l2_energy_bound,
    linfty_bound,
    moment_identity_residual,
    picard_solve,
    step_schedule,
    transport_operator,
)

Q3 = build_quadrature("octahedral-symmetric", 3)


def smooth_field(grid, quad, aniso=0.3):
    return KineticField.from_function(
        grid, quad, lambda xs, w: 1 + 0.5 * np.sin(xs[0]) + aniso * np.cos(xs[0]) * w[:, 0]
    )


# --- EpsilonParams / schedule ---------------------------------------------------------


def test_params_validation():
    for bad in (dict(eps=0.0), dict(eps=1.5), dict(eps=0.1, t_end=0), dict(eps=0.1, dt=-1), dict(eps=0.1, cfl=1.5), dict(eps=0.1, advection="x"), dict(eps=0.1, startup=0)):
        with pytest.raises(ContractViolation):
            EpsilonParams(**bad)


def test_kinetic_dt_policy(quad):
    g = PeriodicGrid(1, 32)
    p = EpsilonParams(0.1, cfl=0.5)
    assert p.kinetic_dt(g, quad) == pytest.approx(0.5 * 0.1 * g.h)
    assert EpsilonParams(0.1, dt=1e-4).kinetic_dt(g, quad) == 1e-4
    frozen = EpsilonParams(1e-6, cfl=0.5, advection="frozen")
    assert frozen.kinetic_dt(g, quad) == pytest.approx(0.5 * 6 * g.h**2)


def test_step_schedule_hits_outputs():
    sched = step_schedule(1.0, 0.03, [0.25, 0.5])
    t, outs = 0.0, []
    for dt, is_out in sched:
        assert dt <= 0.03 * (1 + 1e-12)
        t += dt
        if is_out:
            outs.append(t)
    np.testing.assert_allclose(outs, [0.25, 0.5, 1.0], atol=1e-14)
    graded = step_schedule(1.0, 0.03, [0.5], dt_first=1e-4)
    assert graded[0][0] == 1e-4 and graded[1][0] == 2e-4
    assert sum(dt for dt, _ in graded) == pytest.approx(1.0, abs=1e-13)
    assert max(dt for dt, _ in graded) <= 0.03 * (1 + 1e-12)
    with pytest.raises(ContractViolation):
        step_schedule(1.0, 0.1, growth=1.0)


# --- IMEX -----------------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["upwind", "ap", "frozen"])
def test_equilibrium_fixed_point(quad, mode):
    g = PeriodicGrid(1, 16)
    f = KineticField.isotropic(g, quad, 1.3**4)
    p = EpsilonParams(0.05, advection=mode)
    new = imex_step(f, np.full(g.shape, 1.3), p, 0.5 * p.max_stable_dt(g, quad))
    np.testing.assert_allclose(new.values, f.values, rtol=4e-16, atol=0)


def test_dt_must_be_positive(quad, grid1d):
    f = KineticField.isotropic(grid1d, quad, 1.0)
    with pytest.raises(ContractViolation):
        imex_step(f, np.ones(grid1d.shape), EpsilonParams(0.1), 0.0)


def test_cfl_violation_suggests_dt(quad, grid1d):
    f = KineticField.isotropic(grid1d, quad, 1.0)
    p = EpsilonParams(0.1)
    with pytest.raises(CFLViolation) as info:
        imex_step(f, np.ones(grid1d.shape), p, 10 * p.max_stable_dt(grid1d, quad))
    assert info.value.suggested_dt == pytest.approx(p.max_stable_dt(grid1d, quad))


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_anisotropy_damping(quad, eps):
    g = PeriodicGrid(1, 24)
    f = smooth_field(g, quad)
    p = EpsilonParams(eps, advection="upwind")
    dt = 0.9 * p.max_stable_dt(g, quad)
    theta = np.ones(g.shape)
    new = imex_step(f, theta, p, dt)
    gv = f.values - (dt / eps) * transport_operator(f, eps, "upwind") + dt
    spread = np.abs(gv - (gv @ quad.weights)[:, None]).max()
    aniso = np.abs(new.values - new.fbar[:, None]).max()
    # closed form: f' - <f'> = (g - <g>) / (1 + dt/eps^2 + dt)
    assert aniso == pytest.approx(spread / (1 + dt / eps**2 + dt), rel=1e-12)
    assert dt <= eps  # the damping bound below needs dt^2 <= eps^2 (1 + dt)
    assert aniso <= eps**2 / dt * spread / (1 + dt) * (1 + 1e-12)


def test_isotropic_decay_recursion(quad):
    g = PeriodicGrid(1, 8)
    c, errors = 2.0, []
    for dt in (0.02, 0.01, 0.005):
        p = EpsilonParams(0.5, t_end=1.0, dt=dt, startup=None)
        tr = advance_kinetic(KineticField.isotropic(g, quad, c), np.ones(g.shape), p, source=0.0)
        n = tr.steps
        np.testing.assert_allclose(tr.fields[-1].values, c * (1 + dt) ** -n, rtol=1e-13)
        errors.append(abs(tr.fields[-1].values[0, 0] - c * math.exp(-1.0)))
    order = np.polyfit(np.log([0.02, 0.01, 0.005]), np.log(errors), 1)[0]
    assert 0.9 < order < 1.1


def test_advance_reports_snapshots_and_cfl(quad):
    g = PeriodicGrid(1, 16)
    p = EpsilonParams(0.2, t_end=0.3, cfl=0.4, startup=None)
    tr = advance_kinetic(smooth_field(g, quad), np.ones(g.shape), p, snapshot_times=[0.1, 0.2])
    np.testing.assert_allclose(tr.times, [0, 0.1, 0.2, 0.3], atol=1e-14)
    assert tr.cfl_used <= 0.4 + 1e-12
    assert len(tr.fields) == 4


@pytest.mark.parametrize("mode", ["upwind", "ap", "frozen"])
def test_moment_identity_every_step(quad, mode):
    g = PeriodicGrid(1, 32)
    eps = 0.05
    p = EpsilonParams(eps, advection=mode)
    dt = 0.8 * p.max_stable_dt(g, quad)
    f = smooth_field(g, quad)
    theta = 1 + 0.1 * np.cos(g.coordinates()[0])
    for _ in range(50):
        new = imex_step(f, theta, p, dt)
        assert moment_identity_residual(f, new, theta**4, p, dt) < 1e-13
        f = new


def test_coefficients_nonnegative_iff_cfl(quad):
    g = PeriodicGrid(1, 32)
    p = EpsilonParams(0.1, advection="upwind")
    dt = p.max_stable_dt(g, quad)
    assert imex_coefficients(g, quad, p, dt)["min"] >= 0
    assert imex_coefficients(g, quad, p, 1.01 * dt)["min"] < 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 0.3, 0.05]), st.floats(0.1, 1.0))
def test_upwind_positivity(seed, eps, cfl):
    rng = np.random.default_rng(seed)
    g = PeriodicGrid(1, 16)
    f = KineticField(g, Q3, rng.random((16, Q3.size)) * (rng.random((16, Q3.size)) > 0.5))
    F = rng.random((16, Q3.size)) * eps**2
    p = EpsilonParams(eps, cfl=cfl, advection="upwind")
    dt = p.kinetic_dt(g, Q3)
    for _ in range(10):
        f = imex_step(f, None, p, dt, source=F)
        assert f.values.min() >= -1e-12


def test_ap_property_one_step(quad):
    g = PeriodicGrid(1, 32)
    f = smooth_field(g, quad, aniso=1.0)
    dt = 1e-2
    prev = None
    for eps in (1e-2, 1e-3, 1e-4):
        p = EpsilonParams(eps, advection="frozen")
        new = imex_step(f, np.ones(g.shape), p, dt, check_cfl=False)
        aniso = np.abs(new.values - new.fbar[:, None]).max()
        assert aniso <= 10 * eps**2 / dt + 5 * eps
        if prev is not None:
            assert aniso < prev
        prev = aniso


def test_l2_estimate(quad):
    g = PeriodicGrid(1, 32)
    eps = 0.2
    f = smooth_field(g, quad)
    F = eps**2 * (1 + 0.5 * np.cos(g.coordinates()[0]))[:, None] * np.ones(quad.size)
    p = EpsilonParams(eps, advection="upwind")
    dt = p.kinetic_dt(g, quad)
    sources = []
    h = f.copy()
    for _ in range(100):
        f = imex_step(f, None, p, dt, source=F)
        sources.append(F)
        assert kinetic_norms(f)["L2"] ** 2 <= l2_energy_bound(h, sources, dt, eps)


# --- Picard oracle --------------------------------------------------------------------


def test_default_panels():
    assert default_panels(1.0, 1.0) == 64
    assert default_panels(1.0, 0.1) == 800
    assert default_panels(1.0, 1e-4) == 1_000_000


def test_picard_isotropic_decay():
    g = PeriodicGrid(1, 4)
    c = 1.7
    f, diag = picard_solve(LinearTransportProblem(KineticField.isotropic(g, Q3, c), 1.0), 1.0, 40, panels=400)
    assert np.max(np.abs(f.values / (c * math.exp(-1)) - 1)) < 1e-3
    ok, slack = linfty_bound(LinearTransportProblem(KineticField.isotropic(g, Q3, c), 1.0), f)
    assert ok and slack > 0


def test_picard_steady_state():
    g = PeriodicGrid(1, 8)
    eps, c = 0.5, 0.8
    h = KineticField.isotropic(g, Q3, c)
    F = np.full(h.values.shape, eps**2 * c)
    f, _ = picard_solve(LinearTransportProblem(h, eps, F), 0.5, 60, panels=200)
    # midpoint-rule error only; the exact solution is c
    np.testing.assert_allclose(f.values, c, rtol=2e-4)


def test_picard_zero_data():
    g = PeriodicGrid(1, 8)
    prob = LinearTransportProblem(KineticField.isotropic(g, Q3, 0.0), 0.5)
    f, diag = picard_solve(prob, 0.2, 3)
    assert np.all(f.values == 0)
    ok, slack = linfty_bound(prob, diag)
    assert ok and slack == 0


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.1])
def test_picard_contraction(eps, rng):
    g = PeriodicGrid(1, 8)
    h = KineticField(g, Q3, rng.random((8, Q3.size)))
    F = rng.random((8, Q3.size))
    _, diag = picard_solve(LinearTransportProblem(h, eps, F), 0.05, 6, panels=64)
    meaningful = [r for r, d in zip(diag.ratios, diag.sup_differences) if d > 1e-12]
    assert meaningful and max(meaningful) <= 1 / (1 + eps**2) + 1e-10


def test_picard_nonfinite_reports_location():
    g = PeriodicGrid(1, 8)
    vals = np.ones((8, Q3.size))
    vals[3, 2] = np.nan
    with pytest.raises(NumericFailure) as info:
        picard_solve(LinearTransportProblem(KineticField(g, Q3, vals), 0.5), 0.1, 2, panels=8)
    assert info.value.location is not None and info.value.module == "transport_kinetic"


def test_picard_tolerance_warning():
    g = PeriodicGrid(1, 8)
    h = smooth_field(g, Q3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _, diag = picard_solve(LinearTransportProblem(h, 0.5), 0.2, 1, panels=16, tol=1e-12)
    assert diag.warnings and any("n_iterations" in str(w.message) for w in caught)


def test_picard_imex_cross_validation():
    eps, T = 0.5, 0.2
    errs = []
    for n in (16, 32):
        g = PeriodicGrid(1, n)
        h = smooth_field(g, Q3)
        F = eps**2 * (1 + 0.2 * np.cos(g.coordinates()[0]))[:, None] * np.ones(Q3.size)
        fp, _ = picard_solve(LinearTransportProblem(h, eps, F), T, 30, panels=4 * n)
        p = EpsilonParams(eps, t_end=T, cfl=0.5, advection="upwind", startup=None)
        fi = advance_kinetic(h, None, p, source=F).fields[-1]
        errs.append(np.abs(fi.values - fp.values).max())
    # first-order agreement: O(dt + h) with dt proportional to h
    assert errs[0] < 0.03 and errs[1] < 0.7 * errs[0]
