import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radlimit.angular import (
    OCTAHEDRAL_DEGREES,
    build_quadrature,
    default_quadrature,
    moment0,
    moment1,
    moment2,
    quadrature_deviation,
    sphere_monomial_average,
)
from radlimit.errors import ConfigurationError, ContractViolation

from conftest import random_rotation

ALL_RULES = [("octahedral-symmetric", d) for d in OCTAHEDRAL_DEGREES] + [("product-gauss", d) for d in (2, 5, 8, 13)]


def monomials(degree):
    for a, b, c in itertools.product(range(degree + 1), repeat=3):
        if a + b + c <= degree:
            yield a, b, c


@pytest.mark.parametrize("kind,order", ALL_RULES)
def test_invariants(kind, order):
    q = build_quadrature(kind, order)
    assert np.all(q.weights > 0)
    assert abs(q.weights.sum() - 1) < 1e-14
    assert np.max(np.abs(np.linalg.norm(q.nodes, axis=1) - 1)) < 1e-14
    dev = quadrature_deviation(q)
    assert dev["first_moment"] < 1e-13
    assert dev["second_moment"] < 1e-13


@pytest.mark.parametrize("kind,order", ALL_RULES)
def test_exact_to_stated_degree(kind, order):
    q = build_quadrature(kind, order)
    assert q.order >= order
    for a, b, c in monomials(q.order):
        vals = q.nodes[:, 0] ** a * q.nodes[:, 1] ** b * q.nodes[:, 2] ** c
        assert abs(moment0(q, vals) - sphere_monomial_average(a, b, c)) < 1e-13, (a, b, c)


def test_analytic_moments_match_monte_carlo(rng):
    # independent oracle for the even-moment formula
    w = rng.normal(size=(400_000, 3))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    for a, b, c in [(2, 0, 0), (2, 2, 0), (4, 0, 0), (2, 2, 2), (0, 0, 6), (1, 1, 0)]:
        mc = np.mean(w[:, 0] ** a * w[:, 1] ** b * w[:, 2] ** c)
        assert abs(mc - sphere_monomial_average(a, b, c)) < 1e-3


def test_moment_examples(quad):
    wz = quad.nodes[:, 2]
    assert moment0(quad, np.full(quad.size, 2.5)) == pytest.approx(2.5, abs=1e-15)
    assert abs(moment0(quad, wz)) < 1e-15
    assert moment0(quad, wz**2) == pytest.approx(1 / 3, abs=1e-15)
    np.testing.assert_allclose(moment1(quad, np.ones(quad.size)), 0, atol=1e-15)
    np.testing.assert_allclose(moment1(quad, wz), [0, 0, 1 / 3], atol=1e-15)
    a, b = 0.7, np.array([0.2, -1.0, 0.5])
    np.testing.assert_allclose(moment1(quad, a + quad.nodes @ b), b / 3, atol=1e-15)
    np.testing.assert_allclose(moment2(quad, np.ones(quad.size)), np.eye(3) / 3, atol=1e-15)
    np.testing.assert_allclose(moment2(quad, wz), 0, atol=1e-15)
    np.testing.assert_allclose(moment2(quad, wz**2), np.diag([1 / 15, 1 / 15, 1 / 5]), atol=1e-15)


def test_moment2_against_fine_product_rule(quad):
    fine = build_quadrature("product-gauss", 40)
    f = lambda w: np.exp(w[:, 0]) * (1 + w[:, 2] ** 2)
    # degree-7 rule is not exact for this integrand, so compare to a polynomial one
    g = lambda w: 1 + w[:, 0] * w[:, 1] + w[:, 2] ** 2 - 0.3 * w[:, 0] ** 3
    np.testing.assert_allclose(moment2(quad, g(quad.nodes)), moment2(fine, g(fine.nodes)), atol=1e-13)
    assert abs(moment0(quad, f(quad.nodes)) - moment0(fine, f(fine.nodes))) < 1e-3


def test_leading_axes_carried(quad, rng):
    vals = rng.random((4, 5, quad.size))
    assert moment0(quad, vals).shape == (4, 5)
    assert moment1(quad, vals).shape == (4, 5, 3)
    assert moment2(quad, vals).shape == (4, 5, 3, 3)


def test_length_mismatch(quad):
    with pytest.raises(ContractViolation):
        moment0(quad, np.ones(quad.size + 1))
    with pytest.raises(ContractViolation):
        moment1(quad, 1.0)


@pytest.mark.parametrize("kind,order", [("octahedral-symmetric", 1), ("octahedral-symmetric", 12), ("product-gauss", 65), ("bogus", 5)])
def test_unsupported(kind, order):
    with pytest.raises(ConfigurationError, match=r"\[|choose"):
        build_quadrature(kind, order)


def test_default_has_octahedral_symmetry():
    q = default_quadrature()
    assert q.kind == "octahedral-symmetric" and q.order >= 4
    # closed under sign flips and axis permutations
    key = {tuple(np.round(n, 12)) for n in q.nodes}
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            assert {tuple(np.round(np.array(signs) * n[list(perm)], 12)) for n in q.nodes} == key


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_rotation_covariance(seed, c0, b0, b1, b2):
    q = default_quadrature()
    R = random_rotation(np.random.default_rng(seed))
    qr = q.rotated(R)
    b = np.array([b0, b1, b2])
    # affine data: moment0 invariant, moment1 rotates with the nodes
    assert abs(moment0(qr, c0 + qr.nodes @ b) - moment0(q, c0 + q.nodes @ b)) < 1e-12
    # f(w) = phi(R^T w) on the rotated rule equals phi on the original rule
    phi = lambda nodes: c0 + nodes @ b + nodes[:, 0] * nodes[:, 2]
    np.testing.assert_allclose(moment0(qr, phi(qr.nodes @ R)), moment0(q, phi(q.nodes)), atol=1e-12)
    np.testing.assert_allclose(moment1(qr, phi(qr.nodes @ R)), R @ moment1(q, phi(q.nodes)), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_constants_preserved(c):
    q = default_quadrature()
    assert moment0(q, np.full(q.size, c)) == pytest.approx(c, rel=1e-14, abs=1e-300)
