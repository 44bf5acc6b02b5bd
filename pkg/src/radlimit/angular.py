"""Discrete ordinates on the unit sphere.

Weights are normalized to sum to one, so ``moment0`` is the angular average
(1/4pi) * integral over S^2 directly, with no stray 4pi factors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation

QUADRATURE_KINDS = ("product-gauss", "octahedral-symmetric")
PRODUCT_GAUSS_MAX_ORDER = 64


@dataclass(frozen=True)
class AngularQuadrature:
    """Nodes ``(Q, 3)`` on S^2 with positive weights summing to one."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    kind: str = "custom"

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise ContractViolation(f"nodes must have shape (Q, 3), got {nodes.shape}")
        if weights.shape != (nodes.shape[0],):
            raise ContractViolation("one weight per node is required")
        if np.any(weights <= 0):
            raise ContractViolation("quadrature weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def __len__(self):
        return self.size

    def rotated(self, rotation) -> "AngularQuadrature":
        """Apply a common 3x3 rotation to every node."""
        rotation = np.asarray(rotation, dtype=float)
        return AngularQuadrature(self.nodes @ rotation.T, self.weights, self.order, self.kind)

    def describe(self) -> dict:
        return {"kind": self.kind, "order": int(self.order), "size": int(self.size)}


def _check_values(quad: AngularQuadrature, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 0 or values.shape[-1] != quad.size:
        raise ContractViolation(
            f"last axis must hold {quad.size} node values, got shape {values.shape}"
        )
    return values


def moment0(quad: AngularQuadrature, values) -> np.ndarray:
    """Angular average <f>. Leading axes of ``values`` are carried through."""
    values = _check_values(quad, values)
    return values @ quad.weights


def moment1(quad: AngularQuadrature, values) -> np.ndarray:
    """First moment <w f>; returns shape ``values.shape[:-1] + (3,)``."""
    values = _check_values(quad, values)
    return values @ (quad.weights[:, None] * quad.nodes)


def moment2(quad: AngularQuadrature, values) -> np.ndarray:
    """Second moment <w (x) w f>; returns shape ``values.shape[:-1] + (3, 3)``."""
    values = _check_values(quad, values)
    outer = quad.nodes[:, :, None] * quad.nodes[:, None, :]
    return np.einsum("...q,qij->...ij", values * quad.weights, outer)


def sphere_monomial_average(a: int, b: int, c: int) -> float:
    """Exact (1/4pi) * integral of x^a y^b z^c over the unit sphere."""
    if a % 2 or b % 2 or c % 2:
        return 0.0

    def dfact(n):
        return math.prod(range(n, 0, -2)) if n > 0 else 1

    return dfact(a - 1) * dfact(b - 1) * dfact(c - 1) / dfact(a + b + c + 1)


def _product_gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    # Gauss-Legendre in mu = cos(polar); equally spaced azimuths offset by half a
    # panel. An even azimuth count keeps the set symmetric under w -> -w.
    n_mu = (order + 2) // 2
    n_phi = 2 * ((order + 2) // 2)
    mu, w_mu = np.polynomial.legendre.leggauss(n_mu)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    mu_g, phi_g = np.meshgrid(mu, phi, indexing="ij")
    s = np.sqrt(1.0 - mu_g**2)
    nodes = np.stack([s * np.cos(phi_g), s * np.sin(phi_g), mu_g], axis=-1).reshape(-1, 3)
    weights = (w_mu[:, None] / 2.0 / n_phi * np.ones(n_phi)[None, :]).reshape(-1)
    return nodes, weights


def _signed_perms(point) -> list[tuple[float, float, float]]:
    out = set()
    for perm in itertools.permutations(point):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            out.add(tuple(s * p for s, p in zip(signs, perm)))
    # drop signed zeros produced by sign flips of 0.0
    return sorted({tuple(0.0 if v == 0 else v for v in p) for p in out})


# Lebedev octahedral rules: degree -> list of (generator point, weight per node).
_R2, _R3 = 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(3.0)
_LEBEDEV = {
    3: [((1.0, 0.0, 0.0), 1.0 / 6.0)],
    5: [((1.0, 0.0, 0.0), 1.0 / 15.0), ((_R3, _R3, _R3), 3.0 / 40.0)],
    7: [
        ((1.0, 0.0, 0.0), 1.0 / 21.0),
        ((0.0, _R2, _R2), 4.0 / 105.0),
        ((_R3, _R3, _R3), 9.0 / 280.0),
    ],
    9: [
        ((1.0, 0.0, 0.0), 1.0 / 105.0),
        ((_R3, _R3, _R3), 9.0 / 280.0),
        ((0.8880738339771153, 0.4597008433809831, 0.0), 1.0 / 35.0),
    ],
    11: [
        ((1.0, 0.0, 0.0), 4.0 / 315.0),
        ((0.0, _R2, _R2), 64.0 / 2835.0),
        ((_R3, _R3, _R3), 27.0 / 1280.0),
        ((1.0 / math.sqrt(11.0), 1.0 / math.sqrt(11.0), 3.0 / math.sqrt(11.0)), 14641.0 / 725760.0),
    ],
}
OCTAHEDRAL_DEGREES = tuple(sorted(_LEBEDEV))


def _octahedral(order: int) -> tuple[np.ndarray, np.ndarray, int]:
    degree = next(d for d in OCTAHEDRAL_DEGREES if d >= order)
    nodes, weights = [], []
    for point, weight in _LEBEDEV[degree]:
        pts = _signed_perms(point)
        nodes.extend(pts)
        weights.extend([weight] * len(pts))
    nodes = np.array(nodes)
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    return nodes, np.array(weights), degree


def build_quadrature(kind: str = "octahedral-symmetric", order: int = 7) -> AngularQuadrature:
    """Build a sphere quadrature exact for polynomials of total degree <= ``order``.

    ``octahedral-symmetric`` selects the smallest Lebedev rule whose degree is
    at least ``order`` (supported 2..11); ``product-gauss`` supports 2..64.
    """
    if kind not in QUADRATURE_KINDS:
        raise ConfigurationError(f"unknown quadrature kind {kind!r}; choose from {QUADRATURE_KINDS}")
    order = int(order)
    if kind == "product-gauss":
        if not 2 <= order <= PRODUCT_GAUSS_MAX_ORDER:
            raise ConfigurationError(
                f"product-gauss order must be in [2, {PRODUCT_GAUSS_MAX_ORDER}], got {order}"
            )
        nodes, weights = _product_gauss(order)
        degree = order
    else:
        if not 2 <= order <= OCTAHEDRAL_DEGREES[-1]:
            raise ConfigurationError(
                f"octahedral-symmetric order must be in [2, {OCTAHEDRAL_DEGREES[-1]}], got {order}"
            )
        nodes, weights, degree = _octahedral(order)
    weights = weights / weights.sum()
    return AngularQuadrature(nodes, weights, degree, kind)


def default_quadrature() -> AngularQuadrature:
    return build_quadrature("octahedral-symmetric", 7)


def quadrature_deviation(quad: AngularQuadrature) -> dict:
    """Max deviations of the low-order identities <1>=1, <w>=0, <w w>=I/3."""
    return {
        "weight_sum": abs(float(quad.weights.sum()) - 1.0),
        "first_moment": float(np.max(np.abs(quad.weights @ quad.nodes))),
        "second_moment": float(
            np.max(np.abs(moment2(quad, np.ones(quad.size)) - np.eye(3) / 3.0))
        ),
        "unit_norm": float(np.max(np.abs(np.linalg.norm(quad.nodes, axis=1) - 1.0))),
    }
