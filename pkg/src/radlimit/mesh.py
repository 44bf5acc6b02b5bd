"""Periodic torus grid, field containers, stencils and discrete norms.

Scalar fields are arrays of shape ``grid.shape``; vector fields carry a
leading component axis; kinetic values have shape ``grid.shape + (Q,)``.
A ``dim < 3`` grid is a slab reduction: directions stay full 3-vectors while
spatial variation is confined to the first ``dim`` axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .angular import AngularQuadrature, build_quadrature, moment0, moment1
from .errors import ContractViolation, StateValidityError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform cell-centred grid on the torus (R / 2pi Z)^dim."""

    dim: int
    cells: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ContractViolation(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.cells < 4:
            raise ContractViolation(f"need at least 4 cells per axis, got {self.cells}")

    @property
    def h(self) -> float:
        return TWO_PI / self.cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def measure(self) -> float:
        return TWO_PI**self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    def coordinates(self) -> list[np.ndarray]:
        """Cell-centre coordinate arrays, one per axis, each of shape ``self.shape``."""
        x = (np.arange(self.cells) + 0.5) * self.h
        return list(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def describe(self) -> dict:
        return {"dim": self.dim, "cells": self.cells, "h": self.h}


@dataclass
class KineticField:
    """Radiative intensity sampled on (cell, direction)."""

    grid: PeriodicGrid
    quad: AngularQuadrature
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape + (self.quad.size,)
        if self.values.shape != expected:
            raise ContractViolation(f"kinetic values must have shape {expected}, got {self.values.shape}")

    @property
    def fbar(self) -> np.ndarray:
        return moment0(self.quad, self.values)

    @property
    def first_moment(self) -> np.ndarray:
        """<w f> with the component axis first, shape ``(3,) + grid.shape``."""
        return np.moveaxis(moment1(self.quad, self.values), -1, 0)

    def copy(self) -> "KineticField":
        return KineticField(self.grid, self.quad, self.values.copy())

    @classmethod
    def from_function(cls, grid, quad, func) -> "KineticField":
        """Sample ``func(x, w)``; x is a list of coordinate arrays, w is ``(Q, 3)``."""
        xs = [c[..., None] for c in grid.coordinates()]
        values = np.broadcast_to(func(xs, quad.nodes), grid.shape + (quad.size,))
        return cls(grid, quad, np.array(values, dtype=float))

    @classmethod
    def isotropic(cls, grid, quad, fbar) -> "KineticField":
        fbar = np.broadcast_to(np.asarray(fbar, dtype=float), grid.shape)
        return cls(grid, quad, np.repeat(fbar[..., None], quad.size, axis=-1))


@dataclass
class FluidState:
    """Primitive fluid variables (rho, u, theta); u has shape ``(3,) + grid.shape``."""

    grid: PeriodicGrid
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        shape = self.grid.shape
        self.rho = np.array(np.broadcast_to(np.asarray(self.rho, dtype=float), shape))
        self.theta = np.array(np.broadcast_to(np.asarray(self.theta, dtype=float), shape))
        self.u = np.array(np.broadcast_to(np.asarray(self.u, dtype=float), (3,) + shape))
        if self.validate:
            self.check()

    def check(self):
        if not (np.all(np.isfinite(self.rho)) and np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.u))):
            raise StateValidityError("fluid state has non-finite entries")
        if np.any(self.rho <= 0):
            raise StateValidityError(f"density must be positive, min={self.rho.min():.6g}")
        if np.any(self.theta <= 0):
            raise StateValidityError(f"temperature must be positive, min={self.theta.min():.6g}")

    def copy(self) -> "FluidState":
        return FluidState(self.grid, self.rho.copy(), self.u.copy(), self.theta.copy())


# --- stencils -----------------------------------------------------------------


def _shift(a, offset, axis):
    """a[i + offset] along ``axis`` with periodic wrap."""
    return np.roll(a, -offset, axis=axis)


def gradient_central(grid: PeriodicGrid, scalar) -> np.ndarray:
    """Second-order central gradient, shape ``(dim,) + grid.shape``."""
    scalar = np.asarray(scalar, dtype=float)
    return np.stack(
        [(_shift(scalar, 1, ax) - _shift(scalar, -1, ax)) / (2.0 * grid.h) for ax in grid.axes]
    )


def divergence_central(grid: PeriodicGrid, vector) -> np.ndarray:
    """Second-order central divergence of a ``(dim,) + grid.shape`` field.

    A full 3-vector field is accepted on a slab grid; the transverse
    components are constant along the reduced axes and drop out.
    """
    vector = np.asarray(vector, dtype=float)
    out = np.zeros(grid.shape)
    for ax in grid.axes:
        comp = vector[ax]
        out += (_shift(comp, 1, ax) - _shift(comp, -1, ax)) / (2.0 * grid.h)
    return out


def laplacian(grid: PeriodicGrid, scalar) -> np.ndarray:
    """Discrete Laplacian defined as ``divergence_central(gradient_central(.))``.

    This is the (1, 0, -2, 0, 1) / 4h^2 stencil per axis. It is exactly the
    operator the asymptotic-preserving kinetic scheme reduces to as eps -> 0,
    which keeps kinetic and limit runs on the same discrete footing.
    """
    scalar = np.asarray(scalar, dtype=float)
    out = np.zeros(grid.shape)
    for ax in grid.axes:
        out += (_shift(scalar, 2, ax) - 2.0 * scalar + _shift(scalar, -2, ax)) / (4.0 * grid.h**2)
    return out


def pad_vector(grid: PeriodicGrid, vector) -> np.ndarray:
    """Embed a ``(dim,) + shape`` field into 3 components (zeros for slab axes)."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape[0] == 3:
        return vector
    out = np.zeros((3,) + grid.shape)
    out[: vector.shape[0]] = vector
    return out


def upwind_directional_derivative(field: KineticField, node: int) -> np.ndarray:
    """Upwinded ``w_q . grad f`` for one quadrature node, one value per cell."""
    if not 0 <= node < field.quad.size:
        raise ContractViolation(f"node index {node} out of range [0, {field.quad.size})")
    return directional_upwind(field.grid, field.values[..., node], field.quad.nodes[node])


def directional_upwind(grid: PeriodicGrid, values, direction) -> np.ndarray:
    """First-order upwind approximation of ``direction . grad(values)``.

    Each axis uses the backward difference where the direction component is
    positive and the forward difference where it is negative; a zero
    component contributes nothing.
    """
    values = np.asarray(values, dtype=float)
    direction = np.asarray(direction, dtype=float)
    out = np.zeros(values.shape)
    for ax in grid.axes:
        c = direction[ax]
        if c > 0:
            out += c * (values - _shift(values, -1, ax)) / grid.h
        elif c < 0:
            out += c * (_shift(values, 1, ax) - values) / grid.h
    return out


def upwind_transport(grid: PeriodicGrid, quad: AngularQuadrature, values) -> np.ndarray:
    """``w_q . grad f`` upwinded per node for every node at once.

    ``values`` has shape ``grid.shape + (Q,)``; the result has the same shape.
    """
    values = np.asarray(values, dtype=float)
    out = np.zeros(values.shape)
    for ax in grid.axes:
        c = quad.nodes[:, ax]
        back = (values - _shift(values, -1, ax)) / grid.h
        fwd = (_shift(values, 1, ax) - values) / grid.h
        out += np.where(c > 0, c * back, c * fwd)
    return out


def central_transport(grid: PeriodicGrid, quad: AngularQuadrature, scalar) -> np.ndarray:
    """``w_q . grad_c s`` for an isotropic scalar, shape ``grid.shape + (Q,)``."""
    grad = gradient_central(grid, scalar)
    return np.einsum("d...,qd->...q", grad, quad.nodes[:, : grid.dim])


# --- norms --------------------------------------------------------------------


def norms(grid: PeriodicGrid, values) -> dict:
    """Discrete L2 (cell-volume weighted) and Linf norms of a scalar or vector field."""
    values = np.asarray(values, dtype=float)
    sq = values**2
    if values.shape != grid.shape:
        sq = sq.sum(axis=tuple(range(values.ndim - grid.dim)))
    return {
        "L2": float(math.sqrt(sq.sum() * grid.cell_volume)),
        "Linf": float(np.max(np.abs(values))) if values.size else 0.0,
    }


def kinetic_norms(field: KineticField) -> dict:
    """L2 over (x, w) with quadrature weights in angle and Linf over (x, w).

    The angular measure is the normalized one, so a unit field has
    L2 = sqrt((2pi)^dim).
    """
    sq = (field.values**2) @ field.quad.weights
    return {
        "L2": float(math.sqrt(sq.sum() * field.grid.cell_volume)),
        "Linf": float(np.max(np.abs(field.values))),
    }


# --- snapshots ----------------------------------------------------------------

SNAPSHOT_SCHEMA_VERSION = 1


def write_kinetic_snapshot(path, field: KineticField, **meta) -> Path:
    """CSV of (cell_index, angle_index, value) with a one-line JSON header.

    Values are written with ``repr`` so reading them back is bit-exact.
    """
    path = Path(path)
    header = {
        "schema": "kinetic-snapshot",
        "version": SNAPSHOT_SCHEMA_VERSION,
        "grid": field.grid.describe(),
        "quadrature": field.quad.describe(),
        **meta,
    }
    flat = field.values.reshape(-1, field.quad.size)
    lines = ["# " + json.dumps(header, sort_keys=True), "cell_index,angle_index,value"]
    for i, row in enumerate(flat):
        lines.extend(f"{i},{q},{float(v)!r}" for q, v in enumerate(row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_kinetic_snapshot(path, quad: AngularQuadrature | None = None) -> tuple[KineticField, dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ContractViolation(f"{path}: missing JSON header line")
    header = json.loads(lines[0][2:])
    grid = PeriodicGrid(header["grid"]["dim"], header["grid"]["cells"])
    if quad is None:
        quad = build_quadrature(header["quadrature"]["kind"], header["quadrature"]["order"])
    if quad.size != header["quadrature"]["size"]:
        raise ContractViolation("quadrature size does not match snapshot header")
    values = np.empty((int(np.prod(grid.shape)), quad.size))
    for line in lines[2:]:
        i, q, v = line.split(",")
        values[int(i), int(q)] = float(v)
    return KineticField(grid, quad, values.reshape(grid.shape + (quad.size,))), header


def write_fluid_snapshot(path, state: FluidState, **meta) -> Path:
    path = Path(path)
    header = {
        "schema": "fluid-snapshot",
        "version": SNAPSHOT_SCHEMA_VERSION,
        "grid": state.grid.describe(),
        **meta,
    }
    rho = state.rho.reshape(-1)
    theta = state.theta.reshape(-1)
    u = state.u.reshape(3, -1)
    lines = ["# " + json.dumps(header, sort_keys=True), "cell_index,rho,u_x,u_y,u_z,theta"]
    for i in range(rho.size):
        vals = (rho[i], u[0, i], u[1, i], u[2, i], theta[i])
        lines.append(f"{i}," + ",".join(repr(float(v)) for v in vals))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_fluid_snapshot(path) -> tuple[FluidState, dict]:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0][2:])
    grid = PeriodicGrid(header["grid"]["dim"], header["grid"]["cells"])
    data = np.array([[float(v) for v in line.split(",")[1:]] for line in lines[2:]])
    shape = grid.shape
    state = FluidState(
        grid,
        data[:, 0].reshape(shape),
        data[:, 1:4].T.reshape((3,) + shape),
        data[:, 4].reshape(shape),
    )
    return state, header
