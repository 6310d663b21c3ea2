"""Finite-difference kernels for Hamilton-Jacobi equations.

One-sided spatial derivatives (first-order upwind and fifth-order HJ-WENO),
the Lax-Friedrichs numerical Hamiltonian, CFL step selection and explicit
time integrators. Kernels act on whole numpy arrays; every node is updated
from the previous field only, so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import Grid, ScalarField, extend_with_ghosts

try:  # optional compiled kernel; the numpy path gives identical results
    import numba
except ImportError:  # pragma: no cover
    numba = None

WENO_EPS = 1e-6
SCHEMES = ("upwind1", "weno5")
INTEGRATORS = ("euler", "tvd_rk3")


class NumericalError(RuntimeError):
    """Non-finite values or a degenerate step during time integration."""


@dataclass(frozen=True)
class DerivPair:
    d_minus: ScalarField
    d_plus: ScalarField


@dataclass(frozen=True)
class Dissipation:
    alpha: tuple[float, ...]

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if any(a < 0 or not math.isfinite(a) for a in alpha):
            raise ValueError(f"dissipation coefficients must be finite and non-negative: {alpha}")
        object.__setattr__(self, "alpha", alpha)


def _weno5(v1, v2, v3, v4, v5):
    # Jiang-Shu weights on the three third-order candidate stencils.
    phi1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0
    phi2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0
    phi3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0
    s1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3) ** 2
    s2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    s3 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5) ** 2 + 0.25 * (3.0 * v3 - 4.0 * v4 + v5) ** 2
    a1 = 0.1 / (s1 + WENO_EPS) ** 2
    a2 = 0.6 / (s2 + WENO_EPS) ** 2
    a3 = 0.3 / (s3 + WENO_EPS) ** 2
    return (a1 * phi1 + a2 * phi2 + a3 * phi3) / (a1 + a2 + a3)


if numba is not None:
    _weno5_scalar = numba.njit(cache=True, inline="always")(_weno5)

    @numba.njit(cache=True)
    def _weno5_lines(v, h, dm, dp):  # pragma: no cover - compiled
        m, n = v.shape
        pad = np.empty(n + 6)
        d = np.empty(n + 5)
        for r in range(m):
            for i in range(n):
                pad[i + 3] = v[r, i]
            for k in range(1, 4):
                pad[3 - k] = v[r, 0] - k * (v[r, 1] - v[r, 0])
                pad[n + 2 + k] = v[r, n - 1] + k * (v[r, n - 1] - v[r, n - 2])
            for i in range(n + 5):
                d[i] = (pad[i + 1] - pad[i]) / h
            for i in range(n):
                dm[r, i] = _weno5_scalar(d[i], d[i + 1], d[i + 2], d[i + 3], d[i + 4])
                dp[r, i] = _weno5_scalar(d[i + 5], d[i + 4], d[i + 3], d[i + 2], d[i + 1])
else:  # pragma: no cover
    _weno5_lines = None

USE_COMPILED = _weno5_lines is not None


def _weno5_compiled(values, spacing, axis):
    a = np.ascontiguousarray(np.moveaxis(values, axis, -1), dtype=float)
    shape = a.shape
    flat = a.reshape(-1, shape[-1])
    dm, dp = np.empty_like(flat), np.empty_like(flat)
    _weno5_lines(flat, float(spacing), dm, dp)
    return np.moveaxis(dm.reshape(shape), -1, axis), np.moveaxis(dp.reshape(shape), -1, axis)


def derivs_array(values: np.ndarray, spacing: float, axis: int, scheme: str = "weno5"):
    """Left- and right-biased derivative arrays of ``values`` along ``axis``."""
    if scheme == "upwind1":
        padded = extend_with_ghosts(values, axis, 1)
        diff = np.diff(padded, axis=axis) / spacing
        n = values.shape[axis]
        d_minus = np.take(diff, np.arange(0, n), axis=axis)
        d_plus = np.take(diff, np.arange(1, n + 1), axis=axis)
        return d_minus, d_plus
    if scheme != "weno5":
        raise ValueError(f"unknown derivative scheme {scheme!r}")
    if USE_COMPILED and values.ndim >= 1:
        return _weno5_compiled(values, spacing, axis)
    padded = extend_with_ghosts(values, axis, 3)
    diff = np.moveaxis(np.diff(padded, axis=axis) / spacing, axis, -1)
    n = values.shape[axis]
    d = [diff[..., k:k + n] for k in range(6)]
    d_minus = _weno5(d[0], d[1], d[2], d[3], d[4])
    d_plus = _weno5(d[5], d[4], d[3], d[2], d[1])
    return np.moveaxis(d_minus, -1, axis), np.moveaxis(d_plus, -1, axis)


def spatial_derivs(field: ScalarField, dim: int, scheme: str = "weno5") -> DerivPair:
    """One-sided approximations of the derivative of ``field`` along ``dim``."""
    if not 0 <= dim < field.grid.ndim:
        raise ValueError(f"dimension index {dim} out of range for a {field.grid.ndim}-dim grid")
    dm, dp = derivs_array(field.values, field.grid.spacing[dim], dim, scheme)
    return DerivPair(field.with_values(dm), field.with_values(dp))


def lax_friedrichs(model, x, t, d_minus: Sequence, d_plus: Sequence, alpha: Dissipation):
    """Lax-Friedrichs numerical Hamiltonian.

    ``H(x, (d- + d+)/2, t) - 1/2 * sum_i alpha_i (d+_i - d-_i)``. Inputs may be
    scalars or arrays (one entry per dimension); the result broadcasts.
    """
    dm = [np.asarray(v, dtype=float) for v in d_minus]
    dp = [np.asarray(v, dtype=float) for v in d_plus]
    p = [0.5 * (a + b) for a, b in zip(dm, dp)]
    out = model.hamiltonian(p, x, t)
    for a, lo, hi in zip(alpha.alpha, dm, dp):
        out = out - 0.5 * a * (hi - lo)
    return out


def dissipation_bounds(model) -> Dissipation:
    """Global bounds on ``|dH/dp_i|`` for a catalog game model."""
    return Dissipation(model.dissipation())


def cfl_timestep(alpha: Dissipation, grid: Grid, factor: float = 0.5, remaining: float | None = None) -> float:
    """Largest stable step ``factor / sum_i alpha_i / dx_i``.

    With every coefficient zero nothing propagates; the step is then the
    ``remaining`` interval (or infinity when none is given).
    """
    if not 0.0 < factor <= 1.0:
        raise ValueError(f"CFL factor must lie in (0, 1], got {factor}")
    rate = sum(a / h for a, h in zip(alpha.alpha, grid.spacing))
    if rate == 0.0:
        return math.inf if remaining is None else float(remaining)
    return factor / rate


def _checked(rhs: Callable[[ScalarField], np.ndarray], field: ScalarField) -> np.ndarray:
    out = np.asarray(rhs(field), dtype=float)
    if not np.all(np.isfinite(out)):
        flat = int(np.argmin(np.isfinite(out).ravel()))
        node = np.unravel_index(flat, field.grid.shape)
        raise NumericalError(f"non-finite right-hand side at node {tuple(int(i) for i in node)}, t={field.time:g}")
    return out


def integrate_step(field: ScalarField, rhs: Callable[[ScalarField], np.ndarray], dt: float,
                   scheme: str = "tvd_rk3", direction: float = 1.0) -> ScalarField:
    """Advance ``field`` by one explicit step of length ``dt``.

    The update is ``V + dt * rhs(V)``; ``direction`` only moves the time
    stamp (``-1`` for backward sweeps). ``tvd_rk3`` is the three-stage
    Shu-Osher scheme, written in increment form so a zero right-hand side
    returns the input unchanged.
    """
    if not dt > 0:
        raise NumericalError(f"time step must be positive, got {dt}")
    v0 = field.values
    t0 = field.time
    k1 = _checked(rhs, field)
    if scheme == "euler":
        return field.with_values(v0 + dt * k1, t0 + direction * dt)
    if scheme != "tvd_rk3":
        raise ValueError(f"unknown integrator {scheme!r}")
    u1 = field.with_values(v0 + dt * k1, t0 + direction * dt)
    k2 = _checked(rhs, u1)
    u2 = field.with_values(v0 + (0.25 * dt) * (k1 + k2), t0 + direction * 0.5 * dt)
    k3 = _checked(rhs, u2)
    return field.with_values(v0 + (dt / 6.0) * (k1 + k2 + 4.0 * k3), t0 + direction * dt)
