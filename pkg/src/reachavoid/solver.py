"""Backward-time solution of the double-obstacle reach-avoid variational inequality.

Each step integrates the Hamiltonian term from ``tau`` back to ``tau - dt``
and then clamps the result between the moving barriers::

    V <- max(min(V_tentative, l(., tau - dt)), g(., tau - dt))

starting from ``V(., T) = max(l(., T), g(., T))``. The zero sublevel set of
the recorded frames is the reach-avoid set at each frame time.
"""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Grid, ScalarField
from .numerics import (
    NumericalError,
    cfl_timestep,
    derivs_array,
    dissipation_bounds,
    integrate_step,
)
from .scene import Constant, Scene, sample_scene

log = logging.getLogger(__name__)

SCHEME_PARTS = {"low": ("upwind1", "euler"), "high": ("weno5", "tvd_rk3")}
MODES = ("reach_avoid", "reach_only")
NO_CONSTRAINT = -1e9


@dataclass(frozen=True)
class SolveConfig:
    horizon: float
    frame_times: tuple[float, ...] = ()
    cfl_factor: float = 0.5
    scheme: str = "high"
    mode: str = "reach_avoid"

    def __post_init__(self):
        times = tuple(float(t) for t in self.frame_times) or (float(self.horizon), 0.0)
        object.__setattr__(self, "frame_times", times)
        if times[0] != self.horizon or times[-1] != 0.0:
            raise ValueError(f"frame times must run from T={self.horizon} down to 0, got {times}")
        if any(b >= a for a, b in zip(times, times[1:])):
            raise ValueError(f"frame times must be strictly decreasing: {times}")
        if self.scheme not in SCHEME_PARTS:
            raise ValueError(f"scheme must be one of {sorted(SCHEME_PARTS)}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 < self.cfl_factor <= 1.0:
            raise ValueError("cfl_factor must lie in (0, 1]")

    @classmethod
    def uniform(cls, horizon: float, n_frames: int, **kwargs) -> "SolveConfig":
        """``n_frames`` equally spaced frames from ``horizon`` to 0 (endpoints exact)."""
        times = [horizon * (1.0 - k / (n_frames - 1)) for k in range(n_frames)]
        times[0], times[-1] = float(horizon), 0.0
        return cls(horizon, tuple(times), **kwargs)

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "frame_times": list(self.frame_times), "cfl_factor": self.cfl_factor,
                "scheme": self.scheme, "mode": self.mode}


@dataclass
class SolveResult:
    frames: list[tuple[float, ScalarField]]
    model_id: str
    grid: Grid
    config: SolveConfig
    timings: dict = field(default_factory=dict)
    steps: list[tuple[float, float]] = field(default_factory=list)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.frames]

    def frame(self, t: float) -> ScalarField:
        for ft, f in self.frames:
            if abs(ft - t) <= 1e-12 * max(1.0, abs(t)):
                return f
        raise KeyError(f"no frame at t={t}; frames at {self.times}")

    def value_at(self, x: Sequence[float], t: float) -> float:
        """Value interpolated multilinearly in space and linearly between frames."""
        from .grid import interpolate_many

        pts = np.asarray(x, dtype=float)[None, :]
        times = self.times
        if t >= times[0]:
            return float(interpolate_many(self.frames[0][1].values, self.grid, pts)[0])
        for k in range(len(times) - 1):
            hi, lo = times[k], times[k + 1]
            if lo <= t <= hi:
                w = (hi - t) / (hi - lo)
                a = interpolate_many(self.frames[k][1].values, self.grid, pts)[0]
                b = interpolate_many(self.frames[k + 1][1].values, self.grid, pts)[0]
                return float((1.0 - w) * a + w * b)
        return float(interpolate_many(self.frames[-1][1].values, self.grid, pts)[0])


def _check_same(*fields: ScalarField):
    g0 = fields[0].grid
    for f in fields[1:]:
        if not f.grid.same_as(g0):
            raise ValueError("fields live on different grids")


def terminal_field(l_T: ScalarField, g_T: ScalarField) -> ScalarField:
    """Terminal value ``max(l, g)`` at ``t = T``."""
    _check_same(l_T, g_T)
    return l_T.with_values(np.maximum(l_T.values, g_T.values))


def vi_clamp(v_tentative: ScalarField, l_k: ScalarField, g_k: ScalarField) -> ScalarField:
    """Project onto the double obstacle: ``max(min(V, l), g)``."""
    _check_same(v_tentative, l_k, g_k)
    return v_tentative.with_values(np.maximum(np.minimum(v_tentative.values, l_k.values), g_k.values), l_k.time)


class _SceneSampler:
    """Samples a scene on the grid, reusing the result when the scene is static."""

    def __init__(self, scene: Scene, grid: Grid, mesh: np.ndarray):
        self.scene, self.grid, self.mesh = scene, grid, mesh
        self._static = sample_scene(scene, grid, 0.0, mesh).values if scene.is_static else None

    def __call__(self, t: float) -> ScalarField:
        if self._static is not None:
            return ScalarField(self.grid, self._static, t)
        return sample_scene(self.scene, self.grid, t, self.mesh)


def backward_rhs(model, grid: Grid, scheme: str = "weno5", mesh: np.ndarray | None = None):
    """Right-hand side ``dV/d(-t)`` for the backward sweep.

    Marching backward solves ``V_s - H = 0`` in ``s = T - t``, whose
    Hamiltonian is ``-H``. Its Lax-Friedrichs flux, negated, is
    ``H(x, avg) + 1/2 sum_i alpha_i (d+_i - d-_i)``: the dissipation enters
    with a plus sign so the backward update stays monotone.
    """
    alpha = dissipation_bounds(model).alpha
    spacing = grid.spacing

    def rhs(field: ScalarField) -> np.ndarray:
        dm, dp, avg = [], [], []
        for d in range(grid.ndim):
            lo, hi = derivs_array(field.values, spacing[d], d, scheme)
            dm.append(lo)
            dp.append(hi)
            avg.append(0.5 * (lo + hi))
        out = model.hamiltonian(avg, mesh, field.time)
        for a, lo, hi in zip(alpha, dm, dp):
            if a:
                out = out + 0.5 * a * (hi - lo)
        return np.broadcast_to(out, grid.shape)

    return rhs


def _check_finite(values: np.ndarray, t: float):
    if not np.all(np.isfinite(values)):
        flat = int(np.argmin(np.isfinite(values).ravel()))
        node = tuple(int(i) for i in np.unravel_index(flat, values.shape))
        raise NumericalError(f"non-finite value at node {node}, t={t:g}")


def solve_backward(model, l_scene: Scene, g_scene: Scene | None, grid: Grid, config: SolveConfig) -> SolveResult:
    """March the value function from ``T`` back to 0, recording every frame.

    In ``reach_only`` mode the constraint is dropped (``g`` taken as a very
    negative constant) and only the target clamp remains.
    """
    t_setup = _time.perf_counter()
    if config.mode == "reach_only" or g_scene is None:
        g_scene = Constant(grid.ndim, NO_CONSTRAINT)
    deriv_scheme, integrator = SCHEME_PARTS[config.scheme]
    mesh = grid.mesh()
    sample_l = _SceneSampler(l_scene, grid, mesh)
    sample_g = _SceneSampler(g_scene, grid, mesh)
    rhs = backward_rhs(model, grid, deriv_scheme, mesh)
    alpha = dissipation_bounds(model)

    times = config.frame_times
    value = terminal_field(sample_l(times[0]), sample_g(times[0]))
    _check_finite(value.values, times[0])
    frames = [(times[0], value)]
    steps: list[tuple[float, float]] = []
    t_step = _time.perf_counter()
    for target in times[1:]:
        tau = value.time
        while tau > target:
            remaining = tau - target
            dt = cfl_timestep(alpha, grid, config.cfl_factor, remaining)
            if dt >= remaining * (1.0 - 1e-12):
                dt = remaining
            if not dt > 0.0 or tau - dt == tau:
                raise NumericalError(f"zero-length time step at t={tau:g}")
            tentative = integrate_step(value, rhs, dt, integrator, direction=-1.0)
            new_tau = target if dt == remaining else tau - dt
            l_k, g_k = sample_l(new_tau), sample_g(new_tau)
            value = vi_clamp(tentative.with_values(tentative.values, new_tau), l_k, g_k)
            _check_finite(value.values, new_tau)
            steps.append((new_tau, dt))
            tau = new_tau
        frames.append((target, value))
        log.debug("frame t=%g after %d steps", target, len(steps))
    t_end = _time.perf_counter()
    timings = {"setup": t_step - t_setup, "stepping": t_end - t_step}
    return SolveResult(frames, getattr(model, "kind", type(model).__name__), grid, config, timings, steps)
