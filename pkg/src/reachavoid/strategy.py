"""Feedback strategies from a solved value function, rollouts and their outcome.

The feedback policy evaluates the value gradient (central differences of the
stored frames, interpolated multilinearly in space and linearly in time) and
plays the actions that attain the minimax in the Hamiltonian.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .games import project_state
from .grid import interpolate_many
from .solver import SolveResult

REACHED = "reached_target"
VIOLATED = "constraint_violated"
EXPIRED = "expired"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, ndim)
    a: np.ndarray  # (n, n_attacker)
    b: np.ndarray  # (n, n_defender)
    l: np.ndarray
    g: np.ndarray
    outcome: str
    outcome_time: float | None = None
    left_domain: bool = False

    @property
    def reached(self) -> bool:
        return self.outcome == REACHED

    def __len__(self):
        return len(self.times)


class ValueInterpolant:
    """Value and gradient of a :class:`SolveResult` at arbitrary ``(x, t)``.

    Each frame is stored as one array holding the value and its gradient
    components, so a query gathers a single ``2**ndim`` corner block.
    """

    def __init__(self, result: SolveResult):
        self.grid = result.grid
        order = np.argsort([t for t, _ in result.frames])
        self.times = np.array([result.frames[k][0] for k in order])
        self.data = []
        for k in order:
            v = result.frames[k][1].values
            g = np.gradient(v, *self.grid.spacing) if self.grid.ndim > 1 else [np.gradient(v, self.grid.spacing[0])]
            self.data.append(np.stack([v, *g], axis=-1))
        self._lo = np.asarray(self.grid.mins)
        self._h = np.asarray(self.grid.spacing)
        self._top = np.asarray(self.grid.counts) - 2

    def _bracket(self, t):
        t = float(np.clip(t, self.times[0], self.times[-1]))
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        t0, t1 = self.times[k], self.times[k + 1]
        return k, (t - t0) / (t1 - t0)

    def _corners(self, x):
        p = np.asarray(x, dtype=float)
        if not self.grid.contains(p):
            interpolate_many(np.zeros(self.grid.shape), self.grid, p[None, :])  # raises the grid error
        pos = (p - self._lo) / self._h
        r = np.round(pos)
        pos = np.where(np.abs(pos - r) < 1e-9, r, pos)
        i = np.clip(np.floor(pos).astype(int), 0, self._top)
        f = np.clip(pos - i, 0.0, 1.0)
        w = np.ones(())
        for fd in f:
            w = np.multiply.outer(w, np.array([1.0 - fd, fd]))
        return tuple(slice(a, a + 2) for a in i), w

    def query(self, x, t) -> np.ndarray:
        """``[V, dV/dx_1, ..., dV/dx_n]`` at ``(x, t)``."""
        k, wt = self._bracket(t)
        block, w = self._corners(x)
        axes = (tuple(range(w.ndim)), tuple(range(w.ndim)))
        q0 = np.tensordot(w, self.data[k][block], axes=axes)
        q1 = np.tensordot(w, self.data[k + 1][block], axes=axes)
        return (1.0 - wt) * q0 + wt * q1

    def value(self, x, t) -> float:
        return float(self.query(x, t)[0])

    def gradient(self, x, t) -> np.ndarray:
        return self.query(x, t)[1:]


@dataclass
class PiecewiseConstantSignal:
    """Open-loop control signal holding ``actions[k]`` on ``[times[k], times[k+1])``."""

    times: np.ndarray
    actions: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.actions) - 1))
        return self.actions[k]


def random_signal(rng: np.random.Generator, dim: int, t0: float, T: float, hold: float,
                  shape: str = "ball") -> PiecewiseConstantSignal:
    """Random piecewise-constant signal in the unit ball (or the interval [-1, 1])."""
    n = max(1, int(np.ceil((T - t0) / hold)))
    times = t0 + hold * np.arange(n)
    if shape == "interval":
        actions = rng.uniform(-1.0, 1.0, size=(n, dim))
    else:
        d = rng.normal(size=(n, dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        actions = d * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
    return PiecewiseConstantSignal(times, actions)


Policy = Callable[[np.ndarray, float], np.ndarray]


def simulate_closed_loop(spec, result: SolveResult, x0, t0: float = 0.0, dt: float | None = None,
                         attacker_policy="optimal", defender_policy="optimal",
                         interpolant: ValueInterpolant | None = None, full_horizon: bool = False) -> Trajectory:
    """Roll out the game from ``(x0, t0)`` with RK4 until target, violation or ``T``.

    Policies are ``"optimal"`` (feedback from the value gradient), a callable
    ``signal(t) -> action``, or for the defender ``"none"`` (zero action).
    With ``full_horizon`` the rollout continues to ``T`` after the first
    event (needed by :func:`outcome_functional`); ``outcome`` still records
    the first event.
    """
    model = spec.model
    grid = result.grid
    x = np.asarray(x0, dtype=float).copy()
    if not grid.contains(x):
        raise ValueError(f"start {x.tolist()} lies outside the grid box")
    T = spec.horizon
    if not 0.0 <= t0 < T:
        raise ValueError(f"start time {t0} must lie in [0, {T})")
    gaps = np.diff(sorted(result.times))
    if dt is None:
        dt = min(grid.spacing) / (2.0 * max(model.speed_bound, 1e-12))
        if len(gaps):
            dt = min(dt, gaps.min())
    elif len(gaps) and dt > gaps.min() * (1.0 + 1e-9):
        raise ValueError(f"dt={dt} exceeds the smallest frame gap {gaps.min()}")
    vi = interpolant or ValueInterpolant(result)

    def actions(x, t):
        a_opt = b_opt = None
        if attacker_policy == "optimal" or defender_policy == "optimal":
            a_opt, b_opt = model.optimal_actions(list(vi.gradient(np.clip(x, grid.mins, grid.maxs), t)), x, t)
            a_opt = np.asarray(a_opt, dtype=float).reshape(-1)
            b_opt = np.asarray(b_opt, dtype=float).reshape(-1)
        a = a_opt if attacker_policy == "optimal" else np.asarray(attacker_policy(t), dtype=float)
        if defender_policy == "optimal":
            b = b_opt
        elif defender_policy == "none" or model.n_defender == 0:
            b = np.zeros(model.n_defender)
        else:
            b = np.asarray(defender_policy(t), dtype=float)
        return a, b

    def f(x, t):
        a, b = actions(x, t)
        return model.dynamics(x, a, b, t)

    times, states, acts_a, acts_b, ls, gs = [], [], [], [], [], []
    t = float(t0)
    outcome, when, left = EXPIRED, None, False
    while True:
        lv = float(spec.l_scene.evaluate(x, t))
        gv = float(spec.g_scene.evaluate(x, t))
        a, b = actions(x, t)
        times.append(t)
        states.append(x.copy())
        acts_a.append(a)
        acts_b.append(b)
        ls.append(lv)
        gs.append(gv)
        if when is None and gv > 0.0:
            outcome, when = VIOLATED, t
        elif when is None and lv <= 0.0:
            outcome, when = REACHED, t
        if when is not None and not full_horizon:
            break
        if t >= T or not grid.contains(x):
            left = not grid.contains(x)
            break
        h = min(dt, T - t)
        k1 = f(x, t)
        k2 = f(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = f(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = f(x + h * k3, t + h)
        x = project_state(model, x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        t = T if T - (t + h) < 1e-12 else t + h
    return Trajectory(np.array(times), np.array(states), np.array(acts_a).reshape(len(times), -1),
                      np.array(acts_b).reshape(len(times), -1), np.array(ls), np.array(gs),
                      outcome, when, left)


def outcome_functional(traj: Trajectory, l_scene=None, g_scene=None) -> float:
    """Discrete ``min_k max(l_k, max_{j<=k} g_j)`` along the sampled trajectory.

    With scenes given, ``l`` and ``g`` are re-evaluated at the samples;
    otherwise the values recorded during simulation are used.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if l_scene is not None:
        l = np.array([float(l_scene.evaluate(x, t)) for x, t in zip(traj.states, traj.times)])
    else:
        l = traj.l
    if g_scene is not None:
        g = np.array([float(g_scene.evaluate(x, t)) for x, t in zip(traj.states, traj.times)])
    else:
        g = traj.g
    runmax = np.maximum.accumulate(g)
    assert np.all(np.diff(runmax) >= 0.0)
    return float(np.min(np.maximum(l, runmax)))


def write_trajectory_csv(path, traj: Trajectory):
    n = traj.states.shape[1]
    header = (["time"] + [f"x{i + 1}" for i in range(n)] + [f"a{i + 1}" for i in range(traj.a.shape[1])]
              + [f"b{i + 1}" for i in range(traj.b.shape[1])] + ["l", "g", "runmax_g"])
    runmax = np.maximum.accumulate(traj.g)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(len(traj)):
            row = [traj.times[k], *traj.states[k], *traj.a[k], *traj.b[k], traj.l[k], traj.g[k], runmax[k]]
            w.writerow([repr(float(v)) for v in row])


@dataclass
class MonteCarloRun:
    starts: np.ndarray
    values: np.ndarray
    trajectories: list = field(default_factory=list)

    @property
    def win_rate(self) -> float:
        if not self.trajectories:
            return float("nan")
        return float(np.mean([tr.reached for tr in self.trajectories]))


def sample_starts(spec, result: SolveResult, rng: np.random.Generator, n: int, margin: float,
                  inside: bool, t0: float = 0.0, max_tries: int = 200000, interpolant=None):
    """Rejection-sample feasible starts with ``V <= -margin`` (inside) or ``V >= margin``."""
    vi = interpolant or ValueInterpolant(result)
    grid = result.grid
    lo, hi = np.asarray(grid.mins), np.asarray(grid.maxs)
    starts, values = [], []
    tries = 0
    while len(starts) < n:
        if tries >= max_tries:
            raise RuntimeError(f"found only {len(starts)} of {n} starts after {max_tries} draws")
        tries += 1
        x = rng.uniform(lo, hi)
        if float(spec.g_scene.evaluate(x, t0)) > 0.0:
            continue
        v = vi.value(x, t0)
        if (inside and v <= -margin) or (not inside and v >= margin):
            starts.append(x)
            values.append(v)
    return np.array(starts), np.array(values)


def monte_carlo(spec, result: SolveResult, n: int, margin: float, inside: bool, seed: int = 0,
                t0: float = 0.0, attacker_policy="optimal", defender_policy="optimal",
                full_horizon: bool = False) -> MonteCarloRun:
    rng = np.random.default_rng(seed)
    vi = ValueInterpolant(result)
    starts, values = sample_starts(spec, result, rng, n, margin, inside, t0, interpolant=vi)
    run = MonteCarloRun(starts, values)
    for x0 in starts:
        run.trajectories.append(simulate_closed_loop(spec, result, x0, t0, attacker_policy=attacker_policy,
                                                     defender_policy=defender_policy, interpolant=vi,
                                                     full_horizon=full_horizon))
    return run
