"""Closed-form game models, the built-in example problems and time augmentation.

Player I (attacker, control ``a``) minimises the outcome and player II
(defender, control ``b``) maximises it. Every catalog model has dynamics
decoupled in ``a`` and ``b``, so the upper and lower Hamiltonians agree and
``order`` is only a label carried through to results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .grid import GridError, ScalarField, create_grid, slice_field
from .scene import Scene, TimeAsState, ball, box, scene_from_dict

ZERO_GRADIENT = 1e-12
ORDERS = ("upper", "lower")


def _norm(components):
    total = components[0] * components[0]
    for c in components[1:]:
        total = total + c * c
    return np.sqrt(total)


def _unit_descent(p):
    # -p/|p|, or zero for a degenerate gradient
    n = _norm(p)
    safe = np.where(n < ZERO_GRADIENT, 1.0, n)
    return [np.where(n < ZERO_GRADIENT, 0.0, -c / safe) for c in p]


@dataclass(frozen=True)
class SingleIntegrator:
    """``x' = speed * a`` with ``a`` in the unit ball; no defender."""

    ndim: int
    speed: float
    order: str = "upper"

    kind = "single_integrator"

    def hamiltonian(self, p, x=None, t=0.0):
        return -self.speed * _norm(list(p))

    def dissipation(self):
        return (abs(self.speed),) * self.ndim

    def optimal_actions(self, p, x=None, t=0.0):
        return np.array(_unit_descent(list(p)), dtype=float), np.zeros(0)

    def dynamics(self, x, a, b, t=0.0):
        return self.speed * np.asarray(a, dtype=float)

    @property
    def speed_bound(self) -> float:
        return abs(self.speed)

    @property
    def n_attacker(self) -> int:
        return self.ndim

    @property
    def n_defender(self) -> int:
        return 0

    def to_dict(self):
        return {"kind": self.kind, "ndim": self.ndim, "speed": self.speed, "order": self.order}


@dataclass(frozen=True)
class AttackerDefenderPlanar:
    """Planar attacker ``(x_A, y_A)`` against a defender sliding on a vertical line ``y_D``.

    ``H = -v_A |(p_1, p_2)| + v_D |p_3|``. With a ``track`` ``(lo, hi)`` the
    defender stops at the ends of its segment during simulation; the
    Hamiltonian ignores the track.
    """

    v_attacker: float
    v_defender: float
    order: str = "upper"
    track: tuple[float, float] | None = None

    kind = "attacker_defender_planar"
    ndim = 3

    def hamiltonian(self, p, x=None, t=0.0):
        p = list(p)
        return -self.v_attacker * _norm(p[:2]) + self.v_defender * np.abs(p[2])

    def dissipation(self):
        return (abs(self.v_attacker), abs(self.v_attacker), abs(self.v_defender))

    def optimal_actions(self, p, x=None, t=0.0):
        p = list(p)
        a = np.array(_unit_descent(p[:2]), dtype=float)
        b = np.atleast_1d(np.where(np.asarray(p[2]) >= 0.0, 1.0, -1.0)).astype(float)
        return a, b

    def dynamics(self, x, a, b, t=0.0):
        a = np.asarray(a, dtype=float)
        vy = self.v_defender * float(np.asarray(b)[0])
        if self.track is not None:
            y = float(np.asarray(x)[2])
            if (y >= self.track[1] and vy > 0.0) or (y <= self.track[0] and vy < 0.0):
                vy = 0.0
        return np.array([self.v_attacker * a[0], self.v_attacker * a[1], vy])

    def project_state(self, x):
        """Clip the defender onto its track (identity without one)."""
        x = np.asarray(x, dtype=float)
        if self.track is None:
            return x
        out = x.copy()
        out[2] = min(max(out[2], self.track[0]), self.track[1])
        return out

    @property
    def speed_bound(self) -> float:
        return float(np.hypot(self.v_attacker, self.v_defender))

    @property
    def n_attacker(self) -> int:
        return 2

    @property
    def n_defender(self) -> int:
        return 1

    def to_dict(self):
        return {"kind": self.kind, "v_attacker": self.v_attacker, "v_defender": self.v_defender, "order": self.order,
                "track": None if self.track is None else list(self.track)}


@dataclass(frozen=True)
class TimeAugmented:
    """``inner`` with time appended as a state ``s`` obeying ``s' = 1``."""

    inner: Any

    kind = "time_augmented"

    @property
    def ndim(self) -> int:
        return self.inner.ndim + 1

    @property
    def order(self) -> str:
        return self.inner.order

    def hamiltonian(self, p, x=None, t=0.0):
        p = list(p)
        return self.inner.hamiltonian(p[:-1], x, t) + p[-1]

    def dissipation(self):
        return tuple(self.inner.dissipation()) + (1.0,)

    def optimal_actions(self, p, x=None, t=0.0):
        return self.inner.optimal_actions(list(p)[:-1], x, t)

    def dynamics(self, x, a, b, t=0.0):
        return np.concatenate([self.inner.dynamics(np.asarray(x)[:-1], a, b, t), [1.0]])

    def project_state(self, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([project_state(self.inner, x[:-1]), x[-1:]])

    @property
    def speed_bound(self) -> float:
        return float(np.hypot(self.inner.speed_bound, 1.0))

    @property
    def n_attacker(self) -> int:
        return self.inner.n_attacker

    @property
    def n_defender(self) -> int:
        return self.inner.n_defender

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict()}


def project_state(model, x):
    """Apply the model's state saturation, if it has one."""
    fn = getattr(model, "project_state", None)
    return np.asarray(x, dtype=float) if fn is None else fn(x)


def model_from_dict(data: dict):
    kind = data["kind"]
    order = data.get("order", "upper")
    if order not in ORDERS:
        raise ValueError(f"unknown minimax order {order!r}")
    if kind == "single_integrator":
        return SingleIntegrator(int(data["ndim"]), float(data["speed"]), order)
    if kind == "attacker_defender_planar":
        track = data.get("track")
        return AttackerDefenderPlanar(float(data["v_attacker"]), float(data["v_defender"]), order,
                                      None if track is None else (float(track[0]), float(track[1])))
    if kind == "time_augmented":
        return TimeAugmented(model_from_dict(data["inner"]))
    raise ValueError(f"unknown game model kind {kind!r}")


def eval_hamiltonian(model, x, p: Sequence[float], t: float = 0.0) -> float:
    """Closed-form Hamiltonian of ``model`` at a single gradient ``p``."""
    return float(model.hamiltonian([float(v) for v in p], x, t))


def optimal_actions(model, gradient: Sequence[float], x=None, t: float = 0.0):
    """Attacker and defender actions attaining the minimax in the Hamiltonian."""
    a, b = model.optimal_actions([np.float64(v) for v in gradient], x, t)
    return np.asarray(a, dtype=float).reshape(-1), np.asarray(b, dtype=float).reshape(-1)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    model: Any
    l_scene: Scene
    g_scene: Scene
    horizon: float
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.model.ndim
        for label, scene in (("target", self.l_scene), ("constraint", self.g_scene)):
            if scene.ndim != n:
                raise ValueError(f"{label} scene is {scene.ndim}-dimensional, model is {n}-dimensional")
        if len(self.mins) != n or len(self.maxs) != n:
            raise ValueError("domain box does not match the model dimension")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def ndim(self) -> int:
        return self.model.ndim

    def grid(self, counts):
        if isinstance(counts, int):
            counts = [counts] * self.ndim
        return create_grid(self.mins, self.maxs, counts)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model.to_dict(),
            "target": self.l_scene.to_dict(),
            "constraint": self.g_scene.to_dict(),
            "horizon": self.horizon,
            "domain": {"mins": list(self.mins), "maxs": list(self.maxs)},
            "params": self.params,
        }


def problem_from_dict(data: dict) -> ProblemSpec:
    return ProblemSpec(
        name=data.get("name", "inline"),
        model=model_from_dict(data["model"]),
        l_scene=scene_from_dict(data["target"]),
        g_scene=scene_from_dict(data["constraint"]),
        horizon=float(data["horizon"]),
        mins=tuple(float(v) for v in data["domain"]["mins"]),
        maxs=tuple(float(v) for v in data["domain"]["maxs"]),
        params=dict(data.get("params", {})),
    )


EXAMPLE1_DEFAULTS = {
    "v_veh": 0.5,
    "v_tar": 1.5,
    "v_obs": 1.0,
    "horizon": 0.5,
    "target_center": [0.0, 0.75],
    "target_half_width": 0.2,
    "obstacle_center": [0.0, 0.0],
    "obstacle_half_width": 0.1,
    "domain": [-1.0, 1.0],
}

EXAMPLE2_DEFAULTS = {
    "v_attacker": 2.0,
    "v_defender": 3.0,
    "horizon": 1.0,
    "defender_x": 0.05,
    "capture_radius": 0.1,
    "target_center": [0.7, -0.7],
    "target_half_widths": [0.15, 0.15],
    "target_speed": 1.5,
    "obstacle_x": [-0.2, 0.0],
    "obstacle_top": 0.6,
    "obstacle_bottom": -0.2,
    "obstacle_bottom_speed": 0.5,
    "domain": [-1.0, 1.0],
    "attacker_walls": True,
}


def _merge(defaults: dict, overrides: dict | None) -> dict:
    params = dict(defaults)
    for key, value in (overrides or {}).items():
        if key not in defaults:
            raise KeyError(f"unknown override {key!r}; expected one of {sorted(defaults)}")
        params[key] = value
    return params


def _example1(params: dict) -> ProblemSpec:
    lo, hi = params["domain"]
    target = box(params["target_center"], [params["target_half_width"]] * 2, velocity=[0.0, -params["v_tar"]])
    obstacle = box(params["obstacle_center"], [params["obstacle_half_width"]] * 2, velocity=[0.0, -params["v_obs"]])
    return ProblemSpec("example1", SingleIntegrator(2, params["v_veh"]), target, ~obstacle,
                       float(params["horizon"]), (lo, lo), (hi, hi), params)


def _example2(params: dict) -> ProblemSpec:
    lo, hi = params["domain"]
    plane = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    target = box(params["target_center"], params["target_half_widths"],
                 velocity=[0.0, params["target_speed"]], projection=plane)
    x0, x1 = params["obstacle_x"]
    top, bottom, rate = params["obstacle_top"], params["obstacle_bottom"], params["obstacle_bottom_speed"]
    # fixed top edge, bottom edge sliding down at ``rate``
    obstacle = box([0.5 * (x0 + x1), 0.5 * (top + bottom)], [0.5 * (x1 - x0), 0.5 * (top - bottom)],
                   velocity=[0.0, -0.5 * rate], growth=[0.0, 0.5 * rate], projection=plane)
    capture = ball([params["defender_x"], 0.0], params["capture_radius"],
                   projection=[[1.0, 0.0, 0.0], [0.0, 1.0, -1.0]])
    model = AttackerDefenderPlanar(params["v_attacker"], params["v_defender"], track=(float(lo), float(hi)))
    g = ~(obstacle | capture)
    if params["attacker_walls"]:
        # the attacker must stay in the square; leaving it is a violation
        g = g & box([0.5 * (lo + hi)] * 2, [0.5 * (hi - lo)] * 2, projection=plane)
    return ProblemSpec("example2", model, target, g,
                       float(params["horizon"]), (lo, lo, lo), (hi, hi, hi), params)


BUILTINS = {"example1": (EXAMPLE1_DEFAULTS, _example1), "example2": (EXAMPLE2_DEFAULTS, _example2)}


def builtin_problem(name: str, overrides: dict | None = None) -> ProblemSpec:
    """The moving-target examples with their published parameters.

    ``example1``: one vehicle (speed 0.5) reaching a square target falling
    at 1.5 while dodging a smaller square obstacle falling at 1, T = 0.5.
    ``example2``: attacker (speed 2) against a defender (speed 3) on the line
    ``x = 0.05``, rising target, obstacle whose lower edge grows downward,
    capture radius 0.1, T = 1. Example 2 geometry not fixed by the source
    uses the defaults in ``EXAMPLE2_DEFAULTS``.
    """
    if name not in BUILTINS:
        raise KeyError(f"unknown built-in problem {name!r}; choose from {sorted(BUILTINS)}")
    defaults, build = BUILTINS[name]
    return build(_merge(defaults, overrides))


def augment_time(spec: ProblemSpec) -> ProblemSpec:
    """Static problem on ``(x, s)`` with ``s`` in ``[0, T]`` and ``s' = 1``.

    The augmented value at fictitious time ``theta``, sliced at ``s = theta``,
    reproduces the time-varying value at ``t = theta``.
    """
    if spec.ndim + 1 > 4:
        raise ValueError(f"cannot augment a {spec.ndim}-dimensional problem: grids stop at 4 dimensions")
    return ProblemSpec(
        name=f"{spec.name}+time",
        model=TimeAugmented(spec.model),
        l_scene=TimeAsState(spec.l_scene),
        g_scene=TimeAsState(spec.g_scene),
        horizon=spec.horizon,
        mins=tuple(spec.mins) + (0.0,),
        maxs=tuple(spec.maxs) + (spec.horizon,),
        params={"augmented_from": spec.name, **spec.params},
    )


def slice_augmented(field: ScalarField, s: float) -> ScalarField:
    """Cut an augmented field at time coordinate ``s`` (linear between nodes)."""
    try:
        cut = slice_field(field, field.grid.ndim - 1, s)
    except GridError as exc:
        raise ValueError(str(exc)) from exc
    return cut.with_values(cut.values, s)
