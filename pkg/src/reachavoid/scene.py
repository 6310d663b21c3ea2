"""Time-varying implicit sets built from moving primitives.

A scene is negative inside its set, positive outside and zero on the
boundary. Primitives move with affine-in-time centers and sizes; scenes
compose them with union (min), intersection (max) and complement (negation).
Values are Lipschitz but not exact signed distances: boxes use the
infinity-norm form ``max_i(|z_i - c_i| - w_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Grid, ScalarField

KINDS = ("box", "ball", "halfspace")


def _vec(v, n=None):
    if v is None:
        return None
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if n is not None and a.size == 1 and n > 1:
        a = np.full(n, a.item())
    return a


class Scene:
    """Base class for implicit-set expression nodes."""

    ndim: int

    def evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        """Evaluate at ``points`` shaped ``(ndim, ...)``; returns shape ``(...)``."""
        raise NotImplementedError

    @property
    def is_static(self) -> bool:
        raise NotImplementedError

    def lipschitz(self) -> float:
        """Lipschitz bound in (x, t) under the norm ``|x|_2 + |t|``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __or__(self, other: "Scene") -> "Scene":
        return Union((self, other))

    def __and__(self, other: "Scene") -> "Scene":
        return Intersect((self, other))

    def __invert__(self) -> "Scene":
        return Complement(self)


@dataclass(frozen=True, eq=False)
class Primitive(Scene):
    """A moving box, ball or half-space.

    ``projection`` (rows x ndim) maps the state into the primitive's own
    coordinates; it defaults to the identity. Projections let a primitive
    ignore some state components (an obstacle in a 3D joint state) or act
    on combinations of them (a capture disk around a second player).
    """

    kind: str
    ndim: int
    center0: np.ndarray | None = None
    center_velocity: np.ndarray | None = None
    half_width0: np.ndarray | None = None
    radius0: float = 0.0
    growth_rate: np.ndarray | float = 0.0
    normal: np.ndarray | None = None
    offset: float = 0.0
    offset_rate: float = 0.0
    projection: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        proj = None if self.projection is None else np.atleast_2d(np.asarray(self.projection, dtype=float))
        if proj is not None and proj.shape[1] != self.ndim:
            raise ValueError(f"projection has {proj.shape[1]} columns for a {self.ndim}-dim state")
        m = self.ndim if proj is None else proj.shape[0]
        object.__setattr__(self, "projection", proj)
        if self.kind == "halfspace":
            n = _vec(self.normal)
            if n is None or n.size != m:
                raise ValueError("halfspace needs a normal matching the primitive dimension")
            norm = np.linalg.norm(n)
            if norm == 0:
                raise ValueError("halfspace normal must be nonzero")
            object.__setattr__(self, "normal", n / norm)
            return
        c = _vec(self.center0, m)
        if c is None or c.size != m:
            raise ValueError(f"{self.kind} needs a center of length {m}")
        v = np.zeros(m) if self.center_velocity is None else _vec(self.center_velocity, m)
        if v.size != m:
            raise ValueError("center_velocity length mismatch")
        object.__setattr__(self, "center0", c)
        object.__setattr__(self, "center_velocity", v)
        if self.kind == "box":
            w = _vec(self.half_width0, m)
            if w is None or w.size != m:
                raise ValueError(f"box needs half widths of length {m}")
            object.__setattr__(self, "half_width0", w)
            object.__setattr__(self, "growth_rate", _vec(self.growth_rate, m))
        else:
            object.__setattr__(self, "growth_rate", float(self.growth_rate))

    @property
    def dim(self) -> int:
        return self.ndim if self.projection is None else self.projection.shape[0]

    def _project(self, points: np.ndarray) -> np.ndarray:
        if self.projection is None:
            return points
        return np.tensordot(self.projection, points, axes=(1, 0))

    def center(self, t: float) -> np.ndarray:
        return self.center0 + self.center_velocity * t

    def evaluate(self, points, t):
        z = self._project(np.asarray(points, dtype=float))
        if self.kind == "halfspace":
            c = self.offset + self.offset_rate * t
            return np.tensordot(self.normal, z, axes=(0, 0)) - c
        # t may be an array broadcasting against the point layout
        shape = (self.dim,) + (1,) * (z.ndim - 1)
        t = np.asarray(t, dtype=float)
        dz = z - (self.center0.reshape(shape) + self.center_velocity.reshape(shape) * t)
        if self.kind == "box":
            w = np.maximum(self.half_width0.reshape(shape) + self.growth_rate.reshape(shape) * t, 0.0)
            return np.max(np.abs(dz) - w, axis=0)
        r = np.maximum(self.radius0 + self.growth_rate * t, 0.0)
        return np.sqrt(np.sum(dz * dz, axis=0)) - r

    @property
    def is_static(self) -> bool:
        if self.kind == "halfspace":
            return self.offset_rate == 0.0
        return not np.any(self.center_velocity) and not np.any(self.growth_rate)

    def lipschitz(self) -> float:
        gain = 1.0 if self.projection is None else float(np.linalg.norm(self.projection, 2))
        if self.kind == "halfspace":
            rate = abs(self.offset_rate)
        else:
            rate = float(np.linalg.norm(self.center_velocity)) + float(np.linalg.norm(np.atleast_1d(self.growth_rate)))
        return max(gain, rate)

    def to_dict(self) -> dict:
        out = {"primitive": self.kind, "ndim": self.ndim}
        if self.kind == "halfspace":
            out.update(normal=self.normal.tolist(), offset=self.offset, offset_rate=self.offset_rate)
        else:
            out.update(center=self.center0.tolist(), velocity=self.center_velocity.tolist())
            if self.kind == "box":
                out.update(half_widths=self.half_width0.tolist(), growth=np.atleast_1d(self.growth_rate).tolist())
            else:
                out.update(radius=self.radius0, growth=self.growth_rate)
        if self.projection is not None:
            out["projection"] = self.projection.tolist()
        return out


def box(center, half_widths, velocity=None, growth=0.0, projection=None, ndim=None) -> Primitive:
    m = len(np.atleast_1d(center))
    ndim = ndim if ndim is not None else (m if projection is None else np.shape(projection)[1])
    return Primitive("box", ndim, center0=center, center_velocity=velocity, half_width0=half_widths,
                     growth_rate=growth, projection=projection)


def ball(center, radius, velocity=None, growth=0.0, projection=None, ndim=None) -> Primitive:
    m = len(np.atleast_1d(center))
    ndim = ndim if ndim is not None else (m if projection is None else np.shape(projection)[1])
    return Primitive("ball", ndim, center0=center, center_velocity=velocity, radius0=radius,
                     growth_rate=growth, projection=projection)


def halfspace(normal, offset=0.0, offset_rate=0.0, projection=None, ndim=None) -> Primitive:
    m = len(np.atleast_1d(normal))
    ndim = ndim if ndim is not None else (m if projection is None else np.shape(projection)[1])
    return Primitive("halfspace", ndim, normal=normal, offset=offset, offset_rate=offset_rate,
                     projection=projection)


@dataclass(frozen=True, eq=False)
class Union(Scene):
    children: tuple[Scene, ...]

    def __post_init__(self):
        _check_children(self.children)

    @property
    def ndim(self):
        return self.children[0].ndim

    def evaluate(self, points, t):
        out = self.children[0].evaluate(points, t)
        for child in self.children[1:]:
            out = np.minimum(out, child.evaluate(points, t))
        return out

    @property
    def is_static(self):
        return all(c.is_static for c in self.children)

    def lipschitz(self):
        return max(c.lipschitz() for c in self.children)

    def to_dict(self):
        return {"op": "union", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True, eq=False)
class Intersect(Scene):
    children: tuple[Scene, ...]

    def __post_init__(self):
        _check_children(self.children)

    @property
    def ndim(self):
        return self.children[0].ndim

    def evaluate(self, points, t):
        out = self.children[0].evaluate(points, t)
        for child in self.children[1:]:
            out = np.maximum(out, child.evaluate(points, t))
        return out

    @property
    def is_static(self):
        return all(c.is_static for c in self.children)

    def lipschitz(self):
        return max(c.lipschitz() for c in self.children)

    def to_dict(self):
        return {"op": "intersect", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True, eq=False)
class Complement(Scene):
    child: Scene

    @property
    def ndim(self):
        return self.child.ndim

    def evaluate(self, points, t):
        return -self.child.evaluate(points, t)

    @property
    def is_static(self):
        return self.child.is_static

    def lipschitz(self):
        return self.child.lipschitz()

    def to_dict(self):
        return {"op": "complement", "child": self.child.to_dict()}


@dataclass(frozen=True, eq=False)
class Constant(Scene):
    """Spatially uniform value; ``Constant(-1e9)`` means "no constraint"."""

    ndim: int
    value: float

    def evaluate(self, points, t):
        points = np.asarray(points, dtype=float)
        return np.full(points.shape[1:], float(self.value))

    @property
    def is_static(self):
        return True

    def lipschitz(self):
        return 0.0

    def to_dict(self):
        return {"constant": self.value, "ndim": self.ndim}


@dataclass(frozen=True, eq=False)
class TimeAsState(Scene):
    """Static scene over ``(x, s)`` that evaluates ``inner`` at ``(x, t=s)``."""

    inner: Scene

    @property
    def ndim(self):
        return self.inner.ndim + 1

    def evaluate(self, points, t):
        points = np.asarray(points, dtype=float)
        return self.inner.evaluate(points[:-1], points[-1])

    @property
    def is_static(self):
        return True

    def lipschitz(self):
        return self.inner.lipschitz()

    def to_dict(self):
        return {"time_as_state": self.inner.to_dict()}


def _check_children(children: Sequence[Scene]):
    if not children:
        raise ValueError("composite scene needs at least one child")
    dims = {c.ndim for c in children}
    if len(dims) != 1:
        raise ValueError(f"children disagree on dimension: {sorted(dims)}")


def scene_from_dict(data: dict) -> Scene:
    """Inverse of :meth:`Scene.to_dict`, also used for inline CLI scenes."""
    if "op" in data:
        op = data["op"]
        if op == "complement":
            return Complement(scene_from_dict(data["child"]))
        children = tuple(scene_from_dict(c) for c in data["children"])
        if op == "union":
            return Union(children)
        if op == "intersect":
            return Intersect(children)
        raise ValueError(f"unknown scene op {op!r}")
    if "constant" in data:
        return Constant(int(data["ndim"]), float(data["constant"]))
    if "time_as_state" in data:
        return TimeAsState(scene_from_dict(data["time_as_state"]))
    kind = data.get("primitive")
    proj = data.get("projection")
    ndim = data.get("ndim")
    if kind == "box":
        return box(data["center"], data["half_widths"], data.get("velocity"), data.get("growth", 0.0), proj, ndim)
    if kind == "ball":
        return ball(data["center"], data["radius"], data.get("velocity"), data.get("growth", 0.0), proj, ndim)
    if kind == "halfspace":
        return halfspace(data["normal"], data.get("offset", 0.0), data.get("offset_rate", 0.0), proj, ndim)
    raise ValueError(f"unrecognised scene description: {sorted(data)}")


def eval_scene(scene: Scene, x: Sequence[float], t: float) -> float:
    """Implicit-function value of ``scene`` at a single point ``x`` and time ``t``."""
    x = np.asarray(x, dtype=float).reshape(scene.ndim)
    return float(scene.evaluate(x, t))


def sample_scene(scene: Scene, grid: Grid, t: float, mesh: np.ndarray | None = None) -> ScalarField:
    """Evaluate ``scene`` at every node of ``grid`` at time ``t``.

    ``mesh`` may be passed to reuse precomputed node coordinates.
    """
    if scene.ndim != grid.ndim:
        raise ValueError(f"scene is {scene.ndim}-dimensional, grid is {grid.ndim}-dimensional")
    if mesh is None:
        mesh = grid.mesh()
    values = np.broadcast_to(scene.evaluate(mesh, t), grid.shape)
    return ScalarField(grid, np.array(values, dtype=float), t)
