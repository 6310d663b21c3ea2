"""Zero-set extraction and set-comparison metrics.

Includes marching squares, brute-force signed distance to a contour, the
boundary-error metric against analytic boundary points, the analytic
capture-basin boundary of the moving target/obstacle example, a convergence
study driver and the Hausdorff distance between two zero sets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.optimize import brentq, minimize_scalar

from .grid import ScalarField, _cell_weights, interpolate_many
from .solver import SolveConfig, solve_backward


@dataclass(frozen=True)
class ContourSet:
    segments: np.ndarray  # (n, 2, 2): segment, endpoint, xy
    spacing: float

    def __len__(self):
        return len(self.segments)

    @property
    def points(self) -> np.ndarray:
        return self.segments.reshape(-1, 2)


@dataclass(frozen=True)
class ErrorReport:
    mean_error: float
    max_error: float
    n_points: int
    grid_spacing: float
    n_nodes: int = 0


def _require_2d(field: ScalarField):
    if field.grid.ndim != 2:
        raise ValueError(f"expected a 2D field, got {field.grid.ndim} dimensions")


def extract_zero_contour(field: ScalarField, level: float = 0.0) -> ContourSet:
    """Marching squares with linear edge interpolation.

    A node counts as above the level when its value is strictly greater.
    Saddle cells are split according to the sign of the cell average.
    """
    _require_2d(field)
    grid = field.grid
    v = field.values - level
    x, y = grid.axis(0), grid.axis(1)
    above = v > 0
    # cell corners: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
    c = [v[:-1, :-1], v[1:, :-1], v[1:, 1:], v[:-1, 1:]]
    b = [above[:-1, :-1], above[1:, :-1], above[1:, 1:], above[:-1, 1:]]
    X0, Y0 = np.meshgrid(x[:-1], y[:-1], indexing="ij")
    X1, Y1 = np.meshgrid(x[1:], y[1:], indexing="ij")
    cx = [X0, X1, X1, X0]
    cy = [Y0, Y0, Y1, Y1]
    edges = [(0, 1), (1, 2), (3, 2), (0, 3)]

    def edge_point(e, mask):
        i, j = edges[e]
        vi, vj = c[i][mask], c[j][mask]
        s = vi / (vi - vj)
        px = cx[i][mask] + s * (cx[j][mask] - cx[i][mask])
        py = cy[i][mask] + s * (cy[j][mask] - cy[i][mask])
        return np.stack([px, py], axis=-1)

    cross = [b[i] != b[j] for i, j in edges]
    ncross = sum(x.astype(int) for x in cross)
    pieces = []
    for e1, e2 in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]:
        mask = (ncross == 2) & cross[e1] & cross[e2]
        if np.any(mask):
            pieces.append(np.stack([edge_point(e1, mask), edge_point(e2, mask)], axis=1))
    saddle = ncross == 4
    if np.any(saddle):
        center_above = (c[0] + c[1] + c[2] + c[3]) > 0
        # corners 0 and 2 joined through the center: cut off corners 1 and 3
        joined02 = saddle & (center_above == b[0])
        joined13 = saddle & ~(center_above == b[0])
        for mask, pairs in ((joined02, [(0, 1), (2, 3)]), (joined13, [(3, 0), (1, 2)])):
            if np.any(mask):
                for e1, e2 in pairs:
                    pieces.append(np.stack([edge_point(e1, mask), edge_point(e2, mask)], axis=1))
    segments = np.concatenate(pieces) if pieces else np.zeros((0, 2, 2))
    return ContourSet(segments, max(grid.spacing))


def point_segment_distance(points: np.ndarray, segments: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Distance from each point to the nearest segment (brute force, chunked)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(segments) == 0:
        raise ValueError("no segments to measure against")
    a = segments[:, 0, :]
    ab = segments[:, 1, :] - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    safe = np.where(len2 > 0, len2, 1.0)
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk]
        ap_x = p[:, None, 0] - a[None, :, 0]
        ap_y = p[:, None, 1] - a[None, :, 1]
        s = np.clip((ap_x * ab[None, :, 0] + ap_y * ab[None, :, 1]) / safe, 0.0, 1.0)
        s = np.where(len2 > 0, s, 0.0)
        dx = ap_x - s * ab[None, :, 0]
        dy = ap_y - s * ab[None, :, 1]
        out[start:start + chunk] = np.sqrt(np.min(dx * dx + dy * dy, axis=1))
    return out


def _contour_or_raise(field: ScalarField) -> ContourSet:
    contour = extract_zero_contour(field)
    if len(contour) == 0:
        raise ValueError("field does not change sign; its zero set is empty")
    return contour


def signed_distance_to_zero_set(field: ScalarField) -> ScalarField:
    """Exact signed distance (per node) to the marching-squares zero contour."""
    _require_2d(field)
    contour = _contour_or_raise(field)
    nodes = field.grid.mesh().reshape(2, -1).T
    dist = point_segment_distance(nodes, contour.segments).reshape(field.grid.shape)
    return field.with_values(np.where(field.values < 0, -dist, dist))


def boundary_error(field: ScalarField, analytic_points: np.ndarray, method: str = "exact") -> ErrorReport:
    """Mean and max distance from ``analytic_points`` to the numeric zero contour.

    ``method="exact"`` measures each point's distance to the contour
    segments directly, i.e. the signed distance function evaluated at the
    point itself. ``method="interpolated"`` builds the signed distance at the
    surrounding nodes (same values as :func:`signed_distance_to_zero_set`)
    and interpolates it bilinearly, which adds an O(h^2) smoothing error.
    """
    _require_2d(field)
    pts = np.atleast_2d(np.asarray(analytic_points, dtype=float))
    if len(pts) == 0:
        raise ValueError("no analytic points given")
    grid = field.grid
    contour = _contour_or_raise(field)
    if method == "exact":
        interpolate_many(np.zeros(grid.shape), grid, pts)  # box check
        err = point_segment_distance(pts, contour.segments)
    elif method == "interpolated":
        base, _ = _cell_weights(grid, pts)  # same cells the interpolation will use
        corners = np.concatenate([base + np.array(o) for o in ((0, 0), (1, 0), (0, 1), (1, 1))])
        flat = np.unique(np.ravel_multi_index(corners.T, grid.shape))
        idx = np.unravel_index(flat, grid.shape)
        xy = np.stack([grid.axis(0)[idx[0]], grid.axis(1)[idx[1]]], axis=1)
        d = point_segment_distance(xy, contour.segments)
        sdf = np.full(grid.shape, np.nan)
        sdf[idx] = np.where(field.values[idx] < 0, -d, d)
        err = np.abs(interpolate_many(sdf, grid, pts))
    else:
        raise ValueError(f"unknown method {method!r}")
    return ErrorReport(float(np.mean(err)), float(np.max(err)), len(pts), float(max(grid.spacing)),
                       grid.counts[0])


def hausdorff_zero_sets(field_a: ScalarField, field_b: ScalarField) -> float:
    """Symmetric Hausdorff distance between the zero contours of two 2D fields.

    Each contour is represented by its segment endpoints and midpoints; the
    distance from those points to the other contour's segments is exact.
    """
    _require_2d(field_a)
    _require_2d(field_b)
    ca, cb = _contour_or_raise(field_a), _contour_or_raise(field_b)
    if ca.segments.shape == cb.segments.shape and np.array_equal(ca.segments, cb.segments):
        return 0.0

    def probe(c):
        return np.concatenate([c.points, c.segments.mean(axis=1)])

    d_ab = point_segment_distance(probe(ca), cb.segments).max()
    d_ba = point_segment_distance(probe(cb), ca.segments).max()
    return float(max(d_ab, d_ba))


def sublevel_excess(later: ScalarField, earlier: ScalarField, level: float = 0.0) -> float:
    """Largest distance from a node of ``{later <= level}`` to ``{earlier <= level}``.

    Zero when the earlier set contains the later one node-wise; infinite
    when the earlier set is empty but the later is not. Works in any
    dimension on a shared grid.
    """
    if not later.grid.same_as(earlier.grid):
        raise ValueError("fields live on different grids")
    inside_late = later.values <= level
    inside_early = earlier.values <= level
    if not inside_late.any():
        return 0.0
    if not inside_early.any():
        return math.inf
    dist = distance_transform_edt(~inside_early, sampling=later.grid.spacing)
    return float(dist[inside_late].max())


def set_growth_report(result, times: Sequence[float], level: float = 0.0) -> list[tuple[float, float, float]]:
    """``(t_later, t_earlier, excess in cells)`` for consecutive pairs of ``times``.

    An empirical check that the sublevel set at each earlier time contains
    the set at the next later time; ``times`` may be given in any order.
    """
    ts = sorted(times, reverse=True)
    h = max(result.grid.spacing)
    out = []
    for late, early in zip(ts, ts[1:]):
        excess = sublevel_excess(result.frame(late), result.frame(early), level)
        out.append((late, early, excess / h))
    return out


def write_contour_csv(path, contour: ContourSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment_id", "x1", "y1", "x2", "y2"])
        for k, seg in enumerate(contour.segments):
            w.writerow([k, *(repr(float(v)) for v in seg.ravel())])


# --- analytic boundary of the moving target / moving obstacle example -------

def _params(params: dict | None) -> dict:
    from .games import EXAMPLE1_DEFAULTS

    p = dict(EXAMPLE1_DEFAULTS)
    p.update(params or {})
    return p


class ObstacleGrazeOracle:
    """Brute-force reachability test for starts below the moving obstacle.

    A candidate path runs straight to the obstacle's lower-left corner as it
    stands at some time ``t_g``, then straight to the nearest point of the
    target's final position, arriving at ``T``. Collisions with the (open)
    obstacle are checked at sampled instants along both legs.
    """

    def __init__(self, params: dict | None = None, n_times: int = 2001, n_samples: int = 200):
        p = _params(params)
        self.v = p["v_veh"]
        self.v_obs = p["v_obs"]
        self.T = p["horizon"]
        self.b = p["obstacle_half_width"]
        self.ob = np.asarray(p["obstacle_center"], dtype=float)
        a = p["target_half_width"]
        tc = np.asarray(p["target_center"], dtype=float) + np.array([0.0, -p["v_tar"] * self.T])
        self.target_lo, self.target_hi = tc - a, tc + a
        self.times = np.linspace(0.0, self.T, n_times)[1:]
        self.n_samples = n_samples

    def corner(self, t):
        return np.stack([np.full_like(t, self.ob[0] - self.b), self.ob[1] - self.b - self.v_obs * t], axis=-1)

    def _collides(self, start, end, t0, t1) -> bool:
        s = np.linspace(0.0, 1.0, self.n_samples)
        pts = start + s[:, None] * (end - start)
        t = t0 + s * (t1 - t0)
        rel = np.abs(pts - np.stack([np.full_like(t, self.ob[0]), self.ob[1] - self.v_obs * t], axis=-1))
        return bool(np.any(np.max(rel, axis=1) < self.b - 1e-9))

    def _slack(self, start, t):
        w = self.corner(np.atleast_1d(t))
        q = np.clip(w, self.target_lo, self.target_hi)
        f1 = self.v * t - np.linalg.norm(w - start, axis=-1)
        f2 = self.v * (self.T - t) - np.linalg.norm(q - w, axis=-1)
        return np.minimum(f1, f2), w, q

    def margin(self, start) -> float:
        """Largest slack ``min(v t - |leg1|, v (T - t) - |leg2|)`` over collision-free graze times."""
        start = np.asarray(start, dtype=float)
        slack, _, _ = self._slack(start, self.times)
        best = -math.inf
        for k in np.argsort(slack)[::-1][:8]:
            lo = self.times[max(k - 1, 0)]
            hi = self.times[min(k + 1, len(self.times) - 1)]
            res = minimize_scalar(lambda t: -self._slack(start, t)[0][0], bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-13})
            t = float(res.x)
            val, w, q = self._slack(start, t)
            if val[0] <= best:
                continue
            if self._collides(start, w[0], 0.0, t) or self._collides(w[0], q[0], t, self.T):
                continue
            best = float(val[0])
        # every candidate collides: report a clearly infeasible finite margin
        return best if best > -math.inf else -1.0

    def feasible(self, start) -> bool:
        return self.margin(start) >= 0.0

    def boundary_y(self, px: float, lo: float = -0.7, hi: float | None = None) -> float:
        """Lowest reachable ``p_y`` below the obstacle at abscissa ``px``."""
        if hi is None:
            hi = self.ob[1] - self.b - 0.2
        return brentq(lambda py: self.margin((px, py)), lo, hi, xtol=1e-12)

    def fit_arc(self, n: int = 41):
        """Fit a circle to oracle boundary points across the obstacle's half width."""
        xs = np.linspace(self.ob[0] - self.b, self.ob[0], n)
        ys = np.array([self.boundary_y(x) for x in xs])
        A = np.stack([xs, ys, np.ones_like(xs)], axis=1)
        rhs = xs ** 2 + ys ** 2
        (c1, c2, c3), *_ = np.linalg.lstsq(A, rhs, rcond=None)
        cx, cy = c1 / 2.0, c2 / 2.0
        r = math.sqrt(c3 + cx * cx + cy * cy)
        resid = float(np.max(np.abs(np.hypot(xs - cx, ys - cy) - r)))
        return (cx, cy, r), resid


@dataclass(frozen=True)
class BoundaryPiece:
    name: str
    points: np.ndarray  # dense polyline, ordered

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def resample(self, n: int) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        u = (np.arange(n) + 0.5) / n * s[-1]
        return np.stack([np.interp(u, s, self.points[:, 0]), np.interp(u, s, self.points[:, 1])], axis=1)


def _line(p0, p1, n=2):
    s = np.linspace(0.0, 1.0, n)[:, None]
    return np.asarray(p0, float) + s * (np.asarray(p1, float) - np.asarray(p0, float))


def _arc(center, radius, th0, th1, n=2001):
    th = np.linspace(th0, th1, n)
    return np.stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)], axis=1)


_ARC_CACHE: dict = {}


def example1_segment6(params: dict | None = None):
    key = tuple(sorted((k, str(v)) for k, v in _params(params).items()))
    if key not in _ARC_CACHE:
        _ARC_CACHE[key] = ObstacleGrazeOracle(params).fit_arc()
    return _ARC_CACHE[key]


def example1_boundary_pieces(params: dict | None = None) -> list[BoundaryPiece]:
    """Left-half (``p_x <= 0``) pieces of the analytic capture-basin boundary at t=0.

    Pieces ``seg1``..``seg7`` follow the published construction; ``top``
    (target's upper edge) and ``obstacle`` (the obstacle's upper and outer
    edges) close the outer curve and the hole.
    """
    p = _params(params)
    vv, vt, vo, T = p["v_veh"], p["v_tar"], p["v_obs"], p["horizon"]
    a, b = p["target_half_width"], p["obstacle_half_width"]
    ty0 = p["target_center"][1]
    top = ty0 + a
    yf = ty0 - vt * T
    r = vv * T
    m = math.sqrt((vt ** 2 - vv ** 2) / vv ** 2)
    px_star = -vt * T / (1.0 / m + m) - a
    py_star = -vt * T / (m ** -2 + 1.0) + top
    arc2_center = (-a, yf + a)
    th_star = math.atan2(py_star - arc2_center[1], px_star - arc2_center[0])
    (cx6, cy6, r6), _ = example1_segment6(params)
    m7 = math.sqrt((vo ** 2 - vv ** 2) / vv ** 2)
    oy = p["obstacle_center"][1]
    seg6_x = np.linspace(cx6, 0.0, 2001)
    seg6 = np.stack([seg6_x, cy6 - np.sqrt(np.maximum(r6 ** 2 - (seg6_x - cx6) ** 2, 0.0))], axis=1)
    return [
        BoundaryPiece("top", _line((0.0, top), (-a, top))),
        BoundaryPiece("seg1", _line((-a, top), (px_star, py_star))),
        BoundaryPiece("seg2", _arc(arc2_center, r, th_star, math.pi)),
        BoundaryPiece("seg3", _line((-a - r, yf + a), (-a - r, yf - a))),
        BoundaryPiece("seg4", _arc((-a, yf - a), r, math.pi, 1.5 * math.pi)),
        BoundaryPiece("seg5", _line((-a, yf - a - r), (-b, yf - a - r))),
        BoundaryPiece("seg6", seg6),
        BoundaryPiece("obstacle", np.concatenate([_line((0.0, oy + b), (-b, oy + b)),
                                                  _line((-b, oy + b), (-b, oy - b))[1:]])),
        BoundaryPiece("seg7", _line((-b, oy - b), (0.0, oy - b - m7 * b))),
    ]


def example1_analytic_boundary(n_points: int = 20000, params: dict | None = None) -> np.ndarray:
    """About ``n_points`` points spread by arc length over the analytic boundary.

    Left-half pieces are mirrored across ``p_x = 0``.
    """
    if n_points < 100:
        raise ValueError("need at least 100 boundary points")
    pieces = example1_boundary_pieces(params)
    total = sum(pc.length for pc in pieces)
    out = []
    for pc in pieces:
        k = max(1, int(round(0.5 * n_points * pc.length / total)))
        pts = pc.resample(k)
        out.append(pts)
        out.append(pts * np.array([-1.0, 1.0]))
    return np.concatenate(out)


def convergence_study(spec, Ns: Sequence[int], config: dict | None = None, n_points: int = 20000,
                      csv_path: str | Path | None = None) -> list[ErrorReport]:
    """Solve at each resolution and measure the boundary error at ``t = 0``."""
    config = dict(config or {})
    points = example1_analytic_boundary(n_points, spec.params)
    reports = []
    for n in Ns:
        grid = spec.grid(n)
        cfg = SolveConfig(spec.horizon, (spec.horizon, 0.0), **config)
        result = solve_backward(spec.model, spec.l_scene, spec.g_scene, grid, cfg)
        reports.append(boundary_error(result.frames[-1][1], points))
    if csv_path is not None:
        write_convergence_csv(csv_path, Ns, reports)
    return reports


def write_convergence_csv(path, Ns, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "spacing", "mean_error", "max_error"])
        for n, rep in zip(Ns, reports):
            w.writerow([n, repr(rep.grid_spacing), repr(rep.mean_error), repr(rep.max_error)])


# --- native versus time-augmented solves ------------------------------------

@dataclass
class BenchmarkReport:
    native_timings: dict
    augmented_timings: dict
    native_counts: tuple
    augmented_counts: tuple
    cell: float
    comparisons: list  # (t, slice position or None, distance)

    @property
    def speedup(self) -> float:
        """Ratio of solver wall times (setup + stepping, no I/O)."""
        aug = self.augmented_timings["setup"] + self.augmented_timings["stepping"]
        nat = self.native_timings["setup"] + self.native_timings["stepping"]
        return aug / nat

    @property
    def worst_cells(self) -> float:
        return max(d for _, _, d in self.comparisons) / self.cell

    def to_dict(self) -> dict:
        return {
            "native_counts": list(self.native_counts),
            "augmented_counts": list(self.augmented_counts),
            "native_timings": self.native_timings,
            "augmented_timings": self.augmented_timings,
            "speedup": self.speedup,
            "cell": self.cell,
            "comparisons": [{"t": t, "position": p, "distance": d, "cells": d / self.cell}
                            for t, p, d in self.comparisons],
        }


def augmentation_benchmark(spec, native_counts, augmented_counts, times: Sequence[float] = (0.0,),
                           slice_axis: int | None = None, positions: Sequence[float] = (),
                           scheme: str = "high", cfl_factor: float = 0.5) -> BenchmarkReport:
    """Solve ``spec`` natively and with time as a state, then compare zero sets.

    ``augmented_counts`` lists the node counts of the augmented grid, time
    axis last. For problems above two dimensions the value is cut at each of
    ``positions`` along ``slice_axis`` before comparing 2D zero sets. The
    comparison unit ``cell`` is the largest spatial spacing of either grid.
    """
    from .games import augment_time, slice_augmented
    from .grid import slice_field

    aug = augment_time(spec)
    frame_times = tuple(sorted({float(spec.horizon), *map(float, times), 0.0}, reverse=True))
    cfg = SolveConfig(spec.horizon, frame_times, cfl_factor, scheme)
    grid_n = spec.grid(native_counts)
    grid_a = aug.grid(augmented_counts)
    native = solve_backward(spec.model, spec.l_scene, spec.g_scene, grid_n, cfg)
    augmented = solve_backward(aug.model, aug.l_scene, aug.g_scene, grid_a, cfg)
    cell = float(max(max(grid_n.spacing), max(grid_a.spacing[:-1])))
    comparisons = []
    for t in times:
        a = native.frame(t)
        b = slice_augmented(augmented.frame(t), t)
        if slice_axis is None:
            comparisons.append((float(t), None, hausdorff_zero_sets(a, b)))
            continue
        for pos in positions:
            d = hausdorff_zero_sets(slice_field(a, slice_axis, pos), slice_field(b, slice_axis, pos))
            comparisons.append((float(t), float(pos), d))
    return BenchmarkReport(native.timings, augmented.timings, grid_n.counts, grid_a.counts, cell, comparisons)
