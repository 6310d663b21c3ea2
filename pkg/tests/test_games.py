from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachavoid.games import (
    AttackerDefenderPlanar,
    SingleIntegrator,
    TimeAugmented,
    augment_time,
    builtin_problem,
    eval_hamiltonian,
    model_from_dict,
    optimal_actions,
    problem_from_dict,
    project_state,
)
from reachavoid.numerics import dissipation_bounds

MODELS = [SingleIntegrator(2, 0.5), SingleIntegrator(3, 1.3), AttackerDefenderPlanar(2.0, 3.0),
          TimeAugmented(SingleIntegrator(2, 0.5)), TimeAugmented(AttackerDefenderPlanar(2.0, 3.0))]
vec4 = st.lists(st.floats(-20, 20), min_size=4, max_size=4)


def test_hamiltonian_examples():
    assert eval_hamiltonian(SingleIntegrator(2, 0.5), None, [3, 4]) == pytest.approx(-2.5)
    assert eval_hamiltonian(AttackerDefenderPlanar(2, 3), None, [3, 4, 1]) == pytest.approx(-7.0)
    for m in MODELS:
        assert eval_hamiltonian(m, None, [0.0] * m.ndim) == 0.0


def test_augmented_hamiltonian_example():
    aug = TimeAugmented(SingleIntegrator(2, 0.5))
    assert eval_hamiltonian(aug, None, [3, 4, 0.7]) == pytest.approx(-2.5 + 0.7)
    assert dissipation_bounds(aug).alpha == (0.5, 0.5, 1.0)


@settings(max_examples=100, deadline=None)
@given(p=vec4)
def test_augmentation_preserves_hamiltonian(p):
    for inner in (SingleIntegrator(3, 0.9), AttackerDefenderPlanar(2, 3)):
        q = p[: inner.ndim]
        assert eval_hamiltonian(TimeAugmented(inner), None, q + [0.0]) == eval_hamiltonian(inner, None, q)


def test_optimal_action_examples():
    a, b = optimal_actions(SingleIntegrator(2, 0.5), [3, 4])
    np.testing.assert_allclose(a, [-0.6, -0.8])
    assert b.size == 0
    a, _ = optimal_actions(SingleIntegrator(2, 0.5), [0, 0])
    assert a.tolist() == [0.0, 0.0]
    _, b = optimal_actions(AttackerDefenderPlanar(2, 3), [0, 0, -2])
    assert b.tolist() == [-1.0]
    _, b = optimal_actions(AttackerDefenderPlanar(2, 3), [1, 0, 0.0])
    assert b.tolist() == [1.0]


@settings(max_examples=100, deadline=None)
@given(p=vec4, lam=st.floats(0.01, 100))
def test_positive_homogeneity(p, lam):
    for m in MODELS:
        q = np.array(p[: m.ndim])
        assert eval_hamiltonian(m, None, lam * q) == pytest.approx(lam * eval_hamiltonian(m, None, q), rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(p=vec4, q=vec4)
def test_dissipation_is_a_lipschitz_bound(p, q):
    for m in MODELS:
        a = np.array(dissipation_bounds(m).alpha)
        pp, qq = np.array(p[: m.ndim]), np.array(q[: m.ndim])
        diff = abs(eval_hamiltonian(m, None, pp) - eval_hamiltonian(m, None, qq))
        assert diff <= float(a @ np.abs(pp - qq)) + 1e-9


@settings(max_examples=60, deadline=None)
@given(p=vec4)
def test_closed_forms_attain_saddle_point(p):
    # H = f(a*, b*).p, a* minimises against b*, b* maximises against a*:
    # min-max and max-min agree (Isaacs condition)
    angles = np.linspace(0, 2 * np.pi, 721)
    circle = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    m = AttackerDefenderPlanar(2.0, 3.0)
    q = np.array(p[:3])
    a, b = optimal_actions(m, q)
    H = eval_hamiltonian(m, None, q)
    assert float(m.dynamics(np.zeros(3), a, b) @ q) == pytest.approx(H, abs=1e-9)
    for bb in np.linspace(-1, 1, 41):
        assert float(m.dynamics(np.zeros(3), a, [bb]) @ q) <= H + 1e-9
    vals = [float(m.dynamics(np.zeros(3), u, b) @ q) for u in circle]
    assert min(vals) >= H - 1e-9
    upper = min(max(float(m.dynamics(np.zeros(3), u, [bb]) @ q) for bb in (-1, 1)) for u in circle)
    lower = max(min(float(m.dynamics(np.zeros(3), u, [bb]) @ q) for u in circle) for bb in (-1, 1))
    assert upper == pytest.approx(lower, abs=1e-9)
    assert upper == pytest.approx(H, abs=2 * 2.0 * np.linalg.norm(q[:2]) * (1 - np.cos(np.pi / 720)) + 1e-9)


def test_single_integrator_actions_attain_minimum(rng):
    m = SingleIntegrator(3, 0.8)
    for _ in range(50):
        p = rng.normal(size=3)
        a, _ = optimal_actions(m, p)
        assert float(m.dynamics(None, a, []) @ p) == pytest.approx(eval_hamiltonian(m, None, p))
        u = rng.normal(size=(200, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        assert np.all(0.8 * u @ p >= eval_hamiltonian(m, None, p) - 1e-12)


def test_builtin_problems():
    e1 = builtin_problem("example1")
    assert e1.horizon == 0.5 and e1.ndim == 2
    assert e1.model.speed == 0.5
    e2 = builtin_problem("example2")
    assert e2.ndim == 3 and e2.horizon == 1.0
    assert (e2.model.v_attacker, e2.model.v_defender) == (2.0, 3.0)
    with pytest.raises(KeyError):
        builtin_problem("atari")
    with pytest.raises(KeyError):
        builtin_problem("example1", {"warp": 9})
    assert builtin_problem("example1", {"v_veh": 0.25}).model.speed == 0.25


def test_example2_constraint_semantics():
    e2 = builtin_problem("example2")
    g = lambda x, t: float(e2.g_scene.evaluate(np.array(x, float), t))  # noqa: E731
    assert g([0.05, 0.5, 0.5], 0.0) > 0        # captured by the defender
    assert g([-0.1, 0.0, 0.9], 0.0) > 0        # inside the obstacle
    assert g([-0.1, -0.5, 0.9], 0.0) < 0       # below the obstacle at t=0 ...
    assert g([-0.1, -0.5, 0.9], 0.8) > 0       # ... but covered once it has grown
    assert g([0.5, 0.5, -0.9], 0.0) < 0
    l = lambda x, t: float(e2.l_scene.evaluate(np.array(x, float), t))  # noqa: E731
    assert l([0.7, -0.7, 0.0], 0.0) == pytest.approx(-0.15)
    assert l([0.7, 0.8, 0.0], 1.0) == pytest.approx(-0.15)


def test_augment_time():
    e1 = builtin_problem("example1")
    aug = augment_time(e1)
    assert aug.ndim == 3 and aug.maxs[-1] == 0.5 and aug.mins[-1] == 0.0
    assert aug.l_scene.is_static and aug.g_scene.is_static
    x = np.array([0.1, 0.2, 0.3])
    assert aug.l_scene.evaluate(x, 0.0) == e1.l_scene.evaluate(x[:2], 0.3)
    augment_time(builtin_problem("example2"))
    with pytest.raises(ValueError):
        augment_time(augment_time(builtin_problem("example2")))


def test_dict_round_trips(rng):
    for m in MODELS:
        assert model_from_dict(m.to_dict()) == m
    for name in ("example1", "example2"):
        spec = builtin_problem(name)
        back = problem_from_dict(spec.to_dict())
        assert back.model == spec.model and back.horizon == spec.horizon
        pts = rng.uniform(-1, 1, size=(spec.ndim, 100))
        assert np.array_equal(back.g_scene.evaluate(pts, 0.3), spec.g_scene.evaluate(pts, 0.3))


def test_defender_track_saturates():
    m = AttackerDefenderPlanar(2.0, 3.0, track=(-1.0, 1.0))
    assert m.dynamics([0, 0, 1.0], [0, 0], [1.0])[2] == 0.0
    assert m.dynamics([0, 0, 1.0], [0, 0], [-1.0])[2] == -3.0
    assert m.dynamics([0, 0, -1.0], [0, 0], [-1.0])[2] == 0.0
    assert project_state(m, [0.0, 0.0, 1.2])[2] == 1.0
    free = AttackerDefenderPlanar(2.0, 3.0)
    assert project_state(free, [0.0, 0.0, 1.2])[2] == 1.2
    assert project_state(TimeAugmented(m), [0, 0, -1.5, 0.2]).tolist() == [0, 0, -1.0, 0.2]
