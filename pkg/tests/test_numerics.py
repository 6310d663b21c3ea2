from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachavoid import numerics
from reachavoid.games import AttackerDefenderPlanar, SingleIntegrator
from reachavoid.grid import ScalarField, create_grid
from reachavoid.numerics import (
    Dissipation,
    NumericalError,
    cfl_timestep,
    derivs_array,
    dissipation_bounds,
    integrate_step,
    lax_friedrichs,
    spatial_derivs,
)


@pytest.mark.parametrize("scheme", ["upwind1", "weno5"])
def test_linear_field_exact(scheme):
    g = create_grid([0], [2], [21])
    f = ScalarField(g, g.axis(0) * 1.0 + 0.3, 0.0)
    pair = spatial_derivs(f, 0, scheme)
    np.testing.assert_allclose(pair.d_minus.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(pair.d_plus.values, 1.0, atol=1e-12)


@pytest.mark.parametrize("scheme", ["upwind1", "weno5"])
def test_linear_field_exact_2d(scheme):
    g = create_grid([-1, 0], [1, 1], [11, 15])
    X, Y = g.mesh()
    f = ScalarField(g, 2.0 * X - 3.0 * Y, 0.0)
    for dim, slope in ((0, 2.0), (1, -3.0)):
        pair = spatial_derivs(f, dim, scheme)
        np.testing.assert_allclose(pair.d_minus.values, slope, atol=1e-11)
        np.testing.assert_allclose(pair.d_plus.values, slope, atol=1e-11)


def test_upwind_at_kink():
    g = create_grid([-1], [1], [21])
    f = ScalarField(g, np.abs(g.axis(0)), 0.0)
    pair = spatial_derivs(f, 0, "upwind1")
    assert pair.d_minus.values[10] == pytest.approx(-1.0)
    assert pair.d_plus.values[10] == pytest.approx(1.0)


def test_invalid_dim():
    g = create_grid([0], [1], [11])
    with pytest.raises(ValueError):
        spatial_derivs(ScalarField(g, np.zeros(11), 0.0), 1)


def _weno_sin_error(n):
    x = np.linspace(0.0, 2.0 * np.pi, n)
    dm, dp = derivs_array(np.sin(x), x[1] - x[0], 0, "weno5")
    inner = slice(3, n - 3)  # stencils untouched by the extrapolated ghosts
    return max(np.abs(dm - np.cos(x))[inner].max(), np.abs(dp - np.cos(x))[inner].max())


def test_weno5_order_on_sine():
    e1, e2 = _weno_sin_error(41), _weno_sin_error(81)
    order = np.log2(e1 / e2)
    assert order >= 4.5, order


def test_weno5_bounded_near_kink():
    x = np.linspace(-1, 1, 41)
    h = x[1] - x[0]
    v = np.where(x < 0.013, -x, 2 * x)
    dm, dp = derivs_array(v, h, 0, "weno5")
    d = np.diff(v) / h
    lo, hi = d.min(), d.max()
    assert np.all(dm >= lo - 1e-12) and np.all(dm <= hi + 1e-12)
    assert np.all(dp >= lo - 1e-12) and np.all(dp <= hi + 1e-12)


@pytest.mark.skipif(not numerics.USE_COMPILED, reason="compiled kernel unavailable")
def test_compiled_kernel_matches_numpy(monkeypatch, rng):
    v = rng.normal(size=(9, 10, 11))
    fast = [derivs_array(v, 0.1, ax) for ax in range(3)]
    monkeypatch.setattr(numerics, "USE_COMPILED", False)
    slow = [derivs_array(v, 0.1, ax) for ax in range(3)]
    for (a, b), (c, d) in zip(fast, slow):
        assert np.array_equal(a, c) and np.array_equal(b, d)


def test_lax_friedrichs_example():
    model = SingleIntegrator(2, 0.5)
    out = lax_friedrichs(model, None, 0.0, [1.0, 0.0], [-1.0, 0.0], Dissipation((0.5, 0.5)))
    assert out == pytest.approx(0.5)


def test_lax_friedrichs_zero_alpha_is_central():
    model = AttackerDefenderPlanar(2.0, 3.0)
    dm, dp = [0.2, -1.0, 0.5], [0.6, 0.4, -0.1]
    avg = [0.4, -0.3, 0.2]
    out = lax_friedrichs(model, None, 0.0, dm, dp, Dissipation((0, 0, 0)))
    assert out == pytest.approx(model.hamiltonian(avg))


@settings(max_examples=100, deadline=None)
@given(p=st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_lax_friedrichs_consistency(p):
    model = AttackerDefenderPlanar(2.0, 3.0)
    assert lax_friedrichs(model, None, 0.0, p, p, dissipation_bounds(model)) == model.hamiltonian(p)


@settings(max_examples=100, deadline=None)
@given(
    dm=st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    jump=st.lists(st.floats(0, 5), min_size=2, max_size=2),
    a=st.lists(st.floats(0, 3), min_size=2, max_size=2),
    extra=st.floats(0, 3),
    k=st.integers(0, 1),
)
def test_more_dissipation_never_raises(dm, jump, a, extra, k):
    model = SingleIntegrator(2, 0.7)
    dp = [x + j for x, j in zip(dm, jump)]
    b = list(a)
    b[k] += extra
    assert lax_friedrichs(model, None, 0, dm, dp, Dissipation(b)) <= lax_friedrichs(model, None, 0, dm, dp, Dissipation(a))


def test_dissipation_examples():
    assert dissipation_bounds(SingleIntegrator(3, 0.5)).alpha == (0.5, 0.5, 0.5)
    assert dissipation_bounds(AttackerDefenderPlanar(2.0, 3.0)).alpha == (2.0, 2.0, 3.0)
    assert dissipation_bounds(SingleIntegrator(2, 0.0)).alpha == (0.0, 0.0)
    with pytest.raises(ValueError):
        Dissipation((-1.0,))


def test_cfl_examples():
    g = create_grid([0, 0], [2, 2], [51, 51])
    assert cfl_timestep(Dissipation((0.5, 0.5)), g, 0.5) == pytest.approx(0.02)
    g2 = create_grid([0, 0], [4, 4], [51, 51])
    assert cfl_timestep(Dissipation((0.5, 0.5)), g2, 0.5) == pytest.approx(0.04)
    g1 = create_grid([0], [1], [11])
    assert cfl_timestep(Dissipation((1.0,)), g1, 1.0) == pytest.approx(0.1)
    assert cfl_timestep(Dissipation((0.0,)), g1, 0.5, remaining=0.3) == 0.3
    with pytest.raises(ValueError):
        cfl_timestep(Dissipation((1.0,)), g1, 1.5)


@pytest.mark.parametrize("scheme", ["euler", "tvd_rk3"])
def test_zero_rhs_identity(scheme, rng):
    g = create_grid([0, 0], [1, 1], [9, 9])
    f = ScalarField(g, rng.normal(size=g.shape), 1.0)
    out = integrate_step(f, lambda u: np.zeros(g.shape), 0.013, scheme, direction=-1.0)
    assert out.values.tobytes() == f.values.tobytes()
    assert out.time == pytest.approx(1.0 - 0.013)


def test_euler_decay():
    g = create_grid([0], [1], [7])
    f = ScalarField(g, np.linspace(1, 2, 7), 0.0)
    out = integrate_step(f, lambda u: -u.values, 0.1, "euler")
    np.testing.assert_allclose(out.values, f.values * 0.9, rtol=1e-15)


def _rk3_error(n):
    g = create_grid([0], [1], [7])
    f = ScalarField(g, np.ones(7), 0.0)
    dt = 1.0 / n
    for _ in range(n):
        f = integrate_step(f, lambda u: -u.values, dt, "tvd_rk3")
    return abs(f.values[0] - np.exp(-1.0))


def test_rk3_order():
    order = np.log2(_rk3_error(20) / _rk3_error(40))
    assert order >= 2.8, order


def test_rk3_matches_shu_osher_form(rng):
    g = create_grid([0], [1], [7])
    f = ScalarField(g, rng.normal(size=7), 0.0)
    L = lambda u: np.sin(u.values) - 0.5 * u.values  # noqa: E731
    dt = 0.07
    u = f.values
    u1 = u + dt * L(f)
    u2 = 0.75 * u + 0.25 * (u1 + dt * L(f.with_values(u1)))
    u3 = u / 3.0 + 2.0 / 3.0 * (u2 + dt * L(f.with_values(u2)))
    out = integrate_step(f, L, dt, "tvd_rk3")
    np.testing.assert_allclose(out.values, u3, atol=1e-15)


def test_non_finite_rhs_names_node():
    g = create_grid([0, 0], [1, 1], [7, 7])
    f = ScalarField(g, np.zeros(g.shape), 0.0)

    def rhs(u):
        out = np.zeros(g.shape)
        out[2, 5] = np.nan
        return out

    with pytest.raises(NumericalError, match=r"\(2, 5\)"):
        integrate_step(f, rhs, 0.1)
    with pytest.raises(NumericalError):
        integrate_step(f, lambda u: np.zeros(g.shape), 0.0)
