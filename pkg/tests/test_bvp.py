"""Seed conversions, shooting residuals and the Newton solver."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from refbp.bvp import (
    CartSeed,
    KeplerSeed,
    NewtonResult,
    RegSeed,
    bvp_residual_cart,
    bvp_residual_reg,
    fd_jacobian,
    kepler_seed,
    newton_solve,
    propagate_reg_seed,
    reg_boundary_values,
    reg_initial_state,
    regularized_to_seed,
    seed_to_regularized,
)
from refbp.catalog import row_seed
from refbp.errors import ConvergenceError


# --- seed conversions ------------------------------------------------------

@settings(deadline=None)
@given(st.floats(1e-3, 0.4), st.floats(-3, 3))
def test_seed_lift_round_trip_outer(dx, dv):
    """Cartesian -> chart -> Cartesian is the identity on the outer branch."""
    from refbp.dynamics import eight_initial_conditions

    eight = eight_initial_conditions()
    c = CartSeed(x0=eight.x10 + dx, vy0=eight.vy10 + dv)
    s = seed_to_regularized(c, eight)
    assert s.active_rep == 1 and s.u10 > 0
    back = regularized_to_seed(s, eight)
    assert back.x0 == pytest.approx(c.x0, rel=1e-14)
    assert back.vy0 == pytest.approx(c.vy0, rel=1e-12, abs=1e-12)


@settings(deadline=None)
@given(st.floats(1e-3, 0.4), st.floats(-3, 3))
def test_seed_lift_round_trip_inner(dx, dv):
    from refbp.dynamics import eight_initial_conditions

    eight = eight_initial_conditions()
    c = CartSeed(x0=eight.x10 - dx, vy0=eight.vy10 + dv)
    s = seed_to_regularized(c, eight)
    assert s.active_rep == 2 and s.u20 > 0
    back = regularized_to_seed(s, eight)
    assert back.x0 == pytest.approx(c.x0, rel=1e-14)
    assert back.vy0 == pytest.approx(c.vy0, rel=1e-12, abs=1e-12)


def test_seed_on_primary_rejected(eight):
    with pytest.raises(ValueError):
        seed_to_regularized(CartSeed(x0=eight.x10, vy0=1.0), eight)


def test_kepler_seed_vis_viva(eight):
    """Relative speed at periapsis follows v^2 = 2/r - 1/a (mu = 1)."""
    k = KeplerSeed(a=0.1, e=0.2)
    c = kepler_seed(k, eight)
    r = 0.1 * (1 - 0.2)
    assert c.x0 == pytest.approx(eight.x10 + r, rel=1e-15)
    assert c.vy0 - eight.vy10 == pytest.approx(np.sqrt(2 / r - 10.0), rel=1e-15)
    # retrograde flips the relative velocity only
    c_retro = kepler_seed(KeplerSeed(a=0.1, e=0.2, sense="retrograde"), eight)
    assert c_retro.x0 == c.x0
    assert c_retro.vy0 - eight.vy10 == pytest.approx(-(c.vy0 - eight.vy10))


def test_kepler_seed_validation():
    with pytest.raises(ValueError):
        KeplerSeed(a=-0.1)
    with pytest.raises(ValueError):
        KeplerSeed(a=0.1, e=1.0)
    with pytest.raises(ValueError):
        KeplerSeed(a=0.1, apsis="nowhere")
    with pytest.raises(ValueError):
        KeplerSeed(a=0.4, e=0.5)  # apoapsis 0.6 leaves the regime


# --- initial state and boundary values ------------------------------------

def test_reg_initial_state_layout(eight):
    s = RegSeed(u10=0.3, w20=0.4)
    y = reg_initial_state(s, eight)
    assert y.shape == (18,)
    assert np.array_equal(y[0:2], [0.3, 0.0])
    assert np.array_equal(y[2:4], [0.0, 0.4])
    # pair mass center coincides with body 1 for m4 = 0
    assert np.array_equal(y[4:8], eight.ic_array()[0:4])
    assert y[8] == pytest.approx((2 * 0.4**2 - 1.0) / 0.3**2, rel=1e-15)
    assert y[9] == 0.0


def test_boundary_values_at_fixed_point(eight):
    """At the anchor epoch both conditions vanish identically."""
    y = reg_initial_state(RegSeed(u10=0.3, w20=0.4), eight)
    pos_cond, vel_cond, t = reg_boundary_values(y)
    assert pos_cond == 0.0 and vel_cond == 0.0 and t == 0.0


def test_boundary_values_general():
    y = np.zeros(18)
    y[0:4] = [0.2, 0.1, -0.3, 0.5]
    y[5] = 0.07  # body-1 y
    y[6] = 0.11  # body-1 vx
    y[9] = 1.5
    pos, vel, t = reg_boundary_values(y)
    uu = 0.2**2 + 0.1**2
    assert pos == pytest.approx(2 * 0.2 * 0.1 + 0.07, rel=1e-15)
    assert vel == pytest.approx(2 * (0.2 * -0.3 - 0.1 * 0.5) + uu * 0.11, rel=1e-15)
    assert t == 1.5


# --- shooting residuals ----------------------------------------------------

def test_catalogued_seed_residuals(eight):
    """A catalogued near-circular orbit nearly solves all three problem kinds."""
    seed, tau0 = row_seed(7)
    res_r = bvp_residual_reg("r", seed, tau0, eight=eight)
    res_y = bvp_residual_reg("y", seed, tau0, eight=eight)
    res_vx = bvp_residual_reg("vx", seed, tau0, eight=eight)
    assert np.max(np.abs(res_r)) < 1e-6
    assert np.max(np.abs(res_y)) < 1e-6
    assert np.max(np.abs(res_vx)) < 1e-6
    # the three kinds share their components pairwise
    assert res_y[0] == res_r[0] and res_vx[0] == res_r[1]
    assert res_y[1] == res_vx[1]


def test_residual_trajectory_reaches_half_period(eight):
    seed, tau0 = row_seed(7)
    res, traj = bvp_residual_reg("r", seed, tau0, eight=eight, return_trajectory=True)
    assert traj.yf[9] == pytest.approx(eight.half_period, abs=1e-6)


def test_cart_and_reg_shooting_agree(eight):
    """For a far seed both charts give the same particle boundary conditions."""
    c = CartSeed(x0=eight.x10 + 0.09, vy0=eight.vy10 + 4.0)
    s = seed_to_regularized(c, eight)
    tau_end = 1.4 * eight.half_period / s.u10**2
    traj = propagate_reg_seed(s, tau_end, eight=eight)
    from refbp.integrate import locate_time_target

    tau0 = locate_time_target(traj, eight.half_period)
    res_reg = bvp_residual_reg("r", s, tau0, eight=eight)
    res_cart = bvp_residual_cart("r", c, eight=eight)
    # reg conditions are u^2-scaled versions of (y, vx); compare after scaling
    uu = traj(tau0)[0] ** 2 + traj(tau0)[1] ** 2
    assert res_reg[0] == pytest.approx(res_cart[0], abs=2e-8)
    assert res_reg[1] == pytest.approx(uu * res_cart[1], abs=2e-8)


def test_zero_time_cart_residual(eight):
    """T0 = 0 evaluates the seed itself: a fixed point has zero residual."""
    c = CartSeed(x0=1.2, vy0=0.5)
    res = bvp_residual_cart("r", c, T0=0.0, eight=eight)
    assert np.array_equal(res, [0.0, 0.0])


def test_invalid_tau0(eight):
    with pytest.raises(ValueError):
        bvp_residual_reg("r", RegSeed(u10=0.3, w20=0.4), -1.0, eight=eight)


# --- Newton solver ---------------------------------------------------------

def test_fd_jacobian_accuracy():
    fun = lambda x: np.array([x[0] ** 2 + x[1], np.sin(x[1]) * x[0]])
    x = np.array([0.7, -0.4])
    J = fd_jacobian(fun, x)
    J_exact = np.array(
        [[2 * x[0], 1.0], [np.sin(x[1]), np.cos(x[1]) * x[0]]]
    )
    assert np.max(np.abs(J - J_exact)) < 1e-8


def test_newton_quadratic_convergence():
    fun = lambda x: np.array([x[0] ** 2 - 2.0, x[0] * x[1] - 1.0])
    result = newton_solve(fun, [1.0, 1.0], tol=1e-13)
    assert isinstance(result, NewtonResult)
    assert result.converged
    assert result.x[0] == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert result.x[1] == pytest.approx(1 / np.sqrt(2.0), rel=1e-12)
    assert result.iterations < 10


def test_newton_early_exit():
    fun = lambda x: np.array([x[0] - 1.0])
    result = newton_solve(fun, [1.0], tol=1e-10)
    assert result.iterations == 0 and result.converged


def test_newton_underdetermined():
    """One equation, two unknowns: least-squares step still finds a root."""
    fun = lambda x: np.array([x[0] + 2 * x[1] - 3.0])
    result = newton_solve(fun, [0.0, 0.0], tol=1e-12)
    assert abs(fun(result.x)[0]) < 1e-12


def test_newton_overdetermined_rejected():
    fun = lambda x: np.array([x[0], x[0] - 1.0])
    with pytest.raises(ValueError):
        newton_solve(fun, [0.0])


def test_newton_divergence_raises():
    fun = lambda x: np.array([np.exp(-x[0] ** 2) ])  # no root, flat tails
    with pytest.raises(ConvergenceError):
        newton_solve(fun, [3.0], tol=1e-14, max_iter=8)


def test_newton_custom_jacobian():
    fun = lambda x: np.array([x[0] ** 3 - 8.0])
    jac = lambda x, f: np.array([[3 * x[0] ** 2]])
    result = newton_solve(fun, [1.0], tol=1e-13, jacobian=jac)
    assert result.x[0] == pytest.approx(2.0, rel=1e-13)
