"""Shooting residuals and Newton solving for the symmetric-orbit BVPs.

Three two-point problems are used, all anchored at a fixed point of the
reversing symmetry at t = 0 (particle on the x-axis, velocity vertical,
primaries isosceles):

* kind Y   - also y = 0 at the far boundary, boundary time fixed at 6*tbar;
* kind VX  - also v_x = 0 at the far boundary, boundary time fixed at 6*tbar;
* kind R   - both y = 0 and v_x = 0 at a free characteristic time T0.

Each has a Cartesian and a regularized formulation; the regularized far
boundary uses the general forms 2 u1 u2 + y1 = 0 and
2 (u1 w1 - u2 w2) + u^2 vx1 = 0, which are the particle conditions scaled by
positive factors (they reduce to the bare u-products at the exactly isosceles
epoch where body 1 returns to the axis).
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import regularization as reg
from .dynamics import RESTRICTED, eight_initial_conditions, nbody_rhs, restricted_state
from .errors import ConvergenceError
from .integrate import IntegratorSettings, propagate

TAU_SCALE = 30.0  # typical boundary value of the fictitious time


class BvpKind(enum.Enum):
    Y = "y"
    VX = "vx"
    R = "r"


@dataclass
class KeplerSeed:
    """Osculating two-body guess around primary 1."""

    a: float
    e: float = 0.0
    apsis: str = "periapsis"  # or "apoapsis"
    sense: str = "prograde"  # or "retrograde"
    max_extent: float = 0.5

    def __post_init__(self):
        if not (self.a > 0 and 0 <= self.e < 1):
            raise ValueError("need a > 0 and e in [0, 1)")
        if self.apsis not in ("periapsis", "apoapsis"):
            raise ValueError(f"unknown apsis {self.apsis!r}")
        if self.sense not in ("prograde", "retrograde"):
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.a * (1 + self.e) > self.max_extent:
            raise ValueError("seed ellipse leaves the near-collision regime")


@dataclass
class CartSeed:
    """Particle at (x0, 0) with velocity (0, vy0)."""

    x0: float
    vy0: float

    def state(self):
        return np.array([self.x0, 0.0, 0.0, self.vy0])


@dataclass
class RegSeed:
    """Fixed-point seed in the regularized chart.

    Exactly one of the pairs (u10, w20) / (u20, w10) is active; the canonical
    representation has the active position coordinate positive.
    """

    u10: float = 0.0
    u20: float = 0.0
    w10: float = 0.0
    w20: float = 0.0

    @property
    def active_rep(self):
        """1 for the (u10, w20) chart, 2 for the (u20, w10) chart."""
        return 1 if self.u10 != 0.0 else 2

    @property
    def active(self):
        """(position, velocity) of the active pair."""
        if self.active_rep == 1:
            return self.u10, self.w20
        return self.u20, self.w10

    def u(self):
        return np.array([self.u10, self.u20])

    def w(self):
        return np.array([self.w10, self.w20])


def kepler_seed(k, eight=None):
    """Cartesian seed from an osculating ellipse around primary 1.

    The relative position is placed along +x (periapsis uses a(1-e),
    apoapsis a(1+e)); prograde means positive relative v_y there.
    """
    if eight is None:
        eight = eight_initial_conditions()
    r_rel = k.a * (1 - k.e) if k.apsis == "periapsis" else k.a * (1 + k.e)
    v_rel = np.sqrt((2.0 / r_rel) - 1.0 / k.a)
    if k.sense == "retrograde":
        v_rel = -v_rel
    return CartSeed(x0=eight.x10 + r_rel, vy0=eight.vy10 + v_rel)


def seed_to_regularized(c, eight=None):
    """Square-root lift of a Cartesian fixed-point seed, canonical branch."""
    if eight is None:
        eight = eight_initial_conditions()
    dx = c.x0 - eight.x10
    dv = c.vy0 - eight.vy10
    if dx == 0.0:
        raise ValueError("seed coincides with primary 1; no regularized lift")
    if dx > 0:
        u10 = np.sqrt(dx)
        return RegSeed(u10=u10, w20=0.5 * u10 * dv)
    u20 = np.sqrt(-dx)
    return RegSeed(u20=u20, w10=0.5 * u20 * dv)


def regularized_to_seed(s, eight=None):
    """Inverse of :func:`seed_to_regularized` (both branches agree)."""
    if eight is None:
        eight = eight_initial_conditions()
    pos, vel = s.active
    if s.active_rep == 1:
        return CartSeed(x0=eight.x10 + pos**2, vy0=eight.vy10 + 2.0 * vel / pos)
    return CartSeed(x0=eight.x10 - pos**2, vy0=eight.vy10 + 2.0 * vel / pos)


def reg_initial_state(s, eight=None):
    """Full 18-component regularized initial state for a fixed-point seed.

    Restricted setting: the pair mass center coincides with body 1 and the
    binding energy comes from its algebraic form.
    """
    if eight is None:
        eight = eight_initial_conditions()
    u = s.u()
    w = s.w()
    h = reg.binding_energy_regularized(u, w, mu=1.0)
    ic = eight.ic_array()
    y = np.empty(reg.REG_DIM)
    y[0:2] = u
    y[2:4] = w
    y[4:6] = ic[0:2]
    y[6:8] = ic[2:4]
    y[8] = h
    y[9] = 0.0
    y[10:14] = ic[4:8]
    y[14:18] = ic[8:12]
    return y


def reg_boundary_values(y):
    """(position condition, velocity condition, t) at a regularized state.

    The two conditions are the particle's y and u^2 * v_x expressed in the
    chart (body-1 terms restore the absolute position/velocity).
    """
    u1, u2, w1, w2 = y[0], y[1], y[2], y[3]
    uu = u1 * u1 + u2 * u2
    y1 = y[5]  # Q_y equals body-1 y for m4 = 0
    vx1 = y[6]
    pos_cond = 2.0 * u1 * u2 + y1
    vel_cond = 2.0 * (u1 * w1 - u2 * w2) + uu * vx1
    return pos_cond, vel_cond, y[9]


def propagate_reg_seed(s, tau_end, cfg=None, eight=None):
    """Regularized trajectory of a fixed-point seed over [0, tau_end]."""
    if cfg is None:
        cfg = IntegratorSettings()
    y0 = reg_initial_state(s, eight)
    return propagate(reg.reg_rhs(RESTRICTED), y0, (0.0, tau_end), cfg)


def bvp_residual_reg(kind, s, tau0, cfg=None, eight=None, return_trajectory=False):
    """Far-boundary residual 2-vector of the regularized BVP of the given kind.

    Y  -> [position condition, t(tau0) - 6*tbar]
    VX -> [velocity condition, t(tau0) - 6*tbar]
    R  -> [position condition, velocity condition]
    """
    if tau0 <= 0:
        raise ValueError(f"tau0 must be positive, got {tau0}")
    if eight is None:
        eight = eight_initial_conditions()
    traj = propagate_reg_seed(s, tau0, cfg, eight)
    pos_cond, vel_cond, t_end = reg_boundary_values(traj.yf)
    kind = BvpKind(kind)
    if kind == BvpKind.Y:
        res = np.array([pos_cond, t_end - eight.half_period])
    elif kind == BvpKind.VX:
        res = np.array([vel_cond, t_end - eight.half_period])
    else:
        res = np.array([pos_cond, vel_cond])
    if return_trajectory:
        return res, traj
    return res


def bvp_residual_cart(kind, c, T0=None, cfg=None, eight=None, return_trajectory=False):
    """Cartesian-shooting residual; near-collision seeds should use
    :func:`bvp_residual_reg` instead (the propagator will say so)."""
    if eight is None:
        eight = eight_initial_conditions()
    if T0 is None:
        T0 = eight.half_period
    kind = BvpKind(kind)
    y0 = restricted_state(c.state(), eight)
    if T0 == 0.0:
        zf = y0[12:16]
        traj = None
    else:
        if cfg is None:
            cfg = IntegratorSettings()
        traj = propagate(nbody_rhs(RESTRICTED.as_array()), y0, (0.0, T0), cfg)
        zf = traj.yf[12:16]
    if kind == BvpKind.Y:
        res = np.array([zf[1]])
    elif kind == BvpKind.VX:
        res = np.array([zf[2]])
    else:
        res = np.array([zf[1], zf[2]])
    if return_trajectory:
        return res, traj
    return res


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def fd_jacobian(fun, x, f0=None, rel_step=1e-7):
    """Central-difference Jacobian, step ``rel_step * max(1, |x_j|)``."""
    x = np.asarray(x, float)
    if f0 is None:
        f0 = np.asarray(fun(x), float)
    m, n = len(f0), len(x)
    J = np.empty((m, n))
    for j in range(n):
        hj = rel_step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += hj
        xm[j] -= hj
        J[:, j] = (np.asarray(fun(xp), float) - np.asarray(fun(xm), float)) / (2 * hj)
    return J


def newton_solve(fun, x0, tol=1e-10, max_iter=50, max_halvings=8, rel_step=1e-7,
                 jacobian=None):
    """Damped Newton (step halving) on ``fun(x) = 0``.

    Square systems solve exactly; underdetermined ones take the least-squares
    (Gauss-Newton) step. Returns the input unchanged when the residual is
    already below ``tol``. Raises :class:`ConvergenceError` on divergence or
    a rank-deficient Jacobian.
    """
    x = np.asarray(x0, float).copy()
    f = np.asarray(fun(x), float)
    if len(f) > len(x):
        raise ValueError("residual dimension exceeds unknown dimension")
    norm = np.max(np.abs(f))
    if norm < tol:
        return NewtonResult(x, f, norm, 0, True)
    for it in range(1, max_iter + 1):
        J = jacobian(x, f) if jacobian is not None else fd_jacobian(fun, x, f, rel_step)
        try:
            if J.shape[0] == J.shape[1]:
                step = np.linalg.solve(J, -f)
            else:
                step, *_ = np.linalg.lstsq(J, -f, rcond=None)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"rank-deficient Jacobian at iteration {it}") from exc
        if not np.all(np.isfinite(step)):
            raise ConvergenceError(f"singular Jacobian at iteration {it}")
        lam = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + lam * step
            try:
                f_new = np.asarray(fun(x_new), float)
                new_norm = np.max(np.abs(f_new))
            except Exception:
                new_norm = np.inf
            if new_norm < norm or new_norm < tol:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(
                f"damped Newton stalled at iteration {it}, residual {norm:.3e}"
            )
        x, f, norm = x_new, f_new, new_norm
        if norm < tol:
            return NewtonResult(x, f, norm, it, True)
    raise ConvergenceError(f"no convergence after {max_iter} iterations, residual {norm:.3e}")
