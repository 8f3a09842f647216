"""Planar four-body vector fields and the figure-eight choreography.

The restricted problem (three unit-mass primaries on the eight, one massless
test particle) is represented as the general four-body system with m4 = 0;
primaries and particle are integrated jointly, which stays valid in the
regularized chart as well.

State conventions
-----------------
A body is the 4-vector (x, y, vx, vy). An n-body Cartesian state is the
concatenation of n such blocks, so the four-body state has 16 entries and the
choreography alone has 12.
"""

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._jit import maybe_njit
from .errors import CollisionError
from .integrate import IntegratorSettings, propagate

#: Minimum pairwise distance accepted by the Cartesian fields. Below this the
#: regularized chart must be used.
EPS_COLL = 1e-12

#: Choreography period as usually quoted (9 digits).
T_EIGHT_PRINTED = 6.32591398

# Initial isosceles configuration of the eight: body 1 on the x-axis moving
# straight up, bodies 2 and 3 mirror images about the axis.
_EIGHT_IC = np.array(
    [
        1.081017082650648, 0.0, 0.0, 0.467209527201224,
        -0.540508541325324, 0.345263314425768, 1.097122382351121, -0.233604763600612,
        -0.540508541325324, -0.345263314425768, -1.097122382351121, -0.233604763600612,
    ]
)


@dataclass
class MassConfig:
    """Masses of the four bodies, G = 1 units."""

    m1: float = 1.0
    m2: float = 1.0
    m3: float = 1.0
    m4: float = 0.0

    def __post_init__(self):
        if min(self.m1, self.m2, self.m3, self.m4) < 0:
            raise ValueError("masses must be nonnegative")

    def as_array(self):
        return np.array([self.m1, self.m2, self.m3, self.m4])

    @property
    def restricted(self):
        return self.m4 == 0.0 and self.m1 == self.m2 == self.m3 == 1.0


RESTRICTED = MassConfig()


@dataclass
class BodyState:
    """Position and velocity of one body in the plane."""

    r: np.ndarray
    v: np.ndarray

    def as_array(self):
        return np.concatenate([np.asarray(self.r, float), np.asarray(self.v, float)])

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, float)
        return cls(r=a[:2].copy(), v=a[2:4].copy())


@dataclass
class SystemState:
    """Cartesian state of up to four bodies plus natural time."""

    bodies: list
    t: float = 0.0

    def as_array(self):
        return np.concatenate([b.as_array() for b in self.bodies])

    @classmethod
    def from_array(cls, a, t=0.0):
        a = np.asarray(a, float)
        n = len(a) // 4
        return cls(bodies=[BodyState.from_array(a[4 * i : 4 * i + 4]) for i in range(n)], t=t)


@maybe_njit
def _nbody_rhs(t, y, masses):
    n = masses.shape[0]
    dy = np.empty_like(y)
    for i in range(n):
        xi = y[4 * i]
        yi = y[4 * i + 1]
        ax = 0.0
        ay = 0.0
        for j in range(n):
            if j == i or masses[j] == 0.0:
                continue
            dx = y[4 * j] - xi
            dyy = y[4 * j + 1] - yi
            d2 = dx * dx + dyy * dyy
            f = masses[j] / (d2 * np.sqrt(d2))
            ax += f * dx
            ay += f * dyy
        dy[4 * i] = y[4 * i + 2]
        dy[4 * i + 1] = y[4 * i + 3]
        dy[4 * i + 2] = ax
        dy[4 * i + 3] = ay
    return dy


def nbody_rhs(masses):
    """Fast ``fun(t, y)`` closure for :func:`refbp.integrate.propagate`."""
    masses = np.asarray(masses, dtype=float)
    return lambda t, y: _nbody_rhs(t, y, masses)


def _check_separations(y, masses, eps_coll):
    n = len(masses)
    for i in range(n):
        for j in range(i + 1, n):
            if masses[i] == 0.0 and masses[j] == 0.0:
                continue
            d = np.hypot(y[4 * j] - y[4 * i], y[4 * j + 1] - y[4 * i + 1])
            if d < eps_coll:
                raise CollisionError(i + 1, j + 1, d)


def four_body_field(state, m=RESTRICTED, eps_coll=EPS_COLL):
    """Time derivative of a four-body :class:`SystemState` (or 16-array).

    Accelerations are the pairwise Newtonian terms; massless bodies exert no
    force but feel the others. Raises :class:`CollisionError` when a pair with
    an interacting term is closer than ``eps_coll``.
    """
    as_state = isinstance(state, SystemState)
    y = state.as_array() if as_state else np.asarray(state, dtype=float)
    masses = m.as_array()
    _check_separations(y, masses, eps_coll)
    dy = _nbody_rhs(0.0, y, masses)
    if as_state:
        return SystemState.from_array(dy, t=1.0)
    return dy


def restricted_field(z, t, primaries, eps_coll=EPS_COLL):
    """Derivative of the test particle given the primaries' current state.

    ``z`` is the particle 4-vector, ``primaries`` the 12-vector (or
    :class:`SystemState`) of the three unit-mass bodies at time ``t``.
    """
    z = np.asarray(z, dtype=float)
    p = primaries.as_array() if isinstance(primaries, SystemState) else np.asarray(primaries, float)
    a = np.zeros(2)
    for j in range(3):
        d = p[4 * j : 4 * j + 2] - z[:2]
        dist = np.hypot(d[0], d[1])
        if dist < eps_coll:
            raise CollisionError(4, j + 1, dist)
        a += d / dist**3
    return np.array([z[2], z[3], a[0], a[1]])


@dataclass
class EightConstants:
    """Choreography period and its isosceles initial configuration.

    ``period`` is the refined value solving the axis-return condition of
    body 1 to integrator accuracy; ``period_printed`` keeps the familiar
    9-digit constant. ``tbar`` = period/12 is the half-spacing between
    consecutive isosceles configurations.
    """

    period: float
    period_printed: float
    ic: SystemState
    tbar: float = field(init=False)

    def __post_init__(self):
        self.tbar = self.period / 12.0

    @property
    def half_period(self):
        """6*tbar, the boundary epoch of all the shooting problems."""
        return self.period / 2.0

    @property
    def x10(self):
        return self.ic.bodies[0].r[0]

    @property
    def vy10(self):
        return self.ic.bodies[0].v[1]

    def ic_array(self):
        return self.ic.as_array()


def choreography_initial_state():
    """The 12-vector initial condition of the three primaries."""
    return _EIGHT_IC.copy()


def _refine_period():
    """Solve the axis-return condition y1(T) = 0 near the printed period.

    The printed period has only 9 digits, which would dominate every residual
    downstream; one root solve pins it to integrator accuracy.
    """
    fun = nbody_rhs(np.ones(3))
    cfg = IntegratorSettings(rel_tol=1e-13, abs_tol=1e-13)
    traj = propagate(fun, _EIGHT_IC, (0.0, T_EIGHT_PRINTED + 0.02), cfg)
    g = lambda t: traj(t)[1]
    lo, hi = T_EIGHT_PRINTED - 0.01, T_EIGHT_PRINTED + 0.01
    assert g(lo) * g(hi) < 0, "period bracket lost"
    return brentq(g, lo, hi, xtol=1e-13, rtol=8.9e-16)


@functools.lru_cache(maxsize=1)
def eight_initial_conditions():
    """Choreography constants: refined period, tbar, initial configuration."""
    period = _refine_period()
    ic = SystemState.from_array(_EIGHT_IC, t=0.0)
    return EightConstants(period=period, period_printed=T_EIGHT_PRINTED, ic=ic)


def restricted_state(particle, eight=None):
    """Assemble the 16-vector four-body state: primaries at t=0 + particle."""
    if eight is None:
        eight = eight_initial_conditions()
    return np.concatenate([eight.ic_array(), np.asarray(particle, float)])


def constants_report():
    """Structured-text export of the embedded constants, for auditing."""
    eight = eight_initial_conditions()
    lines = [
        f"period_printed = {eight.period_printed!r}",
        f"period_refined = {eight.period:.15f}",
        f"tbar = {eight.tbar:.15f}",
        f"half_period = {eight.half_period:.15f}",
    ]
    names = ["r1", "r2", "r3"]
    for name, body in zip(names, eight.ic.bodies):
        lines.append(f"{name} = ({body.r[0]:.15f}, {body.r[1]:.15f})")
    for name, body in zip(["v1", "v2", "v3"], eight.ic.bodies):
        lines.append(f"{name} = ({body.v[0]:.15f}, {body.v[1]:.15f})")
    return "\n".join(lines)
