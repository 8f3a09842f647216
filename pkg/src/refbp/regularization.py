"""Levi-Civita-type regularization of the body-1/body-4 pair.

The relative coordinate r4 - r1 is replaced by a quadratic image L_u u, the
pair's center of mass Q and the binding energy h become coordinates, and the
independent variable switches to the fictitious time tau with dt/dtau = u^2.
The resulting differential system is regular at binary collision u = 0.

Regularized state layout (18 entries, also the serialization order)::

    u1 u2 w1 w2 Qx Qy vQx vQy h t x2 y2 vx2 vy2 x3 y3 vx3 vy3
"""

from dataclasses import dataclass

import numpy as np

from ._jit import maybe_njit
from .dynamics import EPS_COLL, RESTRICTED, BodyState, SystemState
from .errors import CollisionError

REG_DIM = 18
REG_COLUMNS = (
    "u1", "u2", "w1", "w2", "Qx", "Qy", "vQx", "vQy", "h", "t",
    "x2", "y2", "vx2", "vy2", "x3", "y3", "vx3", "vy3",
)

#: Branch selectors for the two preimages of a relative position.
PLUS, MINUS = +1, -1


def lc_matrix(u):
    """The conformal matrix L_u with L_u u = (u1^2 - u2^2, 2 u1 u2)."""
    u1, u2 = u
    return np.array([[u1, -u2], [u2, u1]])


def levi_civita_map(u):
    """Quadratic map u -> L_u u relating regularized and physical relative
    coordinates (two-to-one: u and -u share one image)."""
    u1, u2 = u
    return np.array([u1 * u1 - u2 * u2, 2.0 * u1 * u2])


def lc_inverse(d, branch=PLUS):
    """A preimage u of the relative position ``d`` under the Levi-Civita map.

    The PLUS branch is canonical (u1 > 0, or u1 = 0 with u2 >= 0); MINUS is
    its negative. Both map back to the same Cartesian state.
    """
    d1, d2 = float(d[0]), float(d[1])
    r = np.hypot(d1, d2)
    if r + d1 > r - d1:
        u1 = np.sqrt(0.5 * (r + d1))
        u2 = d2 / (2.0 * u1) if u1 > 0 else 0.0
    else:
        u2 = np.sqrt(0.5 * (r - d1))
        u1 = d2 / (2.0 * u2) if u2 > 0 else 0.0
    if u1 < 0 or (u1 == 0 and u2 < 0):
        u1, u2 = -u1, -u2
    u = np.array([u1, u2])
    return u if branch == PLUS else -u


def binding_energy_cartesian(r1, v1, r4, v4, m=RESTRICTED):
    """Two-body Keplerian energy of the pair {1,4}:
    h = v_rel^2 / 2 - (m1+m4)/|r_rel|."""
    r_rel = np.asarray(r4, float) - np.asarray(r1, float)
    v_rel = np.asarray(v4, float) - np.asarray(v1, float)
    sep = np.hypot(r_rel[0], r_rel[1])
    if sep == 0.0:
        raise CollisionError(1, 4, 0.0, "binding energy undefined at zero separation")
    return 0.5 * float(v_rel @ v_rel) - (m.m1 + m.m4) / sep


def binding_energy_regularized(u, w, mu=1.0):
    """h = (2 w^2 - mu) / u^2; only meaningful away from collision."""
    uu = float(np.dot(u, u))
    if uu == 0.0:
        raise CollisionError(1, 4, 0.0, "algebraic binding energy undefined at u = 0")
    return (2.0 * float(np.dot(w, w)) - mu) / uu


@dataclass
class RegState:
    """Regularized chart state; evolves in fictitious time tau."""

    u: np.ndarray
    w: np.ndarray
    Q: np.ndarray
    vQ: np.ndarray
    h: float
    t: float
    body2: BodyState
    body3: BodyState

    def as_array(self):
        return np.concatenate(
            [self.u, self.w, self.Q, self.vQ, [self.h, self.t],
             self.body2.as_array(), self.body3.as_array()]
        )

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, float)
        return cls(
            u=y[0:2].copy(), w=y[2:4].copy(), Q=y[4:6].copy(), vQ=y[6:8].copy(),
            h=float(y[8]), t=float(y[9]),
            body2=BodyState.from_array(y[10:14]), body3=BodyState.from_array(y[14:18]),
        )

    def to_record(self):
        """Named-column text record."""
        vals = self.as_array()
        return ", ".join(f"{n}={v:.16e}" for n, v in zip(REG_COLUMNS, vals))


@maybe_njit
def _reg_rhs(tau, y, m1, m2, m3, m4):
    u1, u2, w1, w2 = y[0], y[1], y[2], y[3]
    Qx, Qy, vQx, vQy = y[4], y[5], y[6], y[7]
    h = y[8]
    uu = u1 * u1 + u2 * u2
    mu14 = m1 + m4

    # Pair positions recovered from the chart.
    lux = u1 * u1 - u2 * u2
    luy = 2.0 * u1 * u2
    r1x = Qx - (m4 / mu14) * lux
    r1y = Qy - (m4 / mu14) * luy
    r4x = Qx + (m1 / mu14) * lux
    r4y = Qy + (m1 / mu14) * luy

    x2, y2, vx2, vy2 = y[10], y[11], y[12], y[13]
    x3, y3, vx3, vy3 = y[14], y[15], y[16], y[17]

    # Inverse-cube kernels towards bodies 2 and 3.
    d21x = x2 - r1x
    d21y = y2 - r1y
    s = d21x * d21x + d21y * d21y
    k21 = 1.0 / (s * np.sqrt(s))
    d24x = x2 - r4x
    d24y = y2 - r4y
    s = d24x * d24x + d24y * d24y
    k24 = 1.0 / (s * np.sqrt(s))
    d31x = x3 - r1x
    d31y = y3 - r1y
    s = d31x * d31x + d31y * d31y
    k31 = 1.0 / (s * np.sqrt(s))
    d34x = x3 - r4x
    d34y = y3 - r4y
    s = d34x * d34x + d34y * d34y
    k34 = 1.0 / (s * np.sqrt(s))
    d23x = x3 - x2
    d23y = y3 - y2
    s = d23x * d23x + d23y * d23y
    k23 = 1.0 / (s * np.sqrt(s))

    # Differential tidal pull across the pair.
    Wx = m2 * (d24x * k24 - d21x * k21) + m3 * (d34x * k34 - d31x * k31)
    Wy = m2 * (d24y * k24 - d21y * k21) + m3 * (d34y * k34 - d31y * k31)

    # Acceleration of the pair's mass center; the mass factors m_i m_j / mu14
    # follow from differentiating the definition of Q, and reduce to the
    # acceleration of body 1 in the m4 -> 0 limit.
    aQx = (m1 * m2 * d21x * k21 + m1 * m3 * d31x * k31
           + m4 * m2 * d24x * k24 + m4 * m3 * d34x * k34) / mu14
    aQy = (m1 * m2 * d21y * k21 + m1 * m3 * d31y * k31
           + m4 * m2 * d24y * k24 + m4 * m3 * d34y * k34) / mu14

    # Full accelerations of bodies 2 and 3.
    a2x = -m1 * d21x * k21 - m4 * d24x * k24 + m3 * d23x * k23
    a2y = -m1 * d21y * k21 - m4 * d24y * k24 + m3 * d23y * k23
    a3x = -m1 * d31x * k31 - m4 * d34x * k34 - m2 * d23x * k23
    a3y = -m1 * d31y * k31 - m4 * d34y * k34 - m2 * d23y * k23

    # L_u^T W
    ltWx = u1 * Wx + u2 * Wy
    ltWy = -u2 * Wx + u1 * Wy

    dy = np.empty(18)
    dy[0] = w1
    dy[1] = w2
    dy[2] = 0.5 * h * u1 + 0.5 * uu * ltWx
    dy[3] = 0.5 * h * u2 + 0.5 * uu * ltWy
    dy[4] = uu * vQx
    dy[5] = uu * vQy
    dy[6] = uu * aQx
    dy[7] = uu * aQy
    dy[8] = 2.0 * (w1 * ltWx + w2 * ltWy)
    dy[9] = uu
    dy[10] = uu * vx2
    dy[11] = uu * vy2
    dy[12] = uu * a2x
    dy[13] = uu * a2y
    dy[14] = uu * vx3
    dy[15] = uu * vy3
    dy[16] = uu * a3x
    dy[17] = uu * a3y
    return dy


def reg_rhs(m=RESTRICTED):
    """Fast ``fun(tau, y)`` closure over the regularized field."""
    m1, m2, m3, m4 = m.m1, m.m2, m.m3, m.m4
    return lambda tau, y: _reg_rhs(tau, y, m1, m2, m3, m4)


def regularized_field(state, m=RESTRICTED, eps_coll=EPS_COLL):
    """Derivative of a :class:`RegState` (or 18-array) with respect to tau.

    Regular at binary collision u = 0. Raises :class:`CollisionError` only
    when body 2 or 3 comes within ``eps_coll`` of the regularized pair.
    """
    as_state = isinstance(state, RegState)
    y = state.as_array() if as_state else np.asarray(state, dtype=float)
    r1, r4 = _pair_positions(y, m)
    for label, rp in ((2, y[10:12]), (3, y[14:16])):
        for pair_label, rr in ((1, r1), (4, r4)):
            d = np.hypot(rp[0] - rr[0], rp[1] - rr[1])
            if d < eps_coll:
                raise CollisionError(pair_label, label, d)
    dy = _reg_rhs(0.0, y, m.m1, m.m2, m.m3, m.m4)
    return RegState.from_array(dy) if as_state else dy


def _pair_positions(y, m):
    mu14 = m.m1 + m.m4
    lu = levi_civita_map(y[0:2])
    Q = y[4:6]
    r1 = Q - (m.m4 / mu14) * lu
    r4 = Q + (m.m1 / mu14) * lu
    return r1, r4


def cartesian_to_regularized(state, m=RESTRICTED, branch=PLUS):
    """Map a four-body :class:`SystemState` (or 16-array plus t) to the
    regularized chart. Requires r1 != r4."""
    if isinstance(state, SystemState):
        y, t = state.as_array(), state.t
    else:
        y, t = np.asarray(state, float), 0.0
    r1, v1 = y[0:2], y[2:4]
    r4, v4 = y[12:14], y[14:16]
    mu14 = m.m1 + m.m4
    u = lc_inverse(r4 - r1, branch)
    w = 0.5 * (lc_matrix(u).T @ (v4 - v1))
    Q = (m.m1 * r1 + m.m4 * r4) / mu14
    vQ = (m.m1 * v1 + m.m4 * v4) / mu14
    h = binding_energy_cartesian(r1, v1, r4, v4, m)
    return RegState(
        u=u, w=w, Q=Q, vQ=vQ, h=h, t=t,
        body2=BodyState.from_array(y[4:8]), body3=BodyState.from_array(y[8:12]),
    )


def regularized_to_cartesian(state, m=RESTRICTED):
    """Map a :class:`RegState` (or 18-array) back to the Cartesian four-body
    chart. Velocities of the pair are undefined at u = 0."""
    y = state.as_array() if isinstance(state, RegState) else np.asarray(state, float)
    u, w = y[0:2], y[2:4]
    uu = float(np.dot(u, u))
    if uu == 0.0:
        raise CollisionError(1, 4, 0.0, "Cartesian velocities undefined at collision")
    mu14 = m.m1 + m.m4
    lu = levi_civita_map(u)
    v_rel = 2.0 * (lc_matrix(u) @ w) / uu
    Q, vQ = y[4:6], y[6:8]
    r1 = Q - (m.m4 / mu14) * lu
    r4 = Q + (m.m1 / mu14) * lu
    v1 = vQ - (m.m4 / mu14) * v_rel
    v4 = vQ + (m.m1 / mu14) * v_rel
    out = np.concatenate([r1, v1, y[10:14], y[14:18], r4, v4])
    return SystemState.from_array(out, t=float(y[9]))
