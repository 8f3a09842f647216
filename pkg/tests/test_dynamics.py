"""Vector-field and choreography-constant checks against analytic oracles."""

import numpy as np
import pytest

from refbp.dynamics import (
    EPS_COLL,
    RESTRICTED,
    MassConfig,
    SystemState,
    choreography_initial_state,
    constants_report,
    eight_initial_conditions,
    four_body_field,
    nbody_rhs,
    restricted_field,
    restricted_state,
)
from refbp.errors import CollisionError

rng = np.random.default_rng(7)


def random_state(scale=1.5, vmin=0.3):
    y = rng.uniform(-scale, scale, 16)
    # keep all pairs separated
    y[4] += 3.0
    y[8] -= 3.0
    y[12] += 0.5
    y[13] += 2.0
    return y


def test_third_law_momentum():
    """Total force on massive bodies vanishes (momentum conservation)."""
    m = MassConfig(1.0, 2.0, 0.5, 0.25)
    for _ in range(20):
        y = random_state()
        dy = four_body_field(y, m)
        force = sum(m.as_array()[i] * dy[4 * i + 2 : 4 * i + 4] for i in range(4))
        assert np.max(np.abs(force)) < 1e-12


def test_massless_body_exerts_no_force():
    """Moving the test particle leaves the primaries' accelerations unchanged."""
    y = random_state()
    dy_a = four_body_field(y)
    y2 = y.copy()
    y2[12:16] = [5.0, -4.0, 0.3, 0.1]
    dy_b = four_body_field(y2)
    assert np.allclose(dy_a[:12], dy_b[:12], rtol=0, atol=0)


def test_two_body_acceleration_value():
    """Isolated pair: |a| = m/r^2 toward the companion."""
    m = MassConfig(1.0, 3.0, 0.0, 0.0)
    y = np.zeros(16)
    y[4] = 2.0  # body 2 at (2, 0)
    y[8:10] = [40.0, 40.0]
    y[12:14] = [-40.0, 40.0]
    dy = four_body_field(y, m)
    assert dy[2] == pytest.approx(3.0 / 4.0, rel=1e-14)
    assert dy[3] == pytest.approx(0.0, abs=1e-15)


def test_restricted_field_matches_particle_block():
    y = restricted_state([0.9, 0.2, -0.1, 0.4])
    dy = four_body_field(y)
    dz = restricted_field(y[12:16], 0.0, y[:12])
    assert np.allclose(dz, dy[12:16], rtol=0, atol=1e-15)


def test_nbody_rhs_closure_agrees():
    y = random_state()
    f = nbody_rhs(RESTRICTED.as_array())
    assert np.allclose(f(0.0, y), four_body_field(y), rtol=0, atol=0)


def test_collision_guard():
    y = random_state()
    y[4:6] = y[0:2] + 0.1 * EPS_COLL
    with pytest.raises(CollisionError):
        four_body_field(y)


def test_negative_mass_rejected():
    with pytest.raises(ValueError):
        MassConfig(m2=-1.0)


def test_eight_constants(eight):
    assert eight.tbar == pytest.approx(eight.period / 12.0, rel=1e-15)
    assert eight.half_period == pytest.approx(6 * eight.tbar, rel=1e-15)
    assert abs(eight.period - eight.period_printed) < 5e-9
    ic = eight.ic_array()
    # isosceles, mirror-symmetric starting configuration
    assert ic[1] == 0.0 and ic[2] == 0.0
    assert ic[4] == ic[8] and ic[5] == -ic[9]
    assert ic[6] == -ic[10] and ic[7] == ic[11]
    # center of mass at rest at the origin
    com = ic[0:4] + ic[4:8] + ic[8:12]
    assert np.max(np.abs(com)) < 1e-12


def test_choreography_first_integrals(eight):
    """Energy and angular momentum of the eight match their known values."""
    ic = choreography_initial_state()
    r = ic.reshape(3, 4)[:, :2]
    v = ic.reshape(3, 4)[:, 2:]
    kinetic = 0.5 * np.sum(v**2)
    potential = -sum(
        1.0 / np.linalg.norm(r[i] - r[j]) for i in range(3) for j in range(i + 1, 3)
    )
    ell = np.sum(r[:, 0] * v[:, 1] - r[:, 1] * v[:, 0])
    # figure-eight: zero angular momentum, E = -U/2 would be false (not
    # virialized instantaneously), but E must be negative and O(1)
    assert abs(ell) < 1e-12
    assert -3.0 < kinetic + potential < -0.5


def test_axis_return_at_refined_period(eight):
    """Body 1 crosses the axis at T/2 and T with the mirror configuration."""
    from refbp.integrate import IntegratorSettings, propagate

    cfg = IntegratorSettings(rel_tol=1e-13, abs_tol=1e-13)
    traj = propagate(nbody_rhs(np.ones(3)), choreography_initial_state(),
                     (0.0, eight.period), cfg)
    yT = traj.yf
    assert abs(yT[1]) < 1e-11  # y1(T) = 0 by construction of the refinement
    assert np.max(np.abs(yT - traj.y0)) < 1e-9


def test_system_state_round_trip():
    y = random_state()
    s = SystemState.from_array(y, t=1.5)
    assert np.array_equal(s.as_array(), y)
    assert s.t == 1.5


def test_constants_report_parses(eight):
    text = constants_report()
    values = dict(line.split(" = ", 1) for line in text.splitlines())
    assert float(values["tbar"]) == pytest.approx(eight.tbar, abs=1e-15)
    assert values["period_printed"] == repr(eight.period_printed)
