"""Reversing-symmetry machinery for the test particle.

The relevant involution reflects the particle about the x-axis and reverses
time; its fixed points are states with y = 0, v_x = 0 (x and v_y arbitrary),
which can only occur while the primaries sit in an isosceles configuration.
An orbit through two such states half a period apart is periodic and doubly
symmetric.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FixedPointResidual:
    """Distance of a particle state from the reflection's fixed-point set."""

    y_res: float
    vx_res: float

    @property
    def norm(self):
        return max(abs(self.y_res), abs(self.vx_res))


def rtilde_fixed_residual(z):
    """(y, v_x) of the particle state ``z = (x, y, vx, vy)``; both vanish
    exactly on the fixed-point set."""
    z = np.asarray(z, float)
    return FixedPointResidual(y_res=float(z[1]), vx_res=float(z[2]))


def rtilde_reflect(z):
    """The reflection (x, y, vx, vy) -> (x, -y, -vx, vy); an involution."""
    z = np.asarray(z, float)
    return np.array([z[0], -z[1], -z[2], z[3]])


@dataclass
class SymmetryReport:
    """Outcome of :func:`verify_symmetric_periodic`."""

    max_symmetry_dev: float
    closure_err: float
    tol: float
    n_samples: int
    start_residual: float
    success: bool = field(init=False)

    def __post_init__(self):
        self.success = (
            self.max_symmetry_dev < self.tol and self.closure_err < self.tol
        )

    def to_text(self):
        lines = [
            f"samples = {self.n_samples}",
            f"start_fixed_point_residual = {self.start_residual:.3e}",
            f"max_symmetry_deviation = {self.max_symmetry_dev:.3e}",
            f"closure_error = {self.closure_err:.3e}",
            f"tolerance = {self.tol:.3e}",
            f"success = {self.success}",
        ]
        return "\n".join(lines)


def verify_symmetric_periodic(z_of_t, period, tol=1e-5, n_samples=512):
    """Check z(2 T0 - t) = reflect(z(t)) over a full period, T0 = period/2.

    ``z_of_t`` maps natural time in [0, period] to the particle 4-vector.
    512 samples plus endpoints resolve the fastest near-collision loops of
    the orbits catalogued here.

    Deviations are measured relative to the sampled state magnitude (with
    floor 1): close encounters reach speeds of several hundred, where an
    absolute comparison would only probe the last bits of the ephemeris.
    Diagnostic only; never raises.
    """
    ts = np.linspace(0.0, period, n_samples + 2)
    dev = 0.0
    for t in ts:
        za = z_of_t(period - t)
        zb = rtilde_reflect(z_of_t(t))
        scale = max(1.0, float(np.max(np.abs(za))), float(np.max(np.abs(zb))))
        dev = max(dev, float(np.max(np.abs(za - zb))) / scale)
    z0, zp = z_of_t(0.0), z_of_t(period)
    scale = max(1.0, float(np.max(np.abs(z0))), float(np.max(np.abs(zp))))
    closure = float(np.max(np.abs(zp - z0))) / scale
    start = rtilde_fixed_residual(z0).norm
    return SymmetryReport(
        max_symmetry_dev=dev, closure_err=closure, tol=tol,
        n_samples=n_samples + 2, start_residual=start,
    )
