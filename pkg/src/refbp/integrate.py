"""Adaptive high-order propagation with dense output and time-target location.

The propagator is a thin loop around scipy's Dormand-Prince 8(5,3) stepper
(order 8, continuous 7th-order output), which gives explicit control over the
step budget and produces an interpolable trajectory object.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, OdeSolution
from scipy.optimize import brentq

from .errors import BracketingError, StepBudgetError, StepUnderflowError

# Index of natural time inside a regularized state vector (see regularization).
TIME_INDEX = 9


@dataclass
class IntegratorSettings:
    """Tolerances and budgets for :func:`propagate`.

    Defaults reproduce the accuracy used throughout the package; tolerances
    above 1e-3 are rejected because the downstream boundary-value solves
    assume much tighter trajectories.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = np.inf
    min_step: float = 0.0
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-3) or not (0.0 < self.abs_tol <= 1e-3):
            raise ValueError("tolerances must lie in (0, 1e-3]")


@dataclass
class Trajectory:
    """Dense-output solution of one propagation.

    Immutable after construction; evaluating it at any point of the span
    interpolates the accepted steps to integrator accuracy.
    """

    ts: np.ndarray
    sol: OdeSolution
    y0: np.ndarray
    yf: np.ndarray
    span: tuple = field(default=None)

    def __post_init__(self):
        if self.span is None:
            self.span = (self.ts[0], self.ts[-1])

    def __call__(self, t):
        return self.sol(t)

    @property
    def t0(self):
        return self.span[0]

    @property
    def tf(self):
        return self.span[1]

    def sample(self, n):
        """States at ``n`` uniform points of the span, as (n, dim) array."""
        ts = np.linspace(self.t0, self.tf, n)
        return ts, self.sol(ts).T


def propagate(fun, y0, span, cfg=None):
    """Propagate ``dy/dx = fun(x, y)`` over ``span = (a, b)`` with b > a.

    Returns a :class:`Trajectory`. Raises :class:`StepUnderflowError` when the
    stepper stalls (typically a Cartesian near-collision: switch to the
    regularized chart) and :class:`StepBudgetError` when ``max_steps`` is hit.
    """
    if cfg is None:
        cfg = IntegratorSettings()
    a, b = span
    if not b > a:
        raise ValueError(f"span must be increasing, got {span}")
    y0 = np.asarray(y0, dtype=float)
    if not np.all(np.isfinite(fun(a, y0))):
        raise ValueError("field is not finite at the initial state")

    stepper = DOP853(
        fun, a, y0, b, max_step=cfg.max_step, rtol=cfg.rel_tol, atol=cfg.abs_tol
    )
    ts = [a]
    interpolants = []
    n_steps = 0
    while stepper.status == "running":
        if n_steps >= cfg.max_steps:
            raise StepBudgetError(
                f"exceeded {cfg.max_steps} steps at x={stepper.t:.6g} of {span}"
            )
        message = stepper.step()
        if stepper.status == "failed":
            raise StepUnderflowError(
                f"step size underflow at x={stepper.t:.6g}: {message}; "
                "if this is a Cartesian near-collision state, propagate in "
                "regularized coordinates instead"
            )
        if not np.all(np.isfinite(stepper.y)):
            raise StepUnderflowError(
                f"state became non-finite at x={stepper.t:.6g}; "
                "likely a collision singularity"
            )
        if cfg.min_step > 0 and (stepper.t - ts[-1]) < cfg.min_step and stepper.t < b:
            raise StepUnderflowError(
                f"step fell below min_step={cfg.min_step:g} at x={stepper.t:.6g}"
            )
        interpolants.append(stepper.dense_output())
        ts.append(stepper.t)
        n_steps += 1

    ts = np.array(ts)
    sol = OdeSolution(ts, interpolants)
    return Trajectory(ts=ts, sol=sol, y0=y0, yf=stepper.y.copy(), span=(a, b))


def locate_time_target(traj, t_target, component=TIME_INDEX):
    """Fictitious time tau* at which the natural-time component reaches
    ``t_target``.

    Relies on monotonicity of the component along the trajectory
    (dt/dtau = u^2 >= 0). Raises :class:`BracketingError` when the target is
    outside the reached range.
    """
    g = lambda tau: traj(tau)[component] - t_target
    g0 = g(traj.t0)
    gf = g(traj.tf)
    if abs(g0) <= 1e-13:
        return traj.t0
    if abs(gf) <= 1e-13:
        return traj.tf
    if g0 > 0 or gf < 0:
        raise BracketingError(
            f"time target {t_target} outside reached range "
            f"[{traj(traj.t0)[component]}, {traj(traj.tf)[component]}]"
        )
    # Bracket between accepted steps first; the component is nondecreasing.
    values = traj.sol(traj.ts)[component] - t_target
    k = int(np.searchsorted(values, 0.0))
    lo = traj.ts[max(k - 1, 0)]
    hi = traj.ts[min(k, len(traj.ts) - 1)]
    if g(lo) > 0 or g(hi) < 0:
        lo, hi = traj.t0, traj.tf
    return brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)
