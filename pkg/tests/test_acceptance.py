"""End-to-end acceptance checks, one per headline claim of the toolkit.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or on
failure) before asserting, so a red run still reports every criterion's
measured numbers.
"""

import time

import numpy as np
import pytest

from refbp.bvp import (
    CartSeed,
    bvp_residual_reg,
    propagate_reg_seed,
    seed_to_regularized,
)
from refbp.catalog import (
    DEFAULT_THRESHOLDS,
    TABLE,
    family_of_row,
    motion_of_row,
    verify_table,
)
from refbp.continuation import solve_point
from refbp.errors import RefbpError
from refbp.dynamics import (
    RESTRICTED,
    SystemState,
    T_EIGHT_PRINTED,
    choreography_initial_state,
    nbody_rhs,
    restricted_state,
)
from refbp.integrate import IntegratorSettings, locate_time_target, propagate
from refbp.regularization import (
    binding_energy_regularized,
    cartesian_to_regularized,
    regularized_to_cartesian,
)


def report(num, ok, detail):
    print(f"CRITERION {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


# --- 1: choreography closure ----------------------------------------------

def test_criterion_1_choreography_closure():
    y0 = choreography_initial_state()
    fun = nbody_rhs(np.ones(3))
    fun(0.0, y0)  # jit warm-up outside the timed window
    start = time.perf_counter()
    traj = propagate(fun, y0, (0.0, T_EIGHT_PRINTED),
                     IntegratorSettings(rel_tol=1e-12, abs_tol=1e-12))
    elapsed = time.perf_counter() - start
    closure = float(np.max(np.abs(traj.yf - y0)))
    ok = closure < 1e-7 and elapsed < 1.0
    assert report(1, ok, f"closure {closure:.3e} (< 1e-7), {elapsed:.2f} s (< 1 s)")


# --- 2: catalogue verification --------------------------------------------

def test_criterion_2_table_verification(eight):
    start = time.perf_counter()
    checks = verify_table(eight=eight)
    elapsed = time.perf_counter() - start
    failed = [c.row for c in checks if not c.ok]
    worst = {
        "residual": max(c.residual for c in checks),
        "t_err": max(c.t_err for c in checks),
        "closure": max(c.closure for c in checks),
        "symmetry": max(c.symmetry_dev for c in checks),
    }
    ok = not failed and elapsed < 60.0
    assert report(
        2, ok,
        f"{24 - len(failed)}/24 rows, worst residual {worst['residual']:.1e}, "
        f"dt {worst['t_err']:.1e}, closure {worst['closure']:.1e}, "
        f"symmetry {worst['symmetry']:.1e}, {elapsed:.1f} s (< 60 s)"
        + (f"; failed rows {failed}" if failed else ""),
    )


# --- 3: discovery direction ------------------------------------------------

def match_records_to_rows(records):
    """Nearest catalogue row per record by max-diff over (tau0, u10, w20)."""
    matches = []
    for fam, rec in records:
        p = rec.point
        diffs = [
            max(abs(p.tau0 - tau0), abs(p.u10 - u10), abs(p.w20 - w20))
            for tau0, u10, w20 in TABLE
        ]
        n = int(np.argmin(diffs)) + 1
        matches.append((fam, rec, n, diffs[n - 1]))
    return matches


def test_criterion_3_discovery_matches_table(discovery):
    curves, records = discovery
    matches = match_records_to_rows(records)
    rows_hit = sorted(m[2] for m in matches)
    bijective = rows_hit == list(range(1, 25))
    consistent = all(
        fam == family_of_row(n) and rec.motion_tag == motion_of_row(n)
        for fam, rec, n, _ in matches
    )
    worst = max((m[3] for m in matches), default=np.inf)
    over = sorted(m[2] for m in matches if m[3] >= 1e-6)
    ok = (len(curves) >= 6 and len(records) == 24 and bijective
          and consistent and worst < 1e-6)
    assert report(
        3, ok,
        f"{len(curves)} families, {len(records)} records, "
        f"bijective {bijective}, labels/motion consistent {consistent}, "
        f"worst row match {worst:.2e} (< 1e-6)"
        + (f"; rows over tolerance {over}" if over else ""),
    )


# --- 4: collision limit of the traced curves -------------------------------

def test_criterion_4_collision_limit(discovery):
    curves, _ = discovery
    devs = []
    for c in curves:
        for p in (c.points[0], c.points[-1]):
            pos, vel = p.active
            devs.append((c.family_index, pos, abs(abs(vel) - 2**-0.5)))
    worst = max(d for _, _, d in devs)
    depth = max(pos for _, pos, _ in devs)
    ok = worst < 1e-3
    assert report(
        4, ok,
        f"{len(devs)} curve endpoints, max | |w| - 1/sqrt(2) | = {worst:.2e} "
        f"(< 1e-3) at endpoint positions <= {depth:.3f}",
    )


# --- 5 and 6: chart equivalence and binding energy --------------------------

def random_bound_segments(eight, n=10, seed=20):
    """Short particle arcs around primary 1 staying clear of collision."""
    rng = np.random.default_rng(seed)
    segments = []
    while len(segments) < n:
        a = rng.uniform(0.06, 0.25)
        e = rng.uniform(0.0, 0.5)
        sense = 1.0 if rng.uniform() < 0.5 else -1.0
        r = a * (1 + e)  # start at apoapsis: slowest, most robust
        v = sense * np.sqrt(2.0 / r - 1.0 / a)
        c = CartSeed(x0=eight.x10 + r, vy0=eight.vy10 + v)
        segments.append((c, 0.35))
    return segments


def back_dot(mapped, y_reg):
    """Alignment of the canonical-branch preimage with the current u."""
    u_canon = cartesian_to_regularized(mapped).u
    return float(u_canon @ y_reg[0:2])


def test_criterion_5_chart_equivalence(eight):
    cfg = IntegratorSettings(rel_tol=1e-13, abs_tol=1e-13)
    worst_state, worst_round, min_uu = 0.0, 0.0, np.inf
    for c, t_end in random_bound_segments(eight):
        y0 = restricted_state(c.state(), eight)
        cart = propagate(nbody_rhs(RESTRICTED.as_array()), y0, (0.0, t_end), cfg)
        s = seed_to_regularized(c, eight)
        pos, _ = s.active
        reg = propagate_reg_seed(s, 2.0 * t_end / pos**2, cfg, eight)
        assert reg.yf[9] > t_end
        for t in np.linspace(0.0, t_end, 21):
            tau = locate_time_target(reg, t)
            y_reg = reg(tau)
            min_uu = min(min_uu, y_reg[0] ** 2 + y_reg[1] ** 2)
            mapped = regularized_to_cartesian(y_reg)
            arr = mapped.as_array()
            # chart order: bodies 1,2,3 then particle; compare both ends
            y_cart = cart(t)
            dev = max(
                float(np.max(np.abs(arr[0:4] - y_cart[0:4]))),
                float(np.max(np.abs(arr[4:12] - y_cart[4:12]))),
                float(np.max(np.abs(arr[12:16] - y_cart[12:16]))),
            )
            worst_state = max(worst_state, dev)
            # cart -> reg -> cart on the Cartesian ephemeris state
            s_cart = cartesian_to_regularized(SystemState.from_array(y_cart, t=t))
            round_cart = np.max(np.abs(
                regularized_to_cartesian(s_cart).as_array() - y_cart
            ))
            # reg -> cart -> reg, on the branch the trajectory is on; the
            # energy slot is re-derived, not transported, so it is judged by
            # the binding-energy criterion instead
            branch = 1 if back_dot(mapped, y_reg) >= 0 else -1
            back = cartesian_to_regularized(mapped, branch=branch).as_array()
            round_reg = np.max(np.abs(np.delete(back - y_reg, 8)))
            worst_round = max(worst_round, float(round_cart), float(round_reg))
    ok = worst_state < 1e-8 and worst_round < 1e-14 and min_uu > 1e-3
    assert report(
        5, ok,
        f"10 segments, chart agreement {worst_state:.2e} (< 1e-8), "
        f"round trip {worst_round:.2e} (< 1e-14), min u.u {min_uu:.2e} (> 1e-3)",
    )


def test_criterion_6_binding_energy_consistency(eight):
    cfg = IntegratorSettings(rel_tol=1e-13, abs_tol=1e-13)
    worst = 0.0
    segments = random_bound_segments(eight)
    from refbp.catalog import row_seed

    trajectories = []
    for c, t_end in segments:
        s = seed_to_regularized(c, eight)
        pos, _ = s.active
        trajectories.append(propagate_reg_seed(s, 2.0 * t_end / pos**2, cfg, eight))
    for n in (7, 13):  # catalogued orbits, full half period
        seed, tau0 = row_seed(n)
        trajectories.append(propagate_reg_seed(seed, tau0, cfg, eight))
    for traj in trajectories:
        for tau in np.linspace(traj.t0, traj.tf, 200):
            y = traj(tau)
            uu = y[0] ** 2 + y[1] ** 2
            if uu <= 1e-3:
                continue
            h_alg = binding_energy_regularized(y[0:2], y[2:4])
            dev = abs(y[8] - h_alg) / max(1.0, abs(y[8]))
            worst = max(worst, dev)
    ok = worst < 1e-8
    assert report(
        6, ok,
        f"{len(trajectories)} trajectories, evolved vs algebraic h: "
        f"{worst:.2e} (< 1e-8 relative)",
    )


# --- 7: symmetry suite ------------------------------------------------------

def test_criterion_7_symmetry_suite(discovery, eight):
    curves, records = discovery
    verified = [(fam, rec) for fam, rec in records if rec.verified]
    assert len(verified) == len(records)
    worst_sym = max(rec.report.max_symmetry_dev for _, rec in verified)
    n_samples = min(rec.report.n_samples for _, rec in verified)

    # mirror seeds: the far-boundary particle state, reflected through the
    # y-axis, anchors the same orbit at the opposite isosceles epoch
    cfg = IntegratorSettings(rel_tol=1e-13, abs_tol=1e-13, max_steps=200_000)
    worst_mirror = 0.0
    mirror_over = []
    mirror_failures = []
    for fam, rec in verified:
        p = rec.point
        traj = propagate_reg_seed(p.seed(), p.tau0, cfg, eight)
        arr = regularized_to_cartesian(traj.yf).as_array()
        x_f, vy_f = arr[12], arr[15]
        # the mirror anchors the same orbit, so its boundary epoch sits within
        # a few percent of the record's own tau0 (a span scaled from the seed
        # depth instead blows up for the deep anchors, where dt/dtau recovers
        # to order one almost immediately); a propagation failure counts as a
        # failed mirror rather than crashing the suite
        mirror = seed_to_regularized(CartSeed(x0=-x_f, vy0=vy_f), eight)
        try:
            mtraj = propagate_reg_seed(mirror, 1.1 * p.tau0, cfg, eight)
            tau0 = locate_time_target(mtraj, eight.half_period)
            res = bvp_residual_reg("r", mirror, tau0, cfg, eight)
            worst_mirror = max(worst_mirror, float(np.max(np.abs(res))))
            if np.max(np.abs(res)) > 1e-6:
                mirror_over.append((fam, float(mirror.active[0])))
        except RefbpError:
            mirror_failures.append((fam, float(mirror.active[0])))
    ok = worst_sym < 1e-5 and n_samples >= 512 and worst_mirror < 1e-6 \
        and not mirror_failures
    assert report(
        7, ok,
        f"{len(verified)} verified records, symmetry deviation {worst_sym:.2e} "
        f"(< 1e-5, {n_samples} samples), mirror-seed residual "
        f"{worst_mirror:.2e} (< 1e-6, over tolerance at deep mirror anchors "
        f"{mirror_over}), mirrors not representable {mirror_failures}",
    )


# --- 8: census properties ---------------------------------------------------

def test_criterion_8_census_properties(discovery, eight):
    curves, records = discovery
    per_family = {c.family_index: 0 for c in curves}
    for fam, _ in records:
        per_family[fam] = per_family.get(fam, 0) + 1
    four_each = all(v == 4 for v in per_family.values())

    # near-collision records all sit on the w < 0 (retrograde) branch
    near = [rec for _, rec in records if rec.point.active[0] < 0.02]
    no_positive_branch = len(near) == 6 and all(
        rec.point.active[1] < 0 for rec in near
    )

    # curves are symmetric about w = 0: pin exact family points at +/-w with
    # the velocity held fixed and compare positions (interpolating the stored
    # samples would alias the sparse strongly-curved stretch around w = 0)
    sym_dev = 0.0
    for c in curves:
        pts = np.array([[p.active[0], p.active[1], p.tau0] for p in c.points])
        order = np.argsort(pts[:, 1])
        w_s, u_s, tau_s = pts[order, 1], pts[order, 0], pts[order, 2]
        for wp in (0.1, 0.3, 0.5):
            u_pin = {}
            for sgn in (+1, -1):
                cg = np.interp(sgn * wp, w_s, u_s)
                tg = np.interp(sgn * wp, w_s, tau_s)
                pin = solve_point(c.rep, cg, sgn * wp, tg, fix="velocity",
                                  eight=eight)
                u_pin[sgn] = pin.active[0]
            sym_dev = max(sym_dev, abs(u_pin[+1] - u_pin[-1]))
    curves_symmetric = sym_dev < 1e-3

    # parity split of the characteristic-time profile shapes: pinned at
    # velocity +/-0.01, the defect T0 - 6*tbar is flat (tangent zero, below
    # 1e-5) for the half-integer-lap families (odd labels) and transversal
    # (above 1e-4) for the integer-lap ones (even labels)
    defect = {}
    for c in curves:
        pts = np.array([[p.active[0], p.active[1], p.tau0] for p in c.points])
        order = np.argsort(pts[:, 1])
        w_s, u_s, tau_s = pts[order, 1], pts[order, 0], pts[order, 2]
        gmax = 0.0
        for wp in (0.01, -0.01):
            cg = np.interp(wp, w_s, u_s)
            tg = np.interp(wp, w_s, tau_s)
            pin = solve_point(c.rep, cg, wp, tg, fix="velocity", eight=eight)
            gmax = max(gmax, abs(pin.T0 - eight.half_period))
        defect[c.family_index] = gmax
    odd = {k: defect[k] for k in defect if k % 2 == 1}
    even = {k: defect[k] for k in defect if k % 2 == 0}
    parity_split = (
        odd and even
        and all(g < 1e-5 for g in odd.values())
        and all(g > 1e-4 for g in even.values())
    )

    ok = four_each and no_positive_branch and curves_symmetric and parity_split
    assert report(
        8, ok,
        f"records per family {dict(sorted(per_family.items()))}, "
        f"near-collision branch all retrograde {no_positive_branch}, "
        f"curve symmetry about w=0 {sym_dev:.2e} (< 1e-3), "
        f"parity defect |T0-6tbar| odd max {max(odd.values()):.2e} (< 1e-5) "
        f"vs even min {min(even.values()):.2e} (> 1e-4)",
    )
