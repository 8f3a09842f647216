"""Command-line surface: propagation, seeding, solving, family tracing,
catalogue verification and constants export.

All commands read a flat ``key = value`` config file (optional) with
command-line flags taking precedence; output files are CSV with a versioned
schema comment on the first line, written atomically.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical
failure.
"""

import argparse
import csv
import os
import sys
import tempfile

import numpy as np

from . import catalog
from .bvp import (
    TAU_SCALE, KeplerSeed, RegSeed, bvp_residual_reg, kepler_seed,
    regularized_to_seed, seed_to_regularized,
)
from .continuation import (
    ArclengthSettings, FamilyPoint, label_families, periodic_records,
    refine_periodic, solve_point, trace_family, full_period_trajectory,
    particle_interpolant,
)
from .dynamics import constants_report, eight_initial_conditions, nbody_rhs, RESTRICTED
from .errors import RefbpError
from .integrate import IntegratorSettings, propagate

TRAJ_SCHEMA = "# refbp trajectory v1"
CURVE_SCHEMA = "# refbp family-curve v1"
RECORD_SCHEMA = "# refbp periodic-records v1"

TRAJ_COLUMNS = ("t", "x1", "y1", "x2", "y2", "x3", "y3", "x", "y", "vx", "vy")
CURVE_COLUMNS = ("family", "s", "u10", "u20", "w10", "w20", "tau0", "T0", "h0")
RECORD_COLUMNS = ("family", "motion", "u10", "u20", "w10", "w20", "tau0",
                  "T0", "h0", "residual", "closure", "symmetry_dev", "verified")


class UsageError(Exception):
    """Invalid command line or config content."""


# ---------------------------------------------------------------------------
# config plumbing

def parse_config_file(path):
    """Flat ``key = value`` lines; '#' starts a comment; values stay strings."""
    out = {}
    try:
        with open(path) as fh:
            for i, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{i}: expected key = value, got {raw!r}")
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return out


def build_config(args):
    """Merge config file and flags; flags override file keys."""
    cfg = parse_config_file(args.config) if args.config else {}
    if args.tol is not None:
        cfg["tol"] = str(args.tol)
    if args.rows is not None:
        cfg["rows"] = args.rows
    if args.out is not None:
        cfg["out"] = args.out
    if args.samples is not None:
        cfg["samples"] = str(args.samples)
    if args.chart is not None:
        cfg["chart"] = args.chart
    return cfg


def _get(cfg, key, default=None, cast=str):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key}: {cfg[key]!r}") from exc


def integrator_settings(cfg):
    tol = _get(cfg, "tol", 1e-12, float)
    if not tol > 0:
        raise UsageError(f"tolerance must be positive, got {tol}")
    return IntegratorSettings(rel_tol=tol, abs_tol=tol)


def parse_rows(spec_str, n_max):
    """Row selection 'A-B', 'N', or comma-separated mix, 1-based inclusive."""
    rows = []
    for part in spec_str.split(","):
        part = part.strip()
        if "-" in part.lstrip("-"):
            a, b = part.split("-", 1)
            try:
                lo, hi = int(a), int(b)
            except ValueError as exc:
                raise UsageError(f"bad row range {part!r}") from exc
            rows.extend(range(lo, hi + 1))
        else:
            try:
                rows.append(int(part))
            except ValueError as exc:
                raise UsageError(f"bad row number {part!r}") from exc
    for n in rows:
        if not 1 <= n <= n_max:
            raise UsageError(f"row {n} outside 1..{n_max}")
    return rows


def atomic_write_csv(path, schema, columns, rows):
    """Write a CSV with a schema comment line via temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(schema + "\n")
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow(row)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def out_path(cfg, name):
    return os.path.join(_get(cfg, "out", "."), name)


def load_user_table(path):
    """Catalogue override: CSV rows (row, tau0, u10, w20), '#' comments ok."""
    table = {}
    try:
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                if rec[0].strip().lower() == "row":
                    continue
                if len(rec) < 4:
                    raise UsageError(f"table row needs 4 columns, got {rec}")
                table[int(rec[0])] = (float(rec[1]), float(rec[2]), float(rec[3]))
    except OSError as exc:
        raise UsageError(f"cannot read table {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"bad table entry in {path}: {exc}") from exc
    if not table:
        raise UsageError(f"no rows found in table {path}")
    n = max(table)
    if set(table) != set(range(1, n + 1)):
        raise UsageError(f"table rows must be contiguous from 1, got {sorted(table)}")
    return tuple(table[i] for i in range(1, n + 1))


# ---------------------------------------------------------------------------
# initial states

def _seed_from_config(cfg, eight):
    """RegSeed from config: explicit chart values or an osculating ellipse."""
    if "u10" in cfg or "u20" in cfg:
        return RegSeed(
            u10=_get(cfg, "u10", 0.0, float), u20=_get(cfg, "u20", 0.0, float),
            w10=_get(cfg, "w10", 0.0, float), w20=_get(cfg, "w20", 0.0, float),
        )
    if "a" in cfg:
        k = KeplerSeed(
            a=_get(cfg, "a", None, float), e=_get(cfg, "e", 0.0, float),
            apsis=_get(cfg, "apsis", "periapsis"),
            sense=_get(cfg, "sense", "prograde"),
        )
        return seed_to_regularized(kepler_seed(k, eight), eight)
    raise UsageError("need a seed: either u10/u20 (+w10/w20) or a/e/apsis/sense")


def _start_point(cfg, eight):
    """(seed, tau0) from a catalogue row or a config seed."""
    row = _get(cfg, "row", None, int)
    if row is not None:
        return catalog.row_seed(row)
    seed = _seed_from_config(cfg, eight)
    tau0 = _get(cfg, "tau0", None, float)
    if tau0 is None:
        raise UsageError("a config seed needs an explicit tau0")
    return seed, tau0


# ---------------------------------------------------------------------------
# commands

def cmd_propagate(cfg):
    """Sampled Cartesian trajectory of primaries and test particle.

    Sources: ``source = choreography`` (primaries only, particle columns
    empty), or a catalogue ``row`` (re-converged, then run over its full
    period), or an explicit seed with ``tau0``.
    """
    eight = eight_initial_conditions()
    icfg = integrator_settings(cfg)
    samples = _get(cfg, "samples", 1000, int)
    if samples < 0:
        raise UsageError(f"samples must be >= 0, got {samples}")
    source = _get(cfg, "source", "row" if "row" in cfg else None)
    path = out_path(cfg, _get(cfg, "name", "trajectory.csv"))

    if source == "choreography":
        t_end = _get(cfg, "t_end", eight.period, float)
        if t_end == 0.0:
            atomic_write_csv(path, TRAJ_SCHEMA, TRAJ_COLUMNS, [])
            print(f"wrote {path} (empty span)")
            return 0
        y0 = eight.ic_array()
        traj = propagate(nbody_rhs(np.array([1.0, 1.0, 1.0])), y0,
                         (0.0, t_end), icfg)
        ts = np.linspace(0.0, t_end, samples + 1)
        rows = []
        for t in ts:
            y = traj(t)
            rows.append([t, y[0], y[1], y[4], y[5], y[8], y[9],
                         "", "", "", ""])
        atomic_write_csv(path, TRAJ_SCHEMA, TRAJ_COLUMNS, rows)
        closure = float(np.max(np.abs(traj(t_end) - y0))) if t_end == eight.period \
            else float(np.max(np.abs(traj.yf - y0)))
        print(f"wrote {path}")
        print(f"closure = {closure:.3e}")
        return 0

    seed, tau0 = _start_point(cfg, eight)
    chart = _get(cfg, "chart", "reg")
    if chart not in ("cart", "reg"):
        raise UsageError(f"chart must be cart or reg, got {chart!r}")
    if chart == "cart":
        raise UsageError("propagate currently integrates near-collision orbits "
                         "in the regularized chart only; use chart = reg")
    if "row" in cfg:
        # Catalogue digits carry rounding that the full-period map amplifies;
        # re-converge before presenting the closed curve.
        cand = FamilyPoint.from_active(1, seed.active[0], seed.active[1], tau0)
        rec = refine_periodic(cand, cfg=icfg, eight=eight)
        point = rec.point
    else:
        c, w = seed.active
        point = FamilyPoint.from_active(seed.active_rep, c, w, tau0)
    t_end = _get(cfg, "t_end", None, float)
    if t_end == 0.0:
        atomic_write_csv(path, TRAJ_SCHEMA, TRAJ_COLUMNS, [])
        print(f"wrote {path} (empty span)")
        return 0
    traj = full_period_trajectory(point, cfg=icfg, eight=eight)
    T_full = 2.0 * float(traj(point.tau0)[9])
    if t_end is None:
        t_end = T_full
    if not 0.0 < t_end <= T_full * 1.05:
        raise UsageError(f"t_end must lie in (0, {T_full:.6f}], got {t_end}")
    z_of_t = particle_interpolant(traj)
    from .regularization import regularized_to_cartesian

    ts = np.linspace(0.0, t_end, samples + 1)
    taus = np.linspace(traj.t0, traj.tf, 8192)
    t_grid = traj.sol(taus)[9]
    rows = []
    for t in ts:
        tau = float(np.interp(t, t_grid, taus))
        state = regularized_to_cartesian(traj(tau))
        arr = state.as_array()
        rows.append([state.t, arr[0], arr[1], arr[4], arr[5], arr[8], arr[9],
                     arr[12], arr[13], arr[14], arr[15]])
    atomic_write_csv(path, TRAJ_SCHEMA, TRAJ_COLUMNS, rows)
    dev = float(np.max(np.abs(z_of_t(T_full) - z_of_t(0.0))))
    print(f"wrote {path}")
    print(f"terminal-vs-initial deviation = {dev:.3e}")
    return 0


def cmd_seed(cfg):
    """Print (and optionally save) the two charts of a fixed-point seed."""
    eight = eight_initial_conditions()
    seed = _seed_from_config(cfg, eight)
    cart = regularized_to_seed(seed, eight)
    lines = [
        f"u10 = {seed.u10:.16e}",
        f"u20 = {seed.u20:.16e}",
        f"w10 = {seed.w10:.16e}",
        f"w20 = {seed.w20:.16e}",
        f"x0 = {cart.x0:.16e}",
        f"vy0 = {cart.vy0:.16e}",
    ]
    text = "\n".join(lines)
    print(text)
    name = _get(cfg, "name", None)
    if name is not None:
        _atomic_write_text(out_path(cfg, name), text + "\n")
    return 0


def cmd_solve(cfg):
    """Converge one boundary-value problem from a seed.

    ``kind = y | vx | r``: the fixed-time problems adjust (velocity, tau0)
    against their single far condition plus the arrival time; the free-time
    problem holds the active position and solves both far conditions.
    """
    from .bvp import newton_solve

    eight = eight_initial_conditions()
    icfg = integrator_settings(cfg)
    kind = _get(cfg, "kind", "r").lower()
    seed, tau0 = _start_point(cfg, eight)
    c, w = seed.active
    rep = seed.active_rep
    tol = _get(cfg, "newton_tol", 1e-10, float)
    if kind == "r":
        point = solve_point(rep, c, w, tau0, cfg=icfg, eight=eight,
                            fix=_get(cfg, "fix", "position"), tol=tol)
    elif kind in ("y", "vx"):
        def F(x):
            s = RegSeed(u10=c, w20=x[0]) if rep == 1 else RegSeed(u20=c, w10=x[0])
            return bvp_residual_reg(kind, s, x[1] * TAU_SCALE, icfg, eight)

        sol = newton_solve(F, np.array([w, tau0 / TAU_SCALE]), tol=tol)
        point = FamilyPoint.from_active(rep, c, sol.x[0], sol.x[1] * TAU_SCALE,
                                        T0=eight.half_period,
                                        residual_norm=sol.residual_norm)
    else:
        raise UsageError(f"kind must be y, vx or r, got {kind!r}")
    lines = [
        f"kind = {kind}",
        f"u10 = {point.u10:.16e}",
        f"u20 = {point.u20:.16e}",
        f"w10 = {point.w10:.16e}",
        f"w20 = {point.w20:.16e}",
        f"tau0 = {point.tau0:.16e}",
        f"T0 = {point.T0:.16e}",
        f"h0 = {point.h0:.16e}",
        f"residual = {point.residual_norm:.3e}",
    ]
    print("\n".join(lines))
    return 0


def _curve_rows(curve):
    s = curve.arclength()
    fam = curve.family_index if curve.family_index is not None else ""
    for si, p in zip(s, curve.points):
        yield [fam, f"{si:.12e}", f"{p.u10:.16e}", f"{p.u20:.16e}",
               f"{p.w10:.16e}", f"{p.w20:.16e}", f"{p.tau0:.16e}",
               f"{p.T0:.16e}", f"{p.h0:.16e}"]


def _record_rows(records):
    for r in records:
        p = r.point
        rep = r.report
        yield [r.family_index if r.family_index is not None else "",
               r.motion_tag, f"{p.u10:.16e}", f"{p.u20:.16e}",
               f"{p.w10:.16e}", f"{p.w20:.16e}", f"{p.tau0:.16e}",
               f"{p.T0:.16e}", f"{p.h0:.16e}", f"{p.residual_norm:.3e}",
               f"{rep.closure_err:.3e}" if rep else "",
               f"{rep.max_symmetry_dev:.3e}" if rep else "",
               int(r.verified)]


def _arclength_from_config(cfg, icfg):
    s = ArclengthSettings(integrator=IntegratorSettings(
        rel_tol=icfg.rel_tol, abs_tol=icfg.abs_tol, max_steps=30_000))
    for key in ("step", "max_step", "min_step", "u_min"):
        val = _get(cfg, key, None, float)
        if val is not None:
            setattr(s, key, val)
    mp = _get(cfg, "max_points", None, int)
    if mp is not None:
        s.max_points = mp
    return s


def cmd_trace(cfg):
    """Trace one family from a catalogue row or seed; write the curve CSV
    and a summary of the refined periodic orbits found along it."""
    eight = eight_initial_conditions()
    icfg = integrator_settings(cfg)
    settings = _arclength_from_config(cfg, icfg)
    seed, tau0 = _start_point(cfg, eight)
    c, w = seed.active
    start = solve_point(seed.active_rep, c, w, tau0,
                        cfg=settings.integrator, eight=eight, fix="position")
    curve = trace_family(start, settings, cfg=settings.integrator, eight=eight)
    label_families([curve])
    row = _get(cfg, "row", None, int)
    if row is not None and curve.family_index == 1:
        curve.family_index = catalog.family_of_row(row)
    for side, truncated in zip(("backward", "forward"), curve.truncated):
        if truncated:
            print(f"warning: {side} branch truncated before the collision limit",
                  file=sys.stderr)
    fam = curve.family_index if curve.family_index is not None else 0
    curve_path = out_path(cfg, _get(cfg, "name", f"family_{fam}.csv"))
    atomic_write_csv(curve_path, CURVE_SCHEMA, CURVE_COLUMNS, _curve_rows(curve))
    records = periodic_records(curve, cfg=settings.integrator, eight=eight)
    for r in records:
        r.family_index = curve.family_index
    rec_path = out_path(cfg, "records.csv")
    atomic_write_csv(rec_path, RECORD_SCHEMA, RECORD_COLUMNS,
                     _record_rows(records))
    print(f"wrote {curve_path} ({len(curve.points)} points)")
    print(f"wrote {rec_path} ({len(records)} periodic records)")
    return 0


def cmd_verify_table(cfg):
    """Re-derive every claim of the embedded catalogue (or a user-supplied
    one), one report line per row; exit 1 on any failure."""
    eight = eight_initial_conditions()
    icfg = integrator_settings(cfg)
    table = None
    table_path = _get(cfg, "table", None)
    if table_path is not None:
        table = load_user_table(table_path)
    n_max = len(table) if table is not None else catalog.N_ROWS
    rows_spec = _get(cfg, "rows", None)
    rows = parse_rows(rows_spec, n_max) if rows_spec else None
    checks = catalog.verify_table(rows=rows, cfg=icfg, eight=eight, table=table,
                                  progress=lambda c: print(c.line(), flush=True))
    failed = [c for c in checks if not c.ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} rows pass")
    if failed:
        for c in failed:
            print(f"row {c.row} failed: {', '.join(c.failures())}")
        return 1
    return 0


def cmd_export_constants(cfg):
    """Structured text dump of the embedded constants: the choreography
    epoch and period, derived times, and the orbit catalogue."""
    lines = [constants_report(), ""]
    lines.append("# catalogued orbits: row tau0 u10 w20 family motion")
    for n in range(1, catalog.N_ROWS + 1):
        tau0, u10, w20 = catalog.row_values(n)
        lines.append(f"row{n} = {tau0:.15e} {u10:.15e} {w20:.15e} "
                     f"{catalog.family_of_row(n)} {catalog.motion_of_row(n)}")
    text = "\n".join(lines)
    print(text)
    name = _get(cfg, "name", None)
    if name is not None:
        _atomic_write_text(out_path(cfg, name), text + "\n")
    return 0


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


COMMANDS = {
    "propagate": cmd_propagate,
    "seed": cmd_seed,
    "solve": cmd_solve,
    "trace": cmd_trace,
    "verify-table": cmd_verify_table,
    "export-constants": cmd_export_constants,
}


def make_parser():
    parser = argparse.ArgumentParser(
        prog="refbp",
        description="Symmetric periodic orbits of a test particle near one "
                    "primary of the figure-eight choreography.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].rstrip("."))
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--tol", type=float, metavar="X",
                       help="integrator relative/absolute tolerance")
        p.add_argument("--rows", metavar="A-B", help="row selection, e.g. 19-24")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--samples", type=int, metavar="N",
                       help="number of output samples")
        p.add_argument("--chart", choices=("cart", "reg"),
                       help="coordinate chart for propagation")
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RefbpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
