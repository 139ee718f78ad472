"""Command-line entry point: ``sinhflow <command> [-c config] [--set key=value]``.

Exit codes: 0 success, 1 invalid input, 2 solver failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from .barrier import TestFunctionParams, build_test_function, condition_check, expansion_fit
from .blowup import EXHAUSTION_CELLS, normalize, track
from .config import load_config
from .errors import DomainError, SolverError, ValidationError
from .flow import CSV_COLUMNS, convergence_certificate, run
from .green import green_function
from .initial import initial_data
from .io import write_csv, write_pgm
from .mfe import barrier_level
from .torus import Grid
from .verify import format_table, run_suite

COMMANDS = ("flow", "green", "mfe", "barrier", "blowup", "verify")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser():
    parser = _Parser(prog="sinhflow", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("-c", "--config", help="key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("-o", "--out-dir", help="output directory (overrides out_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _out(exp, name):
    return os.path.join(exp.out_dir, name)


def cmd_flow(exp):
    cfg = exp.flow_config()
    u0 = initial_data(exp.u0, exp.n, cfg, exp.p, exp.seed)
    res = run(u0, cfg, sample_every=exp.sample_every,
              stop_residual=exp.stop_residual or None)
    cert = convergence_certificate(res.state, cfg, res.record)
    rec = res.record
    decrease, quad = rec.energy_identity()
    extra = [f"status={rec.status} steps={res.state.step_count} rejections={rec.rejections}",
             f"mass_drift={rec.mass_drift()!r} energy_decrease={decrease!r} dissipation_integral={quad!r}",
             f"certificate={cert.verdict}"]
    write_csv(_out(exp, "flow.csv"), CSV_COLUMNS, rec.rows, exp.digest(), exp.n, extra)
    write_pgm(_out(exp, "flow_u.pgm"), res.state.u)
    print(f"{rec.status}: t={res.state.t:.6g} J={res.state.energy:.10g} {cert}")
    return 0


def cmd_green(exp):
    grid = Grid(exp.n)
    stride = exp.n // exp.p_resolution
    rows = []
    for i in range(exp.p_resolution):
        for j in range(exp.p_resolution):
            gd = green_function((i * stride / exp.n, j * stride / exp.n), grid)
            rows.append((gd.p[0], gd.p[1], gd.regular_part, gd.b1, gd.b2, gd.fit_error))
    write_csv(_out(exp, "green.csv"), ("p_x", "p_y", "A", "b1", "b2", "fit_error"),
              rows, exp.digest(), exp.n)
    a = np.array([r[2] for r in rows])
    print(f"A in [{a.min():.12f}, {a.max():.12f}] over {len(rows)} points")
    return 0


def _scan(exp, cfg):
    scan = barrier_level(cfg, exp.p_resolution, exp.n)
    summary = [f"p0={scan.p0[0]!r};{scan.p0[1]!r} L*={scan.level!r} failed={len(scan.failed)}"]
    write_csv(_out(exp, "mfe.csv"), ("px", "py", "A", "Jtilde", "h1", "score"),
              scan.rows, exp.digest(), exp.n, summary)
    return scan


def cmd_mfe(exp):
    cfg = exp.flow_config()
    scan = _scan(exp, cfg)
    sol = scan.solution(scan.p0)
    write_pgm(_out(exp, "mfe_w.pgm"), sol.w)
    print(f"L* = {scan.level:.10f} at p0 = {scan.p0}, residual {sol.residual:.2e}")
    return 0


def cmd_barrier(exp):
    cfg = exp.flow_config()
    scan = _scan(exp, cfg)
    fit = expansion_fit(exp.eps_list, cfg, scan, exp.barrier_n or None, exp.cutoff)
    rows = [(e, a, j, g, fit.c0, fit.c1)
            for e, a, j, g in zip(fit.eps, fit.alpha, fit.energies, fit.gaps)]
    extra = [f"L*={fit.level!r} c1_predicted={fit.c1_predicted!r} "
             f"condition={condition_check(scan.p0, cfg, exp.n)!r}",
             "grids=" + ";".join(str(g) for g in fit.grids)]
    write_csv(_out(exp, "barrier.csv"), ("epsilon", "alpha", "J_value", "gap", "c0_fit", "c1_fit"),
              rows, exp.digest(), exp.n, extra)
    n_img = fit.grids[-1]
    params = TestFunctionParams.from_green(float(fit.eps[-1]), green_function(scan.p0, Grid(n_img)),
                                           exp.cutoff)
    phi = build_test_function(params, scan.solution(scan.p0).w, n_img)
    write_pgm(_out(exp, "barrier_phi.pgm"), phi)
    for e, g, n in zip(fit.eps, fit.gaps, fit.grids):
        print(f"eps={e:.3e} gap={g:+.6f} (n={n})")
    print(f"c1 fit {fit.c1:.4g}, predicted {fit.c1_predicted:.4g}")
    return 0


def cmd_blowup(exp):
    cfg = exp.flow_config()
    u0 = initial_data(exp.u0, exp.n, cfg, exp.p, exp.seed)
    limit = EXHAUSTION_CELLS / exp.n

    def exhausted(state):
        c1 = normalize(state.u, cfg, state.du_dt).u1.max()
        return "resolution-exhausted" if np.exp(-c1 / 2) < limit else None

    res = run(u0, cfg, sample_every=exp.sample_every, keep_fields=True, stop=exhausted)
    rep = track(res.record.snapshots, cfg, exp.delta_list)
    header = (["t", "x1x", "x1y", "c1", "r1", "x2x", "x2y", "c2", "r2"]
              + [f"mu1_d{k + 1}" for k in range(len(rep.deltas))] + ["u2max", "flags"])
    rows = [[r["t"], r["x1"][0], r["x1"][1], r["c1"], r["r1"], r["x2"][0], r["x2"][1],
             r["c2"], r["r2"], *r["mu1"], r["u2max"], "|".join(r["flags"])] for r in rep.rows]
    _, trend = rep.ratio_trend()
    extra = ["deltas=" + ";".join(repr(d) for d in rep.deltas),
             f"resolved_delta={rep.resolved_delta!r} status={res.record.status} "
             f"ratio_nondecreasing={trend}"]
    write_csv(_out(exp, "blowup.csv"), header, rows, exp.digest(), exp.n, extra)
    print(f"{res.record.status}: {len(rep.rows)} samples, flags {sorted(rep.flags) or 'none'}")
    return 0


def cmd_verify(exp):
    checks = run_suite(exp.flow_config(), exp.n, exp.seed)
    print(format_table(checks))
    return 0 if all(c.passed for c in checks) else 2


HANDLERS = {"flow": cmd_flow, "green": cmd_green, "mfe": cmd_mfe,
            "barrier": cmd_barrier, "blowup": cmd_blowup, "verify": cmd_verify}


def run_command(argv=None):
    """Parse ``argv``, run the command and return the exit code."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        overrides = list(args.set)
        if args.out_dir:
            overrides.append(f"out_dir = {args.out_dir}")
        exp = load_config(args.config, overrides)
        return HANDLERS[args.command](exp)
    except (ValidationError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_command())
