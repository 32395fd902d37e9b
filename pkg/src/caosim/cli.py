"""Command-line entry points.

Exit codes: 0 success, 1 usage, 2 configuration, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import glob
import json
import logging
import math
import os
import sys

import numpy as np

from . import checkpoint
from .config import ConfigError, RunConfig, load_config
from .diagnostics import CSV_FIELDS, blowup_monitor, h1_budget, initial_report
from .domain import HorizontalGrid, VerticalGrid
from .hstokes import ConvergenceError, DataError
from .interface import drag, relative_velocity
from .norms import boundary_space_norm, maxreg_norm
from .stepper import DragMode, Forcing, Scheme, StepConfig, StepFailure, Trajectory, initial_state, run

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("caosim")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Grids:
    def __init__(self, cfg: RunConfig):
        self.h = HorizontalGrid(cfg.nx, cfg.ny)
        self.a = VerticalGrid.atmosphere(cfg.nz_a, cfg.p_s)
        self.o = VerticalGrid.ocean(cfg.nz_o)


def step_config(cfg: RunConfig) -> StepConfig:
    return StepConfig(dt=cfg.dt, scheme=Scheme(cfg.scheme), picard_tol=cfg.picard_tol, picard_max=cfg.picard_max,
                      lam=cfg.lam, p_s=cfg.p_s, drag_mode=DragMode(cfg.drag_mode))


def forcing_fields(cfg: RunConfig, g: _Grids):
    return Forcing(cfg.forcing, cfg.forcing_amplitude, cfg.forcing_seed).fields(g.h, g.a, g.o)


def _snap_dir(out_dir):
    return os.path.join(out_dir, "snapshots")


def _snap_path(out_dir, step):
    return os.path.join(_snap_dir(out_dir), f"snap_{step:08d}.caos")


class _Writer:
    """Snapshots, budget rows and the final checkpoint at the configured cadence."""

    def __init__(self, cfg: RunConfig, append: bool):
        self.cfg = cfg
        os.makedirs(_snap_dir(cfg.out_dir), exist_ok=True)
        path = os.path.join(cfg.out_dir, "budgets.csv")
        fresh = not (append and os.path.exists(path))
        self.fh = open(path, "w" if fresh else "a", newline="", encoding="utf-8")
        self.csv = csv.writer(self.fh, lineterminator="\n")
        if fresh:
            self.csv.writerow(CSV_FIELDS)

    def rows(self, reports):
        for r in reports:
            self.csv.writerow([repr(float(x)) for x in r.csv_row()])

    def snapshot(self, step, state):
        checkpoint.save(_snap_path(self.cfg.out_dir, step), state, step, self.cfg.p_s)

    def on_step(self, n, state, reports):
        if n % self.cfg.output_every == 0:
            self.rows(reports)
            self.snapshot(n, state)

    def close(self, step, state):
        checkpoint.save(os.path.join(self.cfg.out_dir, "checkpoint.caos"), state, step, self.cfg.p_s)
        self.fh.close()


def _write_run_info(cfg: RunConfig):
    info = {"rng": "numpy PCG64", "init_seed": cfg.init_seed, "forcing_seed": cfg.forcing_seed,
            "checkpoint_version": checkpoint.VERSION}
    with open(os.path.join(cfg.out_dir, "run_info.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=1)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.out_dir:
        cfg = dataclasses.replace(cfg, out_dir=args.out_dir)
    g = _Grids(cfg)
    init = initial_state(cfg.init, g.h, g.a, g.o, cfg.init_amplitude, cfg.init_seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_run_info(cfg)
    w = _Writer(cfg, append=False)
    traj = Trajectory()
    try:
        w.rows([initial_report(init.spectral())])
        w.snapshot(0, init.spectral())
        traj = run(init, step_config(cfg), cfg.t_end, forcing_fields(cfg, g), cfg.output_every, 0, w.on_step)
    finally:
        final = traj.final if traj.states else init.spectral()
        w.close(traj.steps[-1] if traj.steps else 0, final)
    print(f"run finished: t = {traj.final.t:.6g}, E = {traj.budgets[-1].E:.6e}, out_dir = {cfg.out_dir}")
    return EXIT_OK


def cmd_resume(args) -> int:
    cfg = load_config(args.config)
    if args.out_dir:
        cfg = dataclasses.replace(cfg, out_dir=args.out_dir)
    ck = checkpoint.load(args.checkpoint)
    hg = ck.state.hgrid
    if (hg.nx, hg.ny, ck.state.va.vgrid.nz, ck.state.vo.vgrid.nz) != (cfg.nx, cfg.ny, cfg.nz_a, cfg.nz_o):
        raise ConfigError("checkpoint grid does not match the configuration")
    if ck.p_s != cfg.p_s:
        raise ConfigError("checkpoint p_s does not match the configuration")
    g = _Grids(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    w = _Writer(cfg, append=True)
    traj = Trajectory()
    try:
        traj = run(ck.state, step_config(cfg), args.t_end, forcing_fields(cfg, g), cfg.output_every, ck.step,
                   w.on_step)
    finally:
        final = traj.final if traj.states else ck.state
        w.close(traj.steps[-1] if traj.steps else ck.step, final)
    print(f"resume finished: t = {traj.final.t:.6g}, out_dir = {cfg.out_dir}")
    return EXIT_OK


def load_snapshots(run_dir):
    paths = sorted(glob.glob(os.path.join(_snap_dir(run_dir), "snap_*.caos")))
    if not paths:
        raise FileNotFoundError(f"no snapshots under {run_dir}")
    cks = [checkpoint.load(p) for p in paths]
    return Trajectory([c.state for c in cks], [c.step for c in cks], [])


def cmd_diagnose(args) -> int:
    cfg = load_config(os.path.join(args.run_dir, "config.txt"))
    g = _Grids(cfg)
    traj = load_snapshots(args.run_dir)
    scfg = step_config(cfg)
    forcing = forcing_fields(cfg, g)
    out = os.path.join(args.run_dir, "diagnose.csv")
    worst_residual, worst_repro = 0.0, 0.0
    with open(out, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_FIELDS)
        for i in range(len(traj.states) - 1):
            s0, s1 = traj.states[i], traj.states[i + 1]
            seg = run(s0, scfg, traj.steps[i + 1] * cfg.dt, forcing, 1, traj.steps[i])
            for r in seg.budgets[1:]:
                wr.writerow([repr(float(x)) for x in r.csv_row()])
                worst_residual = max(worst_residual, r.relative_residual())
            diff = max(float(np.max(np.abs(seg.final.va.coeffs() - s1.va.coeffs()))),
                       float(np.max(np.abs(seg.final.vo.coeffs() - s1.vo.coeffs()))))
            worst_repro = max(worst_repro, diff)
    mon = blowup_monitor(traj, args.p, args.q)
    h1 = h1_budget(traj)
    print(f"snapshots: {len(traj.states)}  (t = {traj.states[0].t:.6g} .. {traj.states[-1].t:.6g})")
    print(f"max relative budget residual: {worst_residual:.3e}")
    print(f"max snapshot reproduction difference: {worst_repro:.3e}")
    print(f"blow-up monitor (p={args.p:g}, q={args.q:g}, mu_c={mon.mu_c:.4g}): {mon.final:.6e}")
    print(f"sup H1^2: {h1.sup_h1[-1]:.6e}   int ||Delta v||^2: {h1.int_laplace[-1]:.6e}")
    print(f"budgets written to {out}")
    return EXIT_OK if worst_repro == 0.0 else EXIT_NUMERICAL


def _parse_spec(text):
    try:
        p, q, mu = (float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected p,q,mu (got {text!r})") from None
    return p, q, mu


def cmd_norms(args) -> int:
    traj = load_snapshots(args.run_dir)
    states = [s for s in traj.states if s.t > 0]
    if len(states) < 3:
        raise ValueError("need at least three snapshots with t > 0")
    times = np.array([s.t for s in states])
    hg = states[0].hgrid
    B = np.stack([drag(relative_velocity(s)).values() for s in states])
    va = [s.va for s in states]
    vo = [s.vo for s in states]
    print(f"{'p':>6} {'q':>6} {'mu':>6} {'F_part':>13} {'LpB_part':>13} {'boundary':>13} {'E1_a':>13} {'E1_o':>13}")
    for p, q, mu in args.spec or [(4.0, 2.0, 1.0)]:
        fp, bp = boundary_space_norm(B, times, p, q, mu, hg)
        ea = maxreg_norm(va, times, p, q, mu, hg, va[0].vgrid)
        eo = maxreg_norm(vo, times, p, q, mu, hg, vo[0].vgrid)
        print(f"{p:6g} {q:6g} {mu:6g} {fp:13.6e} {bp:13.6e} {fp + bp:13.6e} {ea:13.6e} {eo:13.6e}")
    return EXIT_OK


def cmd_mms(args) -> int:
    from . import mms

    if args.case not in mms.CASES:
        raise ConfigError(f"unknown case {args.case!r}; choose from " + ", ".join(mms.CASES))
    case = mms.CASES[args.case]
    if args.case.startswith("temporal"):
        dts = [0.1 / 2**j for j in range(args.refine)]
        rows, label = mms.time_sweep(case, args.scheme, dts), "dt"
    elif args.case.startswith("horizontal"):
        rows, label = mms.horizontal_sweep(case, [8 * 2**j for j in range(args.refine)]), "nx"
    else:
        rows, label = mms.vertical_sweep(case, args.refine), "nz"
    print(f"case {case.name}")
    print(f"{label:>10} {'max error':>14} {'ratio':>8}")
    for r in rows:
        ratio = "" if math.isnan(r.ratio) else f"{r.ratio:8.3f}"
        print(f"{r.resolution:10g} {r.error:14.6e} {ratio:>8}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="caosim", description="Coupled atmosphere-ocean primitive equations simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a simulation from a config file")
    p.add_argument("config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue from a checkpoint to a new end time")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("diagnose", help="recompute budgets from stored snapshots")
    p.add_argument("run_dir")
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--q", type=float, default=2.0)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("norms", help="norm table for a stored path")
    p.add_argument("run_dir")
    p.add_argument("--spec", type=_parse_spec, action="append", help="p,q,mu (repeatable)")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("mms", help="manufactured-solution convergence ladder")
    p.add_argument("--case", default="linear-ocean")
    p.add_argument("--refine", type=int, default=3)
    p.add_argument("--scheme", choices=("backward_euler", "crank_nicolson"), default="backward_euler")
    p.set_defaults(func=cmd_mms)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, ConvergenceError, DataError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
