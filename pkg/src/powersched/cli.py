"""Command-line driver: ``simulate``, ``schedule``, ``window`` and ``design``."""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .case import CaseData, bundled_case_path, bundled_placement_path, load_case
from .config import Experiment, resolve
from .design import correlate, random_placement, sweep, write_scatter, write_sweep
from .network import Placement, build_modes, perturb
from .schedule import Schedule
from .scheduler import optimize, write_history
from .simulate import cost, running_cost, simulate
from . import window

log = logging.getLogger("powersched")


def _add_global(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--case", help="case file (IEEE CDF or native); default: bundled 118-bus case")
    g.add_argument("--placement", help="placement file, one branch index per line")
    g.add_argument("--seed", type=int, help="disturbance seed (default 1)")
    g.add_argument("--out", default=".", help="output directory (default: current)")
    g.add_argument("--jobs", type=int, help="worker processes for design sweeps")
    g.add_argument("--config", help="YAML or JSON config file")
    g.add_argument("--no-timestamp", action="store_true", help="omit the time stamp and wall-clock columns so outputs are byte-reproducible")
    g.add_argument("-v", "--verbose", action="store_true")


def _add_disturbance(p: argparse.ArgumentParser) -> None:
    p.add_argument("--range", type=float, dest="range_", help="phase disturbance half-width in rad (default 0.3)")
    p.add_argument("--horizon", type=float, help="horizon t_f in seconds (default 5)")
    p.add_argument("--step", type=float, help="integration step in seconds (default 1e-3)")
    x = p.add_mutually_exclusive_group()
    x.add_argument("--equilibrium", action="store_true", help="start from the zero state")
    x.add_argument("--x0", help="file with the initial state, whitespace separated")


def _add_optimizer(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int, help="optimizer iteration cap (default 100)")
    p.add_argument("--alpha", type=float, help="sufficient descent factor (default 0.4)")
    p.add_argument("--beta", type=float, help="backtracking factor (default 0.1)")
    p.add_argument("--insertion", choices=("single", "spread"), help="insertion rule (default spread)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="powersched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one schedule and report its cost")
    _add_global(p)
    _add_disturbance(p)
    p.add_argument("--schedule", help="schedule JSON; default: mode 1 throughout")

    p = sub.add_parser("schedule", help="optimize the schedule over one horizon")
    _add_global(p)
    _add_disturbance(p)
    _add_optimizer(p)

    p = sub.add_parser("window", help="sliding-window control")
    _add_global(p)
    _add_disturbance(p)
    _add_optimizer(p)
    p.add_argument("--T", type=float, dest="T", help="window length in seconds (default 5)")
    p.add_argument("--dt", type=float, help="applied part of each window in seconds (default 0.1)")
    p.add_argument("--D", type=float, dest="D", help="total controlled duration in seconds (default 10)")
    p.add_argument("--per-window", type=int, help="optimizer iterations per window (default 1)")

    p = sub.add_parser("design", help="random placement sweep")
    _add_global(p)
    _add_disturbance(p)
    _add_optimizer(p)
    p.add_argument("--n-designs", type=int, help="number of distinct placements (default 20)")
    p.add_argument("--design-seed", type=int, help="first placement seed (default 0)")
    p.add_argument("--with-optimal", action="store_true", default=None, help="also optimize every design")
    p.add_argument("--candidates", choices=("generator", "adjacent"), help="eligible lines (default adjacent)")
    return parser


def _overrides(args) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    ov = {
        "case": args.case, "placement": args.placement, "seed": args.seed, "jobs": args.jobs,
        "range": get("range_"), "horizon": get("horizon"), "step": get("step"),
        "optimizer": {"max_iter": get("iterations"), "alpha": get("alpha"), "beta": get("beta"),
                      "insertion": get("insertion")},
        "window": {"T": get("T"), "dt": get("dt"), "D": get("D"), "iterations": get("per_window")},
        "design": {"n_designs": get("n_designs"), "seed": get("design_seed"),
                   "with_optimal": get("with_optimal"), "candidates": get("candidates")},
    }
    return ov


def _load(exp: Experiment) -> tuple[CaseData, Placement]:
    case_path = Path(exp.case) if exp.case else bundled_case_path()
    case = load_case(case_path)
    if exp.placement:
        placement = Placement.read(exp.placement)
    elif exp.case is None:
        placement = Placement.read(bundled_placement_path())
    else:
        placement = random_placement(case, 0, exp.design["candidates"])
        log.info("no placement given; drew one with seed 0 (%d lines)", len(placement))
    return case, placement


def _initial_state(args, exp: Experiment, n_state: int) -> np.ndarray:
    if args.equilibrium:
        return np.zeros(n_state)
    if args.x0:
        x0 = np.loadtxt(args.x0, dtype=float, ndmin=1)
        if x0.shape != (n_state,):
            raise ValueError(f"{args.x0}: expected {n_state} values, found {x0.size}")
        return x0
    return perturb(np.zeros(n_state), exp.range, exp.seed)


def _summary(out: Path, args, data: dict) -> None:
    if not args.no_timestamp:
        data = {"generated": datetime.datetime.now().isoformat(timespec="seconds"), **data}
    (out / "summary.json").write_text(json.dumps(data, indent=2) + "\n")


def cmd_simulate(args, exp: Experiment, out: Path) -> dict:
    case, placement = _load(exp)
    modes = build_modes(case, placement, exp.dynamics)
    sched = Schedule.load(args.schedule) if args.schedule else Schedule.constant(1, exp.horizon)
    x0 = _initial_state(args, exp, modes.n_state)
    traj = simulate(modes, sched, x0, exp.step)
    traj.to_csv(out / "trajectory.csv")
    ell = running_cost(traj.x, exp.cost)
    result = {"J": cost(traj, exp.cost), "t_end": float(traj.t[-1]), "diverged_at": traj.diverged_at,
              "max_norm": float(np.max(np.linalg.norm(traj.x, axis=1))),
              "ell_start": float(ell[0]), "ell_end": float(ell[-1]), "ell_max": float(np.max(ell)),
              "M": sched.M}
    _summary(out, args, result)
    return result


def cmd_schedule(args, exp: Experiment, out: Path) -> dict:
    case, placement = _load(exp)
    modes = build_modes(case, placement, exp.dynamics)
    x0 = _initial_state(args, exp, modes.n_state)
    res = optimize(Schedule.constant(1, exp.horizon), x0, modes, exp.cost, exp.optimizer)
    res.schedule.dump(out / "schedule.json")
    write_history(res.history, out / "history.csv")
    h0, hN = res.history[0], res.history[-1]
    result = {"status": res.status, "iterations": hN.k, "J0": h0.J, "J": hN.J, "theta0": h0.theta,
              "theta": hN.theta, "M": hN.M}
    _summary(out, args, result)
    return result


def cmd_window(args, exp: Experiment, out: Path) -> dict:
    case, placement = _load(exp)
    modes = build_modes(case, placement, exp.dynamics)
    x0 = _initial_state(args, exp, modes.n_state)
    win = exp.window
    res = window.run(x0, modes, exp.cost, exp.optimizer, win)
    free = simulate(modes, Schedule.constant(1, win.D), x0, exp.step)
    res.schedule.dump(out / "applied_schedule.json")
    window.write_comparison(res.trajectory, free, out / "comparison.csv", exp.cost)
    window.write_records(res.records, out / "windows.csv", timings=not args.no_timestamp)
    ell_c = running_cost(res.trajectory.x, exp.cost)
    ell_u = running_cost(free.x, exp.cost)
    result = {"windows": len(res.records), "M": res.schedule.M,
              "ell_end_controlled": float(ell_c[-1]), "ell_end_uncontrolled": float(ell_u[-1]),
              "mean_ell_controlled": cost(res.trajectory, exp.cost) / win.D,
              "mean_ell_uncontrolled": cost(free, exp.cost) / win.D,
              "stalled_windows": sum(r.status == "stalled" for r in res.records)}
    _summary(out, args, result)
    return result


def cmd_design(args, exp: Experiment, out: Path) -> dict:
    case, _ = _load(exp)
    d = exp.design
    n_state = 2 * (len(case.generators) - 1)
    x0 = _initial_state(args, exp, n_state)
    records = sweep(case, x0, exp.cost, exp.optimizer, n_designs=d["n_designs"], seed=d["seed"],
                    with_optimal=bool(d["with_optimal"]), jobs=exp.jobs, candidates=d["candidates"],
                    dynparams=exp.dynamics, t_f=exp.horizon)
    write_sweep(records, out / "sweep.csv")
    pdir = out / "placements"
    pdir.mkdir(exist_ok=True)
    for r in records:
        r.placement.write(pdir / f"design_{r.design_id:03d}.txt")
    result = {"designs": len(records), "diverged": sum(r.diverged for r in records), "spearman": None}
    if d["with_optimal"]:
        try:
            pairs, rho = correlate(records)
        except ValueError as exc:
            log.warning("%s", exc)
        else:
            write_scatter(pairs, out / "scatter.csv")
            result["spearman"] = rho
    _summary(out, args, result)
    return result


COMMANDS = {"simulate": cmd_simulate, "schedule": cmd_schedule, "window": cmd_window, "design": cmd_design}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exp = resolve(args.config, _overrides(args))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](args, exp, out)
    except (OSError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"powersched {args.command}: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
