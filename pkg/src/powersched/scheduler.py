"""Insertion-gradient descent on mode schedules with backtracking.

Each iteration simulates the incumbent schedule and computes the insertion
gradient field and its minimum ``theta``.  A total insertion duration
``lam`` is chosen by backtracking from ``lambda0`` until the sufficient
descent test ``J' - J <= alpha * lam * theta`` holds.  Two ways of spending
``lam`` are offered:

``"single"``
    one window of length ``lam`` of the minimizing mode, centred on the
    minimizing time.
``"spread"``
    every stretch where some other mode's gradient lies below a common
    level switches to that mode, the level chosen so the switched stretches
    add up to ``lam``.  For small ``lam`` this collapses onto the single
    window around the minimizer, and it removes far more cost per step.

Candidates are canonicalized, so every iterate is a feasible schedule.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .network import ModeSet, _accel
from .schedule import MIN_INTERVAL, Schedule, _from_pieces, insert_mode
from .sensitivity import SensitivityField, sensitivity
from .simulate import DEFAULT_STEP, CostConfig, Trajectory, cost, simulate

__all__ = ["OptimizerConfig", "IterationRecord", "OptimizeResult", "step", "optimize", "write_history"]

log = logging.getLogger(__name__)

CONVERGED = "converged"
ACCEPTED = "accepted"
STALLED = "stalled"
FINAL = "final"


@dataclass(frozen=True)
class OptimizerConfig:
    """Backtracking and stopping parameters.

    ``lambda0=None`` means one tenth of the horizon.  The stopping test is
    ``|theta| <= theta_tol`` when ``theta_tol`` is set, otherwise
    ``|theta| <= theta_rtol * |theta_0|``.  Backtracking stalls after
    ``max_backtracks`` contractions or once ``lam`` drops below
    ``min_lambda``.
    """

    alpha: float = 0.4
    beta: float = 0.1
    lambda0: float | None = None
    max_backtracks: int = 40
    max_iter: int = 100
    theta_rtol: float = 1e-3
    theta_tol: float | None = None
    min_lambda: float = 10 * MIN_INTERVAL
    step: float = DEFAULT_STEP
    insertion: str = "spread"

    def __post_init__(self):
        if self.insertion not in ("single", "spread"):
            raise ValueError(f"unknown insertion rule {self.insertion!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.max_iter < 0 or self.max_backtracks < 0:
            raise ValueError("iteration limits must be non-negative")

    def initial_lambda(self, t_f: float) -> float:
        lam = 0.1 * t_f if self.lambda0 is None else self.lambda0
        # the insertion window must fit in the horizon
        return min(lam, 0.5 * t_f)


@dataclass(frozen=True)
class IterationRecord:
    """One optimizer iterate and the step taken from it.

    ``J``, ``theta`` and ``M`` describe the incumbent schedule.  ``lam`` is
    the accepted insertion duration (``None`` when no step was taken) and
    ``J_next`` the cost after the step and ``predicted`` its first-order
    estimate from the gradient field.  For a stall, ``lam`` is the last
    tried duration and ``margin`` how far the best trial missed the descent
    test.
    """

    k: int
    J: float
    theta: float
    M: int
    status: str
    lam: float | None = None
    sigma_star: int | None = None
    tau_star: float | None = None
    backtracks: int = 0
    J_next: float | None = None
    predicted: float | None = None
    margin: float | None = None
    wall_s: float = field(default=0.0, compare=False)


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    schedule: Schedule
    history: list[IterationRecord]
    trajectory: Trajectory
    status: str

    @property
    def J(self) -> float:
        return self.history[-1].J


def _evaluate(modes, sched, x0, cfg, step_size):
    traj = simulate(modes, sched, x0, step_size)
    return traj, cost(traj, cfg)


def _cell_gradients(traj: Trajectory, rho: np.ndarray, modes: ModeSet):
    """Best alternative mode per grid step with its gradient at both ends.

    Gradients are taken relative to the mode integrated on that step, so
    the right-end value differs from the next point's value at a switch.
    """
    k = traj.x.shape[1] // 2
    sig = traj.step_modes - 1
    n = len(sig)
    acc = np.stack([_accel(modes, s, traj.x[:, :k]) for s in range(1, modes.n_modes + 1)])
    lam = rho[:, k:]
    idx = np.arange(n)
    dl = np.einsum("tk,stk->st", lam[:-1], acc[:, :-1] - acc[sig, idx][None])
    dr = np.einsum("tk,stk->st", lam[1:], acc[:, 1:] - acc[sig, idx + 1][None])
    dl[sig, idx] = np.inf
    dr[sig, idx] = np.inf
    best = np.argmin(dl + dr, axis=0)
    return sig + 1, best + 1, dl[best, idx], dr[best, idx]


def _below(dl, dr, level, h):
    """Fraction of each step, under linear interpolation, where the gradient is below ``level``."""
    lo = np.minimum(dl, dr)
    hi = np.maximum(dl, dr)
    span = np.where(hi > lo, hi - lo, 1.0)
    frac = np.where(hi <= level, 1.0, np.where(lo >= level, 0.0, (level - lo) / span))
    return frac * h


def spread_insertion(traj: Trajectory, rho: np.ndarray, modes: ModeSet, lam: float,
                     bisections: int = 60) -> tuple[Schedule, float]:
    """Switch every stretch whose best gradient lies under a common level.

    The level is found by bisection so the switched measure is ``lam`` (or
    everything with negative gradient, if that is less).  Returns the
    canonical schedule and the first-order predicted cost change.
    """
    t = traj.t
    h = np.diff(t)
    sig, alt, dl, dr = _cell_gradients(traj, rho, modes)
    lo, hi = float(min(dl.min(), dr.min())), 0.0
    if lo >= 0.0:
        return traj.schedule, 0.0
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if _below(dl, dr, mid, h).sum() > lam:
            hi = mid
        else:
            lo = mid
    level = lo
    pieces = []
    pred = 0.0
    for i in range(len(sig)):
        a, b, l, r = t[i], t[i + 1], dl[i], dr[i]
        if l < level and r < level:
            u, v = a, b
        elif l < level:
            u, v = a, a + (level - l) / (r - l) * (b - a)
        elif r < level:
            u, v = a + (level - l) / (r - l) * (b - a), b
        else:
            pieces.append((int(sig[i]), a, b))
            continue
        if u > a:
            pieces.append((int(sig[i]), a, u))
        pieces.append((int(alt[i]), u, v))
        if v < b:
            pieces.append((int(sig[i]), v, b))
        du = l + (r - l) * (u - a) / (b - a)
        dv = l + (r - l) * (v - a) / (b - a)
        pred += 0.5 * (du + dv) * (v - u)
    return _from_pieces(pieces, traj.schedule.t_f), pred


def _candidate(sched, traj, field_, modes, lam, opt):
    if opt.insertion == "single":
        return insert_mode(sched, field_.sigma_star, field_.tau_star, lam), lam * field_.theta
    return spread_insertion(traj, field_.rho, modes, lam)


def _step(sched: Schedule, x0, modes: ModeSet, cfg: CostConfig, opt: OptimizerConfig,
          k: int = 0, traj: Trajectory | None = None, J: float | None = None,
          tol: float = 0.0) -> tuple[Schedule, IterationRecord, Trajectory, SensitivityField]:
    if traj is None:
        traj, J = _evaluate(modes, sched, x0, cfg, opt.step)
    if traj.diverged:
        raise FloatingPointError(f"incumbent schedule diverges at t={traj.diverged_at}")
    field_ = sensitivity(traj, modes, cfg)
    th = field_.theta
    base = IterationRecord(k=k, J=J, theta=th, M=sched.M, status=CONVERGED,
                           sigma_star=field_.sigma_star, tau_star=field_.tau_star)
    if th >= -tol:
        return sched, base, traj, field_

    lam = opt.initial_lambda(sched.t_f)
    best = None
    for n_back in range(opt.max_backtracks + 1):
        if lam < opt.min_lambda:
            break
        cand, pred = _candidate(sched, traj, field_, modes, lam, opt)
        cand_traj, cand_J = _evaluate(modes, cand, x0, cfg, opt.step)
        margin = (cand_J - J) - opt.alpha * lam * th
        if margin <= 0.0:
            rec = replace(base, status=ACCEPTED, lam=lam, backtracks=n_back, J_next=cand_J,
                          predicted=pred)
            return cand, rec, cand_traj, field_
        if best is None or margin < best[1]:
            best = (lam, margin)
        lam *= opt.beta
    rec = replace(base, status=STALLED, lam=None if best is None else best[0],
                  backtracks=n_back, margin=None if best is None else best[1])
    return sched, rec, traj, field_


def step(sched: Schedule, x0, modes: ModeSet, cfg: CostConfig = CostConfig(),
         opt: OptimizerConfig = OptimizerConfig(), tol: float = 0.0) -> tuple[Schedule, IterationRecord]:
    """One descent iteration; returns the new schedule and its record.

    ``tol`` is the absolute convergence threshold on ``|theta|``.
    """
    new, rec, _, _ = _step(sched, x0, modes, cfg, opt, tol=tol)
    return new, rec


def optimize(sched0: Schedule, x0, modes: ModeSet, cfg: CostConfig = CostConfig(),
             opt: OptimizerConfig = OptimizerConfig()) -> OptimizeResult:
    """Iterate :func:`step` until ``|theta|`` is small or ``max_iter`` steps are taken.

    The history has one record per visited iterate, so a run of ``n``
    accepted steps has ``n + 1`` records.
    """
    sched = sched0
    traj, J = _evaluate(modes, sched, x0, cfg, opt.step)
    history: list[IterationRecord] = []
    tol = opt.theta_tol if opt.theta_tol is not None else 0.0
    status = FINAL
    for k in range(opt.max_iter + 1):
        t0 = time.perf_counter()
        if k == opt.max_iter:
            field_ = sensitivity(traj, modes, cfg)
            history.append(IterationRecord(k=k, J=J, theta=field_.theta, M=sched.M, status=FINAL,
                                           sigma_star=field_.sigma_star, tau_star=field_.tau_star,
                                           wall_s=time.perf_counter() - t0))
            break
        new, rec, new_traj, _ = _step(sched, x0, modes, cfg, opt, k, traj, J, tol)
        if k == 0 and opt.theta_tol is None:
            tol = opt.theta_rtol * abs(rec.theta)
        rec = replace(rec, wall_s=time.perf_counter() - t0)
        history.append(rec)
        log.info("iter %d J=%.6g theta=%.6g M=%d %s", k, rec.J, rec.theta, rec.M, rec.status)
        if rec.status != ACCEPTED:
            status = rec.status
            break
        sched, traj, J = new, new_traj, rec.J_next
    return OptimizeResult(sched, history, traj, status)


HISTORY_COLUMNS = ("k", "J", "theta", "M", "lambda", "sigma_star", "tau_star", "backtracks")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_history(history, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for r in history:
            row = (r.k, r.J, r.theta, r.M, r.lam, r.sigma_star, r.tau_star, r.backtracks)
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def history_arrays(history) -> dict[str, np.ndarray]:
    return {
        "J": np.array([r.J for r in history]),
        "theta": np.array([r.theta for r in history]),
        "M": np.array([r.M for r in history]),
    }
