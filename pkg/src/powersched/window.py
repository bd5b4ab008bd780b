"""Receding-horizon scheduling: optimize a window, apply its head, advance."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .network import ModeSet
from .schedule import Schedule, _from_pieces
from .scheduler import ACCEPTED, CONVERGED, OptimizerConfig, _evaluate, _step
from .simulate import CostConfig, Trajectory, running_cost, simulate

__all__ = ["WindowConfig", "WindowRecord", "WindowResult", "run", "n_windows", "write_records",
           "write_comparison"]


@dataclass(frozen=True)
class WindowConfig:
    T: float = 5.0
    dt: float = 0.1
    D: float = 10.0
    iterations: int = 1

    def __post_init__(self):
        if not 0 < self.dt < self.T:
            raise ValueError("need 0 < dt < T")
        if not self.D > 0:
            raise ValueError("D must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


def n_windows(win: WindowConfig) -> int:
    # the small slack absorbs D/dt landing a rounding error above an integer
    return max(1, math.ceil(win.D / win.dt - 1e-9))


@dataclass(frozen=True)
class WindowRecord:
    i: int
    t_i: float
    J_before: float
    J_after: float
    theta: float
    status: str
    wall_ms: float


@dataclass(frozen=True, eq=False)
class WindowResult:
    """Applied schedule and trajectory on ``[0, D]`` plus per-window data.

    ``starts[i]`` is the state window ``i`` was optimized from and
    ``boundaries[i]`` its grid index in ``trajectory``.
    """

    schedule: Schedule
    trajectory: Trajectory
    records: list[WindowRecord]
    starts: np.ndarray
    boundaries: np.ndarray

    @property
    def wall_ms(self) -> np.ndarray:
        return np.array([r.wall_ms for r in self.records])


def run(x0, modes: ModeSet, cfg: CostConfig = CostConfig(), opt: OptimizerConfig = OptimizerConfig(),
        win: WindowConfig = WindowConfig()) -> WindowResult:
    """Sliding-window control over ``[0, D]``.

    Each window starts from the state the previous head ended in, so the
    applied trajectory is continuous bit for bit.  A stalled window keeps
    its incumbent schedule.
    """
    x = np.array(x0, dtype=float)
    tol = opt.theta_tol if opt.theta_tol is not None else 0.0
    incumbent = Schedule.constant(1, win.T)
    pieces, ts, xs, ms, records = [], [np.zeros(1)], [x[None]], [], []
    starts, boundaries, n_pts = [], [], 1
    for i in range(n_windows(win)):
        starts.append(x)
        boundaries.append(n_pts - 1)
        t_i = i * win.dt
        clock = time.perf_counter()
        traj, J = _evaluate(modes, incumbent, x, cfg, opt.step)
        J_before, theta, status = J, 0.0, CONVERGED
        for k in range(win.iterations):
            incumbent, rec, traj, _ = _step(incumbent, x, modes, cfg, opt, k, traj, J, tol)
            theta, status = rec.theta, rec.status
            if rec.status != ACCEPTED:
                break
            J = rec.J_next
        wall_ms = 1e3 * (time.perf_counter() - clock)
        records.append(WindowRecord(i, t_i, J_before, J, theta, status, wall_ms))

        h = min(win.dt, win.D - t_i)
        head = incumbent.restrict(0.0, h)
        part = simulate(modes, head, x, opt.step)
        if part.diverged:
            raise FloatingPointError(f"applied trajectory diverged at t={t_i + part.diverged_at}")
        pieces.extend((s, t_i + a, t_i + b) for s, a, b in head.intervals())
        ts.append(t_i + part.t[1:])
        xs.append(part.x[1:])
        ms.append(part.step_modes)
        n_pts += len(part.t) - 1
        x = part.x[-1]
        incumbent = incumbent.shift(win.dt)

    sched = _from_pieces(pieces, win.D)
    traj = Trajectory(np.concatenate(ts), np.concatenate(xs), sched, np.concatenate(ms))
    return WindowResult(sched, traj, records, np.array(starts), np.array(boundaries))


def write_records(records, path, timings: bool = True) -> None:
    """Per-window CSV; ``timings=False`` blanks the wall-clock column for reproducible output."""
    with open(path, "w") as fh:
        fh.write("i,t_i,J_before,J_after,theta,wall_ms\n")
        for r in records:
            wall = f"{r.wall_ms:.3f}" if timings else ""
            fh.write(f"{r.i},{r.t_i!r},{r.J_before!r},{r.J_after!r},{r.theta!r},{wall}\n")


def write_comparison(controlled: Trajectory, uncontrolled: Trajectory, path,
                     cfg: CostConfig = CostConfig()) -> None:
    """Running cost of both runs on the controlled grid.

    The uncontrolled cost is linearly interpolated onto that grid.
    """
    ell_c = running_cost(controlled.x, cfg)
    ell_u = np.interp(controlled.t, uncontrolled.t, running_cost(uncontrolled.x, cfg))
    with open(path, "w") as fh:
        fh.write("t,ell_controlled,ell_uncontrolled\n")
        for t, a, b in zip(controlled.t, ell_c, ell_u):
            fh.write(f"{float(t)!r},{float(a)!r},{float(b)!r}\n")
