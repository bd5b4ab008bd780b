"""Switched trajectories, running cost and the regulation objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .network import ModeSet, _accel
from .schedule import Schedule

__all__ = [
    "CostConfig",
    "Trajectory",
    "simulate",
    "running_cost",
    "running_cost_grad",
    "phase_spread",
    "cost",
    "feasibility_residual",
    "integration_error",
    "DIVERGENCE_BOUND",
]

DIVERGENCE_BOUND = 1e6
DEFAULT_STEP = 1e-3


@dataclass(frozen=True)
class CostConfig:
    phase_weight: float = 0.5
    speed_weight: float = 1.0 / 40.0
    fs_hz: float = 60.0

    def __post_init__(self):
        if self.phase_weight < 0 or self.speed_weight < 0:
            raise ValueError("cost weights must be non-negative")

    def scaled(self, c: float) -> "CostConfig":
        return CostConfig(self.phase_weight * c, self.speed_weight * c, self.fs_hz)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled switched trajectory.

    ``step_modes[k]`` is the mode integrated on ``[t[k], t[k+1]]``.  Every
    switching time of ``schedule`` is a grid point.  If the state left the
    divergence bound the arrays stop there and ``diverged_at`` holds the
    time.
    """

    t: np.ndarray
    x: np.ndarray
    schedule: Schedule
    step_modes: np.ndarray
    diverged_at: float | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def point_modes(self) -> np.ndarray:
        """Active mode at each grid point (right-continuous)."""
        if len(self.step_modes) == 0:
            return np.array([self.schedule.sigma[-1]])
        return np.append(self.step_modes, self.step_modes[-1])

    def to_csv(self, path) -> None:
        k = self.x.shape[1] // 2
        cols = ["t"] + [f"delta_{i}" for i in range(1, k + 1)] + [f"omega_{i}" for i in range(1, k + 1)]
        cols.append("mode")
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for t, x, m in zip(self.t, self.x, self.point_modes):
                fh.write(",".join([repr(float(t)), *map(repr, x.tolist()), str(int(m))]) + "\n")


def _field(modes: ModeSet, sigma: int, k: int):
    def f(x):
        return np.concatenate((x[k:], _accel(modes, sigma, x[:k])))
    return f


def _rk4(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _segment_steps(a: float, b: float, step: float) -> list[float]:
    """Grid on [a, b]: uniform from ``a`` with the last step shortened to land on ``b``."""
    n = max(1, math.ceil((b - a) / step - 1e-9))
    return [a + i * step for i in range(n)] + [b]


def simulate(modes: ModeSet, sched: Schedule, x0, step: float = DEFAULT_STEP) -> Trajectory:
    """Fixed-step RK4 under ``sched``; steps never straddle a switching time."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.array(x0, dtype=float)
    if x.shape != (modes.n_state,):
        raise ValueError(f"initial state has shape {x.shape}, expected ({modes.n_state},)")
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("non-finite initial state")
    if max(sched.sigma) > modes.n_modes:
        raise ValueError("schedule uses a mode the mode set does not have")
    ts, xs, ms = [np.zeros(1)], [x[None]], []
    diverged = None
    for sigma, a, b in sched.intervals():
        grid = np.array(_segment_steps(a, b, step))
        hs = np.diff(grid)
        out, n_done = _kernels.rk4_sweep(xs[-1][-1], hs, modes._G[sigma - 1], modes._B[sigma - 1], modes.E,
                                         modes.P_m, modes._scale, modes.ref, DIVERGENCE_BOUND)
        ts.append(grid[1:n_done + 1])
        xs.append(out[:n_done])
        ms.append(np.full(n_done, sigma, dtype=int))
        if n_done < len(hs):
            diverged = float(grid[n_done + 1])
            break
    ts, xs = np.concatenate(ts), np.concatenate(xs)
    ms = np.concatenate(ms) if ms else np.zeros(0, dtype=int)
    return Trajectory(ts, xs, sched, ms, diverged)


def phase_spread(phases: np.ndarray) -> np.ndarray:
    """Squared deviation of phases from their mean (all machines given)."""
    dev = phases - phases.mean(axis=-1, keepdims=True)
    return np.sum(dev * dev, axis=-1)


def running_cost(x: np.ndarray, cfg: CostConfig = CostConfig()) -> np.ndarray | float:
    """Regulation running cost for a state or a batch of states.

    The phase mean includes the reference machine at zero phase; ``omega``
    is already a deviation from synchronous speed.
    """
    x = np.asarray(x, dtype=float)
    k = x.shape[-1] // 2
    phases = np.concatenate([x[..., :k], np.zeros(x.shape[:-1] + (1,))], axis=-1)
    om = x[..., k:]
    val = cfg.phase_weight * phase_spread(phases) + cfg.speed_weight * np.sum(om * om, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def running_cost_grad(x: np.ndarray, cfg: CostConfig = CostConfig()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = x.shape[-1] // 2
    d = x[..., :k]
    mean = d.sum(axis=-1, keepdims=True) / (k + 1)
    return np.concatenate([2.0 * cfg.phase_weight * (d - mean), 2.0 * cfg.speed_weight * x[..., k:]], axis=-1)


def cost(traj: Trajectory, cfg: CostConfig = CostConfig()) -> float:
    """Trapezoid integral of the running cost; ``inf`` for diverged runs."""
    if len(traj.t) == 0:
        raise ValueError("empty trajectory")
    if traj.diverged:
        return math.inf
    if len(traj.t) == 1:
        return 0.0
    ell = running_cost(traj.x, cfg)
    return float(np.sum(0.5 * (ell[1:] + ell[:-1]) * np.diff(traj.t)))


def feasibility_residual(traj: Trajectory, modes: ModeSet) -> float:
    """Max-norm defect of the integral form of the switched dynamics.

    Each grid step is halved: the midpoint state comes from a fresh RK4
    half-step and the vector field is integrated by Simpson's rule, then the
    accumulated integral is compared against the stored samples.
    """
    k = modes.n_gen - 1
    x0 = traj.x[0]
    acc = np.zeros_like(x0)
    worst = 0.0
    for i, sigma in enumerate(traj.step_modes):
        f = _field(modes, int(sigma), k)
        h = traj.t[i + 1] - traj.t[i]
        xa, xb = traj.x[i], traj.x[i + 1]
        xm = _rk4(f, xa, 0.5 * h)
        acc = acc + (h / 6.0) * (f(xa) + 4.0 * f(xm) + f(xb))
        worst = max(worst, float(np.max(np.abs(xb - x0 - acc))))
    return worst


def integration_error(modes: ModeSet, sched: Schedule, x0, step: float = DEFAULT_STEP) -> float:
    """Step-halving estimate of the global integration error (max norm).

    Compares the run at ``step`` with one at ``step / 2`` on the shared grid
    points; this is the tolerance scale for :func:`feasibility_residual`.
    """
    a = simulate(modes, sched, x0, step)
    b = simulate(modes, sched, x0, 0.5 * step)
    if a.diverged or b.diverged:
        return math.inf
    idx = np.minimum(np.searchsorted(b.t, a.t), len(b.t) - 1)
    shared = np.abs(b.t[idx] - a.t) <= 1e-12 * max(1.0, sched.t_f)
    return float(np.max(np.abs(a.x[shared] - b.x[idx[shared]])))
