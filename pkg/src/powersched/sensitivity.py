"""Adjoint, mode insertion gradients and the optimality function theta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .network import ModeSet, _accel
from .simulate import CostConfig, Trajectory, running_cost_grad

__all__ = ["SensitivityField", "adjoint", "costate", "insertion_gradient", "switching_time_gradient", "theta",
           "sensitivity"]


class _TransposedJacobian:
    """Action of the transposed acceleration Jacobian at one state.

    Holds the state-dependent pieces so repeated products cost a single
    complex matrix-vector product.
    """

    __slots__ = ("modes", "Yc", "V", "rows", "self_b")

    def __init__(self, modes: ModeSet, sigma: int, delta: np.ndarray):
        self.modes = modes
        self.Yc = modes._Yc[sigma - 1]
        self.V = modes.E * np.exp(1j * np.insert(delta, modes.ref, 0.0))
        self.self_b = np.imag(self.Yc.diagonal()) * (modes.E * modes.E)
        self.rows = np.imag(self.V * (self.Yc @ np.conj(self.V))) - self.self_b

    def __call__(self, v: np.ndarray) -> np.ndarray:
        m = self.modes
        u = np.zeros(m.n_gen)
        u[m.nonref] = -m._scale * v
        off = np.imag(np.conj(self.V) * (self.Yc @ (self.V * u))) - self.self_b * u
        return (off - self.rows * u)[m.nonref]


def adjoint(traj: Trajectory, modes: ModeSet, cfg: CostConfig = CostConfig()) -> np.ndarray:
    """Costate samples on the trajectory grid, integrated backward from zero.

    Backward RK4 per grid step under that step's mode; the state at step
    midpoints is the linear interpolant of the neighbouring samples.
    """
    if traj.diverged:
        raise FloatingPointError(f"trajectory diverged at t={traj.diverged_at}")
    lgrad = running_cost_grad(traj.x, cfg)
    rho = _kernels.adjoint_sweep(traj.t, np.ascontiguousarray(traj.x), traj.step_modes.astype(np.int64),
                                 modes._G, modes._B, modes.E, modes._scale, modes.ref, lgrad)
    if not np.all(np.isfinite(rho)):
        bad = int(np.max(np.nonzero(~np.all(np.isfinite(rho), axis=1))[0]))
        raise FloatingPointError(f"adjoint became non-finite at t={traj.t[bad]}")
    return rho


def costate(t: np.ndarray, X: np.ndarray, step_modes: np.ndarray, vjp, lgrad: np.ndarray) -> np.ndarray:
    """Backward RK4 for ``rho' = -Df(x)^T rho - g`` with ``rho(t[-1]) = 0``.

    ``vjp(sigma, x, p)`` returns ``Df_sigma(x)^T p``; ``lgrad`` holds the cost
    gradient ``g`` at the grid points.  Midpoint states and gradients are
    linear interpolants.  Plain Python, so it serves any small system and
    cross-checks the compiled sweep.
    """
    n, dim = X.shape
    rho = np.zeros((n, dim))
    r = np.zeros(dim)
    for i in range(n - 2, -1, -1):
        sigma = int(step_modes[i])
        h = t[i + 1] - t[i]
        xm = 0.5 * (X[i] + X[i + 1])
        gm = 0.5 * (lgrad[i] + lgrad[i + 1])
        k1 = -vjp(sigma, X[i + 1], r) - lgrad[i + 1]
        k2 = -vjp(sigma, xm, r - 0.5 * h * k1) - gm
        k3 = -vjp(sigma, xm, r - 0.5 * h * k2) - gm
        k4 = -vjp(sigma, X[i], r - h * k3) - lgrad[i]
        r = r - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(r)):
            raise FloatingPointError(f"adjoint became non-finite at t={t[i]}")
        rho[i] = r
    return rho


def _adjoint_numpy(traj: Trajectory, modes: ModeSet, cfg: CostConfig = CostConfig()) -> np.ndarray:
    """Uncompiled twin of :func:`adjoint`, kept as a cross-check."""
    if traj.diverged:
        raise FloatingPointError(f"trajectory diverged at t={traj.diverged_at}")
    k = traj.x.shape[1] // 2

    def vjp(sigma, x, p):
        return np.concatenate((_TransposedJacobian(modes, sigma, x[:k])(p[k:]), p[:k]))

    return costate(traj.t, traj.x, traj.step_modes, vjp, running_cost_grad(traj.x, cfg))


def switching_time_gradient(traj: Trajectory, rho: np.ndarray, modes: ModeSet) -> np.ndarray:
    """``dJ/dT_i = rho(T_i)^T (f_before(x(T_i)) - f_after(x(T_i)))`` per switching time."""
    sched = traj.schedule
    k = traj.x.shape[1] // 2
    out = np.empty(len(sched.tau))
    for i, T in enumerate(sched.tau):
        j = int(np.searchsorted(traj.t, T))
        if j >= len(traj.t) or traj.t[j] != T:
            raise ValueError(f"switching time {T} is not a grid point")
        delta = traj.x[j, :k]
        diff = _accel(modes, sched.sigma[i], delta) - _accel(modes, sched.sigma[i + 1], delta)
        out[i] = float(rho[j, k:] @ diff)
    return out


def insertion_gradient(traj: Trajectory, rho: np.ndarray, modes: ModeSet) -> np.ndarray:
    """Insertion gradients ``d[k, s-1]`` for every grid time and mode ``s``.

    The mode active at a switching instant is the one that starts there.
    """
    k = traj.x.shape[1] // 2
    delta = traj.x[:, :k]
    acc = np.stack([_accel(modes, s, delta) for s in range(1, modes.n_modes + 1)])
    active = traj.point_modes - 1
    base = acc[active, np.arange(len(active))]
    return np.einsum("tk,stk->ts", rho[:, k:], acc - base[None])


def theta(d: np.ndarray, t: np.ndarray) -> tuple[float, int, float]:
    """Minimum insertion gradient with its mode (from 1) and time.

    Ties go to the earliest time, then the lowest mode.
    """
    d = np.asarray(d)
    if d.size == 0:
        raise ValueError("empty insertion-gradient field")
    flat = int(np.argmin(d))
    i, s = divmod(flat, d.shape[1])
    return float(d[i, s]), s + 1, float(t[i])


@dataclass(frozen=True, eq=False)
class SensitivityField:
    t: np.ndarray
    rho: np.ndarray
    d: np.ndarray
    theta: float
    sigma_star: int
    tau_star: float

    def to_csv(self, path) -> None:
        n = self.d.shape[1]
        with open(path, "w") as fh:
            fh.write(",".join(["t"] + [f"d_{s}" for s in range(1, n + 1)]) + "\n")
            for t, row in zip(self.t, self.d):
                fh.write(",".join([repr(float(t)), *map(repr, row.tolist())]) + "\n")


def sensitivity(traj: Trajectory, modes: ModeSet, cfg: CostConfig = CostConfig()) -> SensitivityField:
    rho = adjoint(traj, modes, cfg)
    d = insertion_gradient(traj, rho, modes)
    th, s, tau = theta(d, traj.t)
    return SensitivityField(traj.t, rho, d, th, s, tau)
