"""Mode schedules ``(sigma, tau)`` on a horizon ``[0, t_f]``."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

__all__ = ["Schedule", "ScheduleError", "canonicalize", "insert_mode", "MIN_INTERVAL"]

# intervals shorter than this are dropped; far below the 1e-8 s gaps the
# optimizer is expected to produce
MIN_INTERVAL = 1e-12


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Mode sequence ``sigma`` (modes numbered from 1) with switching times ``tau``.

    Mode ``sigma[i]`` is active on ``[tau[i-1], tau[i])`` with ``tau[-1] = 0``
    and ``tau[M-1] = t_f`` implied.
    """

    sigma: tuple[int, ...]
    tau: tuple[float, ...]
    t_f: float

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        tau = tuple(float(t) for t in self.tau)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "t_f", float(self.t_f))
        if not sigma:
            raise ScheduleError("empty mode sequence")
        if min(sigma) < 1:
            raise ScheduleError("modes are numbered from 1")
        if len(tau) != len(sigma) - 1:
            raise ScheduleError("need exactly one switching time per mode change")
        if not self.t_f > 0:
            raise ScheduleError("horizon must be positive")
        edges = self.edges
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ScheduleError("switching times must increase strictly inside (0, t_f)")

    @classmethod
    def constant(cls, mode: int, t_f: float) -> "Schedule":
        return cls((mode,), (), t_f)

    @property
    def M(self) -> int:
        return len(self.sigma)

    @property
    def edges(self) -> tuple[float, ...]:
        return (0.0, *self.tau, self.t_f)

    def intervals(self):
        """Yield ``(mode, start, stop)`` per interval."""
        e = self.edges
        for i, s in enumerate(self.sigma):
            yield s, e[i], e[i + 1]

    def mode_at(self, t: float) -> int:
        """Active mode at ``t``; right-continuous at switching times."""
        for s, a, b in self.intervals():
            if t < b:
                return s
        return self.sigma[-1]

    def is_canonical(self) -> bool:
        return all(a != b for a, b in zip(self.sigma, self.sigma[1:]))

    def restrict(self, t0: float, t1: float) -> "Schedule":
        """The part on ``[t0, t1]``, re-based so it starts at time 0."""
        pieces = [(s, max(a, t0) - t0, min(b, t1) - t0)
                  for s, a, b in self.intervals() if b > t0 and a < t1]
        return _from_pieces(pieces, t1 - t0)

    def shift(self, dt: float) -> "Schedule":
        """Drop the first ``dt`` seconds and hold the last mode over the freed tail."""
        pieces = [(s, max(a - dt, 0.0), b - dt) for s, a, b in self.intervals() if b > dt]
        s_last, a_last, _ = pieces[-1]
        pieces[-1] = (s_last, a_last, self.t_f)
        return _from_pieces(pieces, self.t_f)

    def to_dict(self) -> dict:
        return {"t_f": self.t_f, "sigma": list(self.sigma), "tau": list(self.tau)}

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(tuple(d["sigma"]), tuple(d.get("tau", ())), d["t_f"])

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Schedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _from_pieces(pieces, t_f: float) -> Schedule:
    """Build a canonical schedule from ``(mode, start, stop)`` triples covering [0, t_f]."""
    merged: list[list] = []
    for s, a, b in pieces:
        if b - a < MIN_INTERVAL:
            continue
        if merged and merged[-1][0] == s:
            merged[-1][2] = b
        else:
            merged.append([s, a, b])
    if not merged:
        # everything collapsed; keep the mode covering the longest span
        s = max(pieces, key=lambda p: p[2] - p[1])[0]
        return Schedule((s,), (), t_f)
    sigma = tuple(m[0] for m in merged)
    tau = tuple(m[1] for m in merged[1:])
    return Schedule(sigma, tau, t_f)


def canonicalize(sched: Schedule) -> Schedule:
    """Merge equal neighbours and drop intervals shorter than ``MIN_INTERVAL``."""
    return _from_pieces(list(sched.intervals()), sched.t_f)


def insert_mode(sched: Schedule, sigma: int, tau: float, lam: float) -> Schedule:
    """Run ``sigma`` on ``[tau - lam/2, tau + lam/2]``.

    Near the ends of the horizon the window slides inward so it keeps its
    full length ``lam``.
    """
    t_f = sched.t_f
    if not 0.0 <= tau <= t_f:
        raise ScheduleError(f"insertion time {tau} outside [0, {t_f}]")
    if not lam > 0:
        raise ScheduleError("insertion duration must be positive")
    if lam >= t_f:
        raise ScheduleError("insertion duration must be shorter than the horizon")
    a = tau - 0.5 * lam
    b = tau + 0.5 * lam
    if a < 0.0:
        a, b = 0.0, lam
    elif b > t_f:
        a, b = t_f - lam, t_f
    pieces = []
    for s, lo, hi in sched.intervals():
        if lo < a:
            pieces.append((s, lo, min(hi, a)))
        if hi > b:
            pieces.append((s, max(lo, b), hi))
    pieces.append((sigma, a, b))
    pieces.sort(key=lambda p: p[1])
    return _from_pieces(pieces, t_f)
