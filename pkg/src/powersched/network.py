"""Classical multimachine model with switched series capacitors.

Generators are constant voltages behind transient reactance, loads are
constant impedances, and the network is Kron-reduced onto the generator
internal nodes.  One generator is the reference and is held at zero phase
and synchronous speed; the state holds the phases and speed deviations of
the remaining machines::

    x = [delta_1 .. delta_K, omega_1 .. omega_K]

Mode 1 has every switched capacitor off, mode 2 has them all on (the
reactance of each switched line doubles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .case import CaseData

__all__ = [
    "NetworkError",
    "Placement",
    "DynParams",
    "ModeSet",
    "generator_links",
    "check_coverage",
    "build_admittance",
    "kron_reduce",
    "reduce_network",
    "build_modes",
    "electrical_power",
    "power_jacobian",
    "dynamics",
    "accel_jacobian",
    "accel_jacobian_T",
    "dynamics_jacobian",
    "zero_state",
    "perturb",
]

KRON_COND_LIMIT = 1e12


class NetworkError(ValueError):
    """Invalid network data, placement or numerically singular reduction."""


@dataclass(frozen=True)
class Placement:
    """Branch indices (into ``CaseData.branches``) carrying a switched capacitor."""

    lines: tuple[int, ...]

    def __post_init__(self):
        lines = tuple(int(k) for k in self.lines)
        if len(set(lines)) != len(lines):
            raise NetworkError("placement has duplicate branch indices")
        object.__setattr__(self, "lines", lines)

    def __len__(self):
        return len(self.lines)

    @classmethod
    def read(cls, path) -> "Placement":
        with open(path) as fh:
            return cls(tuple(int(tok) for tok in fh.read().split()))

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("".join(f"{k}\n" for k in self.lines))


def generator_links(case: CaseData) -> list[frozenset[int]]:
    """For each branch, the generator buses it links to another generator.

    Two generators are adjacent when some path joins their buses without
    passing through a third generator bus.  A branch incident to generator
    bus ``g`` links ``g`` when its other end is another generator bus, or a
    load bus from which another generator is reachable through load buses
    only.
    """
    gens = set(case.generator_buses)
    adj: dict[int, set[int]] = {b.id: set() for b in case.buses}
    for br in case.branches:
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)

    # generators touching each connected component of load buses
    touching: dict[int, frozenset[int]] = {}
    for b in case.buses:
        if b.id in gens or b.id in touching:
            continue
        comp, frontier, found = {b.id}, [b.id], set()
        while frontier:
            u = frontier.pop()
            for v in adj[u]:
                if v in gens:
                    found.add(v)
                elif v not in comp:
                    comp.add(v)
                    frontier.append(v)
        for u in comp:
            touching[u] = frozenset(found)

    links = []
    for br in case.branches:
        linked = set()
        for g, other in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
            if g not in gens or g == other:
                continue
            if other in gens or touching[other] - {g}:
                linked.add(g)
        links.append(frozenset(linked))
    return links


def check_coverage(case: CaseData, placement: Placement) -> None:
    """Raise unless every generator is linked through a switched line."""
    n = len(case.branches)
    for k in placement.lines:
        if not 0 <= k < n:
            raise NetworkError(f"placement branch index {k} out of range")
    links = generator_links(case)
    covered = set()
    for k in placement.lines:
        covered |= links[k]
    missing = sorted(set(case.generator_buses) - covered)
    if missing:
        raise NetworkError(f"placement leaves generators uncovered: {missing}")


def build_admittance(case: CaseData, placement: Placement | None = None, switch_on: bool = False,
                     ) -> np.ndarray:
    """Bus admittance matrix with constant-impedance loads folded in.

    With ``switch_on`` every placed branch has its series reactance doubled.
    """
    n = case.n_bus
    idx = case.bus_index
    Y = np.zeros((n, n), dtype=complex)
    doubled = set(placement.lines) if (switch_on and placement is not None) else set()
    for k, br in enumerate(case.branches):
        x = 2.0 * br.x if k in doubled else br.x
        if br.r == 0.0 and x == 0.0:
            raise NetworkError(f"branch {k} has zero impedance")
        ys = 1.0 / complex(br.r, x)
        ysh = 0.5j * br.b
        t = br.tap
        f, to = idx[br.from_bus], idx[br.to_bus]
        Y[f, f] += (ys + ysh) / (t * t)
        Y[to, to] += ys + ysh
        Y[f, to] -= ys / t
        Y[to, f] -= ys / t
    for k, b in enumerate(case.buses):
        Y[k, k] += complex(b.g_shunt, b.b_shunt) + complex(b.p_load, -b.q_load)
    return Y


def kron_reduce(Y: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Schur complement of ``Y`` onto the ``keep`` nodes."""
    keep = np.asarray(keep, dtype=int)
    drop = np.setdiff1d(np.arange(Y.shape[0]), keep)
    if drop.size == 0:
        return Y[np.ix_(keep, keep)].copy()
    Yll = Y[np.ix_(drop, drop)]
    if np.linalg.cond(Yll) > KRON_COND_LIMIT:
        raise NetworkError("eliminated block is numerically singular")
    Ygl = Y[np.ix_(keep, drop)]
    Ylg = Y[np.ix_(drop, keep)]
    return Y[np.ix_(keep, keep)] - Ygl @ np.linalg.solve(Yll, Ylg)


def reduce_network(Y: np.ndarray, case: CaseData, x_dp: Sequence[float] | float) -> np.ndarray:
    """Reduce a bus admittance matrix onto generator internal nodes.

    Each generator gets an internal node tied to its terminal bus through
    ``1/(j x_dp)``; every bus is then eliminated.  ``x_dp = 0`` is the
    limiting case where the internal node is the terminal bus itself.  Rows
    follow ``case.generators`` order.
    """
    ng, nb = len(case.generators), case.n_bus
    x_dp = np.broadcast_to(np.asarray(x_dp, dtype=float), (ng,))
    if np.any(x_dp < 0) or not np.all(np.isfinite(x_dp)):
        raise NetworkError("transient reactances must be finite and non-negative")
    behind = np.flatnonzero(x_dp > 0)
    ni = len(behind)
    A = np.zeros((ni + nb, ni + nb), dtype=complex)
    A[ni:, ni:] = Y
    keep = []
    for k, g in enumerate(case.generators):
        b = ni + case.bus_index[g.bus]
        if x_dp[k] == 0.0:
            keep.append(b)
            continue
        node = int(np.searchsorted(behind, k))
        yg = 1.0 / (1j * x_dp[k])
        A[node, node] += yg
        A[b, b] += yg
        A[node, b] -= yg
        A[b, node] -= yg
        keep.append(node)
    return kron_reduce(A, keep)


@dataclass(frozen=True)
class DynParams:
    """Synthetic machine data; the 1962 case carries none.

    ``H`` and ``xdp`` map generator bus ids to per-machine overrides.  A
    zero transient reactance places the internal source on the terminal
    bus, so the reduced network lives on generator buses.
    """

    H_default: float = 3.0
    xdp_default: float = 0.0
    fs_hz: float = 60.0
    E_default: float = 1.0
    H: Mapping[int, float] = field(default_factory=dict)
    xdp: Mapping[int, float] = field(default_factory=dict)

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.fs_hz

    @classmethod
    def from_mapping(cls, cfg: Mapping) -> "DynParams":
        known = {"H_default", "xdp_default", "fs_hz", "E_default", "H", "xdp"}
        extra = set(cfg) - known
        if extra:
            raise ValueError(f"unknown dynamics keys: {sorted(extra)}")
        cfg = dict(cfg)
        for key in ("H", "xdp"):
            if key in cfg:
                cfg[key] = {int(k): float(v) for k, v in cfg[key].items()}
        return cls(**cfg)


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Reduced networks for each mode plus the shared machine constants.

    Arrays indexed by generator follow ``gen_buses``; ``ref`` is the position
    of the reference machine.  Modes are numbered from 1 in public APIs.
    """

    Y: tuple[np.ndarray, ...]
    E: np.ndarray
    H: np.ndarray
    P_m: np.ndarray
    omega_s: float
    ref: int
    gen_buses: tuple[int, ...]

    def __post_init__(self):
        if len(self.Y) < 2:
            raise NetworkError("need at least two modes")
        if np.any(self.H <= 0) or np.any(self.E <= 0):
            raise NetworkError("inertias and internal voltages must be positive")
        for Yr in self.Y:
            if np.max(np.abs(Yr - Yr.T)) > 1e-9:
                raise NetworkError("reduced admittance is not symmetric")
        nonref = np.delete(np.arange(len(self.E)), self.ref)
        object.__setattr__(self, "nonref", nonref)
        # conj(Y) cached per mode for P_e = Re(V * conj(Y V))
        object.__setattr__(self, "_Yc", tuple(np.conj(Yr) for Yr in self.Y))
        object.__setattr__(self, "_scale", self.omega_s / (2.0 * self.H[nonref]))
        # real and imaginary parts, contiguous, for the compiled kernels
        object.__setattr__(self, "_G", np.ascontiguousarray(np.stack([Yr.real for Yr in self.Y])))
        object.__setattr__(self, "_B", np.ascontiguousarray(np.stack([Yr.imag for Yr in self.Y])))

    @property
    def n_modes(self) -> int:
        return len(self.Y)

    @property
    def n_gen(self) -> int:
        return len(self.E)

    @property
    def n_state(self) -> int:
        return 2 * (self.n_gen - 1)

    def magnitude(self, sigma: int) -> np.ndarray:
        return np.abs(self.Y[sigma - 1])

    def angle(self, sigma: int) -> np.ndarray:
        return np.angle(self.Y[sigma - 1])

    def self_conductance(self, sigma: int) -> np.ndarray:
        return self.Y[sigma - 1].diagonal().real.copy()

    def full_phases(self, delta: np.ndarray) -> np.ndarray:
        """Insert the reference phase (zero) into non-reference phases.

        Works on a trailing axis so batches of states are accepted.
        """
        return np.insert(delta, self.ref, 0.0, axis=-1)


def build_modes(case: CaseData, placement: Placement, dynparams: DynParams | None = None) -> ModeSet:
    """Two-mode set: all capacitors off (mode 1) and all on (mode 2).

    Mechanical powers are chosen so that the zero state is an equilibrium
    of mode 1.
    """
    dp = dynparams or DynParams()
    check_coverage(case, placement)
    buses = case.generator_buses
    H = np.array([dp.H.get(b, dp.H_default) for b in buses], dtype=float)
    xdp = np.array([dp.xdp.get(b, dp.xdp_default) for b in buses], dtype=float)
    E = np.full(len(buses), dp.E_default, dtype=float)
    Yred = []
    for on in (False, True):
        Yr = reduce_network(build_admittance(case, placement, on), case, xdp)
        Yred.append(0.5 * (Yr + Yr.T))
    V = E.astype(complex)
    P_m = np.real(V * np.conj(Yred[0] @ V))
    return ModeSet(tuple(Yred), E, H, P_m, dp.omega_s, case.reference_generator, tuple(buses))


def electrical_power(modes: ModeSet, sigma: int, phases: np.ndarray) -> np.ndarray:
    """Generator electrical output for full phase vectors (reference included).

    ``phases`` may be a batch with generators on the last axis.
    """
    V = modes.E * np.exp(1j * phases)
    return np.real(V * np.conj(V @ modes.Y[sigma - 1].T))


def power_jacobian(modes: ModeSet, sigma: int, phases: np.ndarray) -> np.ndarray:
    """d P_e / d phases over all generators (reference included).

    Rows sum to zero: P_e depends on phase differences only.
    """
    V = modes.E * np.exp(1j * phases)
    K = np.imag(V[:, None] * modes._Yc[sigma - 1] * np.conj(V)[None, :])
    np.fill_diagonal(K, 0.0)
    K[np.diag_indices_from(K)] = -K.sum(axis=1)
    return K


def _check_state(modes: ModeSet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != modes.n_state:
        raise ValueError(f"state has dimension {x.shape[-1]}, expected {modes.n_state}")
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("non-finite state")
    return x


def _accel(modes: ModeSet, sigma: int, delta: np.ndarray) -> np.ndarray:
    phases = np.insert(delta, modes.ref, 0.0, axis=-1)
    V = modes.E * np.exp(1j * phases)
    Pe = np.real(V * (np.conj(V) @ modes._Yc[sigma - 1].T))
    return modes._scale * (modes.P_m - Pe)[..., modes.nonref]


def dynamics(modes: ModeSet, sigma: int, x: np.ndarray) -> np.ndarray:
    """Swing-equation vector field of mode ``sigma`` (accepts batches)."""
    x = _check_state(modes, x)
    k = modes.n_gen - 1
    return np.concatenate([x[..., k:], _accel(modes, sigma, x[..., :k])], axis=-1)


def accel_jacobian(modes: ModeSet, sigma: int, delta: np.ndarray) -> np.ndarray:
    """d omega_dot / d delta for the non-reference machines."""
    K = power_jacobian(modes, sigma, modes.full_phases(delta))
    nr = modes.nonref
    return -modes._scale[:, None] * K[np.ix_(nr, nr)]


def accel_jacobian_T(modes: ModeSet, sigma: int, delta: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``accel_jacobian(...).T @ v`` without forming the matrix."""
    phases = np.insert(delta, modes.ref, 0.0)
    V = modes.E * np.exp(1j * phases)
    Yc = modes._Yc[sigma - 1]
    self_b = np.imag(Yc.diagonal()) * (modes.E * modes.E)
    u = np.zeros(modes.n_gen)
    u[modes.nonref] = -modes._scale * v
    rows = np.imag(V * (Yc @ np.conj(V))) - self_b
    off = np.imag(np.conj(V) * (Yc @ (V * u))) - self_b * u
    return (off - rows * u)[modes.nonref]


def dynamics_jacobian(modes: ModeSet, sigma: int, x: np.ndarray) -> np.ndarray:
    x = _check_state(modes, x)
    k = modes.n_gen - 1
    J = np.zeros((2 * k, 2 * k))
    J[:k, k:] = np.eye(k)
    J[k:, :k] = accel_jacobian(modes, sigma, x[:k])
    return J


def perturb(x: np.ndarray, range_: float, seed: int) -> np.ndarray:
    """Add i.i.d. uniform(-range_, range_) offsets to the phase components."""
    if range_ < 0:
        raise ValueError("perturbation range must be non-negative")
    x = np.array(x, dtype=float)
    k = x.shape[-1] // 2
    rng = np.random.default_rng(seed)
    x[..., :k] += rng.uniform(-range_, range_, size=x[..., :k].shape)
    return x


def zero_state(modes: ModeSet) -> np.ndarray:
    return np.zeros(modes.n_state)


def iter_modes(modes: ModeSet) -> Iterable[int]:
    return range(1, modes.n_modes + 1)
