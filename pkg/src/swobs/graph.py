"""Switching communication topologies and joint-connectivity certification.

The agent network is an undirected weighted graph that switches between a
finite set of topologies under a dwell-time constraint.  No single topology
needs to be connected; the design only requires that the union of the graphs
active over bounded windows is connected, which is certified here through the
second-smallest eigenvalue of the summed Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, DomainError, JointConnectivityViolation


@dataclass(frozen=True)
class Topology:
    """One fixed undirected weighted graph on nodes 0..N-1.

    ``edges`` holds canonical ``(i, j, weight)`` triples with ``i < j`` and
    positive weights; self-loops and duplicates are rejected.
    """

    N: int
    edges: tuple[tuple[int, int, float], ...]

    @classmethod
    def from_edges(cls, N: int, edges) -> "Topology":
        if N < 1:
            raise DimensionError("a topology needs at least one node")
        canonical = {}
        for edge in edges:
            if len(edge) == 2:
                i, j = edge
                w = 1.0
            else:
                i, j, w = edge
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise DomainError(f"self-loop on node {i} is not allowed")
            if not (0 <= i < N and 0 <= j < N):
                raise DomainError(f"edge ({i}, {j}) out of range for {N} nodes")
            if w <= 0:
                raise DomainError(f"edge ({i}, {j}) has non-positive weight {w}")
            key = (min(i, j), max(i, j))
            if key in canonical:
                raise DomainError(f"duplicate edge ({key[0]}, {key[1]})")
            canonical[key] = w
        return cls(N=N, edges=tuple((i, j, canonical[(i, j)]) for i, j in sorted(canonical)))

    def weight(self, i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        for a, b, w in self.edges:
            if (a, b) == key:
                return w
        return 0.0


def laplacian(topology: Topology) -> np.ndarray:
    """Weighted graph Laplacian (degree minus adjacency); exactly symmetric."""
    L = np.zeros((topology.N, topology.N))
    for i, j, w in topology.edges:
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    return L


@dataclass(frozen=True)
class SwitchingSchedule:
    """Piecewise-constant assignment of topologies to time.

    ``indices[j]`` is active on ``[instants[j], instants[j+1])``.  With
    ``period`` set the pattern repeats forever; otherwise the last topology
    persists after the final instant.  Consecutive instants must be at least
    ``dwell`` apart (including the wrap-around gap of a periodic schedule).
    """

    topologies: tuple[Topology, ...]
    instants: tuple[float, ...]
    indices: tuple[int, ...]
    dwell: float
    period: float | None = None

    def __post_init__(self):
        if not self.topologies:
            raise DimensionError("schedule needs at least one topology")
        Ns = {t.N for t in self.topologies}
        if len(Ns) != 1:
            raise DimensionError(f"topologies disagree on node count: {sorted(Ns)}")
        if len(self.instants) != len(self.indices) or not self.instants:
            raise DimensionError("instants and indices must be equal-length and nonempty")
        if self.instants[0] != 0.0:
            raise DomainError("the first switching instant must be t = 0")
        if self.dwell <= 0:
            raise DomainError("dwell time must be positive")
        gaps = np.diff(self.instants)
        if np.any(gaps <= 0):
            raise DomainError("switching instants must be strictly increasing")
        if np.any(gaps < self.dwell * (1 - 1e-12)):
            raise DomainError(f"switching gap {gaps.min():g} is below the dwell time {self.dwell:g}")
        if any(not 0 <= p < len(self.topologies) for p in self.indices):
            raise DomainError("topology index out of range")
        if self.period is not None:
            wrap = self.period - self.instants[-1]
            if wrap <= 0:
                raise DomainError("period must exceed the last switching instant")
            if wrap < self.dwell * (1 - 1e-12):
                raise DomainError(f"wrap-around gap {wrap:g} is below the dwell time {self.dwell:g}")

    @classmethod
    def periodic(cls, topologies, pieces, dwell: float | None = None) -> "SwitchingSchedule":
        """Build a repeating schedule from (duration, topology_index) pieces."""
        durations = [float(d) for d, _ in pieces]
        if any(d <= 0 for d in durations):
            raise DomainError("piece durations must be positive")
        instants = tuple(float(sum(durations[:j])) for j in range(len(durations)))
        return cls(
            topologies=tuple(topologies),
            instants=instants,
            indices=tuple(int(p) for _, p in pieces),
            dwell=float(dwell) if dwell is not None else min(durations),
            period=float(sum(durations)),
        )

    @property
    def N(self) -> int:
        return self.topologies[0].N

    @cached_property
    def laplacians(self) -> tuple[np.ndarray, ...]:
        return tuple(laplacian(t) for t in self.topologies)

    def active_index(self, t: float) -> int:
        if t < 0:
            raise DomainError(f"time must be nonnegative, got {t:g}")
        if self.period is not None:
            k = math.floor(t / self.period)
            tm = t - k * self.period
            if tm < 0:
                tm += self.period
            if tm >= self.period:
                tm -= self.period
        else:
            tm = t
        j = np.searchsorted(self.instants, tm, side="right") - 1
        return self.indices[max(int(j), 0)]

    def pieces_in(self, t_a: float, t_b: float) -> list[tuple[float, float, int]]:
        """Constant-topology pieces overlapping [t_a, t_b), clipped to it."""
        if not t_a < t_b:
            raise DomainError(f"empty window [{t_a:g}, {t_b:g})")
        out: list[tuple[float, float, int]] = []
        if self.period is not None:
            k = math.floor(t_a / self.period)
            while k * self.period < t_b:
                bounds = [k * self.period + s for s in self.instants]
                bounds.append((k + 1) * self.period)
                for j, p in enumerate(self.indices):
                    s, e = max(bounds[j], t_a), min(bounds[j + 1], t_b)
                    if s < e:
                        out.append((s, e, p))
                k += 1
        else:
            bounds = list(self.instants) + [math.inf]
            for j, p in enumerate(self.indices):
                s, e = max(bounds[j], t_a), min(bounds[j + 1], t_b)
                if s < e:
                    out.append((s, e, p))
        return out

    def instants_in(self, t_a: float, t_b: float) -> list[float]:
        """Switching instants in [t_a, t_b)."""
        if self.period is None:
            return [s for s in self.instants if t_a <= s < t_b]
        out = []
        k = math.floor(t_a / self.period)
        while k * self.period < t_b:
            for s in self.instants:
                t = k * self.period + s
                if t_a <= t < t_b:
                    out.append(t)
            k += 1
        return out


@dataclass(frozen=True)
class ConnectivityCertificate:
    """Greedy window partition with per-window algebraic connectivity.

    ``window_instants`` is the boundary sequence: window k spans
    ``[window_instants[k], window_instants[k+1])``.  A final ``inf`` boundary
    marks the trailing constant-topology regime of a non-periodic schedule.
    """

    window_instants: tuple[float, ...]
    T_c: float
    fiedler_values: tuple[float, ...]


def active_index(schedule: SwitchingSchedule, t: float) -> int:
    """Topology index active at time t (half-open convention at instants)."""
    return schedule.active_index(t)


def union_laplacian(schedule: SwitchingSchedule, window: tuple[float, float]) -> np.ndarray:
    """Sum of the Laplacians of the pieces overlapping the window.

    Each piece contributes exactly once regardless of its duration, so the
    result is a Laplacian of the union graph over the window.
    """
    t_a, t_b = window
    if math.isinf(t_b):
        if schedule.period is not None or schedule.instants_in(t_a + 1e-12, 1e300):
            raise DomainError("an unbounded window is only valid past the final switching instant")
        return schedule.laplacians[schedule.active_index(t_a)].copy()
    if not t_a < t_b:
        raise DomainError(f"empty window [{t_a:g}, {t_b:g})")
    L = np.zeros((schedule.N, schedule.N))
    for _, _, p in schedule.pieces_in(t_a, t_b):
        L += schedule.laplacians[p]
    return L


def assumption_windows(schedule: SwitchingSchedule, T_c: float) -> list[tuple[float, float]]:
    """Greedy partition of the switching instants into windows of length <= T_c.

    Each window starts at a switching instant and is cut at the last instant
    within ``T_c`` of its start.  For periodic schedules the walk stops once a
    window start revisits a phase of the period, which covers every window the
    infinite schedule will ever produce.  A trailing ``(t, inf)`` window stands
    for the constant-topology tail of a non-periodic schedule.

    Raises
    ------
    JointConnectivityViolation
        With ``certified=False`` when no instant lies within ``T_c`` of a
        window start, in which case this greedy partition (though not
        necessarily every partition) fails.
    """
    if T_c < schedule.dwell:
        raise DomainError(f"T_c = {T_c:g} is below the dwell time {schedule.dwell:g}")
    tol = 1e-9 * max(1.0, T_c)
    windows: list[tuple[float, float]] = []
    start = 0.0
    seen_phases: set[float] = set()
    while True:
        if schedule.period is not None:
            phase = round(start % schedule.period, 9)
            if phase in seen_phases:
                return windows
            seen_phases.add(phase)
        candidates = [
            t for t in schedule.instants_in(start, start + T_c + 2 * tol) if t > start + tol
        ]
        candidates = [t for t in candidates if t <= start + T_c + tol]
        if not candidates:
            if schedule.period is None:
                remaining = schedule.instants_in(start + tol, start + 1e300)
                if not remaining:
                    windows.append((start, math.inf))
                    return windows
            raise JointConnectivityViolation(
                (start, start + T_c),
                "no switching instant within T_c of the window start; "
                "the greedy partition cannot certify joint connectivity",
                certified=False,
            )
        cut = max(candidates)
        windows.append((start, cut))
        start = cut


def check_joint_connectivity(
    schedule: SwitchingSchedule, T_c: float, tol_fiedler: float | None = None
) -> ConnectivityCertificate:
    """Certify that every greedy window has a connected union graph.

    The union Laplacian of each window must have a second-smallest eigenvalue
    above ``tol_fiedler`` (default ``1e-9 * N``), equivalently a simple zero
    eigenvalue with eigenvector along the all-ones direction.

    Raises
    ------
    JointConnectivityViolation
        Naming the first window whose union graph is disconnected.
    """
    if tol_fiedler is None:
        tol_fiedler = 1e-9 * schedule.N
    windows = assumption_windows(schedule, T_c)
    fiedlers = []
    for window in windows:
        L = union_laplacian(schedule, window)
        if schedule.N == 1:
            fiedlers.append(math.inf)
            continue
        eigs = np.linalg.eigvalsh(L)
        fiedler = float(eigs[1])
        if fiedler <= tol_fiedler:
            raise JointConnectivityViolation(
                window, f"union graph is disconnected (algebraic connectivity {fiedler:.3e})"
            )
        fiedlers.append(fiedler)
    boundaries = tuple(w[0] for w in windows) + (windows[-1][1],)
    return ConnectivityCertificate(
        window_instants=boundaries, T_c=T_c, fiedler_values=tuple(fiedlers)
    )
