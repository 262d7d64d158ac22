"""Independent reference computations and random-system generators.

Everything here deliberately avoids the library's own code paths: ranks come
from Gaussian elimination instead of SVD counts, reference trajectories from
the matrix exponential instead of the RK4 integrator, union graphs from
edge-set merging instead of Laplacian sums.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from swobs import LtiPlant, SwitchingSchedule, Topology


def rank_by_row_reduction(M, tol: float = 1e-9) -> int:
    """Rank via Gaussian elimination with partial pivoting."""
    R = np.array(M, dtype=float)
    if R.size == 0:
        return 0
    scale = max(1.0, np.abs(R).max())
    rows, cols = R.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot = rank + np.argmax(np.abs(R[rank:, col]))
        if abs(R[pivot, col]) <= tol * scale:
            continue
        R[[rank, pivot]] = R[[pivot, rank]]
        R[rank] = R[rank] / R[rank, col]
        for r in range(rows):
            if r != rank:
                R[r] -= R[r, col] * R[rank]
        rank += 1
    return rank


def luenberger_error_reference(A, L, C, e0, times) -> np.ndarray:
    """Closed-form single-observer error e(t) = expm((A - L C) t) e0."""
    F = np.asarray(A, float) - np.asarray(L, float) @ np.asarray(C, float)
    return np.stack([scipy.linalg.expm(F * t) @ e0 for t in times])


def union_topology(topologies, N: int) -> Topology:
    """Edge-wise union with summed weights (independent of Laplacian sums)."""
    weights: dict[tuple[int, int], float] = {}
    for top in topologies:
        for i, j, w in top.edges:
            weights[(i, j)] = weights.get((i, j), 0.0) + w
    return Topology.from_edges(N, [(i, j, w) for (i, j), w in weights.items()])


def rotation(omega: float) -> np.ndarray:
    return np.array([[0.0, omega], [-omega, 0.0]])


def rand_orthogonal(rng, n: int) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q


def rand_skew(rng, n: int) -> np.ndarray:
    G = rng.standard_normal((n, n))
    return (G - G.T) / 2.0


def rand_neutrally_stable(rng, n: int, cond: float = 5.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A = P0 S P0^-1 with random skew S and well-conditioned P0."""
    S = rand_skew(rng, n)
    sv = np.linspace(1.0, cond, n)
    P0 = rand_orthogonal(rng, n) @ np.diag(sv) @ rand_orthogonal(rng, n)
    return P0 @ S @ np.linalg.inv(P0), S, P0


def rand_structured_skew(rng, n_pairs: int, n_zero: int = 0, repeat: bool = False):
    """Orthogonally rotated direct sum of rotation planes (plus zero modes).

    With ``repeat`` the first frequency is doubled, which makes every
    single-output view of the plant lose at least that plane.
    """
    freqs = np.sort(rng.uniform(0.5, 3.0, n_pairs))[::-1]
    if repeat and n_pairs >= 2:
        freqs[1] = freqs[0]
    blocks = [rotation(w) for w in freqs] + [np.zeros((1, 1))] * n_zero
    S = scipy.linalg.block_diag(*blocks)
    Q = rand_orthogonal(rng, S.shape[0])
    return Q @ S @ Q.T


def rand_partitioned_plant(rng, A: np.ndarray, N: int, max_rows: int = 2) -> LtiPlant:
    """Random output partition over N agents, resampled until jointly observable."""
    from swobs import check_joint_observability

    n = A.shape[0]
    for _ in range(50):
        partition = tuple(int(rng.integers(1, max_rows + 1)) for _ in range(N))
        C = rng.standard_normal((sum(partition), n))
        plant = LtiPlant(A=A, C=C, partition=partition)
        if check_joint_observability(plant):
            return plant
    raise AssertionError("could not draw a jointly observable partition")


def rand_jointly_connected_schedule(rng, N: int, n_topologies: int = 2) -> tuple[SwitchingSchedule, float]:
    """Random periodic schedule whose per-period union contains a spanning tree.

    The tree edges are scattered across the topologies, so the instantaneous
    graphs are typically disconnected.  Returns (schedule, T_c) with T_c equal
    to the period, for which the greedy certification always succeeds.
    """
    order = rng.permutation(N)
    tree = [(int(order[k]), int(order[k + 1])) for k in range(N - 1)]
    edge_sets: list[list[tuple[int, int, float]]] = [[] for _ in range(n_topologies)]
    for k, (i, j) in enumerate(tree):
        edge_sets[k % n_topologies].append((i, j, float(rng.uniform(0.5, 2.0))))
    # a few extra random edges for variety
    for _ in range(rng.integers(0, N)):
        i, j = rng.choice(N, size=2, replace=False)
        p = int(rng.integers(0, n_topologies))
        if all((min(i, j), max(i, j)) != (min(a, b), max(a, b)) for a, b, _ in edge_sets[p]):
            edge_sets[p].append((int(i), int(j), float(rng.uniform(0.5, 2.0))))
    topologies = [Topology.from_edges(N, edges) for edges in edge_sets]
    durations = rng.uniform(0.4, 1.0, n_topologies)
    pieces = [(float(d), p) for p, d in enumerate(durations)]
    schedule = SwitchingSchedule.periodic(topologies, pieces)
    return schedule, schedule.period
