"""Plant description, stability and observability checks, skew-symmetrizing transform.

The systems handled here are autonomous LTI plants ``x' = A x`` whose output
``y = C x`` is split row-block-wise between several sensing agents.  The design
machinery downstream requires the spectrum of ``A`` to be semi-simple and
purely imaginary ("neutrally stable"); such a matrix is always similar to a
skew-symmetric one, and :func:`skew_symmetrize` computes that similarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._linalg import as_square, frob, numerical_rank, skew_defect, stacked_observability
from .errors import DimensionError, InternalConsistencyError, NotNeutrallyStableError

TOL_EIG = 1e-8        # max tolerated |Re(eigenvalue)| for neutral stability
TOL_CLUSTER = 1e-6    # eigenvalues closer than this count as one cluster
TOL_SKEW = 1e-10      # ||A + A^T|| below which A counts as already skew


@dataclass(frozen=True)
class LtiPlant:
    """An autonomous plant with a row-partitioned output matrix.

    ``partition`` lists the number of output rows owned by each agent; the
    blocks are consecutive, so agent ``i`` measures ``C_block(i) @ x``.
    """

    A: np.ndarray
    C: np.ndarray
    partition: tuple[int, ...]

    def __post_init__(self):
        A = as_square(np.asarray(self.A, dtype=float), "A")
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2:
            raise DimensionError(f"C must be 2-D, got shape {C.shape}")
        part = tuple(int(m) for m in self.partition)
        if A.shape[0] < 1:
            raise DimensionError("state dimension must be at least 1")
        if C.shape[1] != A.shape[0]:
            raise DimensionError(f"C has {C.shape[1]} columns but A is {A.shape[0]}x{A.shape[0]}")
        if not part:
            raise DimensionError("partition must list at least one agent")
        if any(m < 1 for m in part):
            raise DimensionError("every partition block must have at least one row")
        if sum(part) != C.shape[0]:
            raise DimensionError(f"partition sums to {sum(part)} but C has {C.shape[0]} rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "partition", part)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def N(self) -> int:
        return len(self.partition)

    def row_slice(self, agent: int) -> slice:
        if not 0 <= agent < self.N:
            raise IndexError(f"agent {agent} out of range for {self.N} agents")
        start = sum(self.partition[:agent])
        return slice(start, start + self.partition[agent])

    def C_block(self, agent: int) -> np.ndarray:
        """Output rows measured by one agent."""
        return self.C[self.row_slice(agent)]


@dataclass(frozen=True)
class NeutralStabilityReport:
    """Outcome of :func:`check_neutral_stability`.

    ``semisimplicity_defect`` is the largest gap between algebraic and
    geometric multiplicity over all eigenvalue clusters; zero is required
    for a diagonalizable (semi-simple) spectrum.
    """

    is_neutrally_stable: bool
    eigenvalues: np.ndarray
    max_real_part: float
    semisimplicity_defect: float


@dataclass(frozen=True)
class SkewSymmetrizer:
    """Invertible P with P^{-1} A P skew-symmetric.

    ``residual`` is ``||S + S^T||_F`` for ``S = P^{-1} A P``; ``cond`` is the
    2-norm condition number of P (reported, not bounded).
    """

    P: np.ndarray
    P_inv: np.ndarray
    residual: float
    cond: float = field(default=1.0)

    @classmethod
    def identity(cls, n: int, residual: float = 0.0) -> "SkewSymmetrizer":
        return cls(P=np.eye(n), P_inv=np.eye(n), residual=residual, cond=1.0)


def _cluster_eigenvalues(eigs: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group eigenvalues by transitive closeness (|difference| <= tol)."""
    n = eigs.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(eigs[i] - eigs[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(idx) for idx in groups.values()]


def check_neutral_stability(
    A, tol_eig: float = TOL_EIG, tol_cluster: float = TOL_CLUSTER
) -> NeutralStabilityReport:
    """Decide whether every eigenvalue of A is semi-simple with zero real part.

    Semi-simplicity is measured per eigenvalue cluster: the cluster's
    algebraic multiplicity must equal ``n - rank(A - lambda I)`` at the
    cluster mean.  Trajectories of such a system stay bounded without
    decaying, which is exactly what the switched-consensus design needs.
    """
    A = as_square(A, "A")
    n = A.shape[0]
    eigs = scipy.linalg.eigvals(A)
    max_real = float(eigs.real.max())
    defect = 0
    for idx in _cluster_eigenvalues(eigs, tol_cluster):
        mu = eigs[idx].mean()
        # rank cutoff at the clustering tolerance, so the floating-point
        # splits of a genuinely repeated eigenvalue do not read as defects
        s = np.linalg.svd(A - mu * np.eye(n), compute_uv=False)
        rank = int(np.count_nonzero(s > tol_cluster * max(1.0, float(s[0]))))
        geometric = n - rank
        defect = max(defect, abs(len(idx) - geometric))
    ok = bool(np.all(np.abs(eigs.real) <= tol_eig) and defect == 0)
    return NeutralStabilityReport(
        is_neutrally_stable=ok,
        eigenvalues=eigs,
        max_real_part=max_real,
        semisimplicity_defect=float(defect),
    )


def skew_symmetrize(A, tol_skew: float = TOL_SKEW) -> SkewSymmetrizer:
    """Compute an invertible P such that P^{-1} A P is skew-symmetric.

    If A is already skew-symmetric (within ``tol_skew``) the identity is
    returned so that case stays exact.  Otherwise P is assembled from the
    real and imaginary parts of the eigenvectors for each conjugate pair
    (unit-normalised, ordered by descending frequency) followed by an
    orthonormal kernel basis for the zero eigenvalues; in those coordinates
    A becomes an exact direct sum of planar rotations and zeros.

    Raises
    ------
    NotNeutrallyStableError
        If A fails :func:`check_neutral_stability`.
    InternalConsistencyError
        If the transform does not reach a skew residual of
        ``1e-8 * max(1, ||A||)`` (numerical breakdown).
    """
    A = as_square(A, "A")
    n = A.shape[0]
    direct = skew_defect(A)
    if direct <= tol_skew:
        return SkewSymmetrizer.identity(n, residual=direct)

    report = check_neutral_stability(A)
    if not report.is_neutrally_stable:
        raise NotNeutrallyStableError(report)

    scale = max(1.0, frob(A))
    w, V = scipy.linalg.eig(A)
    pair_tol = TOL_EIG * scale
    positive = sorted(
        (k for k in range(n) if w[k].imag > pair_tol),
        key=lambda k: (-w[k].imag, k),
    )
    cols = []
    for k in positive:
        v = V[:, k]
        v = v / np.linalg.norm(v)
        cols.append(v.real)
        cols.append(v.imag)
    n_zero = n - 2 * len(positive)
    if n_zero:
        kernel = scipy.linalg.null_space(A)
        if kernel.shape[1] != n_zero:
            raise InternalConsistencyError(
                f"kernel dimension {kernel.shape[1]} does not match the "
                f"{n_zero} near-zero eigenvalues"
            )
        cols.extend(kernel.T)
    P = np.column_stack(cols)
    P_inv = np.linalg.inv(P)
    S = P_inv @ A @ P
    residual = skew_defect(S)
    if residual > 1e-8 * scale:
        raise InternalConsistencyError(
            f"skew residual {residual:.3e} exceeds 1e-8 * max(1, ||A||)"
        )
    return SkewSymmetrizer(P=P, P_inv=P_inv, residual=residual, cond=float(np.linalg.cond(P)))


def check_joint_observability(plant: LtiPlant) -> bool:
    """True iff the full stacked pair (C, A) is observable.

    Individual agents are usually blind to part of the state; this checks
    that the agents *together* see all of it.
    """
    O = stacked_observability(plant.C, plant.A)
    return numerical_rank(O) == plant.n
