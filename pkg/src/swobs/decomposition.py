"""Per-agent observability decomposition.

Each agent sees the plant through its own output block, so its observability
matrix generally has a nontrivial kernel.  Splitting state space into that
kernel and its orthogonal complement block-diagonalizes the (skew-symmetric)
dynamics into an observable block and an unobservable block; the observer
design corrects the first through output injection and the second through
network consensus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ._linalg import as_matrix, as_square, frob, numerical_rank, skew_defect, stacked_observability
from .errors import DimensionError, InternalConsistencyError, PreconditionError

if TYPE_CHECKING:
    from .plant import LtiPlant

TOL_ORTH = 1e-10


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Observable/unobservable split of the pair (C_i, A) for one agent.

    ``transform`` is the orthogonal matrix ``[obs_basis, unobs_basis]``;
    conjugating A with it yields ``block_diag(A_obs, A_unobs)`` and the agent
    output becomes ``[C_obs, 0]``.  ``unobs_basis`` spans the kernel of the
    observability matrix, ``obs_basis`` the row space of its transpose.
    """

    agent: int
    obs_matrix: np.ndarray
    n_unobs: int
    unobs_basis: np.ndarray
    obs_basis: np.ndarray
    transform: np.ndarray
    A_obs: np.ndarray
    A_unobs: np.ndarray
    C_obs: np.ndarray

    @property
    def n(self) -> int:
        return self.transform.shape[0]

    @property
    def n_obs(self) -> int:
        return self.n - self.n_unobs


def observability_matrix(C_i: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Stack C_i, C_i A, ..., C_i A^(n-1) into one tall matrix.

    Its rank deficiency is the dimension of the subspace agent i cannot see.
    """
    A = as_square(A, "A")
    C_i = as_matrix(C_i, "C_i")
    if C_i.shape[1] != A.shape[0]:
        raise DimensionError(f"C_i has {C_i.shape[1]} columns but A is {A.shape[0]}x{A.shape[0]}")
    return stacked_observability(C_i, A)


def subspace_bases(O_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases (kernel, row space) of an observability matrix.

    Both come from the right singular vectors of one SVD, split at the
    numerical rank, so their concatenation is orthogonal by construction.
    Columns are ordered by descending singular value.  A full-rank input
    yields a kernel basis with zero columns; a zero input yields an empty
    row-space basis.
    """
    O_i = as_matrix(O_i, "O_i")
    if O_i.shape[0] == 0 or O_i.shape[1] == 0:
        raise DimensionError(f"O_i must be nonempty, got shape {O_i.shape}")
    _, _, Vt = np.linalg.svd(O_i)
    r = numerical_rank(O_i)
    V = Vt.T
    return V[:, r:], V[:, :r]


def kalman_decompose(plant: "LtiPlant", agent: int, A_eff: np.ndarray | None = None) -> SubspaceDecomposition:
    """Split agent ``agent``'s view of the plant into observable/unobservable blocks.

    ``A_eff`` must be skew-symmetric: either the plant matrix itself or its
    skew-symmetrized similarity image, in which case the caller is expected
    to pass a plant whose output blocks were transformed consistently
    (``C P``).  The returned decomposition is certified before being handed
    back: the reduced pair must be observable, the unobservable block
    skew-symmetric, and the kernel basis must commute with the dynamics
    (``A_eff U = U A_unobs``).

    Raises
    ------
    PreconditionError
        If ``A_eff`` is not skew-symmetric within ``1e-8 * max(1, ||A_eff||)``.
    InternalConsistencyError
        If any certification fails, which signals numerical breakdown rather
        than bad user input.
    """
    A_eff = plant.A if A_eff is None else as_square(A_eff, "A_eff")
    if A_eff.shape[0] != plant.n:
        raise DimensionError(f"A_eff is {A_eff.shape[0]}x{A_eff.shape[0]} but the plant has n = {plant.n}")
    scale = max(1.0, frob(A_eff))
    if skew_defect(A_eff) > 1e-8 * scale:
        raise PreconditionError(
            "A_eff must be skew-symmetric; pass the transformed matrix from "
            "skew_symmetrize for a general neutrally stable plant"
        )
    C_i = plant.C_block(agent)
    O_i = observability_matrix(C_i, A_eff)
    U, D = subspace_bases(O_i)
    nu = U.shape[1]
    r = plant.n - nu
    T = np.hstack([D, U])

    M = T.T @ A_eff @ T
    A_obs = M[:r, :r]
    A_unobs = M[r:, r:]
    CT = C_i @ T
    C_obs = CT[:, :r]

    tol_block = 1e-8 * scale
    checks = {
        "transform orthogonality": frob(T.T @ T - np.eye(plant.n)) <= TOL_ORTH,
        "block-diagonal form": frob(M[:r, r:]) <= tol_block and frob(M[r:, :r]) <= tol_block,
        "output on observable block": frob(CT[:, r:]) <= tol_block,
        "reduced pair observable": numerical_rank(stacked_observability(C_obs, A_obs)) == r if r else True,
        "unobservable block skew": skew_defect(A_unobs) <= tol_block,
        "kernel commutation": frob(A_eff @ U - U @ A_unobs) <= tol_block,
    }
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        raise InternalConsistencyError(
            f"decomposition certification failed for agent {agent}: {', '.join(failed)}"
        )
    return SubspaceDecomposition(
        agent=agent,
        obs_matrix=O_i,
        n_unobs=nu,
        unobs_basis=U,
        obs_basis=D,
        transform=T,
        A_obs=A_obs,
        A_unobs=A_unobs,
        C_obs=C_obs,
    )
