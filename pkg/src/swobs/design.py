"""Synthesis of the local observers.

Each agent gets an output-injection gain that makes its observable block
Hurwitz at prescribed eigenvalues, plus a weighting matrix that routes the
network consensus correction into the subspace the agent cannot observe on
its own.  For a plant matrix that is not already skew-symmetric the whole
construction is carried out in the transformed coordinates and mapped back,
so the returned gains apply to the original plant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._linalg import frob, numerical_rank, skew_defect, spectrum_match_error, stacked_observability
from .decomposition import SubspaceDecomposition, kalman_decompose
from .errors import (
    AssumptionError,
    DesignError,
    DimensionError,
    DomainError,
    JointConnectivityViolation,
    PreconditionError,
)
from .graph import SwitchingSchedule, check_joint_connectivity
from .plant import (
    TOL_SKEW,
    LtiPlant,
    SkewSymmetrizer,
    check_joint_observability,
    check_neutral_stability,
    skew_symmetrize,
)

TOL_PLACE = 1e-6          # spectrum mismatch tolerance, relative to target radius
_SYLVESTER_RETRIES = 5
_SYLVESTER_SEED = 0x5EED  # fixed so synthesis stays deterministic


@dataclass(frozen=True)
class LocalObserver:
    """Synthesised data for one agent.

    ``L`` and ``M`` act on original plant coordinates; ``L_obs`` is the
    reduced injection gain for the observable block in decomposition
    coordinates.
    """

    agent: int
    L: np.ndarray
    M: np.ndarray
    gamma: float
    L_obs: np.ndarray
    decomposition: SubspaceDecomposition
    targets: tuple[complex, ...]
    achieved: tuple[complex, ...]
    placement_error: float


@dataclass(frozen=True)
class ObserverBank:
    """The complete distributed design: one local observer per agent.

    ``margin`` is the smallest decay rate over all observable blocks, i.e.
    ``min_i(-max Re eig(A_obs - L_obs C_obs))``; it is positive for a valid
    design.  Agents with a fully observable view contribute their injection
    spectrum; agents with nothing to place (``n_obs = 0``) are skipped.
    """

    plant: LtiPlant
    P: SkewSymmetrizer
    observers: tuple[LocalObserver, ...]
    margin: float

    @property
    def N(self) -> int:
        return len(self.observers)

    def gains(self) -> np.ndarray:
        return np.array([obs.gamma for obs in self.observers])

    def stacked_kernel_basis(self) -> np.ndarray:
        """Block-diagonal stack of the per-agent unobservable-subspace bases."""
        blocks = [obs.decomposition.unobs_basis for obs in self.observers]
        return scipy.linalg.block_diag(*blocks) if blocks else np.zeros((0, 0))

    def unobs_block_diag(self) -> np.ndarray:
        """Block-diagonal stack of the per-agent unobservable dynamics."""
        blocks = [obs.decomposition.A_unobs for obs in self.observers]
        return scipy.linalg.block_diag(*blocks) if blocks else np.zeros((0, 0))

    def gain_block_diag(self) -> np.ndarray:
        """Coupling gains expanded to the stacked unobservable coordinates."""
        blocks = [obs.gamma * np.eye(obs.decomposition.n_unobs) for obs in self.observers]
        return scipy.linalg.block_diag(*blocks) if blocks else np.zeros((0, 0))

    def to_jsonable(self) -> dict:
        agents = []
        for obs in self.observers:
            d = obs.decomposition
            agents.append(
                {
                    "agent": obs.agent,
                    "gamma": obs.gamma,
                    "n_unobs": d.n_unobs,
                    "L": obs.L.tolist(),
                    "M": obs.M.tolist(),
                    "L_obs": obs.L_obs.tolist(),
                    "targets": [[z.real, z.imag] for z in obs.targets],
                    "achieved": [[z.real, z.imag] for z in obs.achieved],
                    "placement_error": obs.placement_error,
                    "transform": d.transform.tolist(),
                    "obs_matrix": d.obs_matrix.tolist(),
                    "A_obs": d.A_obs.tolist(),
                    "A_unobs": d.A_unobs.tolist(),
                    "C_obs": d.C_obs.tolist(),
                    "cond_transform": float(np.linalg.cond(d.transform)),
                }
            )
        return {
            "P": self.P.P.tolist(),
            "P_inv": self.P.P_inv.tolist(),
            "P_residual": self.P.residual,
            "P_cond": self.P.cond,
            "margin": self.margin,
            "agents": agents,
        }

    @classmethod
    def from_jsonable(cls, data: dict, plant: LtiPlant) -> "ObserverBank":
        P = SkewSymmetrizer(
            P=np.array(data["P"], dtype=float),
            P_inv=np.array(data["P_inv"], dtype=float),
            residual=float(data["P_residual"]),
            cond=float(data["P_cond"]),
        )
        observers = []
        for a in data["agents"]:
            T = np.array(a["transform"], dtype=float)
            nu = int(a["n_unobs"])
            r = T.shape[0] - nu
            decomp = SubspaceDecomposition(
                agent=int(a["agent"]),
                obs_matrix=np.array(a["obs_matrix"], dtype=float),
                n_unobs=nu,
                unobs_basis=T[:, r:],
                obs_basis=T[:, :r],
                transform=T,
                A_obs=np.array(a["A_obs"], dtype=float),
                A_unobs=np.array(a["A_unobs"], dtype=float),
                C_obs=np.array(a["C_obs"], dtype=float),
            )
            observers.append(
                LocalObserver(
                    agent=int(a["agent"]),
                    L=np.array(a["L"], dtype=float),
                    M=np.array(a["M"], dtype=float),
                    gamma=float(a["gamma"]),
                    L_obs=np.array(a["L_obs"], dtype=float),
                    decomposition=decomp,
                    targets=tuple(complex(re, im) for re, im in a["targets"]),
                    achieved=tuple(complex(re, im) for re, im in a["achieved"]),
                    placement_error=float(a["placement_error"]),
                )
            )
        return cls(plant=plant, P=P, observers=tuple(observers), margin=float(data["margin"]))


def default_targets(q: int) -> tuple[complex, ...]:
    """Deterministic fallback spectrum: real poles at -1, -1.5, -2, ..."""
    return tuple(complex(-1.0 - 0.5 * k, 0.0) for k in range(q))


def _check_targets(desired, q: int) -> np.ndarray:
    d = np.asarray(desired, dtype=complex).ravel()
    if d.size != q:
        raise DimensionError(f"expected {q} target eigenvalues, got {d.size}")
    if q == 0:
        return d
    if np.any(d.real >= 0):
        raise DesignError("target eigenvalues must have negative real parts")
    if spectrum_match_error(d, np.conj(d)) > 1e-12 * max(1.0, np.abs(d).max()):
        raise DesignError("target spectrum must be closed under conjugation")
    return d


def _real_block_diag_of(spectrum: np.ndarray) -> np.ndarray:
    """Real matrix with the given conjugate-closed spectrum (2x2 blocks for pairs)."""
    blocks = []
    used = np.zeros(spectrum.size, dtype=bool)
    for k, z in enumerate(spectrum):
        if used[k]:
            continue
        used[k] = True
        if abs(z.imag) <= 1e-14 * max(1.0, abs(z)):
            blocks.append(np.array([[z.real]]))
        else:
            partner = next(
                j for j in range(spectrum.size) if not used[j] and abs(spectrum[j] - z.conjugate()) <= 1e-9 * max(1.0, abs(z))
            )
            used[partner] = True
            blocks.append(np.array([[z.real, z.imag], [-z.imag, z.real]]))
    return scipy.linalg.block_diag(*blocks)


def _place_single_output(A_obs: np.ndarray, C_obs: np.ndarray, desired: np.ndarray) -> np.ndarray:
    """Bass-Gura style placement through the dual controllable pair."""
    q = A_obs.shape[0]
    Ad = A_obs.T
    b = C_obs.T
    ctrb = np.column_stack([np.linalg.matrix_power(Ad, k) @ b for k in range(q)])
    if numerical_rank(ctrb) < q:
        raise DesignError("pair is not observable; poles cannot be assigned")
    open_poly = np.poly(Ad)
    target_poly = np.real(np.poly(desired))
    # transform to the controllable companion form: first row from Ackermann's trick
    t1 = np.linalg.solve(ctrb.T, np.eye(q)[:, -1])
    T = np.vstack([t1 @ np.linalg.matrix_power(Ad, k) for k in range(q)])
    K_companion = (target_poly[1:] - open_poly[1:])[::-1]
    return (K_companion @ T).reshape(q, 1)


def _place_multi_output(A_obs: np.ndarray, C_obs: np.ndarray, desired: np.ndarray) -> np.ndarray:
    """Sylvester-equation placement with a random parameter matrix and retries."""
    q = A_obs.shape[0]
    m = C_obs.shape[0]
    Lam = _real_block_diag_of(desired)
    rng = np.random.default_rng(_SYLVESTER_SEED)
    for _ in range(_SYLVESTER_RETRIES):
        G = rng.standard_normal((m, q))
        X = scipy.linalg.solve_sylvester(A_obs.T, -Lam, C_obs.T @ G)
        if numerical_rank(X) == q and np.linalg.cond(X) < 1e12:
            return (G @ np.linalg.inv(X)).T
    raise DesignError("Sylvester placement failed: parameter matrix stayed singular")


def place_poles(A_obs: np.ndarray, C_obs: np.ndarray, desired) -> np.ndarray:
    """Gain L_obs such that eig(A_obs - L_obs C_obs) matches ``desired``.

    ``desired`` must be conjugate-closed with strictly negative real parts
    and have exactly as many entries as the block dimension.  Single-output
    blocks use a Bass-Gura construction on the dual pair; multi-output blocks
    solve a Sylvester equation with a random full-rank parameter matrix,
    retrying on the measure-zero singular draws.

    Raises
    ------
    DesignError
        For unobservable pairs or invalid target spectra.
    """
    A_obs = np.atleast_2d(np.asarray(A_obs, dtype=float))
    C_obs = np.atleast_2d(np.asarray(C_obs, dtype=float))
    q = A_obs.shape[0]
    if A_obs.shape != (q, q) or C_obs.shape[1] != q:
        raise DimensionError(f"inconsistent shapes {A_obs.shape} / {C_obs.shape}")
    desired = _check_targets(desired, q)
    if q == 0:
        return np.zeros((0, C_obs.shape[0]))
    if numerical_rank(stacked_observability(C_obs, A_obs)) < q:
        raise DesignError("pair is not observable; poles cannot be assigned")
    if C_obs.shape[0] == 1:
        L = _place_single_output(A_obs, C_obs, desired)
    else:
        L = _place_multi_output(A_obs, C_obs, desired)
    return L


def build_local_observer(
    plant: LtiPlant,
    P: SkewSymmetrizer,
    decomp: SubspaceDecomposition,
    L_obs: np.ndarray,
    gamma: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the full-coordinate injection and weighting matrices.

    ``L = P T [L_obs; 0]`` and ``M = P T diag(0, I) T^T P^{-1}``; with an
    identity transform these reduce to the plain constructions on the
    decomposition itself.  ``M`` is the (oblique, orthogonal when P = I)
    projection onto the agent's unobservable subspace, which is where the
    consensus correction acts.
    """
    if gamma <= 0:
        raise DomainError(f"coupling gain must be positive, got {gamma:g}")
    n = plant.n
    m_i = plant.partition[decomp.agent]
    L_obs = np.asarray(L_obs, dtype=float).reshape(decomp.n_obs, m_i)
    T = decomp.transform
    if T.shape[0] != n or P.P.shape[0] != n:
        raise DimensionError("plant, transform, and P disagree on the state dimension")
    L = P.P @ T @ np.vstack([L_obs, np.zeros((decomp.n_unobs, m_i))])
    selector = np.zeros((n, n))
    if decomp.n_unobs:
        selector[decomp.n_obs :, decomp.n_obs :] = np.eye(decomp.n_unobs)
    M = P.P @ T @ selector @ T.T @ P.P_inv
    return L, M


def assemble_bank(
    plant: LtiPlant,
    schedule: SwitchingSchedule,
    gains=None,
    targets=None,
    T_c: float | None = None,
    use_transform: bool = True,
) -> ObserverBank:
    """Run the full synthesis pipeline and return the observer bank.

    Verifies the three standing assumptions (neutral stability, joint
    observability, joint connectivity over windows of length ``T_c``,
    defaulting to the schedule period), computes the skew-symmetrizing
    transform when needed, decomposes every agent's view, places the
    prescribed spectra, and assembles the gains.  ``gains`` may differ per
    agent; ``targets`` is a per-agent list of desired eigenvalues, with
    ``None`` entries filled by :func:`default_targets`.

    Raises
    ------
    AssumptionError
        Naming whichever assumption check failed.
    DesignError
        If pole placement fails for some agent.
    """
    N = plant.N
    if schedule.N != N:
        raise DimensionError(f"schedule has {schedule.N} nodes but the plant has {N} agents")
    gains = [1.0] * N if gains is None else [float(g) for g in gains]
    if len(gains) != N:
        raise DimensionError(f"expected {N} gains, got {len(gains)}")
    if any(g <= 0 for g in gains):
        raise DomainError("all coupling gains must be positive")
    if targets is None:
        targets = [None] * N
    if len(targets) != N:
        raise DimensionError(f"expected {N} target lists, got {len(targets)}")

    report = check_neutral_stability(plant.A)
    if not report.is_neutrally_stable:
        raise AssumptionError(
            "neutral_stability",
            f"max eigenvalue real part {report.max_real_part:.3e}, "
            f"semisimplicity defect {report.semisimplicity_defect:g}",
        )
    if not check_joint_observability(plant):
        raise AssumptionError("joint_observability", "the stacked pair (C, A) is not observable")
    if T_c is None:
        if schedule.period is None:
            raise DomainError("T_c is required for non-periodic schedules")
        T_c = schedule.period
    try:
        check_joint_connectivity(schedule, T_c)
    except JointConnectivityViolation as exc:
        raise AssumptionError("joint_connectivity", str(exc)) from exc

    if use_transform:
        P = skew_symmetrize(plant.A)
    else:
        defect = skew_defect(plant.A)
        if defect > TOL_SKEW:
            raise PreconditionError(
                "use_transform=False requires a skew-symmetric plant matrix"
            )
        P = SkewSymmetrizer.identity(plant.n, residual=defect)

    if frob(P.P - np.eye(plant.n)) == 0.0:
        A_eff = plant.A
        working = plant
    else:
        A_eff = P.P_inv @ plant.A @ P.P
        working = LtiPlant(A=A_eff, C=plant.C @ P.P, partition=plant.partition)

    observers = []
    margin = np.inf
    for i in range(N):
        decomp = kalman_decompose(working, i, A_eff)
        desired = targets[i] if targets[i] is not None else default_targets(decomp.n_obs)
        try:
            L_obs = place_poles(decomp.A_obs, decomp.C_obs, desired)
        except DesignError as exc:
            raise DesignError(f"agent {i}: {exc}") from exc
        achieved = np.linalg.eigvals(decomp.A_obs - L_obs @ decomp.C_obs)
        desired_arr = np.asarray(desired, dtype=complex)
        err = spectrum_match_error(achieved, desired_arr)
        radius = float(np.abs(desired_arr).max()) if desired_arr.size else 1.0
        if err > TOL_PLACE * max(1.0, radius):
            raise DesignError(
                f"agent {i}: achieved spectrum misses the targets by {err:.3e} "
                f"(tolerance {TOL_PLACE * max(1.0, radius):.3e})"
            )
        L, M = build_local_observer(plant, P, decomp, L_obs, gains[i])
        if decomp.n_obs:
            margin = min(margin, -float(achieved.real.max()))
        observers.append(
            LocalObserver(
                agent=i,
                L=L,
                M=M,
                gamma=gains[i],
                L_obs=L_obs,
                decomposition=decomp,
                targets=tuple(complex(z) for z in desired_arr),
                achieved=tuple(complex(z) for z in achieved),
                placement_error=err,
            )
        )
    return ObserverBank(plant=plant, P=P, observers=tuple(observers), margin=float(margin))
