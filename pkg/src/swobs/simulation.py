"""Fixed-step simulation of the plant, the coupled observer network, and the
auxiliary switched subsystems used by the stability analysis.

Integration is classical fourth-order Runge-Kutta on a sample grid built from
the switching schedule: every switching instant is a grid point, so no step
ever straddles two topologies and the dynamics are linear time-invariant
within each step.  For unforced runs the RK4 step of a linear system is a
fixed degree-4 polynomial in the step matrix, which is precomputed per
(topology, step length) pair; forced runs evaluate the four stages directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._linalg import frob, skew_defect
from .design import ObserverBank
from .errors import DimensionError, DivergenceError, DomainError, PreconditionError
from .graph import SwitchingSchedule
from .plant import LtiPlant

INIT_BOX = 5.0  # random initial conditions are uniform on [-INIT_BOX, INIT_BOX]^n


@dataclass(frozen=True)
class DisturbanceSpec:
    """Bounded additive perturbation on the observer dynamics.

    Each disturbed agent receives a deterministic sinusoid of the given
    amplitude on every state component (phases offset per agent and per
    component so nothing aligns).  ``agents=None`` disturbs all agents.
    """

    amplitude: float
    agents: tuple[int, ...] | None = None


@dataclass(frozen=True)
class SimConfig:
    """Integration settings shared by all simulators.

    ``dt`` must not exceed half the schedule dwell time, so every topology
    piece contains at least two steps.  ``x0``/``xhat0`` override the seeded
    random initial conditions; ``match_initial`` starts every observer at the
    plant state (zero initial error).
    """

    dt: float
    T_end: float
    seed: int = 0
    disturbance: DisturbanceSpec | None = None
    x0: np.ndarray | None = None
    xhat0: np.ndarray | None = None
    match_initial: bool = False
    csv_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise DomainError(f"dt must be positive, got {self.dt:g}")
        if self.T_end <= 0:
            raise DomainError(f"T_end must be positive, got {self.T_end:g}")
        if self.csv_stride < 1:
            raise DomainError("csv_stride must be at least 1")


@dataclass(frozen=True)
class SimulationTrace:
    """Sampled run of the plant plus all observers.

    ``observer_states[k, i]`` is agent i's estimate at ``times[k]``;
    ``error_norms`` is recomputed from the stored states, never accumulated.
    ``steps`` logs every internal integration step as (t0, t1, topology).
    """

    times: np.ndarray
    plant_states: np.ndarray
    observer_states: np.ndarray
    error_norms: np.ndarray
    active_topology: np.ndarray
    steps: tuple[tuple[float, float, int], ...] = field(repr=False, default=())

    @property
    def n(self) -> int:
        return self.plant_states.shape[1]

    @property
    def N(self) -> int:
        return self.observer_states.shape[1]


@dataclass(frozen=True)
class AuxTrace:
    """Sampled run of one of the auxiliary switched subsystems."""

    times: np.ndarray
    states: np.ndarray
    active_topology: np.ndarray
    steps: tuple[tuple[float, float, int], ...] = field(repr=False, default=())

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


@dataclass(frozen=True)
class ErrorCoordinateTrace:
    """Estimation errors integrated directly in decomposition coordinates.

    ``obs_coords``/``unobs_coords`` stack the per-agent observable and
    unobservable error components; the slices say which columns belong to
    which agent.  ``reconstructors[i]`` maps agent i's stacked coordinates
    back to the original-frame error.
    """

    times: np.ndarray
    obs_coords: np.ndarray
    unobs_coords: np.ndarray
    active_topology: np.ndarray
    obs_slices: tuple[slice, ...]
    unobs_slices: tuple[slice, ...]
    reconstructors: tuple[np.ndarray, ...]
    steps: tuple[tuple[float, float, int], ...] = field(repr=False, default=())

    def errors(self) -> np.ndarray:
        """Per-sample, per-agent errors in original coordinates, shape (K, N, n)."""
        K = self.times.size
        N = len(self.reconstructors)
        n = self.reconstructors[0].shape[0]
        out = np.empty((K, N, n))
        for i, R in enumerate(self.reconstructors):
            xi = np.hstack([self.obs_coords[:, self.obs_slices[i]], self.unobs_coords[:, self.unobs_slices[i]]])
            out[:, i, :] = xi @ R.T
        return out

    def error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.errors(), axis=2)


def _sample_grid(
    schedule: SwitchingSchedule, dt: float, T_end: float
) -> tuple[np.ndarray, list[tuple[float, float, int]]]:
    """Sample times (all dt multiples and all switching instants) and the
    integration segments between them, each tagged with its topology."""
    tol = 1e-9 * dt
    segments: list[tuple[float, float, int]] = []
    for s, e, p in schedule.pieces_in(0.0, T_end):
        points = [s]
        k = math.floor(s / dt) + 1
        while True:
            t = k * dt
            if t >= e - tol:
                break
            if t > s + tol:
                points.append(t)
            k += 1
        points.append(e)
        segments.extend((points[j], points[j + 1], p) for j in range(len(points) - 1))
    times = np.array([0.0] + [seg[1] for seg in segments])
    return times, segments


def _rk4_propagator(F: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of z' = F z as a matrix (degree-4 Taylor polynomial)."""
    X = np.eye(F.shape[0])
    term = np.eye(F.shape[0])
    for k in range(1, 5):
        term = term @ F * (h / k)
        X = X + term
    return X


def _integrate(piece_matrices, segments, z0: np.ndarray, forcing=None) -> np.ndarray:
    """Run the switched RK4 recursion over precomputed segments."""
    z = np.asarray(z0, dtype=float).ravel()
    states = np.empty((len(segments) + 1, z.size))
    states[0] = z
    propagators: dict[tuple[int, float], np.ndarray] = {}
    for s, (t0, t1, p) in enumerate(segments):
        h = t1 - t0
        if forcing is None:
            key = (p, h)
            Phi = propagators.get(key)
            if Phi is None:
                Phi = propagators[key] = _rk4_propagator(piece_matrices[p], h)
            z = Phi @ z
        else:
            F = piece_matrices[p]
            k1 = F @ z + forcing(t0)
            k2 = F @ (z + 0.5 * h * k1) + forcing(t0 + 0.5 * h)
            k3 = F @ (z + 0.5 * h * k2) + forcing(t0 + 0.5 * h)
            k4 = F @ (z + h * k3) + forcing(t1)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(t0, states[s])
        states[s + 1] = z
    return states


def _check_grid_inputs(schedule: SwitchingSchedule, config: SimConfig) -> None:
    if config.dt > schedule.dwell / 2 + 1e-12:
        raise PreconditionError(
            f"dt = {config.dt:g} exceeds half the dwell time {schedule.dwell:g}"
        )


def _active_per_sample(schedule: SwitchingSchedule, times: np.ndarray) -> np.ndarray:
    return np.array([schedule.active_index(float(t)) for t in times], dtype=int)


def _coupled_matrices(plant: LtiPlant, bank: ObserverBank, schedule: SwitchingSchedule) -> list[np.ndarray]:
    """Joint (plant + N observers) system matrix for each topology."""
    n, N = plant.n, plant.N
    mats = []
    for L_top in schedule.laplacians:
        F = np.zeros(((N + 1) * n, (N + 1) * n))
        F[:n, :n] = plant.A
        for i, obs in enumerate(bank.observers):
            C_i = plant.C_block(i)
            ri = slice((i + 1) * n, (i + 2) * n)
            LC = obs.L @ C_i
            F[ri, :n] = LC
            F[ri, ri] += plant.A - LC
            for j in range(N):
                rj = slice((j + 1) * n, (j + 2) * n)
                w = L_top[i, j]
                if w != 0.0:
                    F[ri, rj] += -obs.gamma * w * obs.M
        mats.append(F)
    return mats


def _initial_states(plant: LtiPlant, config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    x0 = (
        np.asarray(config.x0, dtype=float).reshape(plant.n)
        if config.x0 is not None
        else rng.uniform(-INIT_BOX, INIT_BOX, plant.n)
    )
    if config.match_initial:
        xhat0 = np.tile(x0, (plant.N, 1))
    elif config.xhat0 is not None:
        xhat0 = np.asarray(config.xhat0, dtype=float).reshape(plant.N, plant.n)
    else:
        xhat0 = rng.uniform(-INIT_BOX, INIT_BOX, (plant.N, plant.n))
    return x0, xhat0


def _disturbance_forcing(plant: LtiPlant, spec: DisturbanceSpec):
    n, N = plant.n, plant.N
    agents = range(N) if spec.agents is None else spec.agents
    amp = np.zeros((N + 1) * n)
    phase = np.zeros((N + 1) * n)
    for i in agents:
        block = slice((i + 1) * n, (i + 2) * n)
        amp[block] = spec.amplitude
        phase[block] = i + 0.7 * np.arange(n)
    two_pi = 2.0 * math.pi

    def forcing(t: float) -> np.ndarray:
        return amp * np.sin(two_pi * t + phase)

    return forcing


def simulate_network(
    plant: LtiPlant, bank: ObserverBank, schedule: SwitchingSchedule, config: SimConfig
) -> SimulationTrace:
    """Integrate the plant together with all coupled local observers.

    Initial conditions come from ``config`` (explicit arrays or the seeded
    uniform draw).  Raises :class:`DivergenceError` if the state leaves the
    representable range, carrying the last finite sample.
    """
    if bank.N != plant.N or bank.plant.n != plant.n:
        raise DimensionError("observer bank does not match the plant dimensions")
    if not np.allclose(bank.plant.A, plant.A, atol=1e-12 * max(1.0, frob(plant.A))):
        raise PreconditionError("observer bank was designed for a different plant matrix")
    if schedule.N != plant.N:
        raise DimensionError("schedule node count does not match the agent count")
    _check_grid_inputs(schedule, config)

    times, segments = _sample_grid(schedule, config.dt, config.T_end)
    x0, xhat0 = _initial_states(plant, config)
    z0 = np.concatenate([x0, xhat0.ravel()])
    forcing = _disturbance_forcing(plant, config.disturbance) if config.disturbance else None
    states = _integrate(_coupled_matrices(plant, bank, schedule), segments, z0, forcing)

    n, N = plant.n, plant.N
    plant_states = states[:, :n]
    observer_states = states[:, n:].reshape(-1, N, n)
    error_norms = np.linalg.norm(observer_states - plant_states[:, None, :], axis=2)
    return SimulationTrace(
        times=times,
        plant_states=plant_states,
        observer_states=observer_states,
        error_norms=error_norms,
        active_topology=_active_per_sample(schedule, times),
        steps=tuple(segments),
    )


def simulate_error_coordinates(
    plant: LtiPlant,
    bank: ObserverBank,
    schedule: SwitchingSchedule,
    config: SimConfig,
    e0: np.ndarray,
) -> ErrorCoordinateTrace:
    """Integrate the estimation errors directly in decomposition coordinates.

    The observable components are autonomous and block-decoupled; the
    unobservable components are driven by the switched consensus coupling.
    ``e0`` holds the initial errors per agent in original coordinates,
    shape (N, n).
    """
    if schedule.N != plant.N:
        raise DimensionError("schedule node count does not match the agent count")
    _check_grid_inputs(schedule, config)
    e0 = np.asarray(e0, dtype=float).reshape(plant.N, plant.n)

    n, N = plant.n, plant.N
    decomps = [obs.decomposition for obs in bank.observers]
    q_sizes = [d.n_obs for d in decomps]
    nu_sizes = [d.n_unobs for d in decomps]
    q_total, nu_total = sum(q_sizes), sum(nu_sizes)

    A_cl = scipy.linalg.block_diag(
        *[d.A_obs - obs.L_obs @ d.C_obs for obs, d in zip(bank.observers, decomps)]
    ) if q_total else np.zeros((0, 0))
    D = scipy.linalg.block_diag(*[d.obs_basis for d in decomps])
    U = scipy.linalg.block_diag(*[d.unobs_basis for d in decomps])
    A_unobs = scipy.linalg.block_diag(*[d.A_unobs for d in decomps]) if nu_total else np.zeros((0, 0))
    Gamma = bank.gain_block_diag()

    mats = []
    for L_top in schedule.laplacians:
        LI = np.kron(L_top, np.eye(n))
        F = np.zeros((q_total + nu_total, q_total + nu_total))
        F[:q_total, :q_total] = A_cl
        F[q_total:, :q_total] = -Gamma @ U.T @ LI @ D
        F[q_total:, q_total:] = A_unobs - Gamma @ U.T @ LI @ U
        mats.append(F)

    xi0 = np.empty(q_total + nu_total)
    obs_slices, unobs_slices, recons = [], [], []
    qo = no = 0
    for i, d in enumerate(decomps):
        xi = d.transform.T @ bank.P.P_inv @ e0[i]
        xi0[qo : qo + q_sizes[i]] = xi[: q_sizes[i]]
        xi0[q_total + no : q_total + no + nu_sizes[i]] = xi[q_sizes[i] :]
        obs_slices.append(slice(qo, qo + q_sizes[i]))
        unobs_slices.append(slice(no, no + nu_sizes[i]))
        recons.append(bank.P.P @ d.transform)
        qo += q_sizes[i]
        no += nu_sizes[i]

    times, segments = _sample_grid(schedule, config.dt, config.T_end)
    states = _integrate(mats, segments, xi0)
    return ErrorCoordinateTrace(
        times=times,
        obs_coords=states[:, :q_total],
        unobs_coords=states[:, q_total:],
        active_topology=_active_per_sample(schedule, times),
        obs_slices=tuple(obs_slices),
        unobs_slices=tuple(unobs_slices),
        reconstructors=tuple(recons),
        steps=tuple(segments),
    )


def _coupling_blocks(U: np.ndarray, schedule: SwitchingSchedule) -> list[np.ndarray]:
    """U^T (L_p (x) I_n) U for every topology p."""
    Nn, _ = U.shape
    if Nn % schedule.N:
        raise DimensionError(f"U has {Nn} rows, not divisible by the {schedule.N} nodes")
    n = Nn // schedule.N
    eye = np.eye(n)
    return [U.T @ np.kron(L, eye) @ U for L in schedule.laplacians]


def simulate_kernel_consensus(
    U: np.ndarray, Q: np.ndarray, schedule: SwitchingSchedule, config: SimConfig, z0
) -> AuxTrace:
    """Integrate z' = -Q U^T (L(t) (x) I_n) U z.

    ``U`` is the block-diagonal stack of the per-agent unobservable-subspace
    bases and ``Q`` any symmetric positive definite gain.  This flow is the
    engine behind the consensus correction: under joint observability and
    joint connectivity it contracts to zero exponentially.
    """
    U = np.asarray(U, dtype=float)
    Q = np.asarray(Q, dtype=float)
    nu = U.shape[1]
    if Q.shape != (nu, nu):
        raise DimensionError(f"Q must be {nu}x{nu}, got {Q.shape}")
    if nu:
        if frob(Q - Q.T) > 1e-9 * max(1.0, frob(Q)) or np.linalg.eigvalsh((Q + Q.T) / 2).min() <= 0:
            raise PreconditionError("Q must be symmetric positive definite")
    _check_grid_inputs(schedule, config)
    times, segments = _sample_grid(schedule, config.dt, config.T_end)
    if nu == 0:
        return AuxTrace(
            times=times,
            states=np.zeros((times.size, 0)),
            active_topology=_active_per_sample(schedule, times),
            steps=tuple(segments),
        )
    mats = [-Q @ Mp for Mp in _coupling_blocks(U, schedule)]
    states = _integrate(mats, segments, np.asarray(z0, dtype=float).reshape(nu))
    return AuxTrace(
        times=times,
        states=states,
        active_topology=_active_per_sample(schedule, times),
        steps=tuple(segments),
    )


def simulate_kernel_error(
    A_unobs: np.ndarray,
    Gamma: np.ndarray,
    U: np.ndarray,
    schedule: SwitchingSchedule,
    config: SimConfig,
    z0,
) -> AuxTrace:
    """Integrate z' = (A_unobs - Gamma U^T (L(t) (x) I_n) U) z.

    ``A_unobs`` is the block-diagonal stack of the skew-symmetric
    unobservable blocks and ``Gamma`` the positive definite (block-diagonal)
    coupling-gain matrix.  Rotating by exp(-A_unobs t) turns this flow into
    the plain kernel-consensus flow with gain ``Gamma``, so its norm decays
    identically.
    """
    U = np.asarray(U, dtype=float)
    A_unobs = np.asarray(A_unobs, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    nu = U.shape[1]
    if A_unobs.shape != (nu, nu) or Gamma.shape != (nu, nu):
        raise DimensionError("A_unobs and Gamma must be square of the stacked kernel dimension")
    if nu:
        if skew_defect(A_unobs) > 1e-8 * max(1.0, frob(A_unobs)):
            raise PreconditionError("A_unobs must be skew-symmetric")
        if frob(Gamma - Gamma.T) > 1e-9 * max(1.0, frob(Gamma)) or np.linalg.eigvalsh((Gamma + Gamma.T) / 2).min() <= 0:
            raise PreconditionError("Gamma must be symmetric positive definite")
    _check_grid_inputs(schedule, config)
    times, segments = _sample_grid(schedule, config.dt, config.T_end)
    if nu == 0:
        return AuxTrace(
            times=times,
            states=np.zeros((times.size, 0)),
            active_topology=_active_per_sample(schedule, times),
            steps=tuple(segments),
        )
    mats = [A_unobs - Gamma @ Mp for Mp in _coupling_blocks(U, schedule)]
    states = _integrate(mats, segments, np.asarray(z0, dtype=float).reshape(nu))
    return AuxTrace(
        times=times,
        states=states,
        active_topology=_active_per_sample(schedule, times),
        steps=tuple(segments),
    )


def write_trace_csv(trace: SimulationTrace, path, stride: int = 1) -> None:
    """Serialize a network trace.

    Columns: ``t``, ``active_topology``, the plant state, then per agent the
    estimate components followed by that agent's error norm.  Floats carry 17
    significant digits so a rerun with the same scenario and seed reproduces
    the file byte for byte.
    """
    n, N = trace.n, trace.N
    header = ["t", "active_topology"]
    header += [f"x_{k + 1}" for k in range(n)]
    for i in range(N):
        header += [f"xhat_{i + 1}_{k + 1}" for k in range(n)]
        header.append(f"err_norm_{i + 1}")
    rows = list(range(0, trace.times.size, stride))
    if rows[-1] != trace.times.size - 1:
        rows.append(trace.times.size - 1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in rows:
            cells = [f"{trace.times[k]:.17g}", str(int(trace.active_topology[k]))]
            cells += [f"{v:.17g}" for v in trace.plant_states[k]]
            for i in range(N):
                cells += [f"{v:.17g}" for v in trace.observer_states[k, i]]
                cells.append(f"{trace.error_norms[k, i]:.17g}")
            fh.write(",".join(cells) + "\n")


def read_trace_csv(path) -> SimulationTrace:
    """Parse a file produced by :func:`write_trace_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if header[:2] != ["t", "active_topology"]:
        raise DomainError("not a trace file: missing the t/active_topology columns")
    n = sum(1 for name in header if name.startswith("x_"))
    N = sum(1 for name in header if name.startswith("err_norm_"))
    expected = 2 + n + N * (n + 1)
    if len(header) != expected or data.shape[1] != expected:
        raise DimensionError(f"trace has {len(header)} columns, expected {expected}")
    times = data[:, 0]
    active = data[:, 1].astype(int)
    plant_states = data[:, 2 : 2 + n]
    observer_states = np.empty((data.shape[0], N, n))
    error_norms = np.empty((data.shape[0], N))
    col = 2 + n
    for i in range(N):
        observer_states[:, i, :] = data[:, col : col + n]
        error_norms[:, i] = data[:, col + n]
        col += n + 1
    return SimulationTrace(
        times=times,
        plant_states=plant_states,
        observer_states=observer_states,
        error_norms=error_norms,
        active_topology=active,
    )
