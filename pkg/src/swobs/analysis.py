"""Numerical certification: windowed Gramians, contraction factors, decay rates.

The consensus correction is driven by the time-varying coupling
``U^T (L(t) (x) I_n) U``.  Because that integrand is constant on every
topology piece, its windowed Gramian is an exact weighted sum of per-piece
matrices (no quadrature error).  Uniform positive definiteness of these
Gramians over a sliding window is the certificate behind exponential decay,
and the window-to-window contraction of the quadratic energy is its directly
measurable counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._linalg import frob
from .errors import DimensionError, DomainError, PreconditionError
from .graph import SwitchingSchedule, assumption_windows, union_laplacian
from .simulation import AuxTrace

TOL_UCO = 1e-9
NORM_FLOOR = 1e-300


@dataclass(frozen=True)
class GramianReport:
    """Sliding-window Gramian bounds from :func:`uco_certify`.

    ``samples`` holds (window start, smallest eigenvalue, largest eigenvalue)
    triples; ``alpha_min``/``alpha_max`` aggregate them.  ``valid`` means the
    lower bound stayed above the tolerance, i.e. the system is uniformly
    completely observable over windows of this length on the swept horizon.
    """

    window_length: float
    samples: tuple[tuple[float, float, float], ...]
    alpha_min: float
    alpha_max: float
    valid: bool


@dataclass(frozen=True)
class RateFit:
    """Exponential envelope fit ``norm(t) ~ prefactor * exp(-rate * t)``.

    ``degenerate`` marks an identically zero signal, reported as an infinite
    rate.  ``r_squared`` is the goodness of the log-linear fit in [0, 1].
    """

    rate: float
    prefactor: float
    r_squared: float
    window: tuple[float, float]
    degenerate: bool = False


def coupling_gramian(
    U: np.ndarray, schedule: SwitchingSchedule, t_start: float, window_length: float
) -> np.ndarray:
    """Exact integral of U^T (L(t) (x) I_n) U over [t_start, t_start + window_length].

    Piecewise-constant integrand, so the result is the sum of piece durations
    times constant matrices; symmetric positive semi-definite by construction.
    """
    U = np.asarray(U, dtype=float)
    if window_length <= 0:
        raise DomainError(f"window length must be positive, got {window_length:g}")
    if U.shape[0] % schedule.N:
        raise DimensionError(f"U has {U.shape[0]} rows, not divisible by the {schedule.N} nodes")
    n = U.shape[0] // schedule.N
    nu = U.shape[1]
    eye = np.eye(n)
    G = np.zeros((nu, nu))
    blocks: dict[int, np.ndarray] = {}
    for s, e, p in schedule.pieces_in(t_start, t_start + window_length):
        Mp = blocks.get(p)
        if Mp is None:
            Mp = blocks[p] = U.T @ np.kron(schedule.laplacians[p], eye) @ U
        G += (e - s) * Mp
    return G


def uco_certify(
    U: np.ndarray,
    schedule: SwitchingSchedule,
    window_length: float,
    horizon: float,
    tol: float = TOL_UCO,
) -> GramianReport:
    """Sweep the windowed Gramian start over [0, horizon - window_length].

    The integrand only changes at switching instants, so the sweep grid is
    every switching instant plus every piece midpoint in range.  The report is
    valid when the smallest eigenvalue over the sweep exceeds ``tol``; an
    empty stacked basis (nothing unobservable anywhere) is trivially valid.
    """
    U = np.asarray(U, dtype=float)
    if horizon < window_length:
        raise DomainError("horizon must cover at least one window")
    sweep_end = horizon - window_length
    starts = {0.0}
    starts.update(t for t in schedule.instants_in(0.0, sweep_end + 1e-12))
    for s, e, _ in schedule.pieces_in(0.0, max(sweep_end, 1e-12)):
        mid = 0.5 * (s + e)
        if mid <= sweep_end:
            starts.add(mid)
    if U.shape[1] == 0:
        return GramianReport(
            window_length=window_length,
            samples=(),
            alpha_min=math.inf,
            alpha_max=math.inf,
            valid=True,
        )
    samples = []
    for t_star in sorted(starts):
        eigs = np.linalg.eigvalsh(coupling_gramian(U, schedule, t_star, window_length))
        samples.append((t_star, float(eigs[0]), float(eigs[-1])))
    alpha_min = min(lo for _, lo, _ in samples)
    alpha_max = max(hi for _, _, hi in samples)
    return GramianReport(
        window_length=window_length,
        samples=tuple(samples),
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        valid=bool(alpha_min > tol),
    )


def union_gramian_min_eigs(
    U: np.ndarray, schedule: SwitchingSchedule, T_c: float
) -> list[float]:
    """Smallest eigenvalue of U^T (sum-of-window-Laplacians (x) I_n) U per window.

    Windows come from the same greedy partition that certifies joint
    connectivity.  Under joint observability every value is strictly
    positive; a common unobservable direction across all agents drives one to
    zero.  An empty basis yields a vacuous +inf per window.
    """
    U = np.asarray(U, dtype=float)
    windows = assumption_windows(schedule, T_c)
    if U.shape[1] == 0:
        return [math.inf] * len(windows)
    if U.shape[0] % schedule.N:
        raise DimensionError(f"U has {U.shape[0]} rows, not divisible by the {schedule.N} nodes")
    n = U.shape[0] // schedule.N
    eye = np.eye(n)
    out = []
    for window in windows:
        L = union_laplacian(schedule, window)
        M = U.T @ np.kron(L, eye) @ U
        out.append(float(np.linalg.eigvalsh(M)[0]))
    return out


def _interp_states(trace: AuxTrace, t: float) -> np.ndarray:
    times = trace.times
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), times.size - 2)
    t0, t1 = times[k], times[k + 1]
    w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
    return (1.0 - w) * trace.states[k] + w * trace.states[k + 1]


def window_contraction(trace: AuxTrace, Q: np.ndarray, window_length: float) -> list[float]:
    """Energy ratios V(t* + W) / V(t*) over consecutive windows of a trace.

    ``V(z) = z^T Q^{-1} z / 2`` is the energy the kernel-consensus flow
    dissipates.  Windows with (numerically) zero starting energy are skipped,
    so a zero trace yields an empty list.
    """
    if window_length <= 0:
        raise DomainError(f"window length must be positive, got {window_length:g}")
    if trace.times[-1] - trace.times[0] < 2 * window_length:
        raise PreconditionError("trace must cover at least two windows")
    nu = trace.states.shape[1]
    if nu == 0:
        return []
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (nu, nu):
        raise DimensionError(f"Q must be {nu}x{nu}, got {Q.shape}")
    cho = scipy.linalg.cho_factor((Q + Q.T) / 2)

    def energy(z: np.ndarray) -> float:
        return 0.5 * float(z @ scipy.linalg.cho_solve(cho, z))

    ratios = []
    t = float(trace.times[0])
    end = float(trace.times[-1])
    while t + window_length <= end + 1e-9 * window_length:
        v0 = energy(_interp_states(trace, t))
        v1 = energy(_interp_states(trace, min(t + window_length, end)))
        if v0 > NORM_FLOOR:
            ratios.append(v1 / v0)
        t += window_length
    return ratios


def fit_exponential_rate(times, norms, window: tuple[float, float]) -> RateFit:
    """Least-squares exponential rate of a decaying (possibly oscillating) norm.

    The fit runs on the running-maximum envelope (the largest value from each
    sample onward), which removes the troughs that rotation-dominated error
    dynamics produce; the raw log-fit would be biased by them.  Norms are
    floored at 1e-300 before the log.

    Raises
    ------
    PreconditionError
        If the window contains fewer than 10 samples.
    """
    times = np.asarray(times, dtype=float).ravel()
    norms = np.asarray(norms, dtype=float).ravel()
    if times.shape != norms.shape:
        raise DimensionError("times and norms must have equal length")
    a, b = window
    mask = (times >= a) & (times <= b)
    if mask.sum() < 10:
        raise PreconditionError(f"need at least 10 samples in [{a:g}, {b:g}], got {int(mask.sum())}")
    t = times[mask]
    y = norms[mask]
    if y.max() <= 0.0:
        return RateFit(rate=math.inf, prefactor=0.0, r_squared=1.0, window=(a, b), degenerate=True)
    envelope = np.maximum.accumulate(y[::-1])[::-1]
    ly = np.log(np.maximum(envelope, NORM_FLOOR))
    design = np.column_stack([t, np.ones_like(t)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    residuals = ly - design @ (slope, intercept)
    ss_res = float(residuals @ residuals)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot <= 1e-30 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return RateFit(
        rate=float(-slope),
        prefactor=float(np.exp(intercept)),
        r_squared=r_squared,
        window=(a, b),
    )
