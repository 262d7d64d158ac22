"""Exception types shared across the package."""

from __future__ import annotations


class SwobsError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(SwobsError, ValueError):
    """Inputs have inconsistent or invalid shapes."""


class DomainError(SwobsError, ValueError):
    """A scalar argument is outside its admissible range."""


class NotNeutrallyStableError(SwobsError):
    """The system matrix fails the neutral-stability requirement.

    Carries the full :class:`~swobs.plant.NeutralStabilityReport` so callers
    can inspect which eigenvalues are at fault.
    """

    def __init__(self, report):
        self.report = report
        super().__init__(
            "matrix is not neutrally stable "
            f"(max real part {report.max_real_part:.3e}, "
            f"semisimplicity defect {report.semisimplicity_defect:g})"
        )


class PreconditionError(SwobsError, ValueError):
    """A documented operation precondition does not hold."""


class DesignError(SwobsError):
    """Observer synthesis failed (unobservable pair, bad target spectrum)."""


class AssumptionError(SwobsError):
    """One of the standing assumptions on the problem data failed.

    ``assumption`` names the failed check: ``"neutral_stability"``,
    ``"joint_observability"`` or ``"joint_connectivity"``.
    """

    def __init__(self, assumption: str, message: str):
        self.assumption = assumption
        super().__init__(f"{assumption}: {message}")


class JointConnectivityViolation(SwobsError):
    """A window of the switching schedule has a disconnected union graph.

    ``window`` is the offending ``(t_start, t_end)`` pair; ``certified`` is
    False when the greedy window partition could not be formed at all (which
    leaves the property undecided rather than disproved).
    """

    def __init__(self, window: tuple[float, float], message: str, certified: bool = True):
        self.window = window
        self.certified = certified
        super().__init__(f"window [{window[0]:g}, {window[1]:g}): {message}")


class InternalConsistencyError(SwobsError):
    """A computed result failed its own certification (numerical breakdown)."""


class DivergenceError(SwobsError):
    """Numerical integration produced non-finite values.

    ``last_time`` and ``last_state`` hold the final finite sample.
    """

    def __init__(self, last_time: float, last_state):
        self.last_time = last_time
        self.last_state = last_state
        super().__init__(f"integration diverged after t = {last_time:g}")


class ScenarioError(SwobsError, ValueError):
    """A scenario file failed to parse or validate.

    ``field`` holds a dotted path to the offending entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
