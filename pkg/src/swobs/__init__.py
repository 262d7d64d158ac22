"""Distributed state estimation over jointly connected switching networks.

A design-and-verification toolkit for networks of local observers that
jointly reconstruct the state of a neutrally stable LTI plant, each agent
seeing only part of the output and exchanging estimates over a switching
graph that may be disconnected at every instant.  The package synthesises the
local gains, simulates the coupled network, and numerically certifies the
exponential-convergence machinery (windowed observability Gramians, energy
contraction, decay-rate fits).
"""

from .analysis import (
    GramianReport,
    RateFit,
    coupling_gramian,
    fit_exponential_rate,
    uco_certify,
    union_gramian_min_eigs,
    window_contraction,
)
from .decomposition import SubspaceDecomposition, kalman_decompose, observability_matrix, subspace_bases
from .design import (
    LocalObserver,
    ObserverBank,
    assemble_bank,
    build_local_observer,
    default_targets,
    place_poles,
)
from .errors import (
    AssumptionError,
    DesignError,
    DimensionError,
    DivergenceError,
    DomainError,
    InternalConsistencyError,
    JointConnectivityViolation,
    NotNeutrallyStableError,
    PreconditionError,
    ScenarioError,
    SwobsError,
)
from .graph import (
    ConnectivityCertificate,
    SwitchingSchedule,
    Topology,
    active_index,
    assumption_windows,
    check_joint_connectivity,
    laplacian,
    union_laplacian,
)
from .plant import (
    LtiPlant,
    NeutralStabilityReport,
    SkewSymmetrizer,
    check_joint_observability,
    check_neutral_stability,
    skew_symmetrize,
)
from .scenario import Scenario, load_scenario, save_scenario, scenario_from_dict, scenario_to_dict
from .simulation import (
    AuxTrace,
    DisturbanceSpec,
    ErrorCoordinateTrace,
    SimConfig,
    SimulationTrace,
    read_trace_csv,
    simulate_error_coordinates,
    simulate_kernel_consensus,
    simulate_kernel_error,
    simulate_network,
    write_trace_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
