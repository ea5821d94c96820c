"""Laser-driven three-level atom with one transition damped by a flat
vacuum and the other coupled to a photonic band-edge continuum.

The atomic density-matrix populations are built without a master equation:
conditional no-jump evolution from numerically inverted resolvent
amplitudes, ensemble averages from a renewal equation, and seeded
quantum-jump Monte-Carlo trajectories, plus steady-state photon statistics
and detuning scans.
"""

from .errors import (
    AccuracyError,
    ConfigError,
    DegenerateCurvatureError,
    ParameterDomainError,
    PbgsimError,
    PoleError,
    SingularityError,
    StepperError,
)
from .inversion import (
    ContourSpec,
    NoJumpSolution,
    discretized_modes_oracle,
    discretized_self_energy,
    invert_contour,
    nojump_populations,
)
from .montecarlo import (
    DelaySampler,
    EnsembleStats,
    PhotonStatistics,
    TrajectoryRecord,
    build_delay_sampler,
    ensemble_average,
    photon_statistics,
    run_trajectory,
    trajectory_seed,
)
from .renewal import (
    EnsembleSolution,
    renewal_residual,
    renewal_transform_check,
    solve_renewal,
)
from .resolvent import (
    BandEdgeReservoir,
    FlatReservoir,
    ReservoirKind,
    SystemParams,
    amplitude_asymptotics,
    resolvent_amplitudes,
    self_energy,
)
from .spectral import (
    BandEdgeParams,
    BandModel,
    CouplingModel,
    band_edge_params,
    coupling_from_ratio,
    dispersion_omega,
    effective_coupling,
)
from .steadystate import (
    ScanResult,
    detuning_scan,
    free_space_branching,
    p_infinity_mode_integral,
)
from .cli import RunConfig, parse_config, run_scenario

__version__ = "0.1.0"
