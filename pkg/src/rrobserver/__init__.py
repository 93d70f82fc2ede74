"""Sampled-data state observers over lossy round-robin networks."""
from .design import DesignResult, design_observer
from .estimator import InfeasibleDesignError, RoundRobinObserver
from .exceptions import (
    BoundViolationError,
    ConfigError,
    DimensionError,
    DomainError,
    IllConditionedCertificateError,
    InvalidProblemError,
    MissingGainError,
    RRObserverError,
)
from .matexp import eig_spectrum, exp_integral, is_negative_definite, mat_exp
from .protocol import (
    DropoutPlan,
    Mode,
    SchedulerState,
    generate_dropouts,
    reception_times,
    step,
)
from .simulation import LoopState, SimulationTrace, intersample_bound, propagate_interval, simulate
from .solvers import CvxpyBackend, solve_feasibility
from .synthesis import (
    Certificate,
    GainSchedule,
    PlantModel,
    ScriptMatrices,
    SynthesisProblem,
    assemble_lmis,
    build_script_matrices,
    closed_loop_matrix,
    recover_gains,
    verify_certificate,
)

__version__ = "0.1.0"
