"""Simulation, pathwise integration and replication for Gaussian processes with Hölder-type increments."""

from .gp_sim import (
    FBM,
    ClassReport,
    CovarianceModel,
    FactorizationError,
    GenericKernel,
    PathBatch,
    SamplePath,
    StationaryExp,
    StationaryGeneric,
    check_class_membership,
    check_smallball_conditions,
    covariance,
    incremental_variance,
    sample_paths,
)
from .grid import GridFunction, TimeGrid
from .pathwise import BVRule, FollmerResult, Segment, StepIntegrand, follmer_integral, integrate_step, ito_residual
from .replicate import (
    HolderParams,
    LemmaParams,
    PartitionSchedule,
    ReplicationOutcome,
    TargetSpec,
    WindowError,
    build_diverging_integrand,
    default_holder_params,
    default_lemma_params,
    partition_schedule,
    replicate_distribution,
    replicate_holder,
    replicate_rv,
)

__version__ = "0.1.0"
