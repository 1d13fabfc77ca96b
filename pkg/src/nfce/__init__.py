"""Near-field channel estimation for hybrid-RIS uplinks.

Channel synthesis under the spherical-wavefront model, random-phase pilot
reception, block-sparsity aware estimators (BESVR and linear TVR, both ADMM
based), OMP baselines, and a Monte-Carlo harness for NMSE and timing sweeps.
"""

from .estimators import (
    BesvrConfig,
    EstimateResult,
    PolarGrid,
    besvr,
    besvr_stage1,
    build_polar_grid,
    domp_estimate,
    pomp_estimate,
    tvr_estimate,
)
from .geometry import (
    ArrayGeometry,
    ChannelRealization,
    GainModel,
    NearFieldPath,
    PathKind,
    ScenarioConfig,
    element_distance,
    far_field_steering_vector,
    rayleigh_distance,
    sample_scenario,
    steering_vector,
    synthesize_channel,
)
from .harness import ExperimentConfig, MetricsSummary, TrialRecord, nmse, run_trial
from .measurement import (
    ReceivedSignal,
    SensingOperator,
    TrainingConfig,
    angular_coefficients,
    build_sensing,
    dft_matrix,
    simulate_reception,
)
from .solvers import AdmmParams, AdmmTrace, admm_lasso, admm_tv, first_difference_matrix, soft_threshold

__version__ = "0.1.0"
