"""Case-study plants, controllers and the seeded Monte Carlo engine."""
from .bicycle import (
    BicycleHallway, CorridorFollower, DroppedRays, LidarConfig, OutsideMap, StructuredLidar,
    bicycle_step, default_hallway, lidar_scan, load_map, raycast, raycast_reference, save_map,
    scripted_bicycle_controllers, wall_distance,
)
from .controllers import (
    ConstantController, DimensionMismatch, LinearFeedback, NNController, NNWeights, TanhFeedback,
    nn_forward, random_tanh_network,
)
from .engine import (
    NumericBlowup, PairedResult, TrialConfig, TrialError, monte_carlo, paired_monte_carlo,
    run_paired, run_trial, simulate, trace_costs,
)
from .linear import LinearSystem, scalar_lipschitz_system, stable_linear_system
from .models import (
    NO_PERTURBATION, InitialOffset, ObservationOffset, Perturbation, ProcessNoiseScale,
    ResampleDisturbances, System, SystemModel,
)
from .rng import Channel, stream, trial_streams
from .uuv import (
    PipelineFollower, UuvPhysics, UuvPipeline, scripted_uuv_controllers, sonar_observe, uuv_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
