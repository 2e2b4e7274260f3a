"""Desk-scale vibrotactile posture-guidance loop.

Planar sagittal body model, load-induced joint-torque estimation from
simulated force-plate data, constrained ergonomic posture optimization, a
three-modality directional feedback engine driving emulated vibrotactile
devices, simulated wearers closing the loop, and the metrics pipeline of the
accompanying experiment harness.
"""

from .agents import Agent, AgentParams, PRESETS, agent_decide, agent_step, make_agent
from .errors import (
    CalibrationError,
    ConfigError,
    ErgoguideError,
    EvaluationError,
    InfeasibleError,
    InputError,
    ModelError,
    RegistryError,
)
from .feedback import (
    DEVICE_INFO,
    DeviceCommand,
    DeviceEmulator,
    DevicePlacement,
    ErrorVector,
    FeedbackConfig,
    FeedbackState,
    Level,
    Modality,
    default_placements,
    encode_pattern,
    encode_ramp,
    encode_spot,
    error_magnitude,
    feedback_step,
    make_state,
    select_level,
    select_target_joint,
)
from .harness import (
    ProtocolSpec,
    SessionConfig,
    run_campaign,
    run_ergonomic_trial,
    run_modality_trial,
    verify_replay,
)
from .loading import (
    LoadSpec,
    PlateReading,
    TorqueVector,
    estimate_overloading,
    gravity_torques,
    loaded_torques,
    overloading_torques_oracle,
    simulate_plate,
)
from .metrics import (
    TrialLog,
    angular_distance,
    confusion_index,
    decrement_ratio,
    final_error,
    path_speed,
    reaching_time,
    reaching_velocity,
    rm_anova_f,
    seq_score,
    success,
    sus_score,
    trial_metrics,
)
from .model import (
    JOINTS,
    HumanModel,
    Posture,
    SescParams,
    SupportPolygon,
    default_model,
    forward_kinematics,
    sesc_calibrate,
    sesc_com,
    support_polygon,
    whole_body_com,
)
from .optimize import (
    ConstraintReport,
    OptimizationSpec,
    SolverOptions,
    TaskSpec,
    evaluate_constraints,
    grid_oracle,
    objective,
    optimize_posture,
    reaching_posture,
)

__version__ = "0.1.0"
