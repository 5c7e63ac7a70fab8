"""Simulation, control, and IMU-only estimation for a tethered planar aerial vehicle."""

from .control import (
    ControllerA,
    ControllerAPrime,
    ControllerB,
    DlsConfig,
    PolePlacement,
    dls_inverse,
    gamma_a_dynamic,
    gamma_a_static,
    gamma_b,
    outer_loop,
)
from .flatness import (
    FlatSample,
    FlatSingularityA,
    OutputPointA,
    OutputPointB,
    VanishingThrust,
    flat_map_a,
    flat_map_b,
    r_vector,
)
from .model import (
    ExtendedState,
    GeneralParams,
    ImuReading,
    Input,
    SingularMassMatrix,
    State,
    VehicleParams,
    general_state_derivative,
    imu_measure,
    imu_measure_general,
    link_force,
    state_derivative,
    wrap_angle,
)
from .observer import (
    DegenerateRecovery,
    HgoGains,
    HgoState,
    ObserverBank,
    ZeroLinkForce,
    bank_step,
    hgo_step,
    recover_state,
    sigma,
    transform_measure,
)
from .sim import (
    ConfigError,
    DegenerateReference,
    Metrics,
    MotorModel,
    NoiseModel,
    NonFiniteState,
    SimConfig,
    Trace,
    rk4_step,
    run_closed_loop,
    run_flatness_check,
    sweep,
    tracking_metrics,
)
from .trajectory import OrderUnavailable, SmoothStep

__version__ = "0.1.0"
