"""Numerical controllability analysis for control systems on Poisson manifolds."""

from .control import Box, ControlAffineSystem, ControlSignal, concatenate_signals, rhs, signal_value
from .errors import (
    BoundsError,
    DimensionError,
    GuardViolation,
    PoissonCtlError,
    SamplerExhausted,
    SignalSpanError,
    StepLimitExceeded,
    StepUnderflow,
    SteeringFailure,
)
from .integrate import IntegratorOptions, Trajectory, conservation_report, final_state, integrate
from .larc import BracketWord, RankReport, ScanResult, larc_rank, larc_scan, lie_bracket
from .poisson import (
    PoissonStructure,
    ScalarObservable,
    VectorField,
    casimir_residual,
    hamiltonian_field,
    jacobi_residual,
    kernel_basis,
)
from .stability import PropernessProfile, nonwandering_probe, properness_scan, recurrence_probe, sphere_sampler
from .steer import SteerOptions, SteerResult, steer, verify_plan
from .systems import (
    RigidBodyParams,
    VortexParams,
    coupled_bodies,
    three_wave_reduced,
    three_wave_unreduced,
    vortex_reduced,
    vortex_unreduced,
)

__version__ = "0.1.0"
