"""Barrier pairs for uncertain SISO plants under output feedback.

Synthesis of a barrier function and safety controller by LMI optimization,
an identifier-based estimator that certifies an upper bound on the barrier
from input/output data alone, and a hysteresis supervisor running inside a
deterministic closed-loop simulator.
"""

from .errors import (ArtifactError, BarrierPairsError, ConfigError,
                     DesignInfeasibleError, EnumerationLimitError,
                     InvalidModelError, RecoveryError, SimulationDivergedError,
                     SynthesisInfeasibleError, VerificationError)
from .estimator import (EstimatorDesign, EstimatorState, barrier_upper_bound,
                        controllability_matrix, design_bz, step,
                        vertex_estimates)
from .lmi import LmiProblem, SolveReport, check_definite, solve
from .model import (Controller, Realization, SafetySpec, UncertainPlant,
                    UncertaintyDirection, canonical_realization,
                    closed_loop_matrices, vertex_parameters)
from .sim import (DisturbanceSpec, ReferenceSpec, Scenario, SimTrace,
                  TrackingGains, freq_response_Ge, original_input, run,
                  run_batch, worst_sine)
from .supervisor import (Mode, SupervisorConfig, SupervisorState,
                         controller_step, step_mode)
from .synthesis import (BarrierPair, CertificateReport, MultiplierGrid,
                        SynthesisOptions, TransformedVars, recover_controller,
                        synthesize, verify_barrier_pair)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError", "BarrierPair", "BarrierPairsError", "CertificateReport",
    "ConfigError", "Controller", "DesignInfeasibleError", "DisturbanceSpec",
    "EnumerationLimitError", "EstimatorDesign", "EstimatorState",
    "InvalidModelError", "LmiProblem", "Mode", "MultiplierGrid", "Realization",
    "RecoveryError", "ReferenceSpec", "SafetySpec", "Scenario", "SimTrace",
    "SimulationDivergedError", "SolveReport", "SupervisorConfig",
    "SupervisorState", "SynthesisInfeasibleError", "SynthesisOptions",
    "TrackingGains", "TransformedVars", "UncertainPlant",
    "UncertaintyDirection", "VerificationError", "barrier_upper_bound",
    "canonical_realization", "check_definite", "closed_loop_matrices",
    "controllability_matrix", "controller_step", "design_bz",
    "freq_response_Ge", "original_input", "recover_controller", "run",
    "run_batch", "solve", "step", "step_mode", "synthesize",
    "verify_barrier_pair", "vertex_estimates", "vertex_parameters",
    "worst_sine",
]
