"""Open-loop (bang-bang) qubit steering under decoherence, with a
homodyne-feedback benchmark scheme for comparison."""

from .decoherence import (DecoherenceCurve, SpectralConfig, g_adiabatic,
                          g_thermal, tabulate, write_curve_csv)
from .errors import (ConfigError, DegenerateTargetError, InvalidStateError,
                     QsteerError, QuadratureFailureError, StepInstabilityError)
from .evolution import (AXIS_X, AXIS_Y, ControlAxis, evolve, evolve_adiabatic,
                        evolve_thermal)
from .feedback import (FeedbackConfig, TrajectoryRecord, ensemble_average,
                       feedback_params_for_target, integrate_master,
                       master_rhs, simulate_trajectory, stationary_solution,
                       transition_time, write_trajectory_csv)
from .states import (EXCITED, GROUND, BlochVector, DensityMatrix,
                     PureStateAngle, fidelity, fidelity_states, from_bloch,
                     pure_state, purity, to_bloch)
from .targeting import (ControlLog, StepRecord, TargetingConfig,
                        plan_intermediates, run_composite, run_cycle,
                        run_targeting, solve_step, write_control_csv)

__version__ = "0.1.0"

__all__ = [
    "AXIS_X", "AXIS_Y", "BlochVector", "ConfigError", "ControlAxis",
    "ControlLog", "DecoherenceCurve", "DegenerateTargetError", "DensityMatrix",
    "EXCITED", "FeedbackConfig", "GROUND", "InvalidStateError",
    "PureStateAngle", "QsteerError", "QuadratureFailureError", "SpectralConfig",
    "StepInstabilityError", "StepRecord", "TargetingConfig", "TrajectoryRecord",
    "ensemble_average", "evolve", "evolve_adiabatic", "evolve_thermal",
    "feedback_params_for_target", "fidelity", "fidelity_states", "from_bloch",
    "g_adiabatic", "g_thermal", "integrate_master", "master_rhs",
    "plan_intermediates", "pure_state", "purity", "run_composite", "run_cycle",
    "run_targeting", "simulate_trajectory", "solve_step", "stationary_solution",
    "tabulate", "to_bloch", "transition_time", "write_control_csv",
    "write_curve_csv", "write_trajectory_csv",
]
