"""
Core numerical modules.
"""

from .density_realizer import RealizedDensity, RealizerConfig, realize
from .distribution_catalog import (
    DensitySpec,
    Gaussian,
    GaussianMixture,
    GeneralizedLogistic,
    GeneralizedLogisticMixture,
    moments_of,
)
from .moment_algebra import HankelMatrix, MomentSequence
from .monte_carlo import ClosedLoopResult, SimulationConfig, run_closed_loop
from .pipeline import PipelineRun, SteeringPipeline, run_pipeline
from .reporting import HistogramData, SteeringReport, build_report
from .scenario import Scenario, load_scenario
from .steering_planner import (
    MomentStateTrajectory,
    StepFeasibilityReport,
    interpolate_states,
)
from .step_controller import ControllerConfig, StepControl, solve_step

__all__ = [
    "MomentSequence",
    "HankelMatrix",
    "DensitySpec",
    "Gaussian",
    "GaussianMixture",
    "GeneralizedLogistic",
    "GeneralizedLogisticMixture",
    "moments_of",
    "Scenario",
    "load_scenario",
    "MomentStateTrajectory",
    "StepFeasibilityReport",
    "interpolate_states",
    "ControllerConfig",
    "StepControl",
    "solve_step",
    "RealizerConfig",
    "RealizedDensity",
    "realize",
    "SimulationConfig",
    "ClosedLoopResult",
    "run_closed_loop",
    "SteeringReport",
    "HistogramData",
    "build_report",
    "SteeringPipeline",
    "PipelineRun",
    "run_pipeline",
]
