"""
fpsteer

Distribution steering of scalar discrete-time stochastic linear systems
through their power moments.
"""

__version__ = "1.0.0"

from .core.pipeline import SteeringPipeline, run_pipeline
from .core.scenario import Scenario, load_scenario
from .exceptions import SteeringError

__all__ = [
    "Scenario",
    "load_scenario",
    "SteeringPipeline",
    "run_pipeline",
    "SteeringError",
]
