"""
Per-step gain selection for the control law u(k) = -c a(k) x(k) + F(k).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from ..exceptions import DomainError, InfeasibleStepError
from .moment_algebra import DEFAULT_PSD_TOLERANCE, MomentSequence
from .scenario import Scenario
from .steering_planner import (
    DEFAULT_GRID_POINTS,
    DEFAULT_REFINE_TOLERANCE,
    MomentStateTrajectory,
    assess_step,
    probe_gain,
)

logger = logging.getLogger(__name__)

COST_VARIANTS = ("paper", "physical")
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ControllerConfig:
    """
    Gain search settings.

    Attributes:
        grid_points: Number of equally spaced probes of c on [0, 1]
        refine_tolerance: Absolute tolerance of the bracketed refinement
        psd_tolerance: Tolerance of the Hankel PSD test
        cost: ``paper`` (cost written with u~) or ``physical`` (with F)
    """

    grid_points: int = DEFAULT_GRID_POINTS
    refine_tolerance: float = DEFAULT_REFINE_TOLERANCE
    psd_tolerance: float = DEFAULT_PSD_TOLERANCE
    cost: str = "paper"

    def __post_init__(self) -> None:
        if self.grid_points < 3:
            raise DomainError(f"grid_points must be >= 3, got {self.grid_points}")
        if not self.refine_tolerance > 0 or not self.psd_tolerance > 0:
            raise DomainError("controller tolerances must be positive")
        if self.cost not in COST_VARIANTS:
            raise DomainError(f"cost must be one of {COST_VARIANTS}, got {self.cost!r}")

    @classmethod
    def from_config(cls, config) -> "ControllerConfig":
        section = config.get_controller_config()
        return cls(
            grid_points=int(section["grid_points"]),
            refine_tolerance=float(section["refine_tolerance"]),
            psd_tolerance=float(section["psd_tolerance"]),
            cost=str(section["cost"]),
        )


@dataclass(frozen=True)
class StepControl:
    """
    Solved step: gain, closed-loop coefficient and the attached moments.
    """

    step: int
    gain: float
    a_tilde: float
    input_moments: MomentSequence
    kernel_moments: MomentSequence
    control_moments: MomentSequence
    objective: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "c": self.gain,
            "a_tilde": self.a_tilde,
            "input_moments": self.input_moments.to_list(),
            "kernel_moments": self.kernel_moments.to_list(),
            "control_moments": self.control_moments.to_list(),
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StepControl":
        return cls(
            step=int(data["step"]),
            gain=float(data["c"]),
            a_tilde=float(data["a_tilde"]),
            input_moments=MomentSequence.of(data["input_moments"]),
            kernel_moments=MomentSequence.of(data["kernel_moments"]),
            control_moments=MomentSequence.of(data["control_moments"]),
            objective=float(data["objective"]),
        )


def control_objective(
    c: float,
    xk: MomentSequence,
    xk1: MomentSequence,
    a: float,
    b: float,
    noise: MomentSequence,
    variant: str = "paper",
) -> float:
    """
    Quadratic step cost J(c) = c^2 a^2 X_2 - 2 c a X_1 V_1 + V_2.

    V is the moment vector of u~ for the ``paper`` variant and of F for the
    ``physical`` variant, both evaluated at a~ = a (1 - b c).

    Raises:
        DomainError: If c is outside [0, 1] or the variant is unknown
    """
    if variant not in COST_VARIANTS:
        raise DomainError(f"cost must be one of {COST_VARIANTS}, got {variant!r}")
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"gain c must lie in [0, 1], got {c}")

    probe = probe_gain(c, xk, xk1, a, b, noise)
    v = probe.input_moments if variant == "paper" else probe.kernel_moments
    return float(c * c * a * a * xk[2] - 2.0 * c * a * xk[1] * v[1] + v[2])


def _best(candidates: List[float], values: List[float]) -> int:
    """Index of the minimum, ties within tolerance going to the smaller gain."""
    j_min = min(values)
    threshold = j_min + TIE_TOLERANCE * (1.0 + abs(j_min))
    eligible = [i for i, value in enumerate(values) if value <= threshold]
    return min(eligible, key=lambda i: candidates[i])


def solve_step(
    xk: MomentSequence,
    xk1: MomentSequence,
    scenario: Scenario,
    step: int,
    config: Optional[ControllerConfig] = None,
) -> StepControl:
    """
    Minimize the step cost over the feasible gains in [0, 1].

    The feasible set is probed on a grid; the best feasible grid point is
    refined by bounded Brent search inside its neighbouring grid bracket,
    clipped to the feasible interval that contains it.

    Args:
        xk: Planned state moments X(k)
        xk1: Planned state moments X(k+1)
        scenario: Problem instance (gains and noise)
        step: Step index k
        config: Controller settings

    Returns:
        The solved step

    Raises:
        InfeasibleStepError: If no gain makes the step reachable
    """
    config = config or ControllerConfig()
    a, b = scenario.gains(step)
    noise = scenario.noise_moments()

    report = assess_step(
        xk,
        xk1,
        a,
        b,
        noise,
        step=step,
        grid_points=config.grid_points,
        psd_tol=config.psd_tolerance,
        refine_tol=config.refine_tolerance,
    )
    if not report.feasible:
        logger.error(f"Step {step} has no feasible gain in [0, 1]")
        raise InfeasibleStepError(f"step {step} is not reachable", report=report)

    def objective(c: float) -> float:
        return control_objective(c, xk, xk1, a, b, noise, config.cost)

    gains = np.asarray(report.gains)
    candidates: List[float] = []
    for lo, hi in report.intervals:
        candidates.extend([lo, hi])
        inside = gains[(gains >= lo) & (gains <= hi)]
        candidates.extend(float(c) for c in inside)
    values = [objective(c) for c in candidates]

    best = candidates[_best(candidates, values)]
    interval = next(iv for iv in report.intervals if iv[0] <= best <= iv[1])
    spacing = 1.0 / (config.grid_points - 1)
    lo = max(interval[0], best - spacing)
    hi = min(interval[1], best + spacing)
    if hi > lo:
        result = minimize_scalar(
            objective, bounds=(lo, hi), method="bounded",
            options={"xatol": config.refine_tolerance},
        )
        refined = float(np.clip(result.x, lo, hi))
        if probe_gain(refined, xk, xk1, a, b, noise, config.psd_tolerance).feasible:
            candidates.append(refined)
            values.append(objective(refined))

    index = _best(candidates, values)
    gain = candidates[index]
    probe = probe_gain(gain, xk, xk1, a, b, noise, config.psd_tolerance)
    logger.info(f"Step {step}: c* = {gain:.6g}, J = {values[index]:.6g}")

    return StepControl(
        step=step,
        gain=gain,
        a_tilde=probe.a_tilde,
        input_moments=probe.input_moments,
        kernel_moments=probe.kernel_moments,
        control_moments=probe.control_moments,
        objective=values[index],
    )


def solve_plan(
    trajectory: MomentStateTrajectory,
    scenario: Scenario,
    config: Optional[ControllerConfig] = None,
) -> List[StepControl]:
    """Solve every step of a plan in order."""
    return [
        solve_step(trajectory[k], trajectory[k + 1], scenario, k, config)
        for k in range(trajectory.horizon)
    ]
