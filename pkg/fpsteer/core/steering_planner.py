"""
Moment-space planning: state trajectories, moment-system dynamics and
per-step reachability.

Under u(k) = -c a(k) x(k) + F(k) the closed loop reads
x(k+1) = a~ x(k) + u~(k) with a~ = a(k)(1 - b(k) c) and u~ = b(k) F(k) + w(k),
so the moment vector evolves as X(k+1) = A~(U~) X(k) + U~.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import comb

from ..exceptions import DomainError, PlanningError
from .moment_algebra import (
    DEFAULT_PSD_TOLERANCE,
    MomentSequence,
    deconvolve_moments,
    hankel_from_moments,
    is_psd,
    moments_of_independent_sum,
    moments_of_scaled,
    psd_margin,
)
from .scenario import Scenario

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 201
DEFAULT_REFINE_TOLERANCE = 1e-6
DEFAULT_REPAIR_ITERATIONS = 20
DEFAULT_INITIAL_INFLATION = 1e-3


@dataclass(frozen=True)
class MomentStateTrajectory:
    """
    Planned moment states X(0)..X(K).
    """

    states: Tuple[MomentSequence, ...]

    def __post_init__(self) -> None:
        states = tuple(self.states)
        if len(states) < 2:
            raise DomainError("a trajectory needs at least two states")
        orders = {state.order for state in states}
        if len(orders) != 1:
            raise DomainError(f"states have mixed orders {sorted(orders)}")
        object.__setattr__(self, "states", states)

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    @property
    def order(self) -> int:
        return self.states[0].order

    def __getitem__(self, step: int) -> MomentSequence:
        return self.states[step]

    def with_state(self, step: int, state: MomentSequence) -> "MomentStateTrajectory":
        states = list(self.states)
        states[step] = state
        return MomentStateTrajectory(tuple(states))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "horizon": self.horizon,
            "order": self.order,
            "states": [
                {"step": k, "moments": state.to_list()}
                for k, state in enumerate(self.states)
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MomentStateTrajectory":
        entries = sorted(data["states"], key=lambda entry: entry["step"])
        return cls(tuple(MomentSequence.of(entry["moments"]) for entry in entries))


@dataclass(frozen=True)
class GainProbe:
    """
    Moment quantities implied by one candidate gain c.
    """

    gain: float
    a_tilde: float
    input_moments: MomentSequence
    kernel_moments: MomentSequence
    control_moments: MomentSequence
    kernel_margin: float
    control_margin: float

    @property
    def margin(self) -> float:
        return min(self.kernel_margin, self.control_margin)

    @property
    def feasible(self) -> bool:
        return self.margin >= 0


@dataclass(frozen=True)
class StepFeasibilityReport:
    """
    Outcome of the reachability test for one step.

    Attributes:
        step: Step index k
        feasible: True iff some probed c gives PSD Hankel matrices of F and u
        intervals: Feasible subintervals of [0, 1] found by the probe
        witness: Probe at a feasible gain (None when infeasible)
        gains: Probed gains
        kernel_min_eigenvalues: Smallest eigenvalue of H_F at each probed gain
        control_min_eigenvalues: Smallest eigenvalue of H_u at each probed gain
    """

    step: int
    feasible: bool
    intervals: Tuple[Tuple[float, float], ...]
    witness: Optional[GainProbe]
    gains: Tuple[float, ...]
    kernel_min_eigenvalues: Tuple[float, ...]
    control_min_eigenvalues: Tuple[float, ...]

    def to_dict(self) -> Dict[str, Any]:
        witness = None
        if self.witness is not None:
            witness = {
                "gain": self.witness.gain,
                "a_tilde": self.witness.a_tilde,
                "input_moments": self.witness.input_moments.to_list(),
                "kernel_moments": self.witness.kernel_moments.to_list(),
            }
        return {
            "step": self.step,
            "feasible": self.feasible,
            "intervals": [list(interval) for interval in self.intervals],
            "witness": witness,
            "best_kernel_min_eigenvalue": max(self.kernel_min_eigenvalues),
            "best_control_min_eigenvalue": max(self.control_min_eigenvalues),
        }


def interpolate_states(
    x0: MomentSequence, xk: MomentSequence, horizon: int
) -> MomentStateTrajectory:
    """
    Maximal-smoothness plan X(k) = ((K-k)/K) X(0) + (k/K) X(K).

    Endpoints are reproduced exactly.
    """
    if x0.order != xk.order:
        raise DomainError(f"moment orders differ: {x0.order} != {xk.order}")
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")

    states = [x0]
    for k in range(1, horizon):
        t = k / horizon
        states.append(MomentSequence((1.0 - t) * x0.values + t * xk.values))
    states.append(xk)
    return MomentStateTrajectory(tuple(states))


def recover_input_moments(
    xk: MomentSequence, xk1: MomentSequence, a_tilde: float
) -> MomentSequence:
    """
    Solve X(k+1)_l = sum_i C(l, i) a~^i X(k)_i U~_{l-i} for U~ (U~_0 = 1).

    Exact inverse of ``propagate_moments``; the result need not be PSD.
    """
    if xk.order != xk1.order:
        raise DomainError(f"moment orders differ: {xk.order} != {xk1.order}")
    order = xk.order
    xf = xk.full()
    a_pow = float(a_tilde) ** np.arange(order + 1)

    u = np.empty(order + 1)
    u[0] = 1.0
    for ell in range(1, order + 1):
        i = np.arange(1, ell + 1)
        known = np.sum(comb(ell, i) * a_pow[i] * xf[i] * u[ell - i])
        u[ell] = xk1.values[ell - 1] - known
    return MomentSequence(u[1:])


def propagate_moments(
    xk: MomentSequence, a_tilde: float, u: MomentSequence
) -> MomentSequence:
    """Forward moment map: moments of a~ x + u~ with x, u~ independent."""
    return moments_of_independent_sum(moments_of_scaled(xk, a_tilde), u)


def propagation_matrix(a_tilde: float, u: MomentSequence) -> np.ndarray:
    """
    Lower-triangular system matrix A~(U~) of the moment system.

    Entry (l, i), 1-based, is C(l, i) a~^i U~_{l-i}.
    """
    order = u.order
    uf = u.full()
    matrix = np.zeros((order, order))
    for ell in range(1, order + 1):
        for i in range(1, ell + 1):
            matrix[ell - 1, i - 1] = comb(ell, i) * a_tilde**i * uf[ell - i]
    return matrix


def propagate_moments_matrix_form(
    xk: MomentSequence, a_tilde: float, u: MomentSequence
) -> MomentSequence:
    """X(k+1) = A~(U~) X(k) + U~."""
    return MomentSequence(propagation_matrix(a_tilde, u) @ xk.values + u.values)


def probe_gain(
    gain: float,
    xk: MomentSequence,
    xk1: MomentSequence,
    a: float,
    b: float,
    noise: MomentSequence,
    psd_tol: float = DEFAULT_PSD_TOLERANCE,
) -> GainProbe:
    """
    Moments of u~, F and u = -c a x + F for one gain c.
    """
    a_tilde = a * (1.0 - b * gain)
    input_moments = recover_input_moments(xk, xk1, a_tilde)
    kernel_moments = deconvolve_moments(input_moments, b, noise)
    control_moments = moments_of_independent_sum(
        moments_of_scaled(xk, -gain * a), kernel_moments
    )
    return GainProbe(
        gain=float(gain),
        a_tilde=a_tilde,
        input_moments=input_moments,
        kernel_moments=kernel_moments,
        control_moments=control_moments,
        kernel_margin=psd_margin(hankel_from_moments(kernel_moments), psd_tol),
        control_margin=psd_margin(hankel_from_moments(control_moments), psd_tol),
    )


def _boundary(margin, feasible_c: float, infeasible_c: float, xtol: float) -> float:
    """
    Locate the feasibility boundary between a feasible and an infeasible gain,
    returning a point on the feasible side.
    """
    lower, upper = sorted((feasible_c, infeasible_c))
    root = brentq(margin, lower, upper, xtol=xtol)
    step = xtol if feasible_c > infeasible_c else -xtol
    while margin(root) < 0:
        root += step
        if (step > 0 and root >= feasible_c) or (step < 0 and root <= feasible_c):
            return feasible_c
    return float(root)


def assess_step(
    xk: MomentSequence,
    xk1: MomentSequence,
    a: float,
    b: float,
    noise: MomentSequence,
    step: int = 0,
    grid_points: int = DEFAULT_GRID_POINTS,
    psd_tol: float = DEFAULT_PSD_TOLERANCE,
    refine_tol: float = DEFAULT_REFINE_TOLERANCE,
) -> StepFeasibilityReport:
    """
    Scan c over [0, 1] and report where the step X(k) -> X(k+1) is reachable.

    Feasible grid runs are widened to the boundary located by root finding on
    the PSD margin between neighbouring feasible and infeasible grid points.
    """
    if grid_points < 3:
        raise DomainError(f"grid needs at least 3 points, got {grid_points}")
    gains = np.linspace(0.0, 1.0, grid_points)
    probes = [probe_gain(c, xk, xk1, a, b, noise, psd_tol) for c in gains]
    flags = [probe.feasible for probe in probes]

    def margin(c: float) -> float:
        return probe_gain(c, xk, xk1, a, b, noise, psd_tol).margin

    intervals: List[Tuple[float, float]] = []
    i = 0
    while i < grid_points:
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < grid_points and flags[j + 1]:
            j += 1
        lo, hi = float(gains[i]), float(gains[j])
        if i > 0:
            lo = _boundary(margin, lo, float(gains[i - 1]), refine_tol)
        if j < grid_points - 1:
            hi = _boundary(margin, hi, float(gains[j + 1]), refine_tol)
        intervals.append((lo, hi))
        i = j + 1

    witness = next((probe for probe in probes if probe.feasible), None)
    feasible = witness is not None
    eigen_f = tuple(
        hankel_from_moments(p.kernel_moments).min_eigenvalue() for p in probes
    )
    eigen_u = tuple(
        hankel_from_moments(p.control_moments).min_eigenvalue() for p in probes
    )
    logger.debug(
        f"Step {step}: {sum(flags)}/{grid_points} probed gains feasible, "
        f"intervals {intervals}"
    )
    return StepFeasibilityReport(
        step=step,
        feasible=feasible,
        intervals=tuple(intervals),
        witness=witness,
        gains=tuple(float(c) for c in gains),
        kernel_min_eigenvalues=eigen_f,
        control_min_eigenvalues=eigen_u,
    )


def check_step_reachable(
    xk: MomentSequence,
    xk1: MomentSequence,
    scenario: Scenario,
    step: int,
    grid_points: int = DEFAULT_GRID_POINTS,
    psd_tol: float = DEFAULT_PSD_TOLERANCE,
    refine_tol: float = DEFAULT_REFINE_TOLERANCE,
) -> StepFeasibilityReport:
    """
    Reachability of X(k+1) from X(k) under the scenario's gains and noise.

    Raises:
        DomainError: If the step index is invalid
    """
    a, b = scenario.gains(step)
    return assess_step(
        xk,
        xk1,
        a,
        b,
        scenario.noise_moments(),
        step=step,
        grid_points=grid_points,
        psd_tol=psd_tol,
        refine_tol=refine_tol,
    )


def check_plan(
    trajectory: MomentStateTrajectory,
    scenario: Scenario,
    grid_points: int = DEFAULT_GRID_POINTS,
    psd_tol: float = DEFAULT_PSD_TOLERANCE,
    refine_tol: float = DEFAULT_REFINE_TOLERANCE,
) -> List[StepFeasibilityReport]:
    """
    Per-step reachability reports; the plan is feasible iff all steps are.
    """
    if trajectory.horizon != scenario.horizon:
        raise DomainError(
            f"trajectory horizon {trajectory.horizon} != scenario horizon "
            f"{scenario.horizon}"
        )
    reports = [
        check_step_reachable(
            trajectory[k],
            trajectory[k + 1],
            scenario,
            k,
            grid_points,
            psd_tol,
            refine_tol,
        )
        for k in range(trajectory.horizon)
    ]
    infeasible = [r.step for r in reports if not r.feasible]
    if infeasible:
        logger.warning(f"Plan infeasible at steps {infeasible}")
    else:
        logger.info(f"Plan feasible at all {trajectory.horizon} steps")
    return reports


def inflate_even_moments(state: MomentSequence, delta: float) -> MomentSequence:
    """
    Scale each even moment m_l by (1 + delta)^(l/2); odd moments are kept.
    """
    orders = np.arange(1, state.order + 1)
    factors = np.where(orders % 2 == 0, (1.0 + delta) ** (orders / 2.0), 1.0)
    return MomentSequence(state.values * factors)


def repair_plan(
    trajectory: MomentStateTrajectory,
    scenario: Scenario,
    max_iters: int = DEFAULT_REPAIR_ITERATIONS,
    initial_inflation: float = DEFAULT_INITIAL_INFLATION,
    grid_points: int = DEFAULT_GRID_POINTS,
    psd_tol: float = DEFAULT_PSD_TOLERANCE,
    refine_tol: float = DEFAULT_REFINE_TOLERANCE,
) -> MomentStateTrajectory:
    """
    Make an infeasible plan reachable by inflating interior states.

    Steps are visited in order. When step k fails, the even moments of
    X(k+1) are inflated with delta = initial_inflation * 2^j, j = 0, 1, ...
    until the step passes. Endpoints are never modified.

    Raises:
        PlanningError: If the last step is infeasible or an interior step
            cannot be repaired within ``max_iters`` inflations
    """
    repaired = trajectory
    horizon = trajectory.horizon

    for k in range(horizon):
        report = check_step_reachable(
            repaired[k], repaired[k + 1], scenario, k, grid_points, psd_tol, refine_tol
        )
        if report.feasible:
            continue
        if k == horizon - 1:
            logger.error(f"Terminal step {k} is infeasible; target not reachable")
            raise PlanningError("target state is not reachable under the noise", k)

        logger.warning(f"Step {k} infeasible, inflating state {k + 1}")
        original = repaired[k + 1]
        delta = initial_inflation
        for attempt in range(max_iters):
            candidate = inflate_even_moments(original, delta)
            if is_psd(hankel_from_moments(candidate), psd_tol):
                report = check_step_reachable(
                    repaired[k],
                    candidate,
                    scenario,
                    k,
                    grid_points,
                    psd_tol,
                    refine_tol,
                )
                if report.feasible:
                    logger.info(
                        f"Step {k} repaired after {attempt + 1} inflations "
                        f"(delta={delta:g})"
                    )
                    repaired = repaired.with_state(k + 1, candidate)
                    break
            delta *= 2.0
        else:
            raise PlanningError(
                f"no inflation up to delta={delta / 2.0:g} made the step feasible", k
            )

    return repaired


def feasible_plan(reports: Sequence[StepFeasibilityReport]) -> bool:
    return all(report.feasible for report in reports)
