"""
Comparison reports, histograms and density grids.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import DomainError
from .density_realizer import RealizedDensity, realized_pdf
from .distribution_catalog import DensitySpec, moments_of, pdf_eval
from .moment_algebra import MomentSequence, central_moments
from .monte_carlo import ClosedLoopResult, empirical_moments, standard_errors
from .steering_planner import MomentStateTrajectory
from .step_controller import StepControl

logger = logging.getLogger(__name__)

DEFAULT_Z = 4.0
DEFAULT_BINS = 50
DEFAULT_DENSITY_POINTS = 400
OVERLAY_RESOLUTION = 10

Density = Union[DensitySpec, RealizedDensity]


@dataclass(frozen=True)
class MomentComparison:
    """
    Expected against empirical moments of one sample.

    Attributes:
        label: Row label, e.g. ``x(2)`` or ``terminal``
        expected: Planned or target moments
        empirical: Sample moments
        standard_errors: Standard error of every sample moment
        within: |expected - empirical| <= z * SE, per moment
    """

    label: str
    expected: MomentSequence
    empirical: MomentSequence
    standard_errors: Tuple[float, ...]
    within: Tuple[bool, ...]

    @property
    def passed(self) -> bool:
        return all(self.within)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "expected": self.expected.to_list(),
            "empirical": self.empirical.to_list(),
            "standard_errors": list(self.standard_errors),
            "within": list(self.within),
            "empirical_central": central_moments(self.empirical).to_list(),
        }


def compare_moments(
    label: str, expected: MomentSequence, samples: np.ndarray, z: float = DEFAULT_Z
) -> MomentComparison:
    """Compare sample moments with expected ones inside a z * SE band."""
    empirical = empirical_moments(samples, expected.order)
    errors = standard_errors(samples, expected.order)
    gap = np.abs(expected.values - empirical.values)
    return MomentComparison(
        label=label,
        expected=expected,
        empirical=empirical,
        standard_errors=tuple(float(e) for e in errors),
        within=tuple(bool(v) for v in gap <= z * errors),
    )


@dataclass(frozen=True)
class SteeringReport:
    """
    Planned/target moments against simulation.

    ``passed`` reflects the terminal comparison only; intermediate step rows
    are informational.
    """

    z: float
    runs: int
    steps: Tuple[MomentComparison, ...]
    terminal: MomentComparison
    gains: Tuple[float, ...]
    kernel_moments: Tuple[MomentSequence, ...]

    @property
    def passed(self) -> bool:
        return self.terminal.passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "z": self.z,
            "runs": self.runs,
            "passed": self.passed,
            "terminal": self.terminal.to_dict(),
            "steps": [row.to_dict() for row in self.steps],
            "gains": list(self.gains),
            "kernel_moments": [m.to_list() for m in self.kernel_moments],
        }


def build_report(
    result: ClosedLoopResult,
    plan: MomentStateTrajectory,
    controls: Sequence[StepControl],
    target: DensitySpec,
    z: float = DEFAULT_Z,
) -> SteeringReport:
    """
    Tabulate planned against empirical moments for every recorded state and
    the terminal sample against the target.

    Raises:
        DomainError: If plan, controls and result disagree on the horizon
    """
    if plan.horizon != result.horizon or len(controls) != result.horizon:
        raise DomainError(
            f"horizon mismatch: plan {plan.horizon}, controls {len(controls)}, "
            f"simulation {result.horizon}"
        )

    steps: List[MomentComparison] = []
    if result.states is not None:
        for k in range(plan.horizon + 1):
            steps.append(compare_moments(f"x({k})", plan[k], result.states[:, k], z))

    target_moments = moments_of(target, plan.order)
    terminal = compare_moments("terminal", target_moments, result.terminal, z)
    report = SteeringReport(
        z=z,
        runs=result.runs,
        steps=tuple(steps),
        terminal=terminal,
        gains=tuple(control.gain for control in controls),
        kernel_moments=tuple(control.kernel_moments for control in controls),
    )
    if report.passed:
        logger.info(f"Terminal moments within {z:g} SE of the target")
    else:
        logger.warning(
            f"Terminal moments outside {z:g} SE of the target: {terminal.within}"
        )
    return report


@dataclass(frozen=True, eq=False)
class HistogramData:
    """
    Uniform-bin histogram with a density overlay.

    Attributes:
        edges: Bin edges, length bins + 1
        counts: Samples per bin
        heights: Density-scaled heights; sum(heights * width) is the in-range
            share of the sample
        underflow: Samples below the range
        overflow: Samples above the range
        overlay_x: Overlay grid at 10x the bin resolution
        overlay_pdf: Overlay density values (empty without an overlay)
    """

    edges: np.ndarray
    counts: np.ndarray
    heights: np.ndarray
    underflow: int
    overflow: int
    overlay_x: np.ndarray
    overlay_pdf: np.ndarray

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def to_frame(self) -> pd.DataFrame:
        """Bin table framed by open-ended underflow and overflow rows."""
        return pd.DataFrame(
            {
                "left": np.concatenate(([-np.inf], self.edges)),
                "right": np.concatenate((self.edges, [np.inf])),
                "count": np.concatenate(
                    ([self.underflow], self.counts, [self.overflow])
                ),
                "height": np.concatenate(([np.nan], self.heights, [np.nan])),
            }
        )

    def overlay_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.overlay_x, "pdf": self.overlay_pdf})


def _evaluate(density: Density, x: np.ndarray) -> np.ndarray:
    if isinstance(density, RealizedDensity):
        return np.asarray(realized_pdf(density, x))
    return np.asarray(pdf_eval(density, x))


def export_histogram(
    samples: Sequence[float],
    bin_count: int = DEFAULT_BINS,
    value_range: Optional[Tuple[float, float]] = None,
    overlay: Optional[Density] = None,
    spread: float = DEFAULT_Z,
) -> HistogramData:
    """
    Histogram of a sample on uniform bins.

    Args:
        samples: Sample values
        bin_count: Number of bins, >= 1
        value_range: (lo, hi); defaults to mean +/- ``spread`` sample SDs
        overlay: Density evaluated on the overlay grid
        spread: Half-width of the default range in sample SDs

    Returns:
        Histogram data

    Raises:
        DomainError: On bin_count < 1, an empty or non-finite sample or an
            empty range
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if bin_count < 1:
        raise DomainError(f"bin_count must be >= 1, got {bin_count}")
    if x.size == 0:
        raise DomainError("cannot histogram an empty sample")
    if not np.all(np.isfinite(x)):
        raise DomainError("cannot histogram non-finite samples")
    if value_range is None:
        sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        value_range = (float(np.mean(x)) - spread * sd, float(np.mean(x)) + spread * sd)
    lo, hi = float(value_range[0]), float(value_range[1])
    if not hi > lo:
        raise DomainError(f"histogram range is empty: [{lo}, {hi}]")

    counts, edges = np.histogram(x, bins=bin_count, range=(lo, hi))
    width = (hi - lo) / bin_count
    heights = counts / (x.size * width)

    overlay_x = np.linspace(lo, hi, OVERLAY_RESOLUTION * bin_count + 1)
    overlay_pdf = _evaluate(overlay, overlay_x) if overlay is not None else np.array([])
    return HistogramData(
        edges=edges,
        counts=counts,
        heights=heights,
        underflow=int(np.count_nonzero(x < lo)),
        overflow=int(np.count_nonzero(x > hi)),
        overlay_x=overlay_x if overlay is not None else np.array([]),
        overlay_pdf=overlay_pdf,
    )


def export_density_grid(
    density: Density,
    value_range: Tuple[float, float],
    points: int = DEFAULT_DENSITY_POINTS,
) -> pd.DataFrame:
    """
    Equally spaced (x, pdf) evaluations of a catalog or realized density.

    Raises:
        DomainError: If points < 2
    """
    if points < 2:
        raise DomainError(f"density grid needs at least 2 points, got {points}")
    x = np.linspace(float(value_range[0]), float(value_range[1]), points)
    return pd.DataFrame({"x": x, "pdf": _evaluate(density, x)})
