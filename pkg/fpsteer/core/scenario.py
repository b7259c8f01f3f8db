"""
Scenario loading and validation.

A scenario is one problem instance: the scalar system
x(k+1) = a(k) x(k) + b(k) u(k) + w(k) with w(k) ~ N(0, noise_variance),
horizon K, moment order 2n, and initial/target densities.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

from ..exceptions import ConfigurationError, DomainError
from .distribution_catalog import DensitySpec, density_from_dict, moments_of
from .moment_algebra import MomentSequence, gaussian_noise_moments

logger = logging.getLogger(__name__)

SCHEMA = "fpsteer/1"
DEFAULT_HALF_ORDER = 2
OVERRIDE_SECTIONS = ("controller", "planner", "realizer", "simulation", "reporting")
BUNDLED_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@dataclass(frozen=True)
class Scenario:
    """
    Full problem instance.

    Attributes:
        name: Scenario name, used for output directories
        horizon: Number of steps K >= 1
        half_order: n >= 1; moments are tracked to order 2n
        a: Gains a(0..K-1)
        b: Gains b(0..K-1), all non-zero
        noise_variance: Variance of the additive Gaussian noise
        initial: Initial density p_0
        target: Target density tau
        overrides: Configuration blocks merged over the tool config
    """

    name: str
    horizon: int
    half_order: int
    a: Tuple[float, ...]
    b: Tuple[float, ...]
    noise_variance: float
    initial: DensitySpec
    target: DensitySpec
    overrides: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.half_order < 1:
            raise DomainError(f"half_order must be >= 1, got {self.half_order}")
        if len(self.a) != self.horizon or len(self.b) != self.horizon:
            raise DomainError(
                f"gain sequences need {self.horizon} entries, "
                f"got a: {len(self.a)}, b: {len(self.b)}"
            )
        zero_steps = [k for k, value in enumerate(self.b) if value == 0]
        if zero_steps:
            raise DomainError(f"b(k) must be non-zero, zero at steps {zero_steps}")
        if not self.noise_variance > 0:
            raise DomainError(
                f"noise variance must be positive, got {self.noise_variance}"
            )

    @property
    def order(self) -> int:
        return 2 * self.half_order

    def gains(self, step: int) -> Tuple[float, float]:
        """
        System gains (a(k), b(k)).

        Raises:
            DomainError: If the step index is outside 0..K-1
        """
        if not 0 <= step < self.horizon:
            raise DomainError(f"step {step} outside 0..{self.horizon - 1}")
        return self.a[step], self.b[step]

    def noise_moments(self) -> MomentSequence:
        return gaussian_noise_moments(self.noise_variance, self.order)

    def initial_moments(self) -> MomentSequence:
        return moments_of(self.initial, self.order)

    def target_moments(self) -> MomentSequence:
        return moments_of(self.target, self.order)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "schema": SCHEMA,
            "name": self.name,
            "horizon": self.horizon,
            "half_order": self.half_order,
            "a": list(self.a),
            "b": list(self.b),
            "noise_variance": self.noise_variance,
            "initial": self.initial.to_dict(),
            "target": self.target.to_dict(),
        }
        data.update(self.overrides)
        return data


def _gain_sequence(value: Any, horizon: int, name: str) -> Tuple[float, ...]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),) * horizon
    if isinstance(value, (list, tuple)):
        if len(value) != horizon:
            raise ConfigurationError(
                f"expected {horizon} entries, got {len(value)}", field=name
            )
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"non-numeric entry: {e}", field=name) from e
    raise ConfigurationError("must be a number or a list of numbers", field=name)


def _require(data: Dict[str, Any], key: str) -> Any:
    if key not in data:
        raise ConfigurationError("required field is missing", field=key)
    return data[key]


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """
    Validate a decoded scenario document.

    Raises:
        ConfigurationError: Naming the offending field
    """
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a JSON object")

    schema = data.get("schema")
    if schema != SCHEMA:
        raise ConfigurationError(f"expected {SCHEMA!r}, got {schema!r}", field="schema")

    known = {
        "schema", "name", "horizon", "half_order", "a", "b",
        "noise_variance", "initial", "target", "description",
    } | set(OVERRIDE_SECTIONS)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown fields {unknown}")

    name = str(_require(data, "name"))
    horizon = _require(data, "horizon")
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise ConfigurationError(
            f"must be an integer >= 1, got {horizon!r}", field="horizon"
        )
    half_order = data.get("half_order", DEFAULT_HALF_ORDER)
    if (
        not isinstance(half_order, int)
        or isinstance(half_order, bool)
        or half_order < 1
    ):
        raise ConfigurationError(
            f"must be an integer >= 1, got {half_order!r}", field="half_order"
        )

    a = _gain_sequence(_require(data, "a"), horizon, "a")
    b = _gain_sequence(_require(data, "b"), horizon, "b")
    zero_steps = [k for k, value in enumerate(b) if value == 0]
    if zero_steps:
        raise ConfigurationError(
            f"must be non-zero, zero at steps {zero_steps}", field="b"
        )

    noise_variance = _require(data, "noise_variance")
    if not isinstance(noise_variance, (int, float)) or not noise_variance > 0:
        raise ConfigurationError(
            f"must be a positive number, got {noise_variance!r}", field="noise_variance"
        )

    densities = {}
    for key in ("initial", "target"):
        try:
            densities[key] = density_from_dict(_require(data, key))
        except DomainError as e:
            raise ConfigurationError(str(e), field=key) from e

    overrides = {}
    for section in OVERRIDE_SECTIONS:
        if section in data:
            if not isinstance(data[section], dict):
                raise ConfigurationError("must be an object", field=section)
            overrides[section] = dict(data[section])

    return Scenario(
        name=name,
        horizon=horizon,
        half_order=half_order,
        a=a,
        b=b,
        noise_variance=float(noise_variance),
        initial=densities["initial"],
        target=densities["target"],
        overrides=overrides,
    )


def resolve_scenario_path(path: Union[str, Path]) -> Path:
    """
    Resolve a scenario path, falling back to the bundled scenarios by name.

    ``example1`` and ``example1.json`` both resolve to the bundled file when no
    such file exists relative to the working directory.
    """
    candidate = Path(path)
    if candidate.exists():
        return candidate
    bundled = BUNDLED_DIR / candidate.name
    if bundled.suffix != ".json":
        bundled = bundled.with_suffix(".json")
    if bundled.exists():
        return bundled
    raise ConfigurationError(f"scenario file not found: {path}", field="scenario")


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Load and validate a scenario JSON file.

    Args:
        path: File path, or the name of a bundled scenario

    Returns:
        Validated scenario

    Raises:
        ConfigurationError: On missing file, invalid JSON or schema violations
    """
    scenario_path = resolve_scenario_path(path)
    try:
        with open(scenario_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in scenario file {scenario_path}: {e}")
        raise ConfigurationError(f"invalid JSON: {e}", field="scenario") from e

    scenario = scenario_from_dict(data)
    logger.info(f"Loaded scenario '{scenario.name}' from: {scenario_path}")
    return scenario


def bundled_scenarios() -> Sequence[str]:
    """Names of the scenarios shipped with the package."""
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.json"))


def make_scenario(
    initial: DensitySpec,
    target: DensitySpec,
    a: Union[float, Sequence[float]],
    b: Union[float, Sequence[float]],
    noise_variance: float,
    horizon: int,
    half_order: int = DEFAULT_HALF_ORDER,
    name: str = "scenario",
    overrides: Optional[Dict[str, Any]] = None,
) -> Scenario:
    """
    Programmatic constructor accepting scalar gains.
    """
    a_seq = (float(a),) * horizon if isinstance(a, (int, float)) else tuple(a)
    b_seq = (float(b),) * horizon if isinstance(b, (int, float)) else tuple(b)
    return Scenario(
        name=name,
        horizon=horizon,
        half_order=half_order,
        a=a_seq,
        b=b_seq,
        noise_variance=float(noise_variance),
        initial=initial,
        target=target,
        overrides=dict(overrides or {}),
    )
