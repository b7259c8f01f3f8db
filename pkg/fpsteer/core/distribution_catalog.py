"""
Catalog of evaluable densities used as initial, target, reference and noise
distributions.

Each kind knows its pdf, a quadrature window of +/- 40 scale units around its
location, how to draw samples, and (for Gaussian kinds) its raw moments in
closed form.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple, Type, Union

import numpy as np
from scipy.integrate import simpson
from scipy.stats import genlogistic, norm

from ..exceptions import DomainError, NumericalError
from .moment_algebra import MomentSequence

logger = logging.getLogger(__name__)

WINDOW_SCALE_UNITS = 40.0
WEIGHT_TOLERANCE = 1e-12

QUADRATURE_RTOL = 1e-9
QUADRATURE_INITIAL_INTERVALS = 1024
QUADRATURE_MAX_INTERVALS = 2**21

METHODS = ("auto", "closed_form", "quadrature")


class DensitySpec(ABC):
    """
    Base class of all catalog densities.
    """

    kind: ClassVar[str] = ""

    @abstractmethod
    def pdf(self, x: np.ndarray) -> np.ndarray:
        """Vectorized density."""

    @abstractmethod
    def window(self) -> Tuple[float, float]:
        """Integration window holding all but a negligible tail mass."""

    @abstractmethod
    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. samples."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Tagged-union JSON representation."""

    def closed_form_moments(self, order: int) -> MomentSequence:
        raise DomainError(f"no closed-form moments for kind '{self.kind}'")

    @property
    def has_closed_form(self) -> bool:
        return False

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DensitySpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(sorted(self.to_dict().items())))

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{type(self).__name__}({params})"


class Gaussian(DensitySpec):
    """
    Normal density N(mean, variance).
    """

    kind = "gaussian"

    def __init__(self, mean: float, variance: float):
        if not variance > 0:
            raise DomainError(f"variance must be positive, got {variance}")
        self.mean = float(mean)
        self.variance = float(variance)

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return norm.pdf(x, loc=self.mean, scale=self.std)

    def window(self) -> Tuple[float, float]:
        half = WINDOW_SCALE_UNITS * self.std
        return self.mean - half, self.mean + half

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, self.std, size=size)

    @property
    def has_closed_form(self) -> bool:
        return True

    def closed_form_moments(self, order: int) -> MomentSequence:
        # m_k = mu m_{k-1} + (k-1) s^2 m_{k-2}
        m = np.empty(order + 1)
        m[0] = 1.0
        m[1] = self.mean
        for k in range(2, order + 1):
            m[k] = self.mean * m[k - 1] + (k - 1) * self.variance * m[k - 2]
        return MomentSequence(m[1 : order + 1])

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "mean": self.mean, "variance": self.variance}


class GeneralizedLogistic(DensitySpec):
    """
    Type-I generalized logistic density

        shape * exp(-(x - loc)) / (1 + exp(-(x - loc)))^(shape + 1)

    with CDF (1 + exp(-(x - loc)))^(-shape).
    """

    kind = "generalized_logistic"

    def __init__(self, shape: float, location: float = 0.0):
        if not shape > 0:
            raise DomainError(f"shape must be positive, got {shape}")
        self.shape = float(shape)
        self.location = float(location)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return genlogistic.pdf(x, self.shape, loc=self.location)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return genlogistic.cdf(x, self.shape, loc=self.location)

    def window(self) -> Tuple[float, float]:
        return self.location - WINDOW_SCALE_UNITS, self.location + WINDOW_SCALE_UNITS

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # inverse CDF x = loc - log(u^(-1/shape) - 1), evaluated in log space
        u = np.minimum(1.0 - rng.random(size), 1.0 - np.finfo(float).epsneg)
        y = -np.log(u) / self.shape
        return self.location - y - np.log1p(-np.exp(-y))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "shape": self.shape, "location": self.location}


class _Mixture(DensitySpec):
    """
    Finite mixture; subclasses define how components are built.
    """

    def __init__(self, weights: Sequence[float], components: List[DensitySpec]):
        weights_arr = np.asarray(weights, dtype=float)
        if weights_arr.size == 0 or weights_arr.size != len(components):
            raise DomainError(
                f"need one weight per component, got {weights_arr.size} weights "
                f"for {len(components)} components"
            )
        if np.any(weights_arr <= 0):
            raise DomainError(f"mixture weights must be positive, got {weights}")
        if abs(weights_arr.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise DomainError(f"mixture weights must sum to 1, got {weights_arr.sum()}")
        self.weights = weights_arr
        self.components = components

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for weight, component in zip(self.weights, self.components):
            total = total + weight * component.pdf(x)
        return total

    def window(self) -> Tuple[float, float]:
        bounds = [component.window() for component in self.components]
        return min(lo for lo, _ in bounds), max(hi for _, hi in bounds)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        labels = rng.choice(len(self.components), size=size, p=self.weights)
        out = np.empty(size)
        for index, component in enumerate(self.components):
            mask = labels == index
            count = int(mask.sum())
            if count:
                out[mask] = component.draw(rng, count)
        return out

    @property
    def has_closed_form(self) -> bool:
        return all(component.has_closed_form for component in self.components)

    def closed_form_moments(self, order: int) -> MomentSequence:
        if not self.has_closed_form:
            raise DomainError(f"no closed-form moments for kind '{self.kind}'")
        values = sum(
            weight * component.closed_form_moments(order).values
            for weight, component in zip(self.weights, self.components)
        )
        return MomentSequence(values)


class GaussianMixture(_Mixture):
    """
    Mixture of normal densities.
    """

    kind = "gaussian_mixture"

    def __init__(
        self,
        weights: Sequence[float],
        means: Sequence[float],
        variances: Sequence[float],
    ):
        if len(means) != len(variances):
            raise DomainError("means and variances must have equal length")
        components: List[DensitySpec] = [
            Gaussian(m, v) for m, v in zip(means, variances)
        ]
        super().__init__(weights, components)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "means": [c.mean for c in self.components],  # type: ignore[attr-defined]
            "variances": [
                c.variance for c in self.components  # type: ignore[attr-defined]
            ],
        }


class GeneralizedLogisticMixture(_Mixture):
    """
    Mixture of type-I generalized logistic densities.
    """

    kind = "glogistic_mixture"

    def __init__(
        self,
        weights: Sequence[float],
        shapes: Sequence[float],
        locations: Sequence[float],
    ):
        if len(shapes) != len(locations):
            raise DomainError("shapes and locations must have equal length")
        components: List[DensitySpec] = [
            GeneralizedLogistic(s, loc) for s, loc in zip(shapes, locations)
        ]
        super().__init__(weights, components)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "shapes": [c.shape for c in self.components],  # type: ignore[attr-defined]
            "locations": [
                c.location for c in self.components  # type: ignore[attr-defined]
            ],
        }


KINDS: Dict[str, Type[DensitySpec]] = {
    cls.kind: cls
    for cls in (
        Gaussian,
        GeneralizedLogistic,
        GaussianMixture,
        GeneralizedLogisticMixture,
    )
}

_PARAMETERS = {
    "gaussian": ("mean", "variance"),
    "generalized_logistic": ("shape", "location"),
    "gaussian_mixture": ("weights", "means", "variances"),
    "glogistic_mixture": ("weights", "shapes", "locations"),
}


def density_from_dict(data: Dict[str, Any]) -> DensitySpec:
    """
    Decode a tagged-union density description.

    Args:
        data: Mapping with a ``kind`` key plus that kind's parameters

    Returns:
        The density spec

    Raises:
        DomainError: On unknown kind, missing/unknown parameters or invalid values
    """
    if not isinstance(data, dict):
        raise DomainError(f"density must be an object, got {type(data).__name__}")
    kind = data.get("kind")
    if kind not in KINDS:
        raise DomainError(
            f"unknown density kind {kind!r}; expected one of {sorted(KINDS)}"
        )

    expected = _PARAMETERS[kind]
    params = {k: v for k, v in data.items() if k != "kind"}
    missing = [name for name in expected if name not in params]
    unknown = [name for name in params if name not in expected]
    if kind == "generalized_logistic" and missing == ["location"]:
        missing = []
    if missing or unknown:
        raise DomainError(
            f"density '{kind}' parameters: missing {missing}, unexpected {unknown}"
        )
    try:
        return KINDS[kind](**params)
    except TypeError as e:
        raise DomainError(f"density '{kind}': {e}") from e


def pdf_eval(
    spec: DensitySpec, x: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """
    Evaluate the density at a point or array of points.
    """
    values = spec.pdf(np.asarray(x, dtype=float))
    if np.ndim(values) == 0:
        return float(values)
    return values


def _quadrature_moments(
    spec: DensitySpec,
    order: int,
    rtol: float = QUADRATURE_RTOL,
    max_intervals: int = QUADRATURE_MAX_INTERVALS,
) -> MomentSequence:
    """
    Adaptive composite Simpson over the spec's window.

    The interval count doubles until two successive refinements agree to
    ``rtol`` relative to the absolute moments E|x|^l.

    Raises:
        NumericalError: If the refinement cap is reached first
    """
    lo, hi = spec.window()
    powers = np.arange(order + 1)[:, None]
    intervals = QUADRATURE_INITIAL_INTERVALS
    previous: Optional[np.ndarray] = None
    worst = np.inf

    while intervals <= max_intervals:
        x = np.linspace(lo, hi, intervals + 1)
        p = spec.pdf(x)
        xp = x[None, :] ** powers
        current = simpson(xp * p, x=x, axis=1)
        scale = simpson(np.abs(xp) * p, x=x, axis=1)

        if previous is not None:
            change = np.abs(current - previous) / np.maximum(scale, 1e-300)
            worst = float(np.max(change))
            if worst < rtol:
                logger.debug(
                    f"Quadrature moments of {spec.kind} converged with "
                    f"{intervals} intervals"
                )
                return MomentSequence(current[1:])
        previous = current
        intervals *= 2

    logger.error(f"Quadrature moments of {spec!r} did not converge")
    raise NumericalError(
        "moment quadrature did not converge",
        {"kind": spec.kind, "intervals": intervals // 2, "max_rel_change": worst},
    )


def moments_of(spec: DensitySpec, order: int, method: str = "auto") -> MomentSequence:
    """
    Raw moments m_1..m_order of a catalog density.

    Args:
        spec: Density
        order: Moment order L
        method: 'closed_form', 'quadrature', or 'auto' (closed form when available)

    Returns:
        Moment sequence

    Raises:
        DomainError: Unknown method, bad order, or closed form unavailable
        NumericalError: Quadrature non-convergence
    """
    if method not in METHODS:
        raise DomainError(
            f"unknown moment method {method!r}; expected one of {METHODS}"
        )
    if order < 2 or order % 2:
        raise DomainError(f"order must be a positive even integer, got {order}")

    if method == "closed_form" or (method == "auto" and spec.has_closed_form):
        return spec.closed_form_moments(order)
    return _quadrature_moments(spec, order)


def mean_and_std(spec: DensitySpec) -> Tuple[float, float]:
    """Mean and standard deviation from the first two moments."""
    m = moments_of(spec, 2)
    variance = m[2] - m[1] ** 2
    if not variance > 0:
        raise DomainError(f"density {spec!r} has non-positive variance {variance}")
    return m[1], float(np.sqrt(variance))


def sample(
    spec: DensitySpec, rng: np.random.Generator, size: Optional[int] = None
) -> Union[float, np.ndarray]:
    """
    Draw i.i.d. samples; a single float when ``size`` is None.
    """
    if size is None:
        return float(spec.draw(rng, 1)[0])
    return spec.draw(rng, size)
