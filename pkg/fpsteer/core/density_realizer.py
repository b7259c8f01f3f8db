"""
Density realization from truncated power moments.

Given moments M of order 2n and a reference density r, the realization is
p(x) = r(x) / (G(x)^T L G(x)) with G(x) = (1, x, ..., x^n) and L the
minimizer of the convex dual

    J_r(L) = tr(L H) - integral of r(x) log(G(x)^T L G(x)) dx

over matrices whose polynomial is positive. The gradient of J_r is
H - integral of r G G^T / (G^T L G), so stationarity is moment matching.

Kernels with heavier tails than a Gaussian of the same variance have no
realization against that Gaussian; ``realize_widened`` retries with the
reference variance scaled up.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import simpson
from scipy.special import comb

from ..exceptions import DomainError, NumericalError, PreconditionError
from .distribution_catalog import (
    DensitySpec,
    Gaussian,
    density_from_dict,
    mean_and_std,
    pdf_eval,
    sample,
)
from .moment_algebra import (
    DEFAULT_PSD_TOLERANCE,
    HankelMatrix,
    MomentSequence,
    hankel_from_moments,
    moments_of_independent_sum,
    moments_of_scaled,
    point_mass_moments,
)

logger = logging.getLogger(__name__)

METHODS = ("newton", "gradient")
REFERENCE_VARIANCE_MODES = ("central", "raw")
MIN_ACCEPTANCE_RATE = 1e-4
MAX_PROPOSAL_BATCH = 1 << 20
LINE_SEARCH_MAX_HALVINGS = 60
LINE_SEARCH_SLACK = 1e-14
BARRIER_START = 1.0
BARRIER_DECAY = 0.1
BARRIER_FLOOR = 1e-9
CENTERING_TOLERANCE = 1e-12
POLISH_MAX_ITERATIONS = 50


@dataclass(frozen=True)
class RealizerConfig:
    """
    Quadrature and optimizer settings of the realizer.

    Attributes:
        nodes: Simpson nodes on the window (odd)
        half_width: Window half-width in reference standard deviations
        max_iterations: Descent iteration cap
        gradient_tolerance: Stop when the largest gradient entry is below this
        backtracking: Step shrink factor of the line search
        armijo: Sufficient-decrease constant
        moment_tolerance: Largest accepted relative moment error
        psd_tolerance: Positive-definiteness threshold for the input Hankel
        reference_variance: ``central`` (F_2 - F_1^2) or ``raw`` (F_2)
        method: ``newton`` (damped Newton) or ``gradient`` (steepest descent)
        max_workers: Threads used by ``realize_all``
        widening: Reference variance factors tried in order by
            ``realize_widened``
        acceptance_floor: Smallest poly_min accepted by ``realize_widened``
    """

    nodes: int = 4001
    half_width: float = 12.0
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    backtracking: float = 0.5
    armijo: float = 1e-4
    moment_tolerance: float = 1e-5
    psd_tolerance: float = DEFAULT_PSD_TOLERANCE
    reference_variance: str = "central"
    method: str = "newton"
    max_workers: int = 4
    widening: Tuple[float, ...] = (1.0, 4.0, 16.0, 64.0)
    acceptance_floor: float = 1e-3

    def __post_init__(self) -> None:
        if self.nodes < 3 or self.nodes % 2 == 0:
            raise DomainError(f"nodes must be an odd integer >= 3, got {self.nodes}")
        positive = {
            "half_width": self.half_width,
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
            "armijo": self.armijo,
            "moment_tolerance": self.moment_tolerance,
            "psd_tolerance": self.psd_tolerance,
            "max_workers": self.max_workers,
        }
        bad = [name for name, value in positive.items() if not value > 0]
        if bad:
            raise DomainError(f"realizer settings must be positive: {bad}")
        if not 0 < self.backtracking < 1:
            raise DomainError(
                f"backtracking must lie in (0, 1), got {self.backtracking}"
            )
        if self.reference_variance not in REFERENCE_VARIANCE_MODES:
            raise DomainError(
                f"reference_variance must be one of {REFERENCE_VARIANCE_MODES}"
            )
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")
        object.__setattr__(self, "widening", tuple(float(f) for f in self.widening))
        if not self.widening or min(self.widening) <= 0:
            raise DomainError(
                f"widening must list positive factors, got {self.widening}"
            )
        if not 0 <= self.acceptance_floor < 1:
            raise DomainError(
                f"acceptance_floor must lie in [0, 1), got {self.acceptance_floor}"
            )

    @classmethod
    def from_config(cls, config) -> "RealizerConfig":
        section = config.get_realizer_config()
        return cls(
            nodes=int(section["nodes"]),
            half_width=float(section["half_width"]),
            max_iterations=int(section["max_iterations"]),
            gradient_tolerance=float(section["gradient_tolerance"]),
            backtracking=float(section["backtracking"]),
            armijo=float(section["armijo"]),
            moment_tolerance=float(section["moment_tolerance"]),
            psd_tolerance=float(section["psd_tolerance"]),
            reference_variance=str(section["reference_variance"]),
            method=str(section["method"]),
            max_workers=int(section["max_workers"]),
            widening=tuple(float(f) for f in section["widening"]),
            acceptance_floor=float(section["acceptance_floor"]),
        )


@dataclass(frozen=True, eq=False)
class RealizedDensity:
    """
    Result of a realization.

    Attributes:
        reference: Reference density r
        lambda_: Symmetric (n+1)x(n+1) matrix of the positive polynomial
        target_moments: Moments that were matched
        poly_min: Minimum of G^T L G over the real line
        moment_residual: Largest relative error of the realized moments
        nodes: Quadrature nodes used
        half_width: Quadrature half-width used
        iterations: Descent iterations taken
        objective_trace: Dual objective at each barrier stage and refinement step
        widening: Factor applied to the default reference variance
    """

    reference: DensitySpec
    lambda_: np.ndarray
    target_moments: MomentSequence
    poly_min: float
    moment_residual: float
    nodes: int = 4001
    half_width: float = 12.0
    iterations: int = 0
    objective_trace: Tuple[float, ...] = ()
    widening: float = 1.0

    def __post_init__(self) -> None:
        matrix = np.array(self.lambda_, dtype=float)
        matrix.setflags(write=False)
        object.__setattr__(self, "lambda_", matrix)

    @property
    def half_order(self) -> int:
        return self.lambda_.shape[0] - 1

    def coefficients(self) -> np.ndarray:
        """Ascending coefficients of G^T L G."""
        return _antidiagonal_sums(self.lambda_)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "reference": self.reference.to_dict(),
            "lambda": self.lambda_.tolist(),
            "target_moments": self.target_moments.to_list(),
            "poly_min": self.poly_min,
            "moment_residual": self.moment_residual,
            "nodes": self.nodes,
            "half_width": self.half_width,
            "iterations": self.iterations,
            "widening": self.widening,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RealizedDensity":
        return cls(
            reference=density_from_dict(data["reference"]),
            lambda_=np.array(data["lambda"], dtype=float),
            target_moments=MomentSequence.of(data["target_moments"]),
            poly_min=float(data["poly_min"]),
            moment_residual=float(data["moment_residual"]),
            nodes=int(data["nodes"]),
            half_width=float(data["half_width"]),
            iterations=int(data.get("iterations", 0)),
            widening=float(data.get("widening", 1.0)),
        )


def _antidiagonal_sums(matrix: np.ndarray) -> np.ndarray:
    """Coefficients q_k = sum_{i+j=k} L_ij of G^T L G."""
    size = matrix.shape[0]
    index = np.add.outer(np.arange(size), np.arange(size))
    coefficients = np.zeros(2 * size - 1)
    np.add.at(coefficients, index, matrix)
    return coefficients


def _hankel_spread(coefficients: np.ndarray) -> np.ndarray:
    """Symmetric matrix with constant antidiagonals whose polynomial is q."""
    size = (coefficients.size + 1) // 2
    index = np.add.outer(np.arange(size), np.arange(size))
    counts = np.minimum(index, 2 * (size - 1) - index) + 1
    return coefficients[index] / counts


def _window(
    reference: DensitySpec, nodes: int, half_width: float
) -> Tuple[float, float, np.ndarray]:
    center, scale = mean_and_std(reference)
    z = np.linspace(-half_width, half_width, nodes)
    return center, scale, z


def _grid(reference: DensitySpec, config: RealizerConfig) -> np.ndarray:
    center, scale, z = _window(reference, config.nodes, config.half_width)
    return center + scale * z


def _gram_polynomial(lambda_: np.ndarray, x: np.ndarray) -> np.ndarray:
    powers = x[:, None] ** np.arange(lambda_.shape[0])
    return np.einsum("ni,ij,nj->n", powers, lambda_, powers)


def objective_jr(
    lambda_: np.ndarray,
    hankel: HankelMatrix,
    reference: DensitySpec,
    config: Optional[RealizerConfig] = None,
) -> float:
    """
    Dual objective tr(L H) - integral of r log(G^T L G) on the quadrature window.

    Raises:
        DomainError: If G^T L G is not positive on every quadrature node
    """
    config = config or RealizerConfig()
    lambda_ = np.asarray(lambda_, dtype=float)
    x = _grid(reference, config)
    poly = _gram_polynomial(lambda_, x)
    if np.min(poly) <= 0:
        raise DomainError("polynomial is not positive on the quadrature window")
    r = pdf_eval(reference, x)
    return float(np.sum(lambda_ * hankel.entries) - simpson(r * np.log(poly), x=x))


def gradient_jr(
    lambda_: np.ndarray,
    hankel: HankelMatrix,
    reference: DensitySpec,
    config: Optional[RealizerConfig] = None,
) -> np.ndarray:
    """
    Gradient H - integral of r G G^T / (G^T L G); symmetric by construction.

    Raises:
        DomainError: If G^T L G is not positive on every quadrature node
    """
    config = config or RealizerConfig()
    lambda_ = np.asarray(lambda_, dtype=float)
    x = _grid(reference, config)
    poly = _gram_polynomial(lambda_, x)
    if np.min(poly) <= 0:
        raise DomainError("polynomial is not positive on the quadrature window")
    r = pdf_eval(reference, x)
    size = lambda_.shape[0]
    weighted = simpson(
        (r / poly)[:, None] * x[:, None] ** np.arange(2 * size - 1), x=x, axis=0
    )
    index = np.add.outer(np.arange(size), np.arange(size))
    return hankel.entries - weighted[index]


class _StandardizedDual:
    """
    J_r in standardized coordinates z = (x - center) / scale, parameterized by
    the polynomial coefficients q_0..q_2n.
    """

    def __init__(
        self,
        moments: MomentSequence,
        reference: DensitySpec,
        config: RealizerConfig,
    ):
        self.center, self.scale, self.z = _window(
            reference, config.nodes, config.half_width
        )
        shifted = moments_of_independent_sum(
            moments_of_scaled(moments, 1.0 / self.scale),
            point_mass_moments(-self.center / self.scale, moments.order),
        )
        self.target = shifted.full()
        self.degree = moments.order
        self.powers = self.z[:, None] ** np.arange(2 * self.degree + 1)
        x = self.center + self.scale * self.z
        self.reference = self.scale * pdf_eval(reference, x)

    def polynomial(self, q: np.ndarray) -> np.ndarray:
        return self.powers[:, : self.degree + 1] @ q

    def member(self, q: np.ndarray) -> bool:
        """Positive leading coefficient and positive on the whole line."""
        return bool(q[-1] > 0 and _polynomial_minimum(q, self.z) > 0)

    def value(self, q: np.ndarray) -> float:
        poly = self.polynomial(q)
        return float(q @ self.target - simpson(self.reference * np.log(poly), x=self.z))

    def gradient(self, q: np.ndarray) -> np.ndarray:
        poly = self.polynomial(q)
        basis = self.powers[:, : self.degree + 1]
        weighted = (self.reference / poly)[:, None] * basis
        return self.target - simpson(weighted, x=self.z, axis=0)

    def hessian(self, q: np.ndarray) -> np.ndarray:
        poly = self.polynomial(q)
        weighted = (self.reference / poly**2)[:, None] * self.powers
        sums = simpson(weighted, x=self.z, axis=0)
        size = self.degree + 1
        return sums[np.add.outer(np.arange(size), np.arange(size))]

    def to_raw(self, q: np.ndarray) -> np.ndarray:
        """Matrix L in raw coordinates: G(z) = T G(x), L_x = T^T L_z T."""
        size = self.degree // 2 + 1
        transform = np.zeros((size, size))
        for i in range(size):
            for j in range(i + 1):
                transform[i, j] = (
                    comb(i, j) * (-self.center) ** (i - j) / self.scale**i
                )
        return transform.T @ _hankel_spread(q) @ transform


def _descent_direction(
    hessian: np.ndarray, gradient: np.ndarray, method: str
) -> np.ndarray:
    if method == "newton":
        try:
            direction = np.linalg.solve(hessian, -gradient)
            if np.all(np.isfinite(direction)) and gradient @ direction < 0:
                return direction
        except np.linalg.LinAlgError:
            pass
        logger.warning("Newton direction unusable, falling back to the gradient")
    return -gradient


def _polynomial_minimum(coefficients: np.ndarray, grid: np.ndarray) -> float:
    """
    Minimum of a polynomial over the real line.

    Odd degree or a negative leading coefficient is unbounded below. Otherwise
    the minimum sits at a real critical point; evaluating at the real parts of
    every companion-matrix root of the derivative covers near-real pairs. The
    dense scan over ``grid`` is only used when the eigenvalues fail.
    """
    q = np.trim_zeros(np.asarray(coefficients, dtype=float), "b")
    if q.size == 0:
        return 0.0
    if q.size == 1:
        return float(q[0])
    if q.size % 2 == 0 or q[-1] < 0:
        return -np.inf
    try:
        roots = npoly.polyroots(npoly.polyder(q))
    except np.linalg.LinAlgError:
        logger.warning("Companion eigenvalues failed, using dense scan only")
        return float(np.min(npoly.polyval(grid, q)))
    return float(np.min(npoly.polyval(roots.real, q)))


class _CentralPath:
    """
    Interior-point minimization of a standardized dual.

    Iterates are Gram matrices L > 0 in upper-triangle coordinates, so the
    polynomial stays positive on the whole line. Each stage minimizes
    J_r - w log det L by damped Newton; w shrinks geometrically and the last
    centered point is refined by Newton steps on the coefficients.
    """

    def __init__(self, dual: _StandardizedDual, config: RealizerConfig):
        self.dual = dual
        self.config = config
        self.iterations = 0
        self.trace: List[float] = []
        size = dual.degree // 2 + 1
        rows, cols = np.triu_indices(size)
        entries = np.arange(rows.size)
        self.start = (rows == cols).astype(float)
        self.lift = np.zeros((rows.size, dual.degree + 1))
        self.lift[entries, rows + cols] = np.where(rows == cols, 1.0, 2.0)
        self.basis = np.zeros((rows.size, size, size))
        self.basis[entries, rows, cols] = 1.0
        self.basis[entries, cols, rows] = 1.0

    def coefficients(self, v: np.ndarray) -> np.ndarray:
        return self.lift.T @ v

    def _tick(self, gradient: np.ndarray) -> None:
        if self.iterations >= self.config.max_iterations:
            raise NumericalError(
                "realizer did not converge",
                {
                    "iterations": self.iterations,
                    "gradient": float(np.max(np.abs(gradient))),
                },
            )
        self.iterations += 1

    def _line_search(self, evaluate, point, value, direction, slope):
        step = 1.0
        for _ in range(LINE_SEARCH_MAX_HALVINGS):
            candidate = point + step * direction
            candidate_value = evaluate(candidate)
            slack = LINE_SEARCH_SLACK * (1.0 + abs(value))
            if (
                candidate_value is not None
                and candidate_value <= value + self.config.armijo * step * slope + slack
            ):
                return candidate, candidate_value
            step *= self.config.backtracking
        raise NumericalError("line search failed", {"iterations": self.iterations})

    def _barrier_value(self, v: np.ndarray, weight: float) -> Optional[float]:
        try:
            factor = np.linalg.cholesky(np.einsum("p,pij->ij", v, self.basis))
        except np.linalg.LinAlgError:
            return None
        log_det = 2.0 * float(np.sum(np.log(np.diag(factor))))
        return self.dual.value(self.coefficients(v)) - weight * log_det

    def center(self, v: np.ndarray, weight: float) -> np.ndarray:
        value = self._barrier_value(v, weight)
        while True:
            q = self.coefficients(v)
            inverse = np.linalg.inv(np.einsum("p,pij->ij", v, self.basis))
            gradient = self.lift @ self.dual.gradient(q) - weight * np.einsum(
                "ij,pji->p", inverse, self.basis
            )
            curvature = np.einsum(
                "ij,pjk,kl,qli->pq", inverse, self.basis, inverse, self.basis
            )
            hessian = self.lift @ self.dual.hessian(q) @ self.lift.T
            hessian = hessian + weight * curvature
            direction = _descent_direction(hessian, gradient, self.config.method)
            slope = float(gradient @ direction)
            if -slope <= 2.0 * CENTERING_TOLERANCE:
                return v
            self._tick(gradient)
            v, value = self._line_search(
                lambda c: self._barrier_value(c, weight), v, value, direction, slope
            )

    def _member_value(self, q: np.ndarray) -> Optional[float]:
        return self.dual.value(q) if self.dual.member(q) else None

    def polish(self, q: np.ndarray) -> np.ndarray:
        value = self.dual.value(q)
        gradient = self.dual.gradient(q)
        steps = 0
        while np.max(np.abs(gradient)) > self.config.gradient_tolerance:
            if steps >= POLISH_MAX_ITERATIONS:
                raise NumericalError(
                    "coefficient refinement did not converge",
                    {
                        "iterations": self.iterations,
                        "gradient": float(np.max(np.abs(gradient))),
                    },
                )
            self._tick(gradient)
            direction = _descent_direction(
                self.dual.hessian(q), gradient, self.config.method
            )
            q, value = self._line_search(
                self._member_value, q, value, direction, float(gradient @ direction)
            )
            self.trace.append(value)
            gradient = self.dual.gradient(q)
            steps += 1
            logger.debug(
                f"Realizer refinement {steps}: J={value:.12g}, "
                f"|grad|={np.max(np.abs(gradient)):.3g}"
            )
        return q

    def run(self) -> np.ndarray:
        v = self.start
        weight = BARRIER_START
        while True:
            v = self.center(v, weight)
            self.trace.append(self.dual.value(self.coefficients(v)))
            logger.debug(
                f"Barrier weight {weight:.1e} centered after {self.iterations} "
                f"iterations, J={self.trace[-1]:.12g}"
            )
            if weight <= BARRIER_FLOOR:
                break
            weight *= BARRIER_DECAY
        return self.polish(self.coefficients(v))


def realize(
    moments: MomentSequence,
    reference: DensitySpec,
    config: Optional[RealizerConfig] = None,
) -> RealizedDensity:
    """
    Minimize J_r and return the density r / (G^T L G) matching ``moments``.

    The descent runs in coordinates standardized by the reference mean and
    standard deviation. When P = 1 already matches the moments the reference
    itself is returned. Otherwise a log-det barrier path starting from the
    identity matrix is followed and its end point refined by Newton steps on
    the polynomial coefficients. Every step is damped by backtracking until
    the Armijo condition holds and the polynomial stays positive on the real
    line.

    Args:
        moments: Moments m_1..m_2n to match
        reference: Reference density r
        config: Realizer settings

    Returns:
        Realized density with its diagnostics

    Raises:
        PreconditionError: If the Hankel matrix of ``moments`` is not
            positive definite
        NumericalError: On iteration cap, failed line search, non-positive
            polynomial minimum or moment residual above tolerance
    """
    config = config or RealizerConfig()
    hankel = hankel_from_moments(moments)
    eig = hankel.eigenvalues()
    if eig[0] <= config.psd_tolerance * (1.0 + np.max(np.abs(eig))):
        logger.error(
            f"Hankel matrix not positive definite (min eigenvalue {eig[0]:.3g})"
        )
        raise PreconditionError(
            f"Hankel matrix must be positive definite, min eigenvalue {eig[0]:.3g}"
        )

    dual = _StandardizedDual(moments, reference, config)
    path = _CentralPath(dual, config)
    q = np.zeros(moments.order + 1)
    q[0] = 1.0
    if np.max(np.abs(dual.gradient(q))) <= config.gradient_tolerance:
        path.trace.append(dual.value(q))
    else:
        q = path.run()

    poly_min = _polynomial_minimum(q, dual.z)
    if not poly_min > 0:
        raise NumericalError(
            "realized polynomial is not positive", {"poly_min": poly_min}
        )

    realized = RealizedDensity(
        reference=reference,
        lambda_=dual.to_raw(q),
        target_moments=moments,
        poly_min=poly_min,
        moment_residual=0.0,
        nodes=config.nodes,
        half_width=config.half_width,
        iterations=path.iterations,
        objective_trace=tuple(path.trace),
    )
    residual = verify_moments(realized)
    if residual > config.moment_tolerance:
        raise NumericalError(
            "realized moments do not match",
            {"moment_residual": residual, "tolerance": config.moment_tolerance},
        )
    logger.info(
        f"Realized density in {path.iterations} iterations, "
        f"poly_min={poly_min:.6g}, residual={residual:.3g}"
    )
    return replace(realized, moment_residual=residual)


def realized_pdf(
    realized: RealizedDensity, x: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """Density r(x) / (G^T L G)(x)."""
    points = np.asarray(x, dtype=float)
    values = pdf_eval(realized.reference, points) / npoly.polyval(
        points, realized.coefficients()
    )
    if np.ndim(values) == 0:
        return float(values)
    return values


def realized_moments(realized: RealizedDensity) -> MomentSequence:
    """Moments of the realized density by quadrature on its window."""
    center, scale, z = _window(realized.reference, realized.nodes, realized.half_width)
    x = center + scale * z
    p = realized_pdf(realized, x)
    order = realized.target_moments.order
    powers = x[:, None] ** np.arange(1, order + 1)
    return MomentSequence(simpson(powers * p[:, None], x=x, axis=0))


def verify_moments(realized: RealizedDensity) -> float:
    """
    Largest relative error between realized and target moments.

    Moment l is compared on the scale max(|m_l|, m_2^(l/2)), so vanishing
    odd moments are measured against the spread of the density.
    """
    target = realized.target_moments.values
    achieved = realized_moments(realized).values
    orders = np.arange(1, target.size + 1)
    spread = target[1] ** (orders / 2.0) if target.size >= 2 else np.ones(target.size)
    scale = np.maximum(np.abs(target), spread)
    return float(np.max(np.abs(achieved - target) / scale))


def acceptance_probability(
    realized: RealizedDensity, x: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """Probability poly_min / (G^T L G)(x) of accepting a reference proposal."""
    values = realized.poly_min / npoly.polyval(
        np.asarray(x, dtype=float), realized.coefficients()
    )
    values = np.minimum(values, 1.0)
    if np.ndim(values) == 0:
        return float(values)
    return values


def sample_realized(
    realized: RealizedDensity,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """
    Exact draws from the realized density by rejection from the reference.

    The expected acceptance rate equals ``poly_min``.

    Raises:
        NumericalError: If the acceptance rate is below 1e-4
    """
    if realized.poly_min < MIN_ACCEPTANCE_RATE:
        raise NumericalError(
            "acceptance rate too low for rejection sampling",
            {"poly_min": realized.poly_min},
        )

    wanted = 1 if size is None else int(size)
    accepted: List[np.ndarray] = []
    count = 0
    proposed = 0
    while count < wanted:
        batch = min(
            int(np.ceil(1.2 * (wanted - count) / realized.poly_min)) + 16,
            MAX_PROPOSAL_BATCH,
        )
        proposals = sample(realized.reference, rng, batch)
        keep = rng.random(batch) < acceptance_probability(realized, proposals)
        proposed += batch
        accepted.append(proposals[keep])
        count += int(np.count_nonzero(keep))
        if proposed >= 1_000_000 and count / proposed < MIN_ACCEPTANCE_RATE:
            raise NumericalError(
                "acceptance rate too low for rejection sampling",
                {"rate": count / proposed},
            )

    draws = np.concatenate(accepted)[:wanted]
    if size is None:
        return float(draws[0])
    return draws


def default_reference(
    kernel_moments: MomentSequence, mode: str = "central", widening: float = 1.0
) -> DensitySpec:
    """
    Gaussian reference with the kernel's mean and spread.

    ``central`` uses variance F_2 - F_1^2; ``raw`` uses F_2 as the variance.
    The variance is multiplied by ``widening``.

    Raises:
        PreconditionError: If the variance is not positive
    """
    if mode not in REFERENCE_VARIANCE_MODES:
        raise DomainError(
            f"mode must be one of {REFERENCE_VARIANCE_MODES}, got {mode!r}"
        )
    if kernel_moments.order < 2:
        raise DomainError("reference needs at least two moments")
    if not widening > 0:
        raise DomainError(f"widening must be positive, got {widening}")
    mean = kernel_moments[1]
    variance = kernel_moments[2] - mean**2 if mode == "central" else kernel_moments[2]
    if not variance > 0:
        raise PreconditionError(f"reference variance must be positive, got {variance}")
    return Gaussian(mean, widening * variance)


def realize_widened(
    kernel_moments: MomentSequence,
    config: Optional[RealizerConfig] = None,
) -> RealizedDensity:
    """
    Realize against the default reference, widening it until it works.

    Each factor of ``config.widening`` scales the reference variance in turn.
    The first realization that converges with poly_min at or above
    ``config.acceptance_floor`` is returned.

    Raises:
        PreconditionError: If the moments are not realizable at all
        NumericalError: If no factor gives an acceptable realization
    """
    config = config or RealizerConfig()
    failures: Dict[str, str] = {}
    for factor in config.widening:
        reference = default_reference(kernel_moments, config.reference_variance, factor)
        try:
            realized = realize(kernel_moments, reference, config)
        except NumericalError as e:
            logger.info(f"Widening {factor:g} failed: {e}")
            failures[f"{factor:g}"] = str(e)
            continue
        if realized.poly_min >= config.acceptance_floor:
            return replace(realized, widening=factor)
        logger.info(
            f"Widening {factor:g} gives poly_min={realized.poly_min:.3g} "
            f"below {config.acceptance_floor:g}"
        )
        failures[f"{factor:g}"] = f"poly_min={realized.poly_min:.3g}"

    logger.error(f"No reference widening in {config.widening} realizes the kernel")
    raise NumericalError("no reference widening realizes the kernel", failures)


def realize_all(
    kernel_moments: Sequence[MomentSequence],
    config: Optional[RealizerConfig] = None,
) -> List[RealizedDensity]:
    """
    Realize one kernel per step with widened default references, in parallel.

    Results keep the input order.
    """
    config = config or RealizerConfig()
    logger.info(
        f"Realizing {len(kernel_moments)} kernels with {config.max_workers} workers"
    )
    with ThreadPoolExecutor(max_workers=config.max_workers) as executor:
        futures = [
            executor.submit(realize_widened, moments, config)
            for moments in kernel_moments
        ]
        return [future.result() for future in futures]
