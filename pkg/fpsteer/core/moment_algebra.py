"""
Arithmetic on truncated power-moment sequences.

Moments are raw (non-central) throughout. A sequence of order L stores
m_1..m_L; m_0 = 1 is implicit and supplied by ``MomentSequence.full()``.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Union

import numpy as np
from scipy.linalg import hankel
from scipy.special import comb, factorial2

from ..exceptions import DomainError

logger = logging.getLogger(__name__)

DEFAULT_PSD_TOLERANCE = 1e-9

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class MomentSequence:
    """
    Raw power moments m_1..m_L of a scalar random variable.

    Attributes:
        values: Read-only float array (m_1, ..., m_L)
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size == 0:
            raise DomainError("moment sequence must have positive order")
        if not np.all(np.isfinite(values)):
            raise DomainError(f"moment sequence has non-finite entries: {values}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, values: Iterable[float]) -> "MomentSequence":
        """Build a sequence from any iterable of m_1..m_L."""
        return cls(np.fromiter(values, dtype=float))

    @property
    def order(self) -> int:
        return int(self.values.size)

    def full(self) -> np.ndarray:
        """
        Moments including m_0 = 1.

        Returns:
            Array (1, m_1, ..., m_L)
        """
        return np.concatenate(([1.0], self.values))

    def __getitem__(self, index: int) -> float:
        if index == 0:
            return 1.0
        if index < 0 or index > self.order:
            raise IndexError(f"moment index {index} outside 0..{self.order}")
        return float(self.values[index - 1])

    def __len__(self) -> int:
        return self.order

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MomentSequence):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def allclose(
        self, other: "MomentSequence", rtol: float = 1e-10, atol: float = 1e-10
    ) -> bool:
        _require_same_order(self, other)
        return bool(np.allclose(self.values, other.values, rtol=rtol, atol=atol))

    def to_list(self) -> List[float]:
        return [float(v) for v in self.values]


@dataclass(frozen=True, eq=False)
class HankelMatrix:
    """
    Moment matrix with entry (i, j) = m_{i+j}, i, j = 0..n.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DomainError(f"Hankel matrix must be square, got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])


def _require_same_order(x: MomentSequence, y: MomentSequence) -> None:
    if x.order != y.order:
        raise DomainError(f"moment orders differ: {x.order} != {y.order}")


def _binomial_rows(order: int) -> np.ndarray:
    """Table C(l, i) for l, i = 0..order."""
    idx = np.arange(order + 1)
    return comb(idx[:, None], idx[None, :])


def gaussian_noise_moments(variance: float, order: int) -> MomentSequence:
    """
    Raw moments of N(0, variance): odd moments vanish, E[w^2l] = s^2l (2l-1)!!.

    Args:
        variance: Noise variance, strictly positive
        order: Number of moments to produce

    Returns:
        Moment sequence of the centred Gaussian

    Raises:
        DomainError: If variance is not positive
    """
    if not variance > 0:
        raise DomainError(f"noise variance must be positive, got {variance}")
    if order < 1:
        raise DomainError(f"order must be positive, got {order}")

    values = np.zeros(order)
    for half in range(1, order // 2 + 1):
        values[2 * half - 1] = variance**half * factorial2(2 * half - 1, exact=True)
    return MomentSequence(values)


def point_mass_moments(value: float, order: int) -> MomentSequence:
    """Moments (v, v^2, ..., v^L) of a point mass at ``value``."""
    return MomentSequence(float(value) ** np.arange(1, order + 1))


def moments_of_independent_sum(x: MomentSequence, y: MomentSequence) -> MomentSequence:
    """
    Moments of X + Y for independent X, Y.

    result_l = sum_i C(l, i) X_i Y_{l-i}, with X_0 = Y_0 = 1.

    Raises:
        DomainError: If the orders differ
    """
    _require_same_order(x, y)
    order = x.order
    xf, yf = x.full(), y.full()
    binom = _binomial_rows(order)

    values = np.empty(order)
    for ell in range(1, order + 1):
        i = np.arange(ell + 1)
        values[ell - 1] = np.sum(binom[ell, i] * xf[i] * yf[ell - i])
    return MomentSequence(values)


def moments_of_scaled(x: MomentSequence, scale: float) -> MomentSequence:
    """Moments of s * X: result_l = s^l X_l."""
    powers = float(scale) ** np.arange(1, x.order + 1)
    return MomentSequence(powers * x.values)


def deconvolve_moments(
    s: MomentSequence, b: float, w: MomentSequence
) -> MomentSequence:
    """
    Recover the moments of F from those of S = b F + W, F and W independent.

    Triangular back-substitution:
        F_l = (S_l - sum_{i<l} C(l, i) b^i F_i W_{l-i}) / b^l

    The result is not guaranteed to be a valid moment sequence; callers check
    its Hankel matrix.

    Raises:
        DomainError: If b == 0 or the orders differ
    """
    _require_same_order(s, w)
    if b == 0:
        raise DomainError("cannot deconvolve with b = 0")

    order = s.order
    wf = w.full()
    binom = _binomial_rows(order)
    b_pow = float(b) ** np.arange(order + 1)

    f = np.empty(order + 1)
    f[0] = 1.0
    for ell in range(1, order + 1):
        i = np.arange(ell)
        known = np.sum(binom[ell, i] * b_pow[i] * f[i] * wf[ell - i])
        f[ell] = (s.values[ell - 1] - known) / b_pow[ell]
    return MomentSequence(f[1:])


def central_moments(moments: MomentSequence) -> MomentSequence:
    """
    Central moments E[(X - m_1)^l]; the first entry is always 0.
    """
    return moments_of_independent_sum(
        moments, point_mass_moments(-moments[1], moments.order)
    )


def hankel_from_moments(moments: MomentSequence) -> HankelMatrix:
    """
    Arrange moments of even order 2n into the (n+1)x(n+1) Hankel matrix.

    Raises:
        DomainError: If the order is odd
    """
    if moments.order % 2:
        raise DomainError(f"Hankel matrix needs an even order, got {moments.order}")
    full = moments.full()
    n = moments.order // 2
    return HankelMatrix(hankel(full[: n + 1], full[n:]))


def is_psd(matrix: HankelMatrix, tol: float = DEFAULT_PSD_TOLERANCE) -> bool:
    """
    Eigenvalue-based positive semidefiniteness test.

    True iff the smallest eigenvalue is >= -tol * (1 + largest |eigenvalue|),
    so boundary cases such as point masses classify as PSD.
    """
    if tol < 0:
        raise DomainError(f"tolerance must be nonnegative, got {tol}")
    eig = matrix.eigenvalues()
    return bool(eig[0] >= -tol * (1.0 + np.max(np.abs(eig))))


def psd_margin(matrix: HankelMatrix, tol: float = DEFAULT_PSD_TOLERANCE) -> float:
    """
    Signed distance to the ``is_psd`` threshold; nonnegative iff PSD.
    """
    eig = matrix.eigenvalues()
    return float(eig[0] + tol * (1.0 + np.max(np.abs(eig))))
