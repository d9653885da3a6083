"""
Maps between the moving market halves [-L, p(t)], [p(t), L] and the fixed
reference domain [0, 1].

Both halves are mapped so that the outer boundary goes to y = 0 and the
price to y = 1; the right half is flipped. On the reference domain the
adjoint equation reads

    -dPhi/dt - a(t) d2Phi/dy2 + b(t) y dPhi/dy = 0

with a = 1/w^2 and b = p'/(p + L) on the left, b = p'/(p - L) on the right,
where w is the length of the half.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from .exceptions import InvalidArgumentError, OutOfDomainError
from .forward import PriceSeries
from .mesh import NodalField

LEFT = 'left'
RIGHT = 'right'
SIDES = (LEFT, RIGHT)

MAP_TOLERANCE = 1e-12


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise InvalidArgumentError(f"side must be 'left' or 'right', got {side!r}")


@dataclass(frozen=True, eq=False)
class MapCoefficients:
    """Per-instant coefficients of the transformed equations for one side."""

    side: str
    times: np.ndarray
    diffusion: np.ndarray
    drift: np.ndarray
    weight: np.ndarray
    price: np.ndarray
    price_rate: np.ndarray

    def __post_init__(self):
        _check_side(self.side)
        arrays = {}
        for name in ('times', 'diffusion', 'drift', 'weight', 'price', 'price_rate'):
            arrays[name] = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arrays[name])
        sizes = {values.shape for values in arrays.values()}
        if len(sizes) != 1 or arrays['times'].ndim != 1:
            raise InvalidArgumentError('coefficient arrays must share one time grid')
        if np.any(arrays['weight'] <= 0) or np.any(arrays['diffusion'] <= 0):
            raise InvalidArgumentError('weights and diffusion must be positive')

    def __len__(self):
        return self.times.size

    @classmethod
    def constant(cls, times, diffusion: float = 1.0, drift: float = 0.0, weight: float = 1.0,
                 side: str = LEFT) -> 'MapCoefficients':
        """Time-independent coefficients, used for model problems."""
        times = np.asarray(times, dtype=float)
        ones = np.ones_like(times)
        return cls(side, times, diffusion * ones, drift * ones, weight * ones, 0.0 * ones, 0.0 * ones)


def map_to_reference(x, p: float, half_width: float, side: str):
    """
    Map a physical point of one market half to the reference domain.

    Args:
        x: Coordinate(s) in [-L, p] (left) or [p, L] (right)
        p: Price at the instant considered
        half_width: L
        side: 'left' or 'right'

    Returns:
        y in [0, 1]; the outer boundary maps to 0 and the price to 1

    Example:
        >>> map_to_reference(-0.25, 0.0, 0.5, 'left')
        0.5
    """
    _check_side(side)
    L = half_width
    if side == LEFT:
        y = (np.asarray(x, dtype=float) + L) / (p + L)
    else:
        y = (L - np.asarray(x, dtype=float)) / (L - p)
    if np.any(y < -MAP_TOLERANCE) or np.any(y > 1.0 + MAP_TOLERANCE):
        raise OutOfDomainError(f'point outside the {side} subdomain for price {p}')
    return float(y) if np.ndim(y) == 0 else y


def inverse_map(y, p: float, half_width: float, side: str):
    """Physical coordinate of the reference point y on one market half."""
    _check_side(side)
    y = np.asarray(y, dtype=float)
    if np.any(y < -MAP_TOLERANCE) or np.any(y > 1.0 + MAP_TOLERANCE):
        raise OutOfDomainError('reference coordinate outside [0, 1]')
    L = half_width
    x = -L + y * (p + L) if side == LEFT else L - y * (L - p)
    return float(x) if np.ndim(x) == 0 else x


def side_width(p, half_width: float, side: str):
    """Length of the market half, p + L on the left and L - p on the right."""
    return p + half_width if side == LEFT else half_width - p


def price_derivative(series: PriceSeries) -> np.ndarray:
    """
    Discrete p'(t): centred differences inside, second-order one-sided at the ends.

    Exact for quadratics on uniform or nonuniform time grids.
    """
    if len(series) < 3:
        raise InvalidArgumentError('the price derivative needs at least 3 samples')
    return np.gradient(series.prices, series.times, edge_order=2)


def coefficients(series: PriceSeries, half_width: float, side: str,
                 margin: Optional[float] = None) -> MapCoefficients:
    """
    Coefficients a(t_k), b(t_k) and weights w(t_k) of the transformed equations.

    Raises:
        PriceEscapedError: a price violates the margin (when ``margin`` is given)
    """
    _check_side(side)
    if margin is not None:
        series.check_margins(half_width, margin)
    p = series.prices
    rate = price_derivative(series)
    weight = side_width(p, half_width, side)
    if np.any(weight <= 0):
        raise OutOfDomainError('price outside the market interval')
    drift = rate / (p + half_width) if side == LEFT else rate / (p - half_width)
    return MapCoefficients(side, series.times, 1.0 / weight ** 2, drift, weight, p, rate)


def weighted_inner_product(u: NodalField, v: NodalField, weight: float) -> float:
    """Trapezoidal w * int u v over the reference domain."""
    if u.grid != v.grid:
        raise InvalidArgumentError('fields live on different grids')
    return float(weight * trapezoid(u.values * v.values, u.grid.nodes))
