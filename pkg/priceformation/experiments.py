"""
Experiments built on the reconstruction: perturbed observations, stability
sweeps of controls and reconstructions, and price prediction restarted from
a reconstructed density.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .adjoint import time_weights
from .assimilate import AssimilationConfig, ReconstructionResult, reconstruct_final_density, reconstruction_error
from .exceptions import IncompatibleReconstructionError, InvalidArgumentError
from .forward import NONLOCAL, PriceSeries, TransformSpec, run_forward
from .mesh import NodalField, resample

logger = logging.getLogger(__name__)

SLOW = 'slow'
FAST = 'fast'
PERTURBATIONS = (SLOW, FAST)


@dataclass(frozen=True)
class StabilityRow:
    index: int
    delta: float
    control_error: float
    reconstruction_error: float


def _perturbation(times: np.ndarray, k: int, mode: str) -> np.ndarray:
    t = times - times[0]
    if mode == SLOW:
        return k * np.sin(np.pi * t)
    if mode == FAST:
        return np.sin(4.0 * k * np.pi * t)
    raise InvalidArgumentError(f"perturbation must be 'slow' or 'fast', got {mode!r}")


def perturb_price(base: PriceSeries, delta: float, k: int, mode: str = SLOW, rate_delta: float = 0.0,
                  half_width: Optional[float] = None, margin: Optional[float] = None) -> PriceSeries:
    """
    Perturb the observed price, and optionally the rate, by a sine that vanishes at t_0.

    slow: p + k delta sin(pi t); fast: p + delta sin(4 k pi t). The rate gets
    the same shape scaled by ``rate_delta`` and is kept nonnegative.

    Raises:
        PriceEscapedError: the perturbed price violates the margin (when both
            ``half_width`` and ``margin`` are given)
    """
    if k < 0 or int(k) != k:
        raise InvalidArgumentError(f'k must be a nonnegative integer, got {k}')
    shape = _perturbation(base.times, k, mode)
    rates = base.rates if rate_delta == 0 else np.maximum(base.rates + rate_delta * shape, 0.0)
    perturbed = PriceSeries(base.times, base.prices + delta * shape, rates)
    if half_width is not None and margin is not None:
        perturbed.check_margins(half_width, margin)
    return perturbed


def discrete_c1_norm(values: np.ndarray, spacing) -> float:
    """max|v| + max|v'| with v' from divided differences."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(np.max(np.abs(values), initial=0.0))
    slopes = np.diff(values) / np.diff(np.asarray(spacing, dtype=float))
    return float(np.max(np.abs(values)) + np.max(np.abs(slopes)))


def stability_sweep(clean_data: PriceSeries, cfg: AssimilationConfig, delta: float, K: int,
                    mode: str = SLOW, f_eps: Optional[NodalField] = None,
                    rate_delta: float = 0.0) -> List[StabilityRow]:
    """
    Reconstruct from K + 1 perturbed series and compare against the k = 0 run.

    Rows are ordered by k. ``delta`` of a row is the discrete C1 distance of
    its price (plus the sup distance of its rate) from the unperturbed series.
    """
    if K < 0:
        raise InvalidArgumentError(f'K must be nonnegative, got {K}')
    results: List[ReconstructionResult] = []
    series: List[PriceSeries] = []
    for k in range(K + 1):
        data = perturb_price(clean_data, delta, k, mode, rate_delta, cfg.half_width, cfg.margin)
        series.append(data)
        results.append(reconstruct_final_density(data, cfg, f_eps))

    base, base_series = results[0], series[0]
    tau = time_weights(base.times)
    basis_nodes = base.density.grid.nodes
    rows = []
    for k, (result, data) in enumerate(zip(results, series)):
        price_gap = data.prices - base_series.prices
        effective = (discrete_c1_norm(price_gap, data.times)
                     + float(np.max(np.abs(data.rates - base_series.rates))))
        control_error = float(np.sqrt(np.sum((result.controls - base.controls) ** 2 @ tau)))
        density_error = discrete_c1_norm(result.density.values - base.density.values, basis_nodes)
        rows.append(StabilityRow(k, effective, control_error, density_error))
        logger.info('stability k=%d: delta=%.3e err_u=%.3e err_f=%.3e', k, effective, control_error, density_error)
    return rows


def clean_reconstruction(fhat: NodalField, price: float) -> NodalField:
    """
    Clamp a reconstruction to the sign structure required for a restart.

    Negative values left of ``price`` and positive values right of it are set
    to zero.

    Raises:
        IncompatibleReconstructionError: one of the sides has no mass left
    """
    x = fhat.grid.nodes
    values = fhat.values.copy()
    left = x < price
    right = x > price
    values[left] = np.maximum(values[left], 0.0)
    values[right] = np.minimum(values[right], 0.0)
    values[~(left | right)] = 0.0
    if not np.any(values[left] > 0) or not np.any(values[right] < 0):
        raise IncompatibleReconstructionError(
            f'reconstruction has no buyers or no vendors around the price {price}'
        )
    return NodalField(fhat.grid, values)


def predict_price(fhat: NodalField, spec: TransformSpec, horizon: float, n_steps: int,
                  bc: str = NONLOCAL, margin: Optional[float] = None, start_time: float = 0.0) -> PriceSeries:
    """
    Predict the price over [T, T + horizon] by restarting the forward solver from f_hat.

    Args:
        fhat: Reconstructed density on the simulation grid
        spec: Transformation at the measured price p(T), typically TransformSpec.at_price
        horizon: Length of the prediction window
        n_steps: Time steps over the window
        bc: Boundary mode of the forward solver
        margin: Price margin, the transaction cost by default
        start_time: T, added to the returned times

    Returns:
        Predicted PriceSeries with times in [T, T + horizon]
    """
    cleaned = clean_reconstruction(fhat, spec.initial_price)
    result = run_forward(cleaned, spec, horizon, n_steps, bc, margin)
    predicted = result.series.shifted(start_time)
    logger.info('Prediction from T=%g: measured p(T)=%.6g, first predicted step %.6g (jump %.3e)',
                start_time, spec.initial_price, predicted.prices[1],
                predicted.prices[1] - spec.initial_price)
    return predicted


@dataclass(frozen=True, eq=False)
class PredictionRun:
    index: int
    density: NodalField
    series: PriceSeries


def prediction_family(clean_data: PriceSeries, cfg: AssimilationConfig, delta: float, K: int,
                      horizon: float, n_steps: int, mode: str = FAST,
                      f_eps: Optional[NodalField] = None) -> List[PredictionRun]:
    """
    Reconstructions of K + 1 perturbed series and the prices predicted from them, ordered by k.

    Each prediction restarts at the perturbed series' final price.
    """
    grid = cfg.grid
    runs = []
    for k in range(K + 1):
        data = perturb_price(clean_data, delta, k, mode, half_width=cfg.half_width, margin=cfg.margin)
        result = reconstruct_final_density(data, cfg, f_eps)
        spec = TransformSpec.at_price(grid, cfg.transaction_cost, result.price)
        series = predict_price(resample(result.density, grid), spec, horizon, n_steps,
                               cfg.boundary, cfg.margin, data.final_time)
        runs.append(PredictionRun(k, result.density, series))
    return runs


def prediction_spread(runs: List[PredictionRun]) -> Tuple[float, float]:
    """
    Largest pairwise gap of the final predicted prices and of the reconstructions.

    The reconstruction gap is the relative L2 distance used for reconstruction errors.
    """
    price_gap = 0.0
    density_gap = 0.0
    for i, first in enumerate(runs):
        for second in runs[i + 1:]:
            price_gap = max(price_gap, abs(first.series.final_price - second.series.final_price))
            density_gap = max(density_gap, reconstruction_error(first.density, second.density))
    return price_gap, density_gap
