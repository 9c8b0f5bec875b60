"""Predictability sieve over squeezed coherent states.

Displacement leaves the first-order entropy production unchanged, so the
search runs over (s, theta) at alpha = 0: a coarse grid first, then
coordinate-wise bounded Brent steps inside the cells around the coarse argmin.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from sievelab import logging_config as logging_config
from sievelab.correlated_noise import (
    CorrelationKernel,
    QuadratureSpec,
    calibrate_rule,
    entropy_production_on_rule,
    spectral_view,
    spectral_width,
    width_condition,
)
from sievelab.errors import InvalidParameterError
from sievelab.oscillator_core import TWO_PI, OscillatorParams, SqueezedCoherentParams
from sievelab.quadratic_channels import (
    DiffusionCoefficients,
    FCoefficients,
    f_coefficients,
)

logger = logging.getLogger(__name__)

FLAT_ABS_TOL = 1e-12
FLAT_REL_TOL = 1e-2
BRENT_XATOL = 1e-10
# Below this squeeze the phase theta* carries no information
UNDEFINED_THETA_S = 0.01
STATIONARITY_TOL = 0.05
DENSE_GRID = 512

# (s, theta) arrays, broadcast together, to objective values
Surface = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SieveGrid:
    s_max: float = 2.0
    n_s: int = 33
    n_theta: int = 32
    refinement_tol: float = 1e-9
    refinement_max_iter: int = 50

    def __post_init__(self):
        if not self.s_max > 0:
            raise InvalidParameterError(f"s_max must be > 0, got {self.s_max}.")
        if self.n_s < 16 or self.n_theta < 16:
            raise InvalidParameterError(
                f"Sieve grids need at least 16 points per axis, got n_s={self.n_s}, n_theta={self.n_theta}."
            )
        if not self.refinement_tol > 0:
            raise InvalidParameterError(
                f"refinement_tol must be > 0, got {self.refinement_tol}."
            )
        if self.refinement_max_iter < 1:
            raise InvalidParameterError(
                f"refinement_max_iter must be >= 1, got {self.refinement_max_iter}."
            )

    @property
    def s_values(self) -> np.ndarray:
        return np.linspace(0.0, self.s_max, self.n_s)

    @property
    def theta_values(self) -> np.ndarray:
        return np.linspace(0.0, TWO_PI, self.n_theta, endpoint=False)

    @property
    def cell(self) -> tuple[float, float]:
        return self.s_max / (self.n_s - 1), TWO_PI / self.n_theta


@dataclass(frozen=True)
class SieveResult:
    t: float
    s_star: float | None
    theta_star: float | None
    delta_sigma_star: float
    flat_objective: bool
    coarse_argmin: tuple[float, float]
    coarse_minimum: float
    refinement_steps: int
    stationarity_residual: float | None = None
    regime: str | None = None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class DenseArgmin:
    s: float
    theta: float
    value: float


@dataclass(frozen=True)
class SqueezeDirectionCheck:
    t: float
    f3_over_f1: float | None
    residual: float | None
    s_star: float | None
    theta_star: float | None
    oracle_confirms: bool | None
    flags: tuple[str, ...] = ()


def closed_form_surface(D: DiffusionCoefficients, osc: OscillatorParams, t: float) -> Surface:
    """entropy_production_closed at alpha = 0 evaluated on arrays.

    With E = (hbar omega / 2) cosh 2s, Delta = -(hbar omega / 2) sinh 2s cos theta
    and omega cov = (hbar omega / 2) sinh 2s sin theta.
    """
    f = f_coefficients(t, osc, D)
    half_quantum = 0.5 * osc.hbar * osc.omega
    offset = -2.0 * D.lam * t

    def surface(s, theta):
        two_s = 2.0 * np.asarray(s, dtype=float)
        theta = np.asarray(theta, dtype=float)
        oscillating = f.f3 * np.sin(theta) - f.f2 * np.cos(theta)
        return half_quantum * (f.f1 * np.cosh(two_s) + np.sinh(two_s) * oscillating) + offset

    return surface


def correlated_objective(
    kern: CorrelationKernel,
    osc: OscillatorParams,
    t: float,
    grid: SieveGrid,
    quad: QuadratureSpec | None = None,
    threads: int = 1,
) -> Surface:
    """Correlated production on one fixed quadrature rule, resolved at the grid corners."""
    corners = [
        SqueezedCoherentParams(),
        SqueezedCoherentParams(0j, grid.s_max, 0.0),
        SqueezedCoherentParams(0j, grid.s_max, math.pi / 2.0),
        SqueezedCoherentParams(0j, grid.s_max, math.pi),
    ]
    rule = calibrate_rule(corners, kern, osc, t, quad)
    logger.info(
        f"Correlated sieve rule at t={t:.6g}: {rule.tau_panels} tau panels, {rule.k_panels} k panels"
    )

    def point(s: float, theta: float) -> float:
        return entropy_production_on_rule(
            SqueezedCoherentParams(0j, float(s), float(theta)), kern, osc, t, rule
        )

    def surface(s, theta):
        s, theta = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(theta, dtype=float))
        pairs = list(zip(s.ravel(), theta.ravel()))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                values = list(executor.map(lambda pair: point(*pair), pairs))
        else:
            values = [point(*pair) for pair in pairs]
        return np.array(values).reshape(s.shape)

    return surface


def _coarse_values(surface: Surface, grid: SieveGrid) -> np.ndarray:
    s, theta = np.meshgrid(grid.s_values, grid.theta_values, indexing="ij")
    return np.asarray(surface(s, theta), dtype=float)


def _refine(surface: Surface, grid: SieveGrid, s: float, theta: float, best: float):
    s_step, theta_step = grid.cell
    s_bounds = (max(0.0, s - s_step), min(grid.s_max, s + s_step))
    theta_bounds = (theta - theta_step, theta + theta_step)
    options = {"xatol": BRENT_XATOL}
    steps = 0

    for _ in range(grid.refinement_max_iter):
        previous = best

        def along_s(value: float) -> float:
            return float(surface(value, theta))

        found = minimize_scalar(along_s, bounds=s_bounds, method="bounded", options=options)
        if found.fun < best:
            s, best = float(found.x), float(found.fun)
            steps += 1

        def along_theta(value: float) -> float:
            return float(surface(s, value))

        found = minimize_scalar(along_theta, bounds=theta_bounds, method="bounded", options=options)
        if found.fun < best:
            theta, best = float(found.x), float(found.fun)
            steps += 1

        if previous - best <= grid.refinement_tol:
            break

    return s, theta % TWO_PI, best, steps


def _sieve(surface: Surface, grid: SieveGrid, t: float, is_flat: Callable[[np.ndarray], bool]) -> SieveResult:
    values = _coarse_values(surface, grid)
    # argmin returns the first minimum in C order: smallest s, then smallest theta
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    coarse = (float(grid.s_values[i]), float(grid.theta_values[j]))
    coarse_minimum = float(values[i, j])

    if is_flat(values):
        logger.info(
            f"Flat objective at t={t:.6g}: spread {float(values.max() - values.min()):.3e} "
            f"over a {grid.n_s}x{grid.n_theta} grid"
        )
        return SieveResult(
            t, None, None, coarse_minimum, True, coarse, coarse_minimum, 0, flags=("flat_objective",)
        )

    s, theta, best, steps = _refine(surface, grid, *coarse, coarse_minimum)
    logger.info(f"Sieve at t={t:.6g}: s*={s:.6g}, theta*={theta:.6g}, minimum {best:.10g}")
    return SieveResult(t, s, theta, best, False, coarse, coarse_minimum, steps)


def _absolutely_flat(values: np.ndarray) -> bool:
    return float(values.max() - values.min()) < FLAT_ABS_TOL


def _relatively_flat(values: np.ndarray) -> bool:
    return float(values.max() - values.min()) <= FLAT_REL_TOL * float(np.max(np.abs(values)))


def _stationarity(f: FCoefficients, result: SieveResult) -> tuple[float | None, tuple[str, ...]]:
    """|cos theta* - f3/f1|, or the reason it does not apply."""
    if result.flat_objective:
        return None, ()
    if f.f2 == 0 and f.f3 == 0:
        return None, ("condition_degenerate",)
    if not f.f1 > 0 or abs(f.f3 / f.f1) > 1:
        return None, ("condition_inapplicable",)
    if result.s_star <= UNDEFINED_THETA_S:
        return None, ("theta_undefined",)
    return abs(math.cos(result.theta_star) - f.f3 / f.f1), ()


def sieve_quadratic(
    D: DiffusionCoefficients,
    osc: OscillatorParams,
    t: float,
    grid: SieveGrid | None = None,
) -> SieveResult:
    grid = grid or SieveGrid()
    D.require_thermal_condition()
    if not t > 0:
        raise InvalidParameterError(f"The sieve needs t > 0, got {t}.")
    result = _sieve(closed_form_surface(D, osc, t), grid, t, _absolutely_flat)
    residual, flags = _stationarity(f_coefficients(t, osc, D), result)
    return replace(result, stationarity_residual=residual, flags=result.flags + flags)


def sieve_correlated(
    kern: CorrelationKernel,
    osc: OscillatorParams,
    t: float,
    grid: SieveGrid | None = None,
    quad: QuadratureSpec | None = None,
    threads: int = 1,
) -> SieveResult:
    grid = grid or SieveGrid()
    if not t > 0:
        raise InvalidParameterError(f"The sieve needs t > 0, got {t}.")
    regime = None
    if spectral_view(kern, osc.hbar).total_weight > 0:
        regime = width_condition(SqueezedCoherentParams(), spectral_width(kern), osc).regime
    surface = correlated_objective(kern, osc, t, grid, quad, threads)
    result = _sieve(surface, grid, t, _relatively_flat)
    if regime == "short" and not result.flat_objective:
        logger.warning(
            f"Short-correlation kernel at t={t:.6g} but the objective is not flat "
            f"(s*={result.s_star:.6g})"
        )
    return replace(result, regime=regime)


def dense_grid_argmin(surface: Surface, grid: SieveGrid, n_dense: int = DENSE_GRID) -> DenseArgmin:
    """Brute-force argmin of the surface on an n_dense x n_dense grid over the same domain."""
    dense = replace(grid, n_s=n_dense, n_theta=n_dense)
    values = _coarse_values(surface, dense)
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    return DenseArgmin(float(dense.s_values[i]), float(dense.theta_values[j]), float(values[i, j]))


def angular_distance(a: float, b: float) -> float:
    return abs((a - b + math.pi) % TWO_PI - math.pi)


def within_one_cell(result: SieveResult, oracle: DenseArgmin, grid: SieveGrid) -> bool:
    """Whether the sieve argmin lies within one coarse cell of the oracle argmin.

    The phase is ignored when both squeezes are below UNDEFINED_THETA_S.
    """
    s_step, theta_step = grid.cell
    if abs(result.s_star - oracle.s) > s_step:
        return False
    if result.s_star <= UNDEFINED_THETA_S and oracle.s <= UNDEFINED_THETA_S:
        return True
    return angular_distance(result.theta_star, oracle.theta) <= theta_step


def squeeze_direction_check(
    D: DiffusionCoefficients,
    osc: OscillatorParams,
    t: float,
    grid: SieveGrid | None = None,
    n_dense: int = DENSE_GRID,
) -> SqueezeDirectionCheck:
    """Compare the sieve phase with cos(theta) = f3 / f1.

    The relation is advisory: when it misses by more than STATIONARITY_TOL the
    dense grid arbitrates and the discrepancy is logged.
    """
    grid = grid or SieveGrid()
    result = sieve_quadratic(D, osc, t, grid)
    f = f_coefficients(t, osc, D)
    ratio = f.f3 / f.f1 if f.f1 > 0 else None
    residual = result.stationarity_residual
    confirms = None
    if residual is not None and residual > STATIONARITY_TOL:
        oracle = dense_grid_argmin(closed_form_surface(D, osc, t), grid, n_dense)
        confirms = within_one_cell(result, oracle, grid)
        logger.warning(
            f"Squeeze direction at t={t:.6g}: cos(theta*)={math.cos(result.theta_star):.6f} "
            f"but f3/f1={ratio:.6f} (residual {residual:.3f}); the {n_dense}x{n_dense} grid argmin "
            f"(s={oracle.s:.4f}, theta={oracle.theta:.4f}) "
            f"{'confirms' if confirms else 'disputes'} the numeric argmin"
        )
    return SqueezeDirectionCheck(
        t, ratio, residual, result.s_star, result.theta_star, confirms, result.flags
    )


def long_time_squeeze_decay(
    D: DiffusionCoefficients,
    osc: OscillatorParams,
    t_list: list[float],
    grid: SieveGrid | None = None,
    threads: int = 1,
) -> list[tuple[float, float | None]]:
    """(t, s*) along t_list; s* is None where the objective is flat."""
    grid = grid or SieveGrid()
    t_list = [float(t) for t in t_list]
    if not t_list or t_list[0] <= 0 or any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise InvalidParameterError(f"t_list must be positive and increasing, got {t_list}.")
    if t_list[-1] - t_list[0] < 10 * osc.period:
        logger.warning(
            f"t_list spans {(t_list[-1] - t_list[0]) / osc.period:.3g} periods; "
            f"the long-time trend needs at least 10"
        )

    def run(t: float) -> tuple[float, float | None]:
        return t, sieve_quadratic(D, osc, t, grid).s_star

    if threads <= 1:
        return [run(t) for t in t_list]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(run, t_list))
