"""Subcommand bodies: each takes a RunConfig and returns a CsvReport."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from sievelab import logging_config as logging_config
from sievelab.config import RunConfig
from sievelab.correlated_noise import (
    GaussianKernel,
    SpectralWidth,
    TabulatedSpectrum,
    decoherence_g,
    entropy_production_correlated,
    kernel_to_spectrum,
    kernel_value,
    long_correlation_map,
    short_correlation_limit,
    spectral_width,
    spectrum_to_kernel,
    width_condition,
)
from sievelab.errors import ConfigError, IntegrationQualityError
from sievelab.master_equation import (
    EvolutionSpec,
    evolve,
    iter_residuals,
    residual_ratios,
)
from sievelab.oscillator_core import (
    GaussianMoments,
    density_from_state,
    fock_moments,
    fock_state,
    gaussian_moments,
)
from sievelab.predictability_sieve import sieve_correlated, sieve_quadratic
from sievelab.quadratic_channels import (
    THERMAL_CONDITION,
    entropy_production_closed,
    entropy_production_general,
    f_coefficients,
)
from sievelab.reports import CsvReport

logger = logging.getLogger(__name__)


def _map(function, items: list, threads: int) -> list:
    if threads <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, items))


def _state_moments(config: RunConfig) -> GaussianMoments:
    state = config.require_state()
    if isinstance(state, int):
        return fock_moments(fock_state(state, config.truncation).ensure_resolved(), config.osc)
    return gaussian_moments(state, config.osc)


def _width_or_none(kern) -> SpectralWidth | None:
    """Spectral width, or None for a tabulated spectrum carrying no weight."""
    if isinstance(kern, TabulatedSpectrum) and kern.peak == 0:
        logger.info("The spectrum is zero everywhere; it has no width.")
        return None
    return spectral_width(kern)


def _correlated_state(config: RunConfig):
    state = config.require_state()
    if isinstance(state, int):
        return fock_state(state, config.truncation)
    return state


def cmd_entropy_quadratic(config: RunConfig, threads: int = 1) -> CsvReport:
    config.require_model("quadratic")
    D = config.diffusion
    D.require_thermal_condition()
    moments = _state_moments(config)
    osc = config.osc

    rows = []
    for t in config.time.values():
        f = f_coefficients(t, osc, D)
        rows.append(
            {
                "t": t,
                "f1": f.f1,
                "f2": f.f2,
                "f3": f.f3,
                "delta_sigma": entropy_production_closed(moments, D, osc, t),
            }
        )
    report = CsvReport.from_rows(
        {"t": "time", "f1": "1/energy", "f2": "1/energy", "f3": "1/energy", "delta_sigma": "1"}, rows
    )
    report.footer.append(f"thermal_condition: D_pq = 0 ({THERMAL_CONDITION})")
    return report


def cmd_entropy_exact(config: RunConfig, threads: int = 1) -> CsvReport:
    channels = config.lindblad_channels()
    t_final = config.time.t_final
    if t_final is None:
        raise ConfigError("time.t_final is required for entropy-exact.")
    spec = EvolutionSpec(
        config.osc,
        channels,
        t_final=t_final,
        dt=config.time.dt,
        truncation=config.truncation,
    )
    if config.time.samples > 1:
        spec = replace(spec, sample_every=max(1, spec.steps // (config.time.samples - 1)))
    trajectory = evolve(density_from_state(config.truncated_state().ensure_resolved()), spec)
    columns = {
        "t": "time",
        "linear_entropy": "1",
        "trace_drift": "1",
        "min_eigenvalue": "1",
        "hermiticity": "1",
    }
    rows = [
        dict(zip(columns, values))
        for values in zip(
            trajectory.times,
            trajectory.entropy,
            trajectory.trace_drift,
            trajectory.min_eigenvalue,
            trajectory.hermiticity,
        )
    ]
    report = CsvReport.from_rows(columns, rows)
    report.footer.append(f"dt: {spec.dt:.17g}")
    report.footer.append(f"max_trace_drift: {float(np.max(trajectory.trace_drift)):.3e}")
    return report


def cmd_entropy_correlated(config: RunConfig, threads: int = 1) -> CsvReport:
    kern = config.correlation_kernel()
    osc = config.osc
    state = _correlated_state(config)
    moments = _state_moments(config)
    mapped = long_correlation_map(kern, osc.hbar)

    def row(t: float) -> dict:
        result = entropy_production_correlated(state, kern, osc, t, config.quadrature)
        return {
            "t": t,
            "delta_sigma": result.value,
            "short_limit": short_correlation_limit(kern, t, osc.hbar),
            "long_limit": entropy_production_general(moments, mapped, osc, t),
            "converged": int(result.converged),
        }

    rows = _map(row, config.time.values(), threads)
    report = CsvReport.from_rows(
        {"t": "time", "delta_sigma": "1", "short_limit": "1", "long_limit": "1", "converged": "flag"},
        rows,
    )
    width = _width_or_none(kern)
    if width is None:
        report.footer.append("regime: n/a (zero spectrum)")
    else:
        condition = width_condition(moments, width, osc)
        report.footer.append(f"regime: {condition.regime} (width margin {condition.margin:.6g})")
    report.footer.append(f"long_limit_D_pp: {mapped.D_pp:.17g}")
    return report


def cmd_sieve(config: RunConfig, threads: int = 1) -> CsvReport:
    config.require_model("quadratic", "kernel")
    osc = config.osc
    times = config.time.values()
    if config.model_kind == "quadratic":
        config.diffusion.require_thermal_condition()
        results = _map(lambda t: sieve_quadratic(config.diffusion, osc, t, config.sieve), times, threads)
    else:
        kern = config.correlation_kernel()
        results = [
            sieve_correlated(kern, osc, t, config.sieve, config.quadrature, threads) for t in times
        ]

    rows = [
        {
            "t": result.t,
            "s_star": result.s_star,
            "theta_star": result.theta_star,
            "delta_sigma_star": result.delta_sigma_star,
            "flat_flag": int(result.flat_objective),
            "stationarity_residual": result.stationarity_residual,
        }
        for result in results
    ]
    report = CsvReport.from_rows(
        {
            "t": "time",
            "s_star": "1",
            "theta_star": "rad",
            "delta_sigma_star": "1",
            "flat_flag": "flag",
            "stationarity_residual": "1",
        },
        rows,
    )
    report.footer.append(
        f"grid: {config.sieve.n_s}x{config.sieve.n_theta}, s_max {config.sieve.s_max:g}"
    )
    for result in results:
        if result.regime or result.flags:
            report.footer.append(
                f"t={result.t:.17g}: regime={result.regime or '-'} flags={','.join(result.flags) or '-'}"
            )
    return report


CONSISTENCY_COLUMNS = {
    "epsilon": "1",
    "exact_delta_sigma": "1",
    "first_order": "1",
    "residual": "1",
    "ratio_to_previous": "1",
}


def _consistency_report(points) -> CsvReport:
    rows = [
        {
            "epsilon": point.epsilon,
            "exact_delta_sigma": point.exact_delta_sigma,
            "first_order": point.first_order,
            "residual": point.residual,
            "ratio_to_previous": ratio,
        }
        for point, ratio in zip(points, residual_ratios(points))
    ]
    return CsvReport.from_rows(CONSISTENCY_COLUMNS, rows)


def cmd_consistency(config: RunConfig, threads: int = 1) -> CsvReport:
    """Residual of the first-order prediction along the epsilon ladder.

    When a trajectory fails its quality checks the rows already computed are
    attached to the error.
    """
    channels = config.lindblad_channels()
    if not config.epsilons:
        raise ConfigError("consistency.epsilons is required for consistency.")
    t = config.time.t_final
    if t is None:
        raise ConfigError("time.t_final is required for consistency.")
    base = EvolutionSpec(config.osc, channels, dt=config.time.dt, truncation=config.truncation)
    state = config.truncated_state().ensure_resolved()

    points = []
    try:
        for point in iter_residuals(state, base, t, list(config.epsilons), threads):
            points.append(point)
    except IntegrationQualityError as e:
        e.partial_report = _consistency_report(points)
        e.partial_report.footer.append(f"aborted: {e}")
        raise
    report = _consistency_report(points)
    report.footer.append(f"t: {t:.17g}, N: {config.truncation.dim}, dt: {base.dt:.17g}")
    return report


def cmd_kernel_table(config: RunConfig, threads: int = 1) -> CsvReport:
    kern = config.correlation_kernel()
    hbar = config.osc.hbar
    table = config.kernel_table
    width = _width_or_none(kern)
    r_max = table.r_max
    if r_max is None:
        # five correlation lengths; a zero spectrum falls back to its k range
        delta_k = kern.k_max if width is None else width.delta_k
        r_max = 5.0 * math.sqrt(2.0) / delta_k
    r = np.linspace(0.0, r_max, table.n_r)

    rows = [
        {"r": float(radius), "c_of_r": float(c), "g_of_r": float(g)}
        for radius, c, g in zip(r, kernel_value(kern, r, hbar), decoherence_g(kern, r, hbar))
    ]
    report = CsvReport.from_rows({"r": "length", "c_of_r": "energy^2 time", "g_of_r": "1/time"}, rows)

    if isinstance(kern, GaussianKernel):
        report.spectrum = kernel_to_spectrum(kern, table.k_max, table.n_k, hbar)
    else:
        report.spectrum = kern
    c_zero = spectrum_to_kernel(report.spectrum, 0.0, hbar)
    report.footer.append(f"c0_from_spectrum: {c_zero:.17g}")
    if width is not None:
        report.footer.append(f"delta_k: {width.delta_k:.17g}")
    return report


COMMANDS = {
    "entropy-quadratic": cmd_entropy_quadratic,
    "entropy-exact": cmd_entropy_exact,
    "entropy-correlated": cmd_entropy_correlated,
    "sieve": cmd_sieve,
    "consistency": cmd_consistency,
    "kernel-table": cmd_kernel_table,
}
