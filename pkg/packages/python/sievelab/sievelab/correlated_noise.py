"""Environments with a finite spatial correlation length.

A homogeneous fluctuating potential with correlation c(r) acts through
plane-wave channels whose spectral density |a(k)|^2 is paired with c by

    c(r) = (hbar/2) int |a(k)|^2 e^{ikr} dk.

To first order a pure state produces the linear entropy

    (1/hbar) int_0^t dtau int dk |a(k)|^2 (1 - |<e^{ikx(tau)}>|^2).
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import erfc

from sievelab import logging_config as logging_config
from sievelab.errors import (
    InvalidParameterError,
    ReportIOError,
    TruncatedSpectrumError,
    UnderResolvedError,
)
from sievelab.oscillator_core import (
    GaussianMoments,
    OscillatorParams,
    SqueezedCoherentParams,
    TruncatedState,
    build_xp,
    gaussian_moments,
    position_mean,
    position_variance,
)
from sievelab.quadratic_channels import DiffusionCoefficients
from sievelab.quadrature import (
    PANEL_ORDER,
    QuadratureResult,
    composite_rule,
    panels_for,
    refine,
)

logger = logging.getLogger(__name__)

SPECTRUM_FLOOR = 1e-12
# k * sigma at which a Gaussian spectrum falls to SPECTRUM_FLOOR of its peak
GAUSSIAN_CUTOFF = 2.0 * math.sqrt(-math.log(SPECTRUM_FLOOR))
DEFAULT_K_SAMPLES = 1025
# Past k = DIP_WINDOW / sqrt(Var x) a Gaussian |<e^{ikx}>|^2 is below e^{-81}
DIP_WINDOW = 9.0
WIDTH_RATIO_THRESHOLD = 0.1
SHORT_REGIME_MARGIN = 50.0
SYMMETRY_TOL = 1e-10

State = GaussianMoments | SqueezedCoherentParams | TruncatedState


@dataclass(frozen=True)
class GaussianKernel:
    """c(r) = c0 exp(-(r / sigma)^2)."""

    c0: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.c0) and self.c0 > 0):
            raise InvalidParameterError(f"Kernel amplitude c0 must be > 0, got {self.c0}.")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidParameterError(
                f"Correlation length sigma must be > 0, got {self.sigma}."
            )

    @classmethod
    def from_spectrum(cls, peak: float, delta_k: float, hbar: float = 1.0) -> "GaussianKernel":
        """The kernel whose spectral density is peak * exp(-k^2 / (2 delta_k^2))."""
        if not (peak > 0 and delta_k > 0):
            raise InvalidParameterError(
                f"Spectrum peak and width must be > 0, got peak={peak}, delta_k={delta_k}."
            )
        return cls(c0=peak * hbar * delta_k * math.sqrt(math.pi / 2.0), sigma=math.sqrt(2.0) / delta_k)

    @property
    def delta_k(self) -> float:
        return math.sqrt(2.0) / self.sigma

    @property
    def k_cutoff(self) -> float:
        return GAUSSIAN_CUTOFF / self.sigma

    def peak_density(self, hbar: float = 1.0) -> float:
        return self.c0 * self.sigma / (hbar * math.sqrt(math.pi))

    def density(self, k, hbar: float = 1.0) -> np.ndarray:
        return self.peak_density(hbar) * np.exp(-((np.asarray(k, dtype=float) * self.sigma / 2.0) ** 2))


@dataclass(frozen=True, eq=False)
class TabulatedSpectrum:
    """|a(k)|^2 sampled on a symmetric, strictly increasing k grid."""

    k_grid: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        k = np.array(self.k_grid, dtype=float)
        w = np.array(self.weights, dtype=float)
        if k.ndim != 1 or k.shape != w.shape or k.size < 3:
            raise InvalidParameterError(
                f"A spectrum needs matching 1-D grids of at least 3 points, got {k.shape} and {w.shape}."
            )
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(w))):
            raise InvalidParameterError("Spectrum samples must be finite.")
        if np.any(np.diff(k) <= 0):
            raise InvalidParameterError("Spectrum k_grid must be strictly increasing.")
        if np.max(np.abs(k + k[::-1])) > SYMMETRY_TOL * k[-1]:
            raise InvalidParameterError("Spectrum k_grid must be symmetric about k = 0.")
        if np.any(w < 0):
            raise InvalidParameterError("Spectral weights must be >= 0.")
        if np.max(np.abs(w - w[::-1])) > SYMMETRY_TOL * w.max():
            raise InvalidParameterError("Spectral weights must be even in k.")
        k.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "k_grid", k)
        object.__setattr__(self, "weights", w)

    @property
    def k_max(self) -> float:
        return float(self.k_grid[-1])

    @property
    def peak(self) -> float:
        return float(self.weights.max())

    @property
    def truncated(self) -> bool:
        """Whether the grid ends before the spectrum has fallen below SPECTRUM_FLOOR."""
        edge = max(self.weights[0], self.weights[-1])
        return self.peak > 0 and edge >= SPECTRUM_FLOOR * self.peak


CorrelationKernel = GaussianKernel | TabulatedSpectrum


@dataclass(frozen=True)
class SpectralWidth:
    delta_k: float

    def __post_init__(self):
        if not self.delta_k > 0:
            raise InvalidParameterError(f"Spectral width must be > 0, got {self.delta_k}.")


@dataclass(frozen=True)
class WidthCondition:
    satisfied: bool
    margin: float
    regime: str


@dataclass(frozen=True)
class QuadratureSpec:
    tau_nodes_per_period: int = 64
    k_nodes: int = 96
    rel_tol: float = 1e-8
    max_refinements: int = 6

    def __post_init__(self):
        if self.tau_nodes_per_period < 64:
            raise InvalidParameterError(
                f"tau_nodes_per_period must be >= 64, got {self.tau_nodes_per_period}."
            )
        if self.k_nodes < PANEL_ORDER:
            raise InvalidParameterError(f"k_nodes must be >= {PANEL_ORDER}, got {self.k_nodes}.")
        if not 0 < self.rel_tol < 1:
            raise InvalidParameterError(f"rel_tol must lie in (0, 1), got {self.rel_tol}.")
        if self.max_refinements < 0:
            raise InvalidParameterError(
                f"max_refinements must be >= 0, got {self.max_refinements}."
            )


@dataclass(frozen=True)
class CorrelatedRule:
    """Panel counts of a fixed tensor Gauss-Legendre rule in (tau, k)."""

    tau_panels: int
    k_panels: int


class _GaussianView:
    def __init__(self, kern: GaussianKernel, hbar: float):
        self.kern = kern
        self.hbar = hbar
        self.k_cutoff = kern.k_cutoff
        self.total_weight = 2.0 * kern.c0 / hbar

    def density(self, k: np.ndarray) -> np.ndarray:
        return self.kern.density(k, self.hbar)

    def weight_beyond(self, window: np.ndarray) -> np.ndarray:
        return self.total_weight * erfc(np.asarray(window) * self.kern.sigma / 2.0)


class _TabulatedView:
    def __init__(self, spec: TabulatedSpectrum):
        self.spline = CubicSpline(spec.k_grid, spec.weights, extrapolate=False)
        self.primitive = self.spline.antiderivative()
        # a loaded grid is symmetric only to SYMMETRY_TOL
        self.k_cutoff = min(spec.k_max, -float(spec.k_grid[0]))
        self.total_weight = float(self.primitive(self.k_cutoff) - self.primitive(-self.k_cutoff))

    def density(self, k: np.ndarray) -> np.ndarray:
        return np.clip(np.nan_to_num(self.spline(k), nan=0.0), 0.0, None)

    def weight_beyond(self, window: np.ndarray) -> np.ndarray:
        window = np.asarray(window, dtype=float)
        inside = self.primitive(window) - self.primitive(-window)
        return np.maximum(self.total_weight - inside, 0.0)


def spectral_view(kern: CorrelationKernel, hbar: float):
    if isinstance(kern, GaussianKernel):
        return _GaussianView(kern, hbar)
    if isinstance(kern, TabulatedSpectrum):
        if kern.truncated:
            raise TruncatedSpectrumError(
                f"Tabulated spectrum ends at k={kern.k_max:.6g} with weight "
                f"{max(kern.weights[0], kern.weights[-1]) / kern.peak:.2e} of its peak "
                f"(needs < {SPECTRUM_FLOOR:.0e})."
            )
        return _TabulatedView(kern)
    raise InvalidParameterError(f"Unsupported correlation kernel {type(kern).__name__}.")


def kernel_to_spectrum(
    kern: GaussianKernel,
    k_max: float | None = None,
    n_k: int = DEFAULT_K_SAMPLES,
    hbar: float = 1.0,
) -> TabulatedSpectrum:
    """Tabulate |a(k)|^2 = (c0 sigma / hbar sqrt(pi)) exp(-k^2 sigma^2 / 4)."""
    if n_k < 3 or n_k % 2 == 0:
        raise InvalidParameterError(f"n_k must be odd and >= 3, got {n_k}.")
    if k_max is None:
        k_max = 1.05 * kern.k_cutoff
    edge = math.exp(-((k_max * kern.sigma / 2.0) ** 2))
    if not edge < SPECTRUM_FLOOR:
        raise TruncatedSpectrumError(
            f"k_max={k_max:.6g} leaves the spectrum at {edge:.2e} of its peak; "
            f"it must exceed {kern.k_cutoff:.6g}."
        )
    half = np.linspace(0.0, k_max, n_k // 2 + 1)
    k = np.concatenate([-half[:0:-1], half])
    return TabulatedSpectrum(k, kern.density(k, hbar))


def spectrum_to_kernel(spec: TabulatedSpectrum, r, hbar: float = 1.0):
    """c(r) = (hbar/2) int |a(k)|^2 cos(kr) dk by the trapezoid rule on the spectrum grid."""
    r = np.asarray(r, dtype=float)
    finite = np.isfinite(r).ravel()
    separations = np.where(finite, r.ravel(), 0.0)
    integrand = spec.weights[None, :] * np.cos(np.outer(separations, spec.k_grid))
    values = 0.5 * hbar * trapezoid(integrand, spec.k_grid, axis=1)
    values = np.where(finite, values, 0.0).reshape(r.shape)
    return float(values) if values.ndim == 0 else values


def kernel_samples_to_spectrum(
    r_grid: np.ndarray, c_values: np.ndarray, k_grid: np.ndarray, hbar: float = 1.0
) -> TabulatedSpectrum:
    """|a(k)|^2 = (1 / pi hbar) int c(r) cos(kr) dr from kernel samples on a symmetric r grid."""
    r_grid = np.asarray(r_grid, dtype=float)
    c_values = np.asarray(c_values, dtype=float)
    k_grid = np.asarray(k_grid, dtype=float)
    integrand = c_values[None, :] * np.cos(np.outer(k_grid, r_grid))
    weights = trapezoid(integrand, r_grid, axis=1) / (math.pi * hbar)
    return TabulatedSpectrum(k_grid, np.clip(weights, 0.0, None))


def kernel_value(kern: CorrelationKernel, r, hbar: float = 1.0):
    if isinstance(kern, GaussianKernel):
        value = kern.c0 * np.exp(-((np.asarray(r, dtype=float) / kern.sigma) ** 2))
        return float(value) if value.ndim == 0 else value
    return spectrum_to_kernel(kern, r, hbar)


def spectral_width(kern: CorrelationKernel) -> SpectralWidth:
    """Standard deviation of the normalized spectral density."""
    if isinstance(kern, GaussianKernel):
        return SpectralWidth(kern.delta_k)
    total = trapezoid(kern.weights, kern.k_grid)
    if not total > 0:
        raise InvalidParameterError("A zero spectrum has no width.")
    return SpectralWidth(math.sqrt(trapezoid(kern.k_grid**2 * kern.weights, kern.k_grid) / total))


def decoherence_g(kern: CorrelationKernel, r, hbar: float = 1.0):
    """g(r) = (2 / hbar^2)(c(0) - c(r)), the decay rate of rho(x, x + r)."""
    c_zero = kernel_value(kern, 0.0, hbar)
    return 2.0 / hbar**2 * (c_zero - kernel_value(kern, r, hbar))


def max_decoherence_rate(kern: CorrelationKernel, hbar: float = 1.0) -> float:
    return 2.0 * kernel_value(kern, 0.0, hbar) / hbar**2


def short_correlation_limit(kern: CorrelationKernel, t: float, hbar: float = 1.0) -> float:
    """2 c(0) t / hbar^2: every state loses purity at the same rate."""
    if t < 0:
        raise InvalidParameterError(f"Time must be >= 0, got {t}.")
    return max_decoherence_rate(kern, hbar) * t


def long_correlation_map(kern: CorrelationKernel, hbar: float = 1.0) -> DiffusionCoefficients:
    """Quadratic-channel coefficients reproducing the correlated production when
    the spectrum is narrow: pure position diffusion D_pp = (hbar/4) int k^2 |a(k)|^2 dk.
    """
    if isinstance(kern, GaussianKernel):
        # (hbar/4) * (2 c0 / hbar) * delta_k^2
        return DiffusionCoefficients(D_pp=kern.c0 / kern.sigma**2)
    second_moment = trapezoid(kern.k_grid**2 * kern.weights, kern.k_grid)
    return DiffusionCoefficients(D_pp=0.25 * hbar * float(second_moment))


def _as_moments(state: "GaussianMoments | SqueezedCoherentParams", osc: OscillatorParams) -> GaussianMoments:
    if isinstance(state, SqueezedCoherentParams):
        return gaussian_moments(state, osc)
    return state


def correlation_regime(margin: float, ratio_threshold: float = WIDTH_RATIO_THRESHOLD) -> str:
    if margin < ratio_threshold:
        return "long"
    if margin > SHORT_REGIME_MARGIN:
        return "short"
    return "intermediate"


def width_condition(
    moments: "GaussianMoments | SqueezedCoherentParams",
    delta_k: "float | SpectralWidth",
    osc: OscillatorParams,
    ratio_threshold: float = WIDTH_RATIO_THRESHOLD,
) -> WidthCondition:
    """Whether delta_k is well below both (m omega / hbar) Delta x and Delta p / hbar."""
    moments = _as_moments(moments, osc)
    if isinstance(delta_k, SpectralWidth):
        delta_k = delta_k.delta_k
    bounds = (
        osc.mass * osc.omega / osc.hbar * math.sqrt(moments.var_x),
        math.sqrt(moments.var_p) / osc.hbar,
    )
    margin = delta_k / min(bounds)
    return WidthCondition(margin < ratio_threshold, margin, correlation_regime(margin, ratio_threshold))


class _FockPositionBasis:
    """Eigenbasis of the truncated position operator, used for non-Gaussian states."""

    def __init__(self, state: TruncatedState, osc: OscillatorParams):
        state.ensure_resolved()
        x, _ = build_xp(osc, state.dim)
        self.positions, self.vectors = np.linalg.eigh(x)
        self.amplitudes = state.amplitudes
        self.omega = osc.omega
        populated = np.nonzero(np.abs(state.amplitudes) ** 2 > state.tail_tol)[0]
        highest = int(populated[-1]) if populated.size else 0
        # e^{ikx} displaces by |k| length_scale in sqrt(n)
        self.k_resolution = (math.sqrt(state.dim) - math.sqrt(highest + 1)) / osc.length_scale

    def check(self, k_extent: float):
        if k_extent > self.k_resolution:
            raise UnderResolvedError(
                f"|k| up to {k_extent:.6g} exceeds the resolution {self.k_resolution:.6g} "
                f"of a {self.amplitudes.size}-level truncation; increase N."
            )

    def probabilities(self, tau) -> np.ndarray:
        """Position-eigenbasis populations of the freely evolved state, shape (len(tau), N)."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        levels = np.arange(self.amplitudes.size)
        evolved = self.amplitudes[None, :] * np.exp(-1j * self.omega * np.outer(tau, levels))
        return np.abs(evolved @ self.vectors.conj()) ** 2


def char_function(state: State, k, tau: float, osc: OscillatorParams):
    """<e^{ikx(tau)}> with x(tau) the freely evolved position operator."""
    k = np.asarray(k, dtype=float)
    if isinstance(state, TruncatedState):
        basis = _FockPositionBasis(state, osc)
        basis.check(float(np.max(np.abs(k))) if k.size else 0.0)
        chi = (basis.probabilities(tau) @ np.exp(1j * np.outer(basis.positions, k.ravel())))[0]
        chi = chi.reshape(k.shape)
    else:
        moments = _as_moments(state, osc)
        mean = position_mean(moments, osc, tau)
        variance = position_variance(moments, osc, tau)
        chi = np.exp(1j * k * mean - 0.5 * k**2 * variance)
    chi = np.where(k == 0, 1.0 + 0j, chi)
    return complex(chi) if chi.ndim == 0 else chi


RateFunction = Callable[[np.ndarray, int], np.ndarray]


def _gaussian_rate(moments: GaussianMoments, view, osc: OscillatorParams) -> RateFunction:
    """int |a(k)|^2 (1 - e^{-k^2 Var x(tau)}) dk on the tau nodes.

    The k integral runs over the window where the characteristic function is
    not negligible; the weight outside it enters in closed form.
    """

    def rate(tau: np.ndarray, k_panels: int) -> np.ndarray:
        variance = position_variance(moments, osc, tau)
        window = np.minimum(view.k_cutoff, DIP_WINDOW / np.sqrt(variance))
        ref_k, ref_w = composite_rule(-1.0, 1.0, k_panels)
        k = window[:, None] * ref_k[None, :]
        dip = -np.expm1(-(k**2) * variance[:, None])
        inside = window * np.sum(ref_w[None, :] * view.density(k) * dip, axis=1)
        return inside + view.weight_beyond(window)

    return rate


def _fock_rate(state: TruncatedState, view, osc: OscillatorParams) -> RateFunction:
    basis = _FockPositionBasis(state, osc)
    basis.check(view.k_cutoff)

    def rate(tau: np.ndarray, k_panels: int) -> np.ndarray:
        k, w = composite_rule(-view.k_cutoff, view.k_cutoff, k_panels)
        chi = basis.probabilities(tau) @ np.exp(1j * np.outer(basis.positions, k))
        return (1.0 - np.abs(chi) ** 2) @ (w * view.density(k))

    return rate


def _rate_for(state: State, view, osc: OscillatorParams) -> RateFunction:
    if isinstance(state, TruncatedState):
        return _fock_rate(state, view, osc)
    return _gaussian_rate(_as_moments(state, osc), view, osc)


def _integrate(
    rate: RateFunction, view, osc: OscillatorParams, t: float, quad: QuadratureSpec
) -> tuple[QuadratureResult, CorrelatedRule]:
    """Refine the k rule on the initial tau rule, then refine tau on that k rule."""
    tau_panels = panels_for(t, osc.period, quad.tau_nodes_per_period)
    k_panels = max(1, math.ceil(quad.k_nodes / PANEL_ORDER))
    abs_floor = 1e-12 * view.total_weight * t / osc.hbar
    tau_nodes, tau_weights = composite_rule(0.0, t, tau_panels)

    k_result = refine(
        lambda panels: float(tau_weights @ rate(tau_nodes, panels)) / osc.hbar,
        k_panels,
        quad.rel_tol,
        quad.max_refinements,
        "entropy_production_correlated (k)",
        abs_floor=abs_floor,
    )
    k_panels = k_result.nodes // PANEL_ORDER

    def estimate(panels: int) -> float:
        nodes, weights = composite_rule(0.0, t, panels)
        return float(weights @ rate(nodes, k_panels)) / osc.hbar

    tau_result = refine(
        estimate,
        tau_panels,
        quad.rel_tol,
        quad.max_refinements,
        "entropy_production_correlated (tau)",
        abs_floor=abs_floor,
    )
    result = QuadratureResult(
        tau_result.value,
        k_result.converged and tau_result.converged,
        tau_result.nodes * k_result.nodes,
        k_result.refinements + tau_result.refinements,
        k_result.warnings + tau_result.warnings,
    )
    return result, CorrelatedRule(tau_result.nodes // PANEL_ORDER, k_panels)


def entropy_production_correlated(
    state: State,
    kern: CorrelationKernel,
    osc: OscillatorParams,
    t: float,
    quad: QuadratureSpec | None = None,
) -> QuadratureResult:
    """First-order entropy production under a correlated potential.

    Gaussian states (moments or squeezed coherent parameters) use the
    closed-form characteristic function; a TruncatedState goes through the
    eigenbasis of the truncated position operator.
    """
    quad = quad or QuadratureSpec()
    if t < 0:
        raise InvalidParameterError(f"Time must be >= 0, got {t}.")
    view = spectral_view(kern, osc.hbar)
    if t == 0 or view.total_weight == 0:
        return QuadratureResult(0.0, True, 0, 0)
    result, rule = _integrate(_rate_for(state, view, osc), view, osc, t, quad)
    logger.debug(
        f"Correlated production {result.value:.10g} at t={t:.6g} "
        f"({rule.tau_panels} tau panels, {rule.k_panels} k panels)"
    )
    return result


def calibrate_rule(
    states: list[State],
    kern: CorrelationKernel,
    osc: OscillatorParams,
    t: float,
    quad: QuadratureSpec | None = None,
) -> CorrelatedRule:
    """The finest converged rule over a set of representative states."""
    quad = quad or QuadratureSpec()
    view = spectral_view(kern, osc.hbar)
    rules = [_integrate(_rate_for(state, view, osc), view, osc, t, quad)[1] for state in states]
    return CorrelatedRule(
        max(rule.tau_panels for rule in rules), max(rule.k_panels for rule in rules)
    )


def entropy_production_on_rule(
    state: State,
    kern: CorrelationKernel,
    osc: OscillatorParams,
    t: float,
    rule: CorrelatedRule,
) -> float:
    """Correlated production on a fixed rule, smooth in the state parameters."""
    view = spectral_view(kern, osc.hbar)
    if t == 0 or view.total_weight == 0:
        return 0.0
    nodes, weights = composite_rule(0.0, t, rule.tau_panels)
    return float(weights @ _rate_for(state, view, osc)(nodes, rule.k_panels)) / osc.hbar


def position_entropy_production(
    state: "GaussianMoments | SqueezedCoherentParams",
    kern: CorrelationKernel,
    osc: OscillatorParams,
    t: float,
    quad: QuadratureSpec | None = None,
) -> QuadratureResult:
    """(2 / hbar^2) int_0^t [c(0) - int int c(x - x') P(x, tau) P(x', tau)] dtau.

    For a Gaussian P of variance V the double integral is the mean of c over a
    centred normal of variance 2V.
    """
    quad = quad or QuadratureSpec()
    if t < 0:
        raise InvalidParameterError(f"Time must be >= 0, got {t}.")
    moments = _as_moments(state, osc)
    hbar = osc.hbar
    if t == 0:
        return QuadratureResult(0.0, True, 0, 0)

    if isinstance(kern, GaussianKernel):

        def deficit(variance: np.ndarray) -> np.ndarray:
            # c0 (1 - (1 + 4V / sigma^2)^{-1/2})
            return -kern.c0 * np.expm1(-0.5 * np.log1p(4.0 * variance / kern.sigma**2))

    else:
        spectral_view(kern, hbar)
        # Var x(tau) never exceeds twice this sum
        widest = 2.0 * (moments.var_x + moments.var_p / (osc.mass * osc.omega) ** 2)
        r_grid = np.linspace(0.0, 10.0 * math.sqrt(2.0 * widest), 2049)
        kernel_spline = CubicSpline(r_grid, spectrum_to_kernel(kern, r_grid, hbar))
        ref_u, ref_w = composite_rule(-1.0, 1.0, max(1, math.ceil(quad.k_nodes / PANEL_ORDER)))
        c_zero = spectrum_to_kernel(kern, 0.0, hbar)

        def deficit(variance: np.ndarray) -> np.ndarray:
            spread = np.sqrt(2.0 * variance)[:, None]
            u = 10.0 * spread * ref_u[None, :]
            weights = 10.0 * spread * ref_w[None, :]
            normal = np.exp(-0.5 * (u / spread) ** 2) / (math.sqrt(2.0 * math.pi) * spread)
            mean_c = np.sum(weights * normal * kernel_spline(np.abs(u)), axis=1)
            return c_zero - mean_c

    def estimate(panels: int) -> float:
        nodes, weights = composite_rule(0.0, t, panels)
        return 2.0 / hbar**2 * float(weights @ deficit(position_variance(moments, osc, nodes)))

    return refine(
        estimate,
        panels_for(t, osc.period, quad.tau_nodes_per_period),
        quad.rel_tol,
        quad.max_refinements,
        "position_entropy_production",
        abs_floor=1e-12 * short_correlation_limit(kern, t, hbar),
    )


def save_spectrum(spec: TabulatedSpectrum, path: "str | Path"):
    try:
        np.savetxt(
            path,
            np.column_stack([spec.k_grid, spec.weights]),
            fmt="%.17g",
            header="k weight",
        )
    except OSError as e:
        raise ReportIOError(f"Cannot write spectrum file {path}: {e}") from e


def load_spectrum(path: "str | Path") -> TabulatedSpectrum:
    """Two whitespace-separated columns (k, weight); lines starting with '#' are comments."""
    try:
        table = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as e:
        raise ReportIOError(f"Cannot read spectrum file {path}: {e}") from e
    if table.shape[1] != 2:
        raise ReportIOError(
            f"Spectrum file {path} must have two columns, found {table.shape[1]}."
        )
    logger.info(f"Loaded {table.shape[0]} spectrum samples from {path}")
    return TabulatedSpectrum(table[:, 0], table[:, 1])
