"""Lindblad channels linear in x and p.

A channel V_j = a_j p + b_j x contributes to the diffusion coefficients

    D_qq = (hbar/2) sum |a_j|^2        D_pp = (hbar/2) sum |b_j|^2
    D_pq = -(hbar/2) sum Re[a_j b_j^*] lambda = sum Im[a_j b_j^*]

and, to first order, to the linear entropy production of a pure state.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from sievelab import logging_config as logging_config
from sievelab.errors import ConditionViolatedError, InvalidParameterError
from sievelab.oscillator_core import (
    GaussianMoments,
    OscillatorParams,
    TruncatedState,
    build_xp,
)
from sievelab.quadrature import QuadratureResult, composite_rule, panels_for, refine

logger = logging.getLogger(__name__)

MIN_STEPS = 16
QUADRATURE_REL_TOL = 1e-9
QUADRATURE_MAX_REFINEMENTS = 8
# Relative distance from a multiple of pi/omega below which sin(omega t) is zero
PHASE_SNAP = 8 * np.finfo(float).eps

THERMAL_CONDITION = (
    "the closed form requires D_pq = 0, the condition under which the "
    "oscillator relaxes to thermal equilibrium"
)


@dataclass(frozen=True)
class LindbladChannelSet:
    channels: tuple[tuple[complex, complex], ...] = ()
    mu: float = 0.0

    def __post_init__(self):
        channels = tuple((complex(a), complex(b)) for a, b in self.channels)
        for a, b in channels:
            if not all(map(math.isfinite, (a.real, a.imag, b.real, b.imag))):
                raise InvalidParameterError(f"Channel coefficients must be finite, got {(a, b)}.")
        if not math.isfinite(self.mu):
            raise InvalidParameterError(f"Friction mu must be finite, got {self.mu}.")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def is_trivial(self) -> bool:
        return self.mu == 0 and all(a == 0 and b == 0 for a, b in self.channels)

    def scaled(self, epsilon: float) -> "LindbladChannelSet":
        """Channels times sqrt(epsilon), friction times epsilon: the dissipator scales linearly."""
        if epsilon < 0:
            raise InvalidParameterError(f"Coupling scale must be >= 0, got {epsilon}.")
        root = math.sqrt(epsilon)
        return LindbladChannelSet(
            tuple((root * a, root * b) for a, b in self.channels), epsilon * self.mu
        )

    def operators(self, x: np.ndarray, p: np.ndarray) -> list[np.ndarray]:
        return [a * p + b * x for a, b in self.channels]


@dataclass(frozen=True)
class DiffusionCoefficients:
    D_qq: float = 0.0
    D_pp: float = 0.0
    D_pq: float = 0.0
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.D_qq < 0 or self.D_pp < 0:
            raise InvalidParameterError(
                f"Diffusion coefficients must be >= 0, got D_qq={self.D_qq}, D_pp={self.D_pp}."
            )
        slack = 1e-12 * max(self.D_qq * self.D_pp, self.D_pq**2)
        if self.D_qq * self.D_pp - self.D_pq**2 < -slack:
            raise InvalidParameterError(
                f"D_qq * D_pp must be >= D_pq^2, got {self.D_qq} * {self.D_pp} < {self.D_pq}^2."
            )

    @property
    def is_zero(self) -> bool:
        return self.D_qq == 0 and self.D_pp == 0 and self.D_pq == 0 and self.lam == 0

    def require_thermal_condition(self):
        if self.D_pq != 0:
            raise ConditionViolatedError(f"D_pq = {self.D_pq}: {THERMAL_CONDITION}.")


@dataclass(frozen=True)
class FCoefficients:
    f1: float
    f2: float
    f3: float
    t: float


def channels_to_diffusion(ch: LindbladChannelSet, hbar: float) -> DiffusionCoefficients:
    a = np.array([c[0] for c in ch.channels], dtype=complex)
    b = np.array([c[1] for c in ch.channels], dtype=complex)
    ab = a * b.conj()
    return DiffusionCoefficients(
        D_qq=0.5 * hbar * float(np.sum(np.abs(a) ** 2)),
        D_pp=0.5 * hbar * float(np.sum(np.abs(b) ** 2)),
        D_pq=-0.5 * hbar * float(np.sum(ab.real)),
        lam=float(np.sum(ab.imag)),
        mu=ch.mu,
    )


def channels_for_coefficients(D: DiffusionCoefficients, hbar: float) -> LindbladChannelSet:
    """At most two channels reproducing a D_pq = 0 coefficient set.

    The first channel carries all of D_qq and the friction, the second tops up
    D_pp. Requires D_qq * D_pp >= hbar^2 lambda^2 / 4.
    """
    D.require_thermal_condition()
    a1 = math.sqrt(2.0 * D.D_qq / hbar)
    channels = []
    remaining = 2.0 * D.D_pp / hbar
    if D.lam != 0:
        if a1 == 0:
            raise InvalidParameterError("Friction lambda != 0 needs D_qq > 0.")
        b1 = -1j * D.lam / a1
        remaining -= abs(b1) ** 2
        channels.append((a1, b1))
    elif a1 > 0:
        channels.append((a1, 0j))
    if remaining < -1e-12 * max(1.0, 2.0 * D.D_pp / hbar):
        raise InvalidParameterError(
            f"Coefficients violate D_qq * D_pp >= hbar^2 lambda^2 / 4 "
            f"(D_qq={D.D_qq}, D_pp={D.D_pp}, lambda={D.lam})."
        )
    if remaining > 0:
        channels.append((0j, math.sqrt(remaining)))
    return LindbladChannelSet(tuple(channels), D.mu)


def quantum_optical(gamma: float, n_th: float, osc: OscillatorParams) -> LindbladChannelSet:
    """Quantum optical master equation: channels sqrt(hbar gamma (n+1)) a and sqrt(hbar gamma n) a^dag."""
    if gamma < 0 or n_th < 0:
        raise InvalidParameterError(
            f"gamma and n_th must be >= 0, got gamma={gamma}, n_th={n_th}."
        )
    # a = (m omega x + i p) / sqrt(2 hbar m omega)
    norm = math.sqrt(2.0 * osc.hbar * osc.mass * osc.omega)
    m_omega = osc.mass * osc.omega
    lowering = math.sqrt(osc.hbar * gamma * (n_th + 1.0)) / norm
    raising = math.sqrt(osc.hbar * gamma * n_th) / norm
    channels = [(1j * lowering, lowering * m_omega)]
    if raising > 0:
        channels.append((-1j * raising, raising * m_omega))
    return LindbladChannelSet(tuple(channels))


def _trig(omega_t: float) -> tuple[float, float]:
    """sin(2 omega t) and sin^2(omega t), exactly zero at multiples of pi."""
    turns = omega_t / math.pi
    frac = turns - round(turns)
    if abs(frac) <= PHASE_SNAP * max(1.0, abs(turns)):
        return 0.0, 0.0
    return math.sin(2.0 * math.pi * frac), math.sin(math.pi * frac) ** 2


def _f_values(t: float, osc: OscillatorParams, D: DiffusionCoefficients) -> FCoefficients:
    if t < 0:
        raise InvalidParameterError(f"Time must be >= 0, got {t}.")
    m, w, hbar = osc.mass, osc.omega, osc.hbar
    q_term = 2.0 * D.D_qq / hbar**2
    p_term = 2.0 * D.D_pp / (m * w * hbar) ** 2
    sin_2wt, sin2_wt = _trig(w * t)
    # f3 carries m / omega, checked against entropy_production_quadrature
    return FCoefficients(
        f1=t * 2.0 * m * (q_term + p_term),
        f2=2.0 * m * sin_2wt / (2.0 * w) * (q_term - p_term),
        f3=-2.0 * m * sin2_wt / w * (q_term - p_term),
        t=t,
    )


def f_coefficients(t: float, osc: OscillatorParams, D: DiffusionCoefficients) -> FCoefficients:
    D.require_thermal_condition()
    return _f_values(t, osc, D)


def hamiltonian_expectation_terms(
    mom: GaussianMoments, osc: OscillatorParams
) -> tuple[float, float, float]:
    """(E, Delta, C): central energy, energy imbalance and symmetrized correlation.

    C = (omega/2)<{x,p}> - omega <x><p> reduces to omega * cov_xp, so only
    central moments enter.
    """
    kinetic = mom.var_p / (2.0 * osc.mass)
    potential = 0.5 * osc.mass * osc.omega**2 * mom.var_x
    return kinetic + potential, kinetic - potential, osc.omega * mom.cov_xp


def entropy_production_closed(
    mom: GaussianMoments, D: DiffusionCoefficients, osc: OscillatorParams, t: float
) -> float:
    f = f_coefficients(t, osc, D)
    energy, imbalance, correlation = hamiltonian_expectation_terms(mom, osc)
    return f.f1 * energy + f.f2 * imbalance + f.f3 * correlation - 2.0 * D.lam * t


def entropy_production_general(
    mom: GaussianMoments, D: DiffusionCoefficients, osc: OscillatorParams, t: float
) -> float:
    """Closed form extended by the D_pq cross term; valid for any Gaussian state."""
    f = _f_values(t, osc, D)
    energy, imbalance, correlation = hamiltonian_expectation_terms(mom, osc)
    value = f.f1 * energy + f.f2 * imbalance + f.f3 * correlation - 2.0 * D.lam * t
    if D.D_pq != 0:
        w = osc.omega
        sin_2wt, sin2_wt = _trig(w * t)
        cov_integral = mom.cov_xp * sin_2wt / (2.0 * w) + (2.0 * imbalance / w) * sin2_wt / (
            2.0 * w
        )
        value -= 8.0 * D.D_pq / osc.hbar**2 * cov_integral
    return value


def _variance_integrand(
    state: TruncatedState, ch: LindbladChannelSet, osc: OscillatorParams
):
    """(2/hbar) sum_j Var V_j(tau) as a vectorized function of tau."""
    x, p = build_xp(osc, state.dim)
    psi = state.amplitudes
    x_psi, p_psi = x @ psi, p @ psi
    x_c = x_psi - np.vdot(psi, x_psi) * psi
    p_c = p_psi - np.vdot(psi, p_psi) * psi
    g_xx = np.vdot(x_c, x_c).real
    g_pp = np.vdot(p_c, p_c).real
    g_xp = np.vdot(x_c, p_c)
    a = np.array([c[0] for c in ch.channels], dtype=complex)
    b = np.array([c[1] for c in ch.channels], dtype=complex)
    m_omega = osc.mass * osc.omega

    def integrand(tau: np.ndarray) -> np.ndarray:
        phase = osc.omega * tau[:, None]
        cos, sin = np.cos(phase), np.sin(phase)
        # V_j(tau) psi - <V_j> psi = u x_c + v p_c
        u = b * cos - a * m_omega * sin
        v = a * cos + b * sin / m_omega
        var = np.abs(u) ** 2 * g_xx + np.abs(v) ** 2 * g_pp + 2.0 * (u.conj() * v * g_xp).real
        return (2.0 / osc.hbar) * var.sum(axis=1)

    return integrand


def entropy_production_quadrature(
    state: TruncatedState,
    ch: LindbladChannelSet,
    osc: OscillatorParams,
    t: float,
    n_steps: int = 64,
) -> QuadratureResult:
    """First-order entropy production of a pure state by time quadrature.

    The friction Hamiltonian (mu/2){x,p} does not enter: its first-order
    contribution vanishes by cyclicity of the trace.
    """
    if t < 0:
        raise InvalidParameterError(f"Time must be >= 0, got {t}.")
    state.ensure_resolved()
    warnings = ()
    if n_steps < MIN_STEPS:
        warnings = (f"n_steps={n_steps} is below {MIN_STEPS}; convergence may be unreliable",)
        logger.warning(warnings[0])
    if t == 0 or not ch.channels:
        return QuadratureResult(0.0, True, 0, 0, warnings)

    integrand = _variance_integrand(state, ch, osc)
    start = max(panels_for(t, osc.period, 4 * 16), math.ceil(n_steps / 16))

    def estimate(panels: int) -> float:
        nodes, weights = composite_rule(0.0, t, panels)
        return float(weights @ integrand(nodes))

    scale = (2.0 / osc.hbar) * t * sum(abs(a) ** 2 + abs(b) ** 2 for a, b in ch.channels)
    result = refine(
        estimate,
        start,
        QUADRATURE_REL_TOL,
        QUADRATURE_MAX_REFINEMENTS,
        "entropy_production_quadrature",
        abs_floor=1e-12 * scale,
    )
    if warnings:
        return QuadratureResult(
            result.value, result.converged, result.nodes, result.refinements, warnings + result.warnings
        )
    return result


@dataclass(frozen=True)
class AnalyticOptimum:
    s_star: float | None
    theta_star: float | None
    value: float


def analytic_optimum(
    D: DiffusionCoefficients, osc: OscillatorParams, t: float
) -> AnalyticOptimum:
    """Closed-form minimiser of the closed-form entropy production at alpha = 0.

    With the oscillator conventions of this package the objective reads
    (hbar omega / 2)[f1 cosh 2s + sinh 2s (f3 sin theta - f2 cos theta)] - 2 lambda t,
    minimised at tanh 2s = R / f1 with R = sqrt(f2^2 + f3^2) and
    (cos theta, sin theta) = (f2, -f3) / R.
    """
    f = f_coefficients(t, osc, D)
    offset = -2.0 * D.lam * t
    half_quantum = 0.5 * osc.hbar * osc.omega
    if f.f1 == 0:
        return AnalyticOptimum(None, None, offset)
    radius = math.hypot(f.f2, f.f3)
    if radius == 0:
        return AnalyticOptimum(0.0, None, half_quantum * f.f1 + offset)
    s_star = 0.5 * math.atanh(radius / f.f1)
    theta_star = math.atan2(-f.f3, f.f2) % (2.0 * math.pi)
    value = half_quantum * math.sqrt(f.f1**2 - radius**2) + offset
    return AnalyticOptimum(s_star, theta_star, value)
