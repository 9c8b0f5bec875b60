"""Truncated Fock-space oscillator: ladder and quadrature matrices, squeezed
coherent states, linear entropy and Gaussian moments.

Conventions used everywhere in sievelab:

    x = sqrt(hbar / 2 m omega) (a + a^dag)
    p = i sqrt(hbar m omega / 2) (a^dag - a)
    D(alpha) = exp(alpha a^dag - alpha^* a)
    S(zeta) = exp((zeta a^dag^2 - zeta^* a^2) / 2),  zeta = s e^{i theta}

so that S^dag a S = cosh(s) a + e^{i theta} sinh(s) a^dag and a squeezed coherent
state is D(alpha) S(zeta) |0>.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from sievelab import logging_config as logging_config
from sievelab.errors import (
    InvalidParameterError,
    InvalidTruncationError,
    UnderResolvedError,
)

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TOL = 1e-8
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-8
TWO_PI = 2.0 * math.pi


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class OscillatorParams:
    mass: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("mass", "omega", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(
                    f"Oscillator {name} must be positive and finite, got {value}."
                )

    @property
    def length_scale(self) -> float:
        """Coherent-state position spread sqrt(hbar / 2 m omega)."""
        return math.sqrt(self.hbar / (2.0 * self.mass * self.omega))

    @property
    def momentum_scale(self) -> float:
        return math.sqrt(self.hbar * self.mass * self.omega / 2.0)

    @property
    def period(self) -> float:
        return TWO_PI / self.omega


@dataclass(frozen=True)
class FockTruncation:
    dim: int
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidTruncationError(
                f"A Fock truncation needs at least 2 levels, got {self.dim}."
            )
        if not self.tail_tol > 0:
            raise InvalidParameterError(
                f"tail_tol must be positive, got {self.tail_tol}."
            )


def as_truncation(truncation: "FockTruncation | int") -> FockTruncation:
    if isinstance(truncation, FockTruncation):
        return truncation
    return FockTruncation(int(truncation))


def tail_population(amplitudes: np.ndarray) -> float:
    """Population of the two highest retained levels.

    Two levels are used because squeezed vacua only populate even levels, which
    would hide an under-resolved state whenever N - 1 is odd.
    """
    return float(np.sum(np.abs(amplitudes[-2:]) ** 2))


@dataclass(frozen=True, eq=False)
class TruncatedState:
    amplitudes: np.ndarray
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        amplitudes = _freeze(self.amplitudes)
        if amplitudes.ndim != 1 or amplitudes.size < 2:
            raise InvalidTruncationError(
                f"State amplitudes must be a vector of at least 2 levels, got shape {amplitudes.shape}."
            )
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidParameterError(f"State is not normalized (norm={norm!r}).")
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def tail_population(self) -> float:
        return tail_population(self.amplitudes)

    @property
    def under_resolved(self) -> bool:
        return self.tail_population > self.tail_tol

    def ensure_resolved(self) -> "TruncatedState":
        if self.under_resolved:
            raise UnderResolvedError(
                f"Top Fock levels hold population {self.tail_population:.3e} "
                f"(tail_tol={self.tail_tol:.1e}) on N={self.dim}; increase the truncation."
            )
        return self


@dataclass(frozen=True, eq=False)
class TruncatedDensity:
    matrix: np.ndarray

    def __post_init__(self):
        matrix = _freeze(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidParameterError(
                f"Density matrix must be square, got shape {matrix.shape}."
            )
        if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
            raise InvalidParameterError("Density matrix is not Hermitian.")
        trace = np.trace(matrix).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidParameterError(f"Density matrix trace is {trace!r}, not 1.")
        smallest = float(np.linalg.eigvalsh(matrix)[0])
        if smallest < EIGENVALUE_FLOOR:
            raise InvalidParameterError(
                f"Density matrix has a negative eigenvalue ({smallest:.3e})."
            )
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SqueezedCoherentParams:
    alpha: complex = 0j
    s: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s >= 0):
            raise InvalidParameterError(
                f"Squeeze magnitude s must be >= 0, got {self.s}."
            )
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)


@dataclass(frozen=True)
class GaussianMoments:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float

    def __post_init__(self):
        if not (self.var_x > 0 and self.var_p > 0):
            raise InvalidParameterError(
                f"Variances must be positive, got var_x={self.var_x}, var_p={self.var_p}."
            )

    @property
    def uncertainty_product(self) -> float:
        return self.var_x * self.var_p - self.cov_xp**2


def build_ladder(N: int) -> tuple[np.ndarray, np.ndarray]:
    if int(N) != N or N < 2:
        raise InvalidTruncationError(f"A Fock truncation needs at least 2 levels, got {N}.")
    a = np.diag(np.sqrt(np.arange(1, N, dtype=float)), k=1).astype(complex)
    return a, a.conj().T


def build_xp(osc: OscillatorParams, N: int) -> tuple[np.ndarray, np.ndarray]:
    a, adag = build_ladder(N)
    x = osc.length_scale * (a + adag)
    p = 1j * osc.momentum_scale * (adag - a)
    return x, p


def heisenberg_xp(
    x: np.ndarray, p: np.ndarray, osc: OscillatorParams, tau: float
) -> tuple[np.ndarray, np.ndarray]:
    """Free-oscillator Heisenberg operators x(tau), p(tau) by trigonometric recombination."""
    c, s = math.cos(osc.omega * tau), math.sin(osc.omega * tau)
    m_omega = osc.mass * osc.omega
    return c * x + (s / m_omega) * p, c * p - (s * m_omega) * x


def _check_first_column(matrix: np.ndarray, truncation: FockTruncation, label: str):
    population = tail_population(matrix[:, 0])
    if population > truncation.tail_tol:
        raise UnderResolvedError(
            f"{label} pushes population {population:.3e} into the top Fock levels "
            f"of N={truncation.dim} (tail_tol={truncation.tail_tol:.1e})."
        )


def displacement_matrix(alpha: complex, truncation: "FockTruncation | int") -> np.ndarray:
    truncation = as_truncation(truncation)
    a, adag = build_ladder(truncation.dim)
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(truncation.dim, dtype=complex)
    matrix = expm(alpha * adag - alpha.conjugate() * a)
    _check_first_column(matrix, truncation, f"D({alpha})")
    return matrix


def squeeze_matrix(s: float, theta: float, truncation: "FockTruncation | int") -> np.ndarray:
    if s < 0:
        raise InvalidParameterError(f"Squeeze magnitude s must be >= 0, got {s}.")
    truncation = as_truncation(truncation)
    if s == 0:
        return np.eye(truncation.dim, dtype=complex)
    a, adag = build_ladder(truncation.dim)
    zeta = s * np.exp(1j * theta)
    matrix = expm(0.5 * (zeta * adag @ adag - np.conj(zeta) * a @ a))
    _check_first_column(matrix, truncation, f"S(s={s}, theta={theta})")
    return matrix


def fock_state(n: int, truncation: "FockTruncation | int") -> TruncatedState:
    truncation = as_truncation(truncation)
    if not 0 <= n < truncation.dim:
        raise InvalidTruncationError(
            f"Fock level {n} is outside the truncation 0..{truncation.dim - 1}."
        )
    amplitudes = np.zeros(truncation.dim, dtype=complex)
    amplitudes[n] = 1.0
    return TruncatedState(amplitudes, tail_tol=truncation.tail_tol).ensure_resolved()


def make_state(
    params: SqueezedCoherentParams, truncation: "FockTruncation | int"
) -> TruncatedState:
    """Squeezed coherent state D(alpha) S(zeta) |0> on the truncated space."""
    truncation = as_truncation(truncation)
    vacuum = np.zeros(truncation.dim, dtype=complex)
    vacuum[0] = 1.0
    squeezed = squeeze_matrix(params.s, params.theta, truncation) @ vacuum
    amplitudes = displacement_matrix(params.alpha, truncation) @ squeezed
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return TruncatedState(amplitudes, tail_tol=truncation.tail_tol).ensure_resolved()


def density_from_state(state: TruncatedState) -> TruncatedDensity:
    psi = state.amplitudes
    return TruncatedDensity(np.outer(psi, psi.conj()))


def maximally_mixed(N: int) -> TruncatedDensity:
    build_ladder(N)
    return TruncatedDensity(np.eye(N, dtype=complex) / N)


def _matrix(rho: "TruncatedDensity | np.ndarray") -> np.ndarray:
    return rho.matrix if isinstance(rho, TruncatedDensity) else np.asarray(rho)


def purity(rho: "TruncatedDensity | np.ndarray") -> float:
    matrix = _matrix(rho)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.vdot(matrix, matrix).real)


def linear_entropy(rho: "TruncatedDensity | np.ndarray") -> float:
    return 1.0 - purity(rho)


def gaussian_moments(
    params: SqueezedCoherentParams, osc: OscillatorParams
) -> GaussianMoments:
    two_s = 2.0 * params.s
    ch, sh = math.cosh(two_s), math.sinh(two_s)
    cos_t, sin_t = math.cos(params.theta), math.sin(params.theta)
    return GaussianMoments(
        mean_x=math.sqrt(2.0 * osc.hbar / (osc.mass * osc.omega)) * params.alpha.real,
        mean_p=math.sqrt(2.0 * osc.hbar * osc.mass * osc.omega) * params.alpha.imag,
        var_x=osc.length_scale**2 * (ch + sh * cos_t),
        var_p=osc.momentum_scale**2 * (ch - sh * cos_t),
        cov_xp=0.5 * osc.hbar * sh * sin_t,
    )


def alpha_from_means(mean_x: float, mean_p: float, osc: OscillatorParams) -> complex:
    """Displacement amplitude producing the given means; inverse of gaussian_moments."""
    return complex(
        mean_x / math.sqrt(2.0 * osc.hbar / (osc.mass * osc.omega)),
        mean_p / math.sqrt(2.0 * osc.hbar * osc.mass * osc.omega),
    )


def fock_moments(state: TruncatedState, osc: OscillatorParams) -> GaussianMoments:
    """First and second moments of a truncated state by Fock-space expectation."""
    x, p = build_xp(osc, state.dim)
    psi = state.amplitudes
    x_psi, p_psi = x @ psi, p @ psi
    mean_x = float(np.vdot(psi, x_psi).real)
    mean_p = float(np.vdot(psi, p_psi).real)
    return GaussianMoments(
        mean_x=mean_x,
        mean_p=mean_p,
        var_x=float(np.vdot(x_psi, x_psi).real) - mean_x**2,
        var_p=float(np.vdot(p_psi, p_psi).real) - mean_p**2,
        cov_xp=float(np.vdot(x_psi, p_psi).real) - mean_x * mean_p,
    )


def evolved_moments(
    moments: GaussianMoments, osc: OscillatorParams, tau: float
) -> GaussianMoments:
    """Moments of x(tau), p(tau) under free oscillator evolution."""
    c, s = math.cos(osc.omega * tau), math.sin(osc.omega * tau)
    mw = osc.mass * osc.omega
    vx, vp, cxp = moments.var_x, moments.var_p, moments.cov_xp
    return GaussianMoments(
        mean_x=c * moments.mean_x + s * moments.mean_p / mw,
        mean_p=c * moments.mean_p - s * mw * moments.mean_x,
        var_x=c * c * vx + s * s * vp / mw**2 + 2.0 * c * s * cxp / mw,
        var_p=c * c * vp + s * s * mw**2 * vx - 2.0 * c * s * mw * cxp,
        cov_xp=(c * c - s * s) * cxp + c * s * (vp / mw - mw * vx),
    )


def position_variance(
    moments: GaussianMoments, osc: OscillatorParams, tau: np.ndarray
) -> np.ndarray:
    """Var x(tau) on an array of times."""
    phase = osc.omega * np.asarray(tau, dtype=float)
    c, s = np.cos(phase), np.sin(phase)
    mw = osc.mass * osc.omega
    return (
        c * c * moments.var_x
        + s * s * moments.var_p / mw**2
        + 2.0 * c * s * moments.cov_xp / mw
    )


def position_mean(
    moments: GaussianMoments, osc: OscillatorParams, tau: np.ndarray
) -> np.ndarray:
    phase = osc.omega * np.asarray(tau, dtype=float)
    return np.cos(phase) * moments.mean_x + np.sin(phase) * moments.mean_p / (
        osc.mass * osc.omega
    )
