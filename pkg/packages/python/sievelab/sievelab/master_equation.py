"""Brute-force Lindblad integration on the truncated Fock space.

This is the non-perturbative oracle: it propagates

    d rho/dt = (1/i hbar)[H, rho] + (1/hbar) sum_j (V_j rho V_j^dag - {V_j^dag V_j, rho}/2)

with H = hbar omega (n + 1/2) + eps (mu/2){x, p} and channels scaled by
sqrt(eps), using fixed-step classical Runge-Kutta.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from sievelab import logging_config as logging_config
from sievelab.errors import IntegrationQualityError, InvalidParameterError
from sievelab.oscillator_core import (
    FockTruncation,
    OscillatorParams,
    TruncatedDensity,
    TruncatedState,
    build_xp,
    density_from_state,
    linear_entropy,
)
from sievelab.quadratic_channels import (
    DiffusionCoefficients,
    LindbladChannelSet,
    entropy_production_quadrature,
)

logger = logging.getLogger(__name__)

STEPS_PER_PERIOD = 2000
MAX_TRACE_DRIFT = 1e-6
MAX_PERTURBATIVE_EPSILON = 0.05
# r(eps / 2) / r(eps) for a second-order remainder
SECOND_ORDER_WINDOW = (0.2, 0.3)


@dataclass(frozen=True)
class EvolutionSpec:
    osc: OscillatorParams
    channels: LindbladChannelSet
    coupling_scale: float = 1.0
    t_final: float = 0.0
    dt: float | None = None
    truncation: FockTruncation = FockTruncation(60)
    sample_every: int = 1

    def __post_init__(self):
        if self.dt is None:
            object.__setattr__(self, "dt", self.osc.period / STEPS_PER_PERIOD)
        if not self.coupling_scale >= 0:
            raise InvalidParameterError(
                f"coupling_scale must be >= 0, got {self.coupling_scale}."
            )
        if not self.t_final >= 0:
            raise InvalidParameterError(f"t_final must be >= 0, got {self.t_final}.")
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}.")
        if self.dt > self.osc.period / 100:
            raise InvalidParameterError(
                f"dt={self.dt} exceeds one hundredth of the oscillator period "
                f"({self.osc.period / 100})."
            )
        if self.sample_every < 1:
            raise InvalidParameterError(
                f"sample_every must be >= 1, got {self.sample_every}."
            )

    @property
    def steps(self) -> int:
        return math.ceil(self.t_final / self.dt - 1e-9) if self.t_final > 0 else 0


@dataclass(frozen=True, eq=False)
class EntropyTrajectory:
    times: np.ndarray
    entropy: np.ndarray
    trace_drift: np.ndarray
    min_eigenvalue: np.ndarray
    hermiticity: np.ndarray
    final_matrix: np.ndarray = field(repr=False)


class LindbladGenerator:
    """The right-hand side of the master equation for one EvolutionSpec."""

    def __init__(self, spec: EvolutionSpec):
        osc, dim = spec.osc, spec.truncation.dim
        self.dim = dim
        self.hbar = osc.hbar
        x, p = build_xp(osc, dim)
        energies = osc.hbar * osc.omega * (np.arange(dim) + 0.5)
        self.energy_gaps = energies[:, None] - energies[None, :]
        channels = spec.channels.scaled(spec.coupling_scale)
        self.friction = 0.5 * channels.mu * (x @ p + p @ x) if channels.mu else None
        self.operators = channels.operators(x, p)
        self.adjoints = [v.conj().T for v in self.operators]
        self.decay = sum((vd @ v for v, vd in zip(self.operators, self.adjoints)), np.zeros((dim, dim), complex))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.dim, self.dim):
            raise InvalidParameterError(
                f"Density of shape {rho.shape} does not match the truncation N={self.dim}."
            )
        drho = (-1j / self.hbar) * self.energy_gaps * rho
        if self.friction is not None:
            drho += (-1j / self.hbar) * (self.friction @ rho - rho @ self.friction)
        if self.operators:
            jumps = sum(v @ rho @ vd for v, vd in zip(self.operators, self.adjoints))
            drho += (jumps - 0.5 * (self.decay @ rho + rho @ self.decay)) / self.hbar
        return drho


def _as_matrix(rho: "TruncatedDensity | np.ndarray") -> np.ndarray:
    return rho.matrix if isinstance(rho, TruncatedDensity) else np.asarray(rho, dtype=complex)


def lindblad_rhs(rho: "TruncatedDensity | np.ndarray", spec: EvolutionSpec) -> np.ndarray:
    return LindbladGenerator(spec)(_as_matrix(rho))


def coefficient_form_rhs(
    rho: "TruncatedDensity | np.ndarray",
    D: DiffusionCoefficients,
    osc: OscillatorParams,
    N: int,
    epsilon: float = 1.0,
) -> np.ndarray:
    """The same generator written with diffusion coefficients and double commutators.

    The friction term carries -(i lambda / 2 hbar)([x,{p,rho}] - [p,{x,rho}]); with
    lambda = sum Im[a_j b_j^*] this is the sign that matches the channel form.
    """
    rho = _as_matrix(rho)
    hbar = osc.hbar
    x, p = build_xp(osc, N)
    energies = hbar * osc.omega * (np.arange(N) + 0.5)

    def comm(a, b):
        return a @ b - b @ a

    def anti(a, b):
        return a @ b + b @ a

    drho = (-1j / hbar) * (energies[:, None] - energies[None, :]) * rho
    drho += (-1j / hbar) * comm(0.5 * epsilon * D.mu * anti(x, p), rho)
    drho -= epsilon * D.D_qq / hbar**2 * comm(p, comm(p, rho))
    drho -= epsilon * D.D_pp / hbar**2 * comm(x, comm(x, rho))
    drho += epsilon * D.D_pq / hbar**2 * (comm(x, comm(p, rho)) + comm(p, comm(x, rho)))
    drho -= 1j * epsilon * D.lam / (2.0 * hbar) * (comm(x, anti(p, rho)) - comm(p, anti(x, rho)))
    return drho


def _rk4_step(generator: LindbladGenerator, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = generator(rho)
    k2 = generator(rho + 0.5 * dt * k1)
    k3 = generator(rho + 0.5 * dt * k2)
    k4 = generator(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(rho0: "TruncatedDensity | np.ndarray", spec: EvolutionSpec) -> EntropyTrajectory:
    """Propagate rho0 to spec.t_final without renormalization.

    Trace drift, smallest eigenvalue and Hermiticity defect are recorded at
    every sample as diagnostics.
    """
    rho = _as_matrix(rho0).copy()
    generator = LindbladGenerator(spec)
    steps = spec.steps
    dt = spec.t_final / steps if steps else 0.0
    tail_tol = spec.truncation.tail_tol

    times, entropy, drift, min_eig, herm = [], [], [], [], []

    def sample(step: int):
        trace = np.trace(rho).real
        tail = float(np.sum(np.diag(rho)[-2:].real))
        times.append(step * dt)
        entropy.append(linear_entropy(rho))
        drift.append(abs(trace - 1.0))
        min_eig.append(float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]))
        herm.append(float(np.max(np.abs(rho - rho.conj().T))))
        if drift[-1] > MAX_TRACE_DRIFT:
            raise IntegrationQualityError(
                f"Trace drifted by {drift[-1]:.3e} at t={times[-1]:.6g} (limit {MAX_TRACE_DRIFT:.0e})."
            )
        if tail > tail_tol:
            raise IntegrationQualityError(
                f"Top Fock levels reached population {tail:.3e} at t={times[-1]:.6g} "
                f"(tail_tol={tail_tol:.1e}); increase N."
            )

    sample(0)
    for step in range(1, steps + 1):
        rho = _rk4_step(generator, rho, dt)
        if step % spec.sample_every == 0 or step == steps:
            sample(step)

    logger.debug(
        f"Evolved N={spec.truncation.dim} for {steps} steps (eps={spec.coupling_scale}): "
        f"entropy {entropy[0]:.6g} -> {entropy[-1]:.6g}, max drift {max(drift):.2e}"
    )
    return EntropyTrajectory(
        times=np.array(times),
        entropy=np.array(entropy),
        trace_drift=np.array(drift),
        min_eigenvalue=np.array(min_eig),
        hermiticity=np.array(herm),
        final_matrix=rho,
    )


def evolve_many(
    runs: list[tuple["TruncatedDensity | np.ndarray", EvolutionSpec]], threads: int = 1
) -> list[EntropyTrajectory]:
    """Independent trajectories, returned in input order."""
    if threads <= 1:
        return [evolve(rho0, spec) for rho0, spec in runs]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(lambda run: evolve(*run), runs))


@dataclass(frozen=True)
class ResidualPoint:
    epsilon: float
    exact_delta_sigma: float
    first_order: float
    residual: float


def iter_residuals(
    state: TruncatedState,
    base: EvolutionSpec,
    t: float,
    epsilons: list[float],
    threads: int = 1,
) -> Iterator[ResidualPoint]:
    """Residual points in the order of `epsilons`, yielded as soon as they are known."""
    if any(eps < 0 for eps in epsilons):
        raise InvalidParameterError(f"Coupling scales must be >= 0, got {epsilons}.")
    if any(eps > MAX_PERTURBATIVE_EPSILON for eps in epsilons):
        logger.warning(
            f"Coupling scales above {MAX_PERTURBATIVE_EPSILON} leave the perturbative regime: {epsilons}"
        )
    if any(later >= earlier for earlier, later in zip(epsilons, epsilons[1:])):
        logger.warning(f"Coupling scales are expected in decreasing order, got {epsilons}")

    first = entropy_production_quadrature(state, base.channels, base.osc, t).value
    rho0 = density_from_state(state)

    def run(eps: float) -> ResidualPoint:
        trajectory = evolve(rho0, replace(base, coupling_scale=eps, t_final=t))
        exact = float(trajectory.entropy[-1] - trajectory.entropy[0])
        point = ResidualPoint(eps, exact, eps * first, abs(exact - eps * first))
        logger.info(
            f"eps={eps:g}: exact={exact:.10g}, first order={point.first_order:.10g}, "
            f"residual={point.residual:.3e}"
        )
        return point

    if threads <= 1:
        for eps in epsilons:
            yield run(eps)
        return
    with ThreadPoolExecutor(max_workers=threads) as executor:
        yield from executor.map(run, epsilons)


def perturbation_residual(
    state: TruncatedState,
    base: EvolutionSpec,
    t: float,
    epsilons: list[float],
    threads: int = 1,
) -> list[ResidualPoint]:
    """|(entropy_exact(t; eps) - entropy(0)) - eps * first-order production| per eps."""
    return list(iter_residuals(state, base, t, epsilons, threads))


def residual_ratios(points: list[ResidualPoint]) -> list[float | None]:
    """r(eps_i) / r(eps_{i-1}); None for the first point or a zero predecessor.

    Halvings whose ratio falls outside SECOND_ORDER_WINDOW are logged.
    """
    ratios: list[float | None] = [None]
    low, high = SECOND_ORDER_WINDOW
    for previous, current in zip(points, points[1:]):
        ratio = current.residual / previous.residual if previous.residual else None
        halving = math.isclose(2.0 * current.epsilon, previous.epsilon)
        if ratio is not None and halving and not low <= ratio <= high:
            logger.warning(
                f"Residual ratio {ratio:.4g} from eps={previous.epsilon:g} to eps={current.epsilon:g} "
                f"is outside [{low}, {high}]"
            )
        ratios.append(ratio)
    return ratios
