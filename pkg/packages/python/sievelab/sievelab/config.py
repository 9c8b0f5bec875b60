"""JSON run configuration for the command line.

Only the oscillator block (m = omega = hbar = 1) and the numerical plumbing
(truncation, quadrature, grids) have defaults; every physical model parameter
must be given explicitly.
"""

import hashlib
import json
import logging
import math
import pathlib
from dataclasses import dataclass, field

import numpy as np

from sievelab import logging_config as logging_config
from sievelab.correlated_noise import (
    DEFAULT_K_SAMPLES,
    CorrelationKernel,
    GaussianKernel,
    QuadratureSpec,
    load_spectrum,
)
from sievelab.errors import ConfigError, InvalidParameterError
from sievelab.oscillator_core import (
    FockTruncation,
    OscillatorParams,
    SqueezedCoherentParams,
    TruncatedState,
    fock_state,
    make_state,
)
from sievelab.predictability_sieve import SieveGrid
from sievelab.quadratic_channels import (
    DiffusionCoefficients,
    LindbladChannelSet,
    channels_for_coefficients,
)

logger = logging.getLogger(__name__)

MODEL_KINDS = ("quadratic", "channels", "kernel")
QUADRATIC_KEYS = ("D_qq", "D_pp", "D_pq", "lambda", "mu")


@dataclass(frozen=True)
class TimeBlock:
    t_final: float | None = None
    samples: int = 1
    dt: float | None = None
    times: tuple[float, ...] | None = None

    def values(self) -> list[float]:
        """Explicit times, else t_final alone for one sample, else an even grid from 0."""
        if self.times is not None:
            return list(self.times)
        if self.t_final is None:
            raise ConfigError("time: either t_final or times is required for this command.")
        if self.samples == 1:
            return [self.t_final]
        return [float(t) for t in np.linspace(0.0, self.t_final, self.samples)]


@dataclass(frozen=True)
class KernelTableBlock:
    r_max: float | None = None
    n_r: int = 101
    k_max: float | None = None
    n_k: int = DEFAULT_K_SAMPLES
    spectrum_out: pathlib.Path | None = None

    def __post_init__(self):
        for name in ("r_max", "k_max"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"kernel_table.{name} must be > 0, got {value}.")
        if self.n_r < 2:
            raise InvalidParameterError(f"kernel_table.n_r must be >= 2, got {self.n_r}.")


@dataclass(frozen=True)
class RunConfig:
    osc: OscillatorParams
    model_kind: str
    diffusion: DiffusionCoefficients | None = None
    channels: LindbladChannelSet | None = None
    kernel: GaussianKernel | None = None
    spectrum_file: pathlib.Path | None = None
    state: SqueezedCoherentParams | int | None = None
    time: TimeBlock = TimeBlock()
    sieve: SieveGrid = SieveGrid()
    truncation: FockTruncation = FockTruncation(60)
    quadrature: QuadratureSpec = QuadratureSpec()
    epsilons: tuple[float, ...] = ()
    kernel_table: KernelTableBlock = KernelTableBlock()
    output: pathlib.Path | None = None
    effective: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def sha256(self) -> str:
        canonical = json.dumps(self.effective, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def require_model(self, *kinds: str):
        if self.model_kind not in kinds:
            raise ConfigError(
                f"model: this command needs a {' or '.join(kinds)} block, got {self.model_kind}."
            )

    def require_state(self):
        if self.state is None:
            raise ConfigError("state: a state block is required for this command.")
        return self.state

    def lindblad_channels(self) -> LindbladChannelSet:
        """The channel list, or a realisation of the quadratic coefficients."""
        self.require_model("channels", "quadratic")
        if self.channels is not None:
            return self.channels
        return channels_for_coefficients(self.diffusion, self.osc.hbar)

    def correlation_kernel(self) -> CorrelationKernel:
        self.require_model("kernel")
        if self.kernel is not None:
            return self.kernel
        return load_spectrum(self.spectrum_file)

    def truncated_state(self) -> TruncatedState:
        state = self.require_state()
        if isinstance(state, int):
            return fock_state(state, self.truncation)
        return make_state(state, self.truncation)


def _complex(value, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: expected a number or a [re, im] pair, got {value!r}.")


def _pair(value: complex) -> list[float]:
    return [value.real, value.imag]


def _block(data: dict, key: str, allowed: tuple[str, ...]) -> dict:
    block = data.get(key, {})
    if not isinstance(block, dict):
        raise ConfigError(f"{key}: expected an object, got {type(block).__name__}.")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{key}: unknown keys {unknown}.")
    return block


def _optional_float(block: dict, key: str) -> float | None:
    return None if block.get(key) is None else float(block[key])


def _required(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"{where}: missing required key '{key}'.")
    return block[key]


def _parse_model(data: dict) -> tuple[dict, dict]:
    model = _block(data, "model", MODEL_KINDS)
    if len(model) != 1:
        raise ConfigError(
            f"model: exactly one of {list(MODEL_KINDS)} is required, got {sorted(model)}."
        )
    (kind, body), = model.items()
    if not isinstance(body, dict):
        raise ConfigError(f"model.{kind}: expected an object.")

    if kind == "quadratic":
        _block(model, kind, QUADRATIC_KEYS)
        values = {key: float(_required(body, key, "model.quadratic")) for key in QUADRATIC_KEYS}
        parsed = {
            "diffusion": DiffusionCoefficients(
                D_qq=values["D_qq"],
                D_pp=values["D_pp"],
                D_pq=values["D_pq"],
                lam=values["lambda"],
                mu=values["mu"],
            )
        }
        return {"model_kind": kind, **parsed}, {kind: values}

    if kind == "channels":
        _block(model, kind, ("list", "mu"))
        entries = _required(body, "list", "model.channels")
        if not isinstance(entries, list):
            raise ConfigError("model.channels.list: expected a list.")
        pairs = []
        for index, entry in enumerate(entries):
            where = f"model.channels.list[{index}]"
            if not isinstance(entry, dict) or set(entry) != {"a", "b"}:
                raise ConfigError(f"{where}: expected an object with keys 'a' and 'b'.")
            pairs.append((_complex(entry["a"], f"{where}.a"), _complex(entry["b"], f"{where}.b")))
        mu = float(_required(body, "mu", "model.channels"))
        channels = LindbladChannelSet(tuple(pairs), mu)
        effective = {"list": [{"a": _pair(a), "b": _pair(b)} for a, b in pairs], "mu": mu}
        return {"model_kind": kind, "channels": channels}, {kind: effective}

    _block(model, kind, ("gaussian", "spectrum_file"))
    if len(body) != 1:
        raise ConfigError("model.kernel: exactly one of 'gaussian' or 'spectrum_file' is required.")
    if "gaussian" in body:
        gaussian = _block(body, "gaussian", ("c0", "sigma"))
        c0 = float(_required(gaussian, "c0", "model.kernel.gaussian"))
        sigma = float(_required(gaussian, "sigma", "model.kernel.gaussian"))
        kernel = GaussianKernel(c0, sigma)
        return {"model_kind": kind, "kernel": kernel}, {kind: {"gaussian": {"c0": c0, "sigma": sigma}}}
    if not isinstance(body["spectrum_file"], str):
        raise ConfigError(
            f"model.kernel.spectrum_file: expected a path string, got {body['spectrum_file']!r}."
        )
    path = pathlib.Path(body["spectrum_file"])
    return {"model_kind": kind, "spectrum_file": path}, {kind: {"spectrum_file": str(path)}}


def _parse_state(data: dict) -> tuple[dict, dict | None]:
    if "state" not in data:
        return {}, None
    state = _block(data, "state", ("alpha", "s", "theta", "fock"))
    if "fock" in state:
        if len(state) != 1:
            raise ConfigError("state: 'fock' cannot be combined with squeeze parameters.")
        n = state["fock"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise ConfigError(f"state.fock: expected a non-negative integer, got {n!r}.")
        return {"state": n}, {"fock": n}
    alpha = _complex(_required(state, "alpha", "state"), "state.alpha")
    params = SqueezedCoherentParams(
        alpha, float(_required(state, "s", "state")), float(_required(state, "theta", "state"))
    )
    return {"state": params}, {"alpha": _pair(params.alpha), "s": params.s, "theta": params.theta}


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded JSON document and resolve defaults."""
    if not isinstance(data, dict):
        raise ConfigError("The configuration must be a JSON object.")
    unknown = sorted(
        set(data)
        - {
            "oscillator",
            "model",
            "state",
            "time",
            "sieve",
            "truncation",
            "quadrature",
            "consistency",
            "kernel_table",
            "output",
        }
    )
    if unknown:
        raise ConfigError(f"Unknown top-level keys {unknown}.")

    try:
        oscillator = _block(data, "oscillator", ("mass", "omega", "hbar"))
        osc = OscillatorParams(**{key: float(value) for key, value in oscillator.items()})
        model, model_effective = _parse_model(data)
        state, state_effective = _parse_state(data)

        time = _block(data, "time", ("t_final", "samples", "dt", "times"))
        times = time.get("times")
        time_block = TimeBlock(
            t_final=None if time.get("t_final") is None else float(time["t_final"]),
            samples=int(time.get("samples", 1)),
            dt=None if time.get("dt") is None else float(time["dt"]),
            times=None if times is None else tuple(float(t) for t in times),
        )
        if time_block.samples < 1:
            raise ConfigError(f"time.samples must be >= 1, got {time_block.samples}.")
        if time_block.times is not None or time_block.t_final is not None:
            if any(t < 0 for t in time_block.values()):
                raise ConfigError("time: times must be >= 0.")

        sieve = SieveGrid(
            **_block(data, "sieve", ("s_max", "n_s", "n_theta", "refinement_tol", "refinement_max_iter"))
        )
        truncation_block = _block(data, "truncation", ("N", "tail_tol"))
        truncation = FockTruncation(
            int(truncation_block.get("N", 60)), float(truncation_block.get("tail_tol", 1e-8))
        )
        quadrature = QuadratureSpec(
            **_block(data, "quadrature", ("tau_nodes_per_period", "k_nodes", "rel_tol", "max_refinements"))
        )
        epsilons = tuple(float(e) for e in _block(data, "consistency", ("epsilons",)).get("epsilons", ()))
        table = _block(data, "kernel_table", ("r_max", "n_r", "k_max", "n_k", "spectrum_out"))
        kernel_table = KernelTableBlock(
            r_max=_optional_float(table, "r_max"),
            n_r=int(table.get("n_r", 101)),
            k_max=_optional_float(table, "k_max"),
            n_k=int(table.get("n_k", DEFAULT_K_SAMPLES)),
            spectrum_out=None if table.get("spectrum_out") is None else pathlib.Path(table["spectrum_out"]),
        )
        output = None if data.get("output") is None else pathlib.Path(data["output"])
    except InvalidParameterError as e:
        raise ConfigError(str(e)) from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Malformed configuration value: {e}") from e

    effective = {
        "oscillator": {"mass": osc.mass, "omega": osc.omega, "hbar": osc.hbar},
        "model": model_effective,
        "state": state_effective,
        "time": {
            "t_final": time_block.t_final,
            "samples": time_block.samples,
            "dt": time_block.dt,
            "times": None if time_block.times is None else list(time_block.times),
        },
        "sieve": {
            "s_max": sieve.s_max,
            "n_s": sieve.n_s,
            "n_theta": sieve.n_theta,
            "refinement_tol": sieve.refinement_tol,
            "refinement_max_iter": sieve.refinement_max_iter,
        },
        "truncation": {"N": truncation.dim, "tail_tol": truncation.tail_tol},
        "quadrature": {
            "tau_nodes_per_period": quadrature.tau_nodes_per_period,
            "k_nodes": quadrature.k_nodes,
            "rel_tol": quadrature.rel_tol,
            "max_refinements": quadrature.max_refinements,
        },
        "consistency": {"epsilons": list(epsilons)},
        "kernel_table": {
            "r_max": kernel_table.r_max,
            "n_r": kernel_table.n_r,
            "k_max": kernel_table.k_max,
            "n_k": kernel_table.n_k,
            "spectrum_out": None if kernel_table.spectrum_out is None else str(kernel_table.spectrum_out),
        },
        "output": None if output is None else str(output),
    }
    return RunConfig(
        osc=osc,
        **model,
        **state,
        time=time_block,
        sieve=sieve,
        truncation=truncation,
        quadrature=quadrature,
        epsilons=epsilons,
        kernel_table=kernel_table,
        output=output,
        effective=effective,
    )


def load_config(path: "str | pathlib.Path") -> RunConfig:
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Configuration {path} is not valid JSON: {e}") from e
    config = parse_config(data)
    logger.debug(f"Loaded configuration {path} (sha256 {config.sha256})")
    return config
