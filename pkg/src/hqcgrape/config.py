"""Run configuration: YAML schema, the ``paper-2q`` preset, and lossless round-tripping."""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .encoding import EncodingHamiltonian, control_specs
from .noise import NoiseModel, RelaxationParams
from .optimizer import MODES, OptimizerConfig
from .sensor import SensorConfig


class ConfigError(ValueError):
    """Bad configuration; the message names the offending field or line."""


PRESETS: dict[str, dict] = {
    "paper-2q": {
        "system": {
            "n_qubits": 2,
            "omega": 2 * math.pi * 50.0,
            "coupling_j": 214.5,
            "T": 9e-3,
            "M": 6,
            "control_axes": ["x", "y"],
        },
        "optimizer": {
            "max_iterations": 10,
            "lambda0": 5000.0,
            "backtrack_factor": 0.5,
            "max_backtracks": 20,
            "grad_norm_stop": 0.0,
            "restarts": 10,
            "init_amplitude_bound": 2 * math.pi * 50.0,
            "amplitude_bound": 2 * math.pi * 250.0,
            "lambda_policy": "carry",
        },
        "noise": {
            "relaxation": {"t1": [18.5, 9.9], "t2": [0.3, 3.3], "gad_p": 0.5},
            "pulse_fluctuation": 0.05,
            "initial_state_fidelity": 0.9986,
            "readout_sigma": 1e-4,
        },
        "modes": list(MODES),
        "repeats": 5,
        "seed": 0,
        "out": "runs/paper-2q",
    }
}

_SYSTEM_KEYS = {"n_qubits", "omega", "coupling_j", "T", "M", "control_axes"}
_OPT_KEYS = {f for f in OptimizerConfig.__dataclass_fields__ if f != "seed"}
_NOISE_KEYS = {"relaxation", "pulse_fluctuation", "initial_state_fidelity", "readout_sigma"}
_RELAX_KEYS = {"t1", "t2", "gad_p"}
_TOP_KEYS = {"preset", "system", "optimizer", "noise", "modes", "repeats", "seed", "out"}


@dataclass
class SystemConfig:
    n_qubits: int
    omega: float
    coupling_j: float
    T: float
    M: int
    control_axes: list[str]


@dataclass
class RunConfig:
    system: SystemConfig
    optimizer: dict
    noise: dict
    modes: list[str] = field(default_factory=lambda: list(MODES))
    repeats: int = 5
    seed: int = 0
    out: str = "runs/out"

    def to_dict(self) -> dict:
        return {
            "system": asdict(self.system),
            "optimizer": dict(self.optimizer),
            "noise": copy.deepcopy(self.noise),
            "modes": list(self.modes),
            "repeats": self.repeats,
            "seed": self.seed,
            "out": self.out,
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(seed=self.seed, **self.optimizer)

    def noise_model(self) -> NoiseModel:
        n = dict(self.noise)
        relax = n.pop("relaxation", None)
        return NoiseModel(relaxation=RelaxationParams(**relax) if relax else None, **n)

    def sensor_config(self, noise: NoiseModel | None = None) -> SensorConfig:
        s = self.system
        H = EncodingHamiltonian.spin_chain(s.n_qubits, s.omega, s.coupling_j)
        return SensorConfig(
            hamiltonian=H,
            control_specs=control_specs(s.n_qubits, tuple(s.control_axes)),
            noise=self.noise_model() if noise is None else noise,
            T=s.T,
            M=s.M,
        )


def _check_keys(d, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _number(section: str, key: str, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    if kind is int and (not float(value).is_integer()):
        raise ConfigError(f"{section}.{key}: expected an integer, got {value!r}")
    return kind(value)


def from_dict(raw: dict) -> RunConfig:
    """Validate a raw mapping (after optional preset expansion) into a :class:`RunConfig`."""
    _check_keys(raw, _TOP_KEYS, "config")
    raw = dict(raw)
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r} (known: {', '.join(PRESETS)})")
        raw = _merge(PRESETS[preset], raw)

    for section in ("system", "optimizer", "noise"):
        if section not in raw:
            raise ConfigError(f"{section}: missing required section")
    sysd = raw["system"]
    _check_keys(sysd, _SYSTEM_KEYS, "system")
    missing = sorted(_SYSTEM_KEYS - set(sysd))
    if missing:
        raise ConfigError(f"system.{missing[0]}: missing required field")
    axes = sysd["control_axes"]
    if not isinstance(axes, list) or not axes or any(a not in ("x", "y", "z") for a in axes):
        raise ConfigError("system.control_axes: expected a non-empty list drawn from x, y, z")
    system = SystemConfig(
        n_qubits=_number("system", "n_qubits", sysd["n_qubits"], int),
        omega=_number("system", "omega", sysd["omega"]),
        coupling_j=_number("system", "coupling_j", sysd["coupling_j"]),
        T=_number("system", "T", sysd["T"]),
        M=_number("system", "M", sysd["M"], int),
        control_axes=list(axes),
    )
    if system.n_qubits < 1 or system.M < 1 or system.T < 0:
        raise ConfigError("system: need n_qubits >= 1, M >= 1, T >= 0")

    opt = raw["optimizer"]
    _check_keys(opt, _OPT_KEYS, "optimizer")
    opt = {k: (v if k == "lambda_policy" else _number("optimizer", k, v, type(getattr(OptimizerConfig, k))))
           for k, v in opt.items()}

    noise = raw["noise"] or {}
    _check_keys(noise, _NOISE_KEYS, "noise")
    noise = copy.deepcopy(noise)
    if noise.get("relaxation") is not None:
        _check_keys(noise["relaxation"], _RELAX_KEYS, "noise.relaxation")
        rel = noise["relaxation"]
        for k in ("t1", "t2"):
            if k not in rel:
                raise ConfigError(f"noise.relaxation.{k}: missing required field")
            rel[k] = [_number("noise.relaxation", k, x) for x in rel[k]]
            if len(rel[k]) != system.n_qubits:
                raise ConfigError(f"noise.relaxation.{k}: need one value per qubit ({system.n_qubits})")
        rel["gad_p"] = _number("noise.relaxation", "gad_p", rel.get("gad_p", 0.5))
    for k in ("pulse_fluctuation", "initial_state_fidelity", "readout_sigma"):
        if noise.get(k) is not None:
            noise[k] = _number("noise", k, noise[k])

    modes = raw.get("modes", list(MODES))
    if isinstance(modes, str):
        modes = [modes]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConfigError(f"modes: unknown mode(s) {', '.join(bad)}")

    cfg = RunConfig(
        system=system,
        optimizer=opt,
        noise=noise,
        modes=list(modes),
        repeats=_number("config", "repeats", raw.get("repeats", 5), int),
        seed=_number("config", "seed", raw.get("seed", 0), int),
        out=str(raw.get("out", "runs/out")),
    )
    try:
        cfg.optimizer_config()
        cfg.noise_model()
        cfg.sensor_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value: {exc}") from exc
    return cfg


def load(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from exc
    return from_dict(raw or {})


def preset(name: str = "paper-2q") -> RunConfig:
    return from_dict({"preset": name})
