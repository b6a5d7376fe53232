"""TOML experiment configuration.

Every section is optional; a missing section takes the defaults below.
Unknown sections or keys are rejected.  ``dumps`` omits unset optional
values, so ``loads(dumps(cfg)) == cfg``.
"""

import dataclasses
import math
import typing
from dataclasses import dataclass
from typing import Optional

import tomli
import tomli_w

from .validation import ConfigError


@dataclass(frozen=True)
class ModelSection:
    name: str = "h5"  # h5 | tfi | xzy | random
    nq: int = 5
    g: float = 0.5
    r: float = 0.5
    dim: int = 5  # random model only
    seed: int = 0  # random model only


@dataclass(frozen=True)
class StateSection:
    kind: str = "default"  # default | basis | product | neel_x
    index: int = 0
    letters: str = ""


@dataclass(frozen=True)
class ScheduleSection:
    kind: str = "IV"  # I | II | III | IV
    dt: float = 1.0
    phi: float = 0.0
    phi_set: Optional[tuple] = None
    dt_list: Optional[tuple] = None
    repeats: Optional[tuple] = None
    ancilla_magnitude: float = 1 / math.sqrt(2)
    recycle: bool = True
    dt_jitter: float = 0.0


@dataclass(frozen=True)
class CriteriaSection:
    variance_threshold: float = 1e-10
    max_steps: int = 5000


@dataclass(frozen=True)
class NoiseSection:
    epsilon: float = 0.0
    period: int = 1
    first_strike: int = 1
    last_strike: Optional[int] = None
    method: str = "trajectory"  # trajectory | density
    stop_on_convergence: bool = False


@dataclass(frozen=True)
class BornSection:
    runs: int = 10_000


@dataclass(frozen=True)
class AnnealSection:
    model: str = "xzy"
    nq: int = 6
    r: float = 0.5
    dg: float = 0.05
    steps_per_g: int = 180
    initial: str = "ground_of_g0"
    propagator: str = "auto"
    replicas: int = 1


@dataclass(frozen=True)
class ImagtimeSection:
    r1: float = 1.0
    dt: float = 0.01
    trials: int = 10_000
    n_max: int = 100
    max_rounds: int = 200


@dataclass(frozen=True)
class SpectrumSection:
    retry_budget: Optional[int] = None


@dataclass(frozen=True)
class TrotterSection:
    formulas: tuple = ("strang2", "yoshida4", "paper4")
    nq: int = 6
    g: float = 0.5
    dts: tuple = (0.1, 0.05, 0.025, 0.0125)


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    workers: int = 1
    out: str = "out"
    plot: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSection = RunSection()
    model: Optional[ModelSection] = None
    state: Optional[StateSection] = None
    schedule: Optional[ScheduleSection] = None
    criteria: Optional[CriteriaSection] = None
    noise: Optional[NoiseSection] = None
    born: Optional[BornSection] = None
    anneal: Optional[AnnealSection] = None
    imagtime: Optional[ImagtimeSection] = None
    spectrum: Optional[SpectrumSection] = None
    trotter: Optional[TrotterSection] = None

    def section(self, name):
        """The named section, or its defaults when absent."""
        value = getattr(self, name)
        if value is None:
            return _section_types()[name]()
        return value

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _section_types():
    hints = typing.get_type_hints(ExperimentConfig)
    return {name: _unwrap(hint) for name, hint in hints.items()}


def _unwrap(hint):
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return args[0] if typing.get_origin(hint) is typing.Union else hint


def _coerce(section, key, value, hint):
    kind = _unwrap(hint)
    where = f"[{section}] {key}"
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if kind is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be an array")
        return tuple(value)
    raise ConfigError(f"{where}: unsupported type")


def _build_section(name, cls, table):
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    hints = typing.get_type_hints(cls)
    unknown = sorted(set(table) - set(hints))
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(unknown)}")
    kwargs = {k: _coerce(name, k, v, hints[k]) for k, v in table.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def from_dict(data):
    types = _section_types()
    unknown = sorted(set(data) - set(types))
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    return ExperimentConfig(**{name: _build_section(name, types[name], t) for name, t in data.items()})


def to_dict(cfg):
    out = {}
    for f in dataclasses.fields(cfg):
        section = getattr(cfg, f.name)
        if section is None:
            continue
        table = {}
        for sf in dataclasses.fields(section):
            v = getattr(section, sf.name)
            if v is not None:
                table[sf.name] = list(v) if isinstance(v, tuple) else v
        out[f.name] = table
    return out


def loads(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    return from_dict(data)


def load(path):
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def dumps(cfg):
    return tomli_w.dumps(to_dict(cfg))
