"""Flat ``section.key = value`` run configuration.

Example::

    model.kind = phase_retrieval
    model.sigma = 0.1
    model.d = 150
    model.n = 3000
    algorithm.kind = am_pr
    init.scheme = directional
    init.alpha0 = 0.8
    run.T = 10
    run.trials = 50
    run.seed = 1
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .models import Algorithm, ModelKind


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _strs(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


@dataclass
class ModelSection:
    kind: str = "phase_retrieval"
    sigma: float = 0.0
    d: int = 100
    n: int = 2000
    truth: str = "basis"  # basis | random


@dataclass
class AlgorithmSection:
    kind: str = "am_pr"
    eta: float = 0.5


@dataclass
class InitSection:
    scheme: str = "directional"  # directional | random_sphere | norm_matched | truth
    alpha0: float = 0.2
    scale: float = 1.0
    shared: bool = True


@dataclass
class RunSection:
    T: int = 10
    trials: int = 1
    seed: int = 0


@dataclass
class PredictSection:
    gordon: bool = True
    population: bool = True
    oracle_samples: int = 10 ** 6


@dataclass
class OutputSection:
    directory: str = "out"
    formats: tuple = ("csv", "svg")


@dataclass
class OracleSection:
    states: int = 20
    samples: int = 10 ** 6
    sigmas: tuple = (0.0, 0.1, 0.5)
    kappa: float = 20.0
    eta: float = 0.5
    algorithms: tuple = tuple(a.value for a in Algorithm)
    explicit_states: tuple = ()  # "alpha:beta" entries; overrides random states
    quantities: str = "all"  # all | moments


@dataclass
class RateSection:
    start_alpha: float = 0.9
    start_beta: float = 0.1
    T: int = 40
    metric: str = "auto"  # auto | l2 | angle


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    algorithm: AlgorithmSection = field(default_factory=AlgorithmSection)
    init: InitSection = field(default_factory=InitSection)
    run: RunSection = field(default_factory=RunSection)
    predict: PredictSection = field(default_factory=PredictSection)
    output: OutputSection = field(default_factory=OutputSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    rate: RateSection = field(default_factory=RateSection)

    @property
    def kappa(self) -> float:
        return self.model.n / self.model.d

    def validate(self) -> "RunConfig":
        m, a, i, r = self.model, self.algorithm, self.init, self.run
        try:
            kind = ModelKind(m.kind)
            alg = Algorithm(a.kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if alg.model is not kind:
            raise ConfigError(f"algorithm {alg.value} does not belong to model {kind.value}")
        if m.d < 1 or m.n < 1:
            raise ConfigError("model.d and model.n must be positive")
        if not m.sigma >= 0:
            raise ConfigError("model.sigma must be nonnegative")
        if m.truth not in ("basis", "random"):
            raise ConfigError("model.truth must be basis or random")
        if alg.first_order and not a.eta > 0:
            raise ConfigError("algorithm.eta must be positive")
        if not alg.first_order and m.n <= m.d:
            raise ConfigError("higher-order updates need model.n > model.d")
        if i.scheme not in ("directional", "random_sphere", "norm_matched", "truth"):
            raise ConfigError(f"unknown init.scheme {i.scheme!r}")
        if not 0 <= i.alpha0 <= 1:
            raise ConfigError("init.alpha0 must lie in [0, 1]")
        if not i.scale > 0:
            raise ConfigError("init.scale must be positive")
        if r.T < 0 or r.trials < 1:
            raise ConfigError("run.T must be >= 0 and run.trials >= 1")
        if self.predict.oracle_samples < 10 ** 4 or self.oracle.samples < 10 ** 4:
            raise ConfigError("oracle sample counts must be at least 1e4")
        if self.rate.metric not in ("auto", "l2", "angle"):
            raise ConfigError("rate.metric must be auto, l2 or angle")
        if not self.oracle.kappa > 1:
            raise ConfigError("oracle.kappa must exceed 1")
        return self


_CONVERTERS = {int: lambda s: int(float(s)), float: float, str: str.strip, bool: _bool}


def _convert(section, name: str, text: str):
    current = getattr(section, name)
    if isinstance(current, tuple):
        if name in ("sigmas",):
            return _floats(text)
        return _strs(text)
    if isinstance(current, bool):
        return _bool(text)
    if isinstance(current, int) and name != "sigma":
        return _CONVERTERS[int](text)
    if isinstance(current, float):
        return float(text)
    return text.strip()


def apply(cfg: RunConfig, key: str, value: str) -> None:
    if "." not in key:
        raise ConfigError(f"key {key!r} has no section prefix")
    sec_name, name = key.split(".", 1)
    section = getattr(cfg, sec_name, None)
    if section is None or sec_name not in {f.name for f in fields(RunConfig)}:
        raise ConfigError(f"unknown section {sec_name!r}")
    if name not in {f.name for f in fields(section)}:
        raise ConfigError(f"unknown key {key!r}")
    try:
        setattr(section, name, _convert(section, name, value))
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        apply(cfg, key, value)
    return cfg.validate()


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for sec in fields(RunConfig):
        section = getattr(cfg, sec.name)
        for f in fields(section):
            v = getattr(section, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float) and math.isfinite(v):
                v = repr(v)
            lines.append(f"{sec.name}.{f.name} = {v}")
    return "\n".join(lines) + "\n"
