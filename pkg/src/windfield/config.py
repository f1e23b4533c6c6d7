"""Run configuration: a TOML file with nested sections plus flag overrides."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data_model import HEADING_CCW, METEO
from .errors import ConfigError


@dataclass(frozen=True)
class LossSection:
    lam: float = 0.01
    eta: float = 0.001
    gamma_s: float = 1.0


@dataclass(frozen=True)
class RffSection:
    K: int = 400
    B: int = 500
    sigma: float = 2.25
    gamma_exp: float = 1.4


@dataclass(frozen=True)
class FourierSection:
    M: int = 10


@dataclass(frozen=True)
class BaselineSection:
    idw_p: float = 2.0
    tree_count: int = 200
    # ensemble members and weights, e.g. ["kriging", "forest"] and [0.5, 0.5]
    ensemble_members: tuple = ("kriging", "forest")
    ensemble_weights: tuple = (0.5, 0.5)


@dataclass(frozen=True)
class EvaluationSection:
    folds: int = 5
    samples: int = 500
    hyper_samples: int = 100
    hyper_seed: int = 1
    exclude_months: tuple = ()
    models: tuple = ("rff",)


@dataclass(frozen=True)
class DomainSection:
    tau: tuple = (4e6, 4e6)


@dataclass(frozen=True)
class HypersearchSection:
    model: str = "rff"
    lam: tuple = (0.001, 0.01, 0.1)
    eta: tuple = (0.0, 0.001, 0.01)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    data: str | None = None
    out_dir: str = "."
    wind_convention: str = HEADING_CCW
    jobs: int = 0
    loss: LossSection = field(default_factory=LossSection)
    rff: RffSection = field(default_factory=RffSection)
    fourier: FourierSection = field(default_factory=FourierSection)
    baseline: BaselineSection = field(default_factory=BaselineSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    domain: DomainSection = field(default_factory=DomainSection)
    hypersearch: HypersearchSection = field(default_factory=HypersearchSection)

    def validate(self):
        ev = self.evaluation
        if ev.folds < 2:
            raise ConfigError("evaluation.folds must be >= 2")
        if ev.samples < 1 or ev.hyper_samples < 1:
            raise ConfigError("sample counts must be >= 1")
        if self.wind_convention not in (HEADING_CCW, METEO):
            raise ConfigError(f"unknown wind convention {self.wind_convention!r}")
        if self.jobs < 0:
            raise ConfigError("jobs must be >= 0")
        if len(self.domain.tau) != 2 or min(self.domain.tau) <= 0:
            raise ConfigError("domain.tau must be two positive lengths")
        if self.loss.lam < 0 or self.loss.eta < 0 or self.loss.gamma_s < 0:
            raise ConfigError("loss weights must be >= 0")
        for m in ev.exclude_months:
            if len(m) != 7 or m[4] != "-":
                raise ConfigError(f"exclude_months entries look like 2018-09, got {m!r}")
        return self

    @property
    def worker_count(self):
        return self.jobs or os.cpu_count() or 1

    def to_dict(self):
        return asdict(self)



def _coerce(value, default, key):
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        return tuple(value)
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int) and not isinstance(value, bool) and isinstance(value, (int, float)):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    if isinstance(default, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if default is None or isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    raise ConfigError(f"bad value for {key}: {value!r}")


def _build(cls, data, prefix):
    known = {f.name: f for f in fields(cls)}
    base = cls()
    kw = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {prefix}{key}")
        cur = getattr(base, key)
        if hasattr(cur, "__dataclass_fields__"):
            if not isinstance(value, dict):
                raise ConfigError(f"[{prefix}{key}] must be a section")
            kw[key] = _build(type(cur), value, f"{prefix}{key}.")
        else:
            kw[key] = _coerce(value, cur, prefix + key)
    return replace(base, **kw)


def config_from_dict(data):
    return _build(RunConfig, data, "").validate()


def load_config(path=None, overrides=None):
    """Read ``path`` (TOML) if given, then apply non-None ``overrides``."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid config {path}: {exc}") from None
    cfg = _build(RunConfig, data, "")
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()
