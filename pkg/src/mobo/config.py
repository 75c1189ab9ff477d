"""
Experiment configuration: typed settings, INI loading with overrides, and the
canonical snapshot whose hash tags every artifact.
"""

import configparser
import hashlib
import io
import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from .errors import ConfigError, InputError
from .gp import (
    DEFAULT_NOISE_VARIANCE,
    FIT_RESTARTS,
    JITTER_SCHEDULE,
    LENGTHSCALE_BOUNDS,
    LENGTHSCALE_START_RANGE,
    SIGNAL_VARIANCE_BOUNDS,
    SIGNAL_VARIANCE_START_RANGE,
    FitOptions,
    KernelFamily,
)
from .problems import DEFAULT_EXTERNAL_TIMEOUT

logger = logging.getLogger(__name__)

WORKFLOWS = ("optim1", "optim2", "optim3")
BO_WORKFLOWS = ("optim2", "optim3")
HASH_LENGTH = 12
OUT_DIR_ENV = "MOBO_OUT_DIR"
DEFAULT_OUT_DIR = "mobo_runs"


@dataclass(frozen=True)
class GPSettings:
    kernels: Tuple[str, str, str] = ("matern52", "exponential", "matern52")
    noise_variance: float = DEFAULT_NOISE_VARIANCE
    fit_restarts: int = FIT_RESTARTS
    fit_max_evaluations: int = 0
    lengthscale_start_range: Tuple[float, float] = LENGTHSCALE_START_RANGE
    signal_variance_start_range: Tuple[float, float] = SIGNAL_VARIANCE_START_RANGE
    lengthscale_bounds: Tuple[float, float] = LENGTHSCALE_BOUNDS
    signal_variance_bounds: Tuple[float, float] = SIGNAL_VARIANCE_BOUNDS
    jitter_schedule: Tuple[float, ...] = JITTER_SCHEDULE

    def fit_options(self) -> FitOptions:
        return FitOptions(
            lengthscale_start_range=tuple(self.lengthscale_start_range),
            signal_variance_start_range=tuple(self.signal_variance_start_range),
            lengthscale_bounds=tuple(self.lengthscale_bounds),
            signal_variance_bounds=tuple(self.signal_variance_bounds),
            jitter_schedule=tuple(self.jitter_schedule),
        )


@dataclass(frozen=True)
class DoeSettings:
    proposals_per_dimension: int = 10_000


@dataclass(frozen=True)
class AcquisitionSettings:
    mc_samples: int = 4096
    final_mc_samples: int = 65536
    restarts: int = 32
    raw_samples: int = 512
    tau_scale: float = 1e-3
    alpha: float = 0.05


@dataclass(frozen=True)
class MoeaSettings:
    pop_size: int = 100
    generations: int = 200
    crossover_eta: float = 15.0
    crossover_prob: float = 0.9
    mutation_eta: float = 20.0
    mutation_prob: float = 0.0
    verification_points: int = 10


@dataclass(frozen=True)
class ReferenceSettings:
    margin: float = 0.1


@dataclass(frozen=True)
class ExternalSettings:
    command: str = ""
    dimension: int = 0
    timeout: float = DEFAULT_EXTERNAL_TIMEOUT


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One fully resolved experiment.

    `total_budget` 0 means "derive it": doe + iterations * q for the BO
    workflows, doe for optim1.
    """

    problem: str = "synrel-toy"
    workflow: str = "optim3"
    initial_doe_size: int = 250
    iterations: int = 50
    batch_size: int = 4
    total_budget: int = 0
    seed: int = 0
    workers: int = 4
    gp: GPSettings = field(default_factory=GPSettings)
    doe: DoeSettings = field(default_factory=DoeSettings)
    acquisition: AcquisitionSettings = field(default_factory=AcquisitionSettings)
    moea: MoeaSettings = field(default_factory=MoeaSettings)
    reference: ReferenceSettings = field(default_factory=ReferenceSettings)
    external: ExternalSettings = field(default_factory=ExternalSettings)

    @property
    def is_bo(self) -> bool:
        return self.workflow in BO_WORKFLOWS

    @property
    def budget(self) -> int:
        """Number of true evaluations the workflow spends (verification excluded)."""
        if self.total_budget:
            return self.total_budget
        if self.is_bo:
            return self.initial_doe_size + self.iterations * self.batch_size
        return self.initial_doe_size

    @property
    def problem_label(self) -> str:
        return "external" if self.external.command else self.problem

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError unless the settings describe a runnable experiment."""
        if self.workflow not in WORKFLOWS:
            raise ConfigError(f"workflow must be one of {WORKFLOWS}, got '{self.workflow}'")
        if self.initial_doe_size < 2:
            raise ConfigError(f"initial_doe_size must be >= 2, got {self.initial_doe_size}")
        if self.iterations < 0 or self.batch_size < 1:
            raise ConfigError("iterations must be >= 0 and batch_size >= 1")
        if self.is_bo:
            expected = self.initial_doe_size + self.iterations * self.batch_size
            if self.budget != expected:
                raise ConfigError(
                    f"{self.workflow}: doe {self.initial_doe_size} + {self.iterations} x "
                    f"{self.batch_size} = {expected} does not match total_budget {self.budget}"
                )
        elif self.budget != self.initial_doe_size:
            raise ConfigError(
                f"optim1: initial_doe_size {self.initial_doe_size} must equal "
                f"total_budget {self.budget}"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        for family in self.gp.kernels:
            try:
                KernelFamily(family)
            except ValueError:
                raise ConfigError(f"unknown kernel family '{family}'")
        if len(self.gp.kernels) != 3:
            raise ConfigError("gp.kernels needs three families (f1, f2, g)")
        for name in (
            "lengthscale_start_range",
            "signal_variance_start_range",
            "lengthscale_bounds",
            "signal_variance_bounds",
        ):
            if len(getattr(self.gp, name)) != 2:
                raise ConfigError(f"gp.{name} needs two values (low, high)")
        try:
            self.gp.fit_options()
        except InputError as e:
            raise ConfigError(f"gp: {e}")
        acquisition = self.acquisition
        if min(acquisition.mc_samples, acquisition.final_mc_samples, acquisition.restarts) < 1:
            raise ConfigError("acquisition sample counts and restarts must be >= 1")
        if acquisition.tau_scale <= 0 or acquisition.alpha <= 0:
            raise ConfigError("acquisition tau_scale and alpha must be positive")
        if self.moea.pop_size < 2 or self.moea.generations < 0:
            raise ConfigError("moea pop_size must be >= 2 and generations >= 0")
        if self.moea.verification_points < 0:
            raise ConfigError("moea verification_points must be >= 0")
        if self.reference.margin < 0:
            raise ConfigError("reference margin must be >= 0")
        if self.external.command and self.external.dimension < 1:
            raise ConfigError("an external command needs external.dimension >= 1")
        return self


_SECTIONS = {
    "gp": GPSettings,
    "doe": DoeSettings,
    "acquisition": AcquisitionSettings,
    "moea": MoeaSettings,
    "reference": ReferenceSettings,
    "external": ExternalSettings,
}


def _coerce(raw: str, default: Any, key: str) -> Any:
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = tuple(part.strip() for part in raw.split(",") if part.strip())
            if default and isinstance(default[0], float):
                return tuple(float(part) for part in parts)
            return parts
    except ValueError:
        raise ConfigError(f"invalid value for '{key}': {raw!r}")
    return raw.strip()


def _apply(settings: Any, values: Mapping[str, str], section: str) -> Any:
    known = {f.name: getattr(settings, f.name) for f in fields(settings)}
    changes = {}
    for key, raw in values.items():
        if key not in known or key in _SECTIONS:
            raise ConfigError(f"unknown key '{key}' in section [{section}]")
        changes[key] = _coerce(raw, known[key], f"{section}.{key}")
    return replace(settings, **changes)


def _from_parser(parser: configparser.ConfigParser, source: str) -> ExperimentConfig:
    config = ExperimentConfig()
    for section in parser.sections():
        values = dict(parser.items(section))
        if section == "experiment":
            config = _apply(config, values, section)
        elif section in _SECTIONS:
            nested = _apply(getattr(config, section), values, section)
            config = replace(config, **{section: nested})
        else:
            raise ConfigError(f"unknown section [{section}] in {source}")
    return config


def load_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> ExperimentConfig:
    """
    Resolve an ExperimentConfig from defaults, an INI file and overrides.

    Args:
        path: INI file with [experiment] and per-module sections; None uses defaults
        overrides: Dotted keys ("seed", "acquisition.mc_samples") applied last;
            None values are skipped

    Returns:
        The validated configuration
    """
    config = ExperimentConfig()
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"could not parse {path}: {e}")
        config = _from_parser(parser, path)
        logger.info(f"Loaded configuration from {path}")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.rpartition(".")
        try:
            if section:
                nested = replace(getattr(config, section), **{name: value})
                config = replace(config, **{section: nested})
            else:
                config = replace(config, **{name: value})
        except (AttributeError, TypeError):
            raise ConfigError(f"unknown configuration key '{key}'")
    return config.validate()


def config_from_ini(text: str) -> ExperimentConfig:
    """Parse a snapshot written by `config_to_ini`."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"could not parse configuration snapshot: {e}")
    return _from_parser(parser, "snapshot").validate()


def output_root() -> str:
    """Default output root: $MOBO_OUT_DIR, else ./mobo_runs."""
    return os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR


def run_name(config: ExperimentConfig) -> str:
    return f"{config.problem_label}_{config.workflow}_seed{config.seed}"


def _render(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def config_to_ini(config: ExperimentConfig) -> str:
    """Canonical INI rendering: fixed section and key order, resolved budget."""
    parser = configparser.ConfigParser(interpolation=None)
    experiment: Dict[str, str] = {}
    for f in fields(config):
        if f.name in _SECTIONS:
            continue
        value = config.budget if f.name == "total_budget" else getattr(config, f.name)
        experiment[f.name] = _render(value)
    parser["experiment"] = experiment
    for section in _SECTIONS:
        settings = getattr(config, section)
        parser[section] = {f.name: _render(getattr(settings, f.name)) for f in fields(settings)}
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config_to_ini(config).encode("utf-8")).hexdigest()[:HASH_LENGTH]
