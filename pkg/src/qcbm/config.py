"""Run configuration files (YAML) with strict key checking."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .ansatz import CircuitSpec
from .datagen import SurrogateConfig
from .lcd import LcdConfig
from .simulator import ConfigurationError, NoiseConfig
from .training import TrainingConfig


@dataclass(frozen=True)
class DataConfig:
    source: str = "surrogate"
    path: Optional[str] = None
    features: Optional[list] = None

    def __post_init__(self):
        if self.source not in ("surrogate", "csv"):
            raise ConfigurationError(f"data.source must be 'surrogate' or 'csv', got {self.source!r}")


@dataclass(frozen=True)
class BinningConfig:
    qubits_per_feature: list = field(default_factory=lambda: [4, 4])
    edge_mode: str = "equal-width"

    def __post_init__(self):
        if self.edge_mode not in ("equal-width", "quantile"):
            raise ConfigurationError(f"binning.edge_mode must be 'equal-width' or 'quantile', got {self.edge_mode!r}")
        if any(int(q) < 1 for q in self.qubits_per_feature):
            raise ConfigurationError("binning.qubits_per_feature entries must be >= 1")


@dataclass(frozen=True)
class EvalConfig:
    n_shots: Optional[int] = 8192
    repetitions: int = 100
    sample_shots: int = 100_000
    fractions: list = field(default_factory=lambda: [0.01, 0.1, 1.0])
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 2:
            raise ConfigurationError(f"eval.repetitions must be >= 2, got {self.repetitions}")
        if self.sample_shots < 2:
            raise ConfigurationError(f"eval.sample_shots must be >= 2, got {self.sample_shots}")
        if any(not 0 < f <= 1 for f in self.fractions):
            raise ConfigurationError("eval.fractions must lie in (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    datagen: SurrogateConfig = field(default_factory=SurrogateConfig)
    binning: BinningConfig = field(default_factory=BinningConfig)
    circuit: CircuitSpec = field(default_factory=lambda: CircuitSpec("tree", 8, 12))
    training: TrainingConfig = field(default_factory=TrainingConfig)
    lcd: LcdConfig = field(default_factory=LcdConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        total = sum(int(q) for q in self.binning.qubits_per_feature)
        if total != self.circuit.num_qubits:
            raise ConfigurationError(
                f"binning.qubits_per_feature sums to {total} but circuit.num_qubits is "
                f"{self.circuit.num_qubits}"
            )

    def to_dict(self) -> dict:
        return {
            "data": dataclasses.asdict(self.data),
            "datagen": self.datagen.to_dict(),
            "binning": dataclasses.asdict(self.binning),
            "circuit": self.circuit.to_dict(),
            "training": self.training.to_dict(),
            "lcd": self.lcd.to_dict(),
            "eval": dataclasses.asdict(self.eval),
        }

    def with_overrides(self, **sections) -> "RunConfig":
        """Replace fields inside sections, e.g. ``with_overrides(training={"seed": 3})``."""
        updated = {name: dataclasses.replace(getattr(self, name), **values) for name, values in sections.items()}
        return dataclasses.replace(self, **updated)


_SECTIONS = {
    "data": DataConfig,
    "datagen": SurrogateConfig,
    "binning": BinningConfig,
    "circuit": CircuitSpec,
    "training": TrainingConfig,
    "lcd": LcdConfig,
    "eval": EvalConfig,
}

_LCD_NOISE_KEYS = {f.name for f in dataclasses.fields(NoiseConfig)}


def _build(section: str, cls, values) -> object:
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigurationError(f"section [{section}] must be a mapping")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    if section == "lcd" and isinstance(values.get("noise"), dict):
        bad = sorted(set(values["noise"]) - _LCD_NOISE_KEYS)
        if bad:
            raise ConfigurationError(f"unknown key(s) in [lcd.noise]: {', '.join(bad)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigurationError(f"section [{section}]: {exc}") from None


def config_from_dict(raw: dict) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must contain a mapping of sections")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigurationError(f"unknown section(s): {', '.join(unknown)}")
    sections = {name: _build(name, cls, raw[name]) for name, cls in _SECTIONS.items() if name in raw}
    return RunConfig(**sections)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML ({exc})") from None
    return config_from_dict(raw)
