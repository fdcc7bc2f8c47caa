"""Experiment configuration: one JSON document for every CLI command.

Sections mirror the owning modules (``device``, ``dac``, ``rb``, ...).
Unknown keys are rejected at every level; physical values are validated by
the module types themselves.  ``--set section.key=value`` overrides are
applied to the raw document before validation.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from .dds import DacConfig, DistortionModel
from .device import DeviceModel
from .noise import DEFAULT_BAND_HZ, SYNTHETIC_SOURCES
from .rb.campaign import RbConfig
from .rb.sweep import PARAMETERS

OUTPUT_DIR_ENV = "DDSQUBIT_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration document or override."""


def _check_keys(section: str, data: dict, cls) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a JSON object")
    unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")


@dataclass(frozen=True)
class TuneUpSettings:
    """Gate slot and tune-up tolerances; ``calibration`` skips tune-up when given."""

    gate_length: float = 29e-9
    buffer: float = 5e-9
    tol: float = 1e-4
    max_iter: int = 20
    initial_error: float = 0.0
    calibration: Optional[Dict[str, Any]] = None


@dataclass(frozen=True)
class SweepSettings:
    parameter: str = "gate_length"
    values: Tuple[float, ...] = (20e-9, 29e-9, 40e-9, 60e-9, 80e-9)

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise ConfigError(f"sweep.parameter must be one of {PARAMETERS}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ConfigError("sweep.values is empty")


@dataclass(frozen=True)
class DistortionSettings:
    """Channel droop and the amplitude readout used by the distortion study."""

    tau: float = 31e-6
    d_sat: float = 0.2
    background_offset: float = 2e9
    readout_s0: float = 0.4
    readout_s1: float = 1.0
    lengths: Tuple[int, ...] = (2, 16, 64, 256, 512, 1024, 2048, 3000, 4000)

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(m) for m in self.lengths))
        if not self.background_offset > 0:
            raise ConfigError("distortion.background_offset must be positive")
        self.model()

    def model(self) -> DistortionModel:
        return DistortionModel(tau=self.tau, d_sat=self.d_sat)


@dataclass(frozen=True)
class NoiseSettings:
    """Phase-noise sources (synthetic names or CSV paths) and the analysis grid."""

    sources: Tuple[str, ...] = ("dds-like", "generator-like")
    band_hz: Tuple[float, float] = DEFAULT_BAND_HZ
    extrapolate_to_hz: float = 1.0
    gate_lengths: Tuple[float, ...] = (10e-9, 20e-9, 30e-9, 50e-9, 100e-9, 200e-9, 500e-9, 1e-6)
    points_per_decade: int = 200

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "band_hz", tuple(float(v) for v in self.band_hz))
        object.__setattr__(self, "gate_lengths", tuple(float(v) for v in self.gate_lengths))
        if len(self.band_hz) != 2 or not 0 < self.band_hz[0] < self.band_hz[1]:
            raise ConfigError("noise.band_hz must be [low, high] with 0 < low < high")
        for s in self.sources:
            if s not in SYNTHETIC_SOURCES and not s.endswith(".csv"):
                raise ConfigError(f"noise source {s!r} is neither a synthetic model "
                                  f"{sorted(SYNTHETIC_SOURCES)} nor a .csv path")


_SECTIONS = {"device": DeviceModel, "dac": DacConfig, "rb": RbConfig, "tuneup": TuneUpSettings,
             "sweep": SweepSettings, "distortion": DistortionSettings, "noise": NoiseSettings}


@dataclass(frozen=True)
class ExperimentConfig:
    device: DeviceModel = field(default_factory=DeviceModel)
    dac: DacConfig = field(default_factory=DacConfig)
    rb: RbConfig = field(default_factory=RbConfig)
    tuneup: TuneUpSettings = field(default_factory=TuneUpSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    distortion: DistortionSettings = field(default_factory=DistortionSettings)
    noise: NoiseSettings = field(default_factory=NoiseSettings)
    master_seed: int = 0
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _check_keys("<root>", data, cls)
        kwargs: Dict[str, Any] = {}
        for name, value in data.items():
            if name in _SECTIONS:
                sec = _SECTIONS[name]
                _check_keys(name, value, sec)
                try:
                    kwargs[name] = sec.from_dict(value) if name == "device" else sec(**value)
                except ConfigError:
                    raise
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{name}: {exc}") from exc
            else:
                kwargs[name] = value
        if "master_seed" in kwargs:
            kwargs["master_seed"] = int(kwargs["master_seed"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                d = asdict(v)
                d.pop("nonstandard_rate", None)
                out[f.name] = _plain(d)
            else:
                out[f.name] = v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON, excluding the output directory."""
        d = self.to_dict()
        d.pop("output_dir", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def resolve_output_dir(self, override: Optional[str] = None) -> Path:
        raw = override or self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "ddsqubit-out"
        return Path(raw)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def parse_override(item: str) -> Tuple[List[str], Any]:
    """``a.b=value`` -> (["a", "b"], value); the value is JSON when it parses."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    data = json.loads(json.dumps(data))
    for item in overrides:
        path, value = parse_override(item)
        node = data
        for p in path[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r}: {p!r} is not a section")
        node[path[-1]] = value
    return data


def load_config(path: Union[str, Path, None] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Read a JSON config (or start from defaults) and apply ``--set`` overrides."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(apply_overrides(data, overrides))
