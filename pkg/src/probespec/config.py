"""Experiment configuration: TOML files validated against a strict schema.

Unknown keys are rejected.  ``resolved`` fills every default so that the
manifest can echo the exact parameters a run used.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import tomli
from pydantic import BaseModel, ConfigDict, Field, model_validator

TASKS = ("spectrum", "sweep", "reconstruct", "correlations", "bloch", "lindblad", "validate")


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelBlock(Strict):
    type: Literal["kitaev", "bose-hubbard"] = "kitaev"
    sites: int = Field(51, ge=2)
    hopping: float = Field(5.0, gt=0)
    pairing: float = Field(1.0, ge=0)
    range_exponent: float = Field(0.3, ge=0)
    interaction: float = Field(0.1, ge=0)
    condensate_filling: float = Field(1.0, gt=0)
    lattice_constant: float = Field(1.0, gt=0)
    beta: float = Field(0.5, gt=0)


class ProbeBlock(Strict):
    coupling: float = Field(1e-6, gt=0)
    time: Union[float, Literal["auto"]] = "auto"
    time_factor: float = Field(1.05, gt=0)
    window_convention: Literal["grid", "phonon"] = "grid"
    nu_min: Union[float, Literal["auto"]] = "auto"
    nu_max: Union[float, Literal["auto"]] = "auto"
    nu_step: Union[float, Literal["auto"]] = "auto"
    positions: list[Literal["I", "II", "III"]] = ["I", "II"]
    form: Literal["kitaev", "bond"] = "kitaev"
    elastic: Literal["sinc2", "literal"] = "sinc2"
    elastic_overlap: float = 0.0
    probe_width: float = Field(0.3, gt=0)       # oscillator length, units of a
    wannier_width: float = Field(0.3, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if isinstance(self.time, float) and self.time <= 0:
            raise ValueError("probe.time must be positive")
        if isinstance(self.nu_step, float) and self.nu_step <= 0:
            raise ValueError("probe.nu_step must be positive")
        return self


class ReconstructBlock(Strict):
    threshold: float = Field(1e-6, gt=0, lt=1)
    detection: Literal["clean", "quadratic"] = "clean"
    calibration: Literal["blind", "grid"] = "grid"
    tolerance: float = Field(0.05, ge=0)


class NoiseBlock(Strict):
    epsilon: float = Field(0.0, ge=0)
    seeds: int = Field(1, ge=1)


class CorrelationsBlock(Strict):
    separations: Union[list[int], Literal["auto"]] = "auto"
    t_start: float = Field(0.01, ge=0)
    t_stop: float = Field(6.0, gt=0)
    t_count: int = Field(300, ge=1)
    nu: Union[float, Literal["auto"]] = 0.0
    coupling: float = Field(1e-3, gt=0)
    normalize: bool = True
    threshold: float = Field(0.1, gt=0, le=1)


class BlochBlock(Strict):
    samples_per_period: int = Field(64, ge=4)
    probe_width: float = Field(0.05, gt=0)
    bloch_width: float = Field(0.08, gt=0)
    regularization: float = Field(1e-6, gt=0)


class LindbladBlock(Strict):
    weight: float = Field(1.0, ge=0)
    occupation: float = Field(1.0, ge=0)
    statistics: Literal["bosonic", "fermionic"] = "bosonic"
    decay_times: float = Field(20.0, gt=0)
    samples: int = Field(201, ge=10)


class OutputBlock(Strict):
    directory: Optional[str] = None
    formats: list[Literal["csv", "json", "svg"]] = ["csv", "json"]
    plot: Literal["auto", "line", "heatmap"] = "auto"


class ExperimentConfig(Strict):
    task: Literal[TASKS] = "spectrum"  # type: ignore[valid-type]
    seed: int = 0
    model: ModelBlock = ModelBlock()
    probe: ProbeBlock = ProbeBlock()
    reconstruct: ReconstructBlock = ReconstructBlock()
    noise: NoiseBlock = NoiseBlock()
    correlations: CorrelationsBlock = CorrelationsBlock()
    bloch: BlochBlock = BlochBlock()
    lindblad: LindbladBlock = LindbladBlock()
    output: OutputBlock = OutputBlock()

    @model_validator(mode="after")
    def _cross(self):
        if self.model.type == "kitaev" and self.model.sites % 2 == 0:
            raise ValueError("kitaev ring needs an odd number of sites")
        if self.lindblad.statistics == "fermionic" and self.lindblad.occupation > 1:
            raise ValueError("fermionic occupation must lie in [0, 1]")
        return self


def load(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    return ExperimentConfig.model_validate(data)


def parse(text: str) -> ExperimentConfig:
    return ExperimentConfig.model_validate(tomli.loads(text))


def resolved(cfg: ExperimentConfig) -> dict:
    return json.loads(cfg.model_dump_json())


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(resolved(cfg), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


PRESET_DIR = Path(__file__).with_name("presets")


def preset(name: str) -> ExperimentConfig:
    path = PRESET_DIR / f"{name}.toml"
    if not path.exists():
        raise FileNotFoundError(f"no preset {name!r}; available: {sorted(p.stem for p in PRESET_DIR.glob('*.toml'))}")
    return load(path)
