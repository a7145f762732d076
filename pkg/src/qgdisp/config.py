"""Experiment configuration: pydantic models and the plain-text ``key = value`` format.

A config file is a list of assignments with dotted keys, optionally grouped
under ``[section]`` headers that prefix every key below them::

    experiment = converge
    [solver]
    n = 128
    [converge]
    sigma = 2.4
    A_ladder = 1, 10, 100

Values are parsed as Python literals when possible (numbers, booleans,
comma-separated lists); anything else is kept as a string.  The literal path
``default`` stands for the built-in defaults.
"""

from __future__ import annotations

import ast
import math
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError

__all__ = [
    "Experiment",
    "SolverSettings",
    "EnergySettings",
    "KernelSettings",
    "StrichartzSettings",
    "ConvergeSettings",
    "StabilitySettings",
    "AuditSettings",
    "OutputSettings",
    "ExperimentConfig",
    "parse_config_text",
    "build_config",
    "load_config",
    "config_reference",
]


class Experiment(str, Enum):
    energy = "energy"
    kernel = "kernel"
    strichartz = "strichartz"
    converge = "converge"
    stability = "stability"
    lp_audit = "lp_audit"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _increasing(values: list[float], what: str) -> list[float]:
    if len(values) < 1 or any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{what} must be strictly increasing")
    return values


class SolverSettings(_Section):
    n: int = Field(64, description="grid points per axis (power of two)")
    box_length: float = Field(8 * math.pi, description="side of the periodic box")
    nu: float = Field(1.0, description="dissipation coefficient")
    alpha: float = Field(0.5, description="dissipation order")
    dt: float | None = Field(None, description="time step; empty picks CFL 0.25 and dt <= 0.5/A")
    T: float | None = Field(None, description="horizon; empty means 2/nu")
    samples: int = Field(40, description="number of sampling intervals on [0, T]")
    dealias: bool = Field(True, description="2/3 truncation of products")
    hs_norm: float = Field(1.0, description="H^(2-alpha) norm of the default initial data")
    width: float = Field(1.0, description="width of the vortex-pair bumps")

    @model_validator(mode="after")
    def _needs_horizon(self) -> "SolverSettings":
        if self.T is None and self.nu <= 0:
            raise ValueError("solver.T must be given when nu = 0 (the default horizon is 2/nu)")
        return self

    def horizon(self) -> float:
        return self.T if self.T is not None else 2.0 / self.nu


class EnergySettings(_Section):
    members: int = Field(1, ge=1, description="number of seeds, starting at --seed")
    A: float = Field(0.0, ge=0, description="dispersive amplitude")
    tolerance: float = Field(1e-6, gt=0, lt=1, description="relative budget tolerance")
    sobolev: bool = Field(True, description="track the H^(2-alpha) norm")


class KernelSettings(_Section):
    t: float = Field(0.1, gt=0)
    r: float = Field(1.0, gt=0)
    R: float = Field(4.0, gt=0)
    mu_ladder: list[float] = Field([1e2, 1e3, 1e4, 1e5, 1e6], description="frequencies of the sup sweep")
    tolerance: float = Field(1e-6, description="kernel accuracy relative to the envelope mass")
    htilde_ladder: list[float] = Field([1e3, 1e4, 1e5, 1e6, 1e7], description="frequencies of the case-integral fits")

    @field_validator("mu_ladder", "htilde_ladder")
    @classmethod
    def _ladders(cls, v):
        return _increasing(v, "frequency ladder")


class StrichartzSettings(_Section):
    n: int = 256
    box_length: float = 32 * math.pi
    A_ladder: list[float] = [10.0, 1e2, 1e3, 1e4]
    T: float = 4.0
    p: float = 2.0
    q_values: list[float] = Field([math.inf, 2.0], description="space exponents; inf allowed")
    width: float = Field(1.0, description="width of the Gaussian packet before filtering")
    samples: int = 512
    r: float = 1.0
    R: float = 4.0

    @field_validator("A_ladder")
    @classmethod
    def _ladder(cls, v):
        return _increasing(v, "A_ladder")


class ConvergeSettings(_Section):
    n: int = 256
    box_length: float = 32 * math.pi
    sigma: float = 2.4
    A_ladder: list[float] = [1.0, 10.0, 100.0, 1000.0]
    profile_amplitude: float = Field(0.3, description="amplitude of the x2-only part sin(2 pi x2/L)")
    include_tilde: bool = Field(True, description="false runs the x1-independent case")

    @field_validator("A_ladder")
    @classmethod
    def _ladder(cls, v):
        return _increasing(v, "A_ladder")


class StabilitySettings(_Section):
    A_ladder: list[float] = [10.0, 1e2, 1e3, 1e4]
    r: float = 1.0
    R: float = 4.0
    nonlinear: bool = True
    halving_check: bool = Field(True, description="rerun at dt/2 to measure the time-discretization error")

    @field_validator("A_ladder")
    @classmethod
    def _ladder(cls, v):
        return _increasing(v, "A_ladder")


class AuditSettings(_Section):
    ensemble_size: int = Field(32, ge=1)
    grids: list[int] = Field([128, 256], description="grid sizes compared for stability")
    commutator_s: float = 0.5
    commutator_beta: float = 1.0
    product_R: float = 4.0
    product_s: float = 0.5
    product_beta: float = 0.5


class OutputSettings(_Section):
    gnuplot: bool = Field(False, description="also write a gnuplot script")
    trajectories: bool = Field(True, description="write binary snapshot files")
    workers: int = Field(1, ge=1, description="processes for ladder points")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: Experiment = Experiment.energy
    seed: int = 0
    solver: SolverSettings = SolverSettings()
    energy: EnergySettings = EnergySettings()
    kernel: KernelSettings = KernelSettings()
    strichartz: StrichartzSettings = StrichartzSettings()
    converge: ConvergeSettings = ConvergeSettings()
    stability: StabilitySettings = StabilitySettings()
    audit: AuditSettings = AuditSettings()
    output: OutputSettings = OutputSettings()

    @model_validator(mode="after")
    def _sigma_range(self) -> "ExperimentConfig":
        if self.experiment is Experiment.converge:
            hi = 4.0 / (2.0 - self.solver.alpha)
            if not 2.0 < self.converge.sigma < hi:
                raise ValueError(
                    f"converge.sigma = {self.converge.sigma} must lie in the open interval (2, 4/(2-alpha)) = (2, {hi:.6g})"
                )
        return self


def _value(text: str) -> Any:
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null", ""):
        return None
    if "," in text:
        return [_value(part) for part in text.split(",") if part.strip()]
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text: str) -> dict:
    """Nested dict from the ``key = value`` format."""
    out: dict = {}
    prefix = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            prefix = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        path = [p for p in (prefix + "." + key if prefix else key).split(".") if p]
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"line {lineno}: {key!r} conflicts with an earlier value")
        node[path[-1]] = _value(val)
    return out


def _as_lists(data: dict) -> dict:
    """Single values where a list is expected become one-element lists."""
    for name, section in ExperimentConfig.model_fields.items():
        sub = data.get(name)
        model = section.annotation
        if not isinstance(sub, dict) or not isinstance(model, type) or not issubclass(model, BaseModel):
            continue
        for key, f in model.model_fields.items():
            if key in sub and "list" in str(f.annotation) and not isinstance(sub[key], list):
                sub[key] = [sub[key]]
    return data


def build_config(data: dict, **overrides) -> ExperimentConfig:
    merged = dict(data)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(_as_lists(merged))
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in exc.errors())
        raise ConfigurationError(msgs) from None


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    if str(path) == "default":
        return build_config({}, **overrides)
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {p} not found")
    return build_config(parse_config_text(p.read_text()), **overrides)


def config_reference() -> str:
    """Markdown page listing every key with its default."""
    lines = ["# Configuration reference", "", "Every key, its default and meaning. Keys are `section.name`.", ""]
    top = ExperimentConfig()
    lines += ["| key | default | meaning |", "|---|---|---|"]
    lines.append(f"| experiment | {top.experiment.value} | one of {', '.join(e.value for e in Experiment)} |")
    lines.append("| seed | 0 | determinism seed (overridden by --seed) |")
    for name in ExperimentConfig.model_fields:
        sub = getattr(top, name)
        if not isinstance(sub, BaseModel):
            continue
        for key, f in type(sub).model_fields.items():
            default = getattr(sub, key)
            shown = ", ".join(f"{v:g}" for v in default) if isinstance(default, list) else ("" if default is None else default)
            if isinstance(shown, float):
                shown = f"{shown:g}"
            lines.append(f"| {name}.{key} | {shown} | {f.description or ''} |")
    return "\n".join(lines) + "\n"
