"""Run configuration (JSON), validated before any computation."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .catalog import catalog_names
from .errors import ConfigError

SUITES = ("quantize", "geometry", "multiplier", "energy", "loss")
Suite = Literal["quantize", "geometry", "multiplier", "energy", "loss"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SymbolSpec(_Strict):
    family: str
    params: dict[str, float] = Field(default_factory=dict)

    @field_validator("family")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in catalog_names():
            raise ValueError(f"unknown family {v!r}; known: {', '.join(catalog_names())}")
        return v


class GridSpec(_Strict):
    """Phase grid for the geometry and multiplier suites, plus the operator grid size.

    Leaving ``L_x``/``L_xi`` unset selects a box scaled with ``Lambda`` so the
    symbol's support covers the same fraction of it at every sweep point.
    """
    N_x: int = Field(64, ge=8, le=1024)
    N_xi: int = Field(64, ge=8, le=1024)
    L_x: Optional[float] = Field(None, gt=0)
    L_xi: Optional[float] = Field(None, gt=0)
    space_N: int = Field(128, ge=8, le=512)


class TimeSpec(_Strict):
    T: float = Field(0.25, gt=0, le=1.0)
    M: int = Field(17, ge=3, le=257)


class Tolerances(_Strict):
    multiplier_C_h: float = Field(1e-9, ge=0)
    energy_C_e: float = Field(1e-6, ge=0)
    energy_slack: Optional[float] = Field(None, ge=0)
    slow_variation_C: float = Field(8.0, ge=1)
    temperance_C: float = Field(8.0, ge=1)
    stability_ratio: float = Field(2.0, ge=1)
    energy_stability_ratio: float = Field(4.0, ge=1)
    alpha_fit_tol: float = Field(0.0, ge=0)


class LossSpec(_Strict):
    N: int = Field(32, ge=8, le=128)
    M: int = Field(17, ge=3, le=65)
    T: float = Field(0.25, gt=0, le=1.0)
    lambdas: list[float] = Field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    perturb_seed: Optional[int] = 0

    @field_validator("lambdas")
    @classmethod
    def _sweep(cls, v):
        if len(v) < 4:
            raise ValueError("the loss sweep needs at least four Lambda values")
        if any(x < 1 for x in v):
            raise ValueError("Lambda values must be >= 1")
        return v


class RunConfig(_Strict):
    symbol: SymbolSpec
    grid: GridSpec = Field(default_factory=GridSpec)
    time: TimeSpec = Field(default_factory=TimeSpec)
    lambdas: list[float] = Field(default_factory=lambda: [4.0], alias="lambda")
    r1: float = Field(0.25, gt=0, le=0.5)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    suites: list[Suite] = Field(default_factory=lambda: list(SUITES))
    loss: LossSpec = Field(default_factory=LossSpec)
    seed: int = 0
    output: Optional[str] = None
    dump_fields: list[str] = Field(default_factory=list)

    @field_validator("lambdas")
    @classmethod
    def _lambdas(cls, v):
        if not v:
            raise ValueError("at least one Lambda value is required")
        if any(x < 1 for x in v):
            raise ValueError("Lambda values must be >= 1")
        return v

    @model_validator(mode="after")
    def _order(self):
        # suites always run in dependency order
        self.suites = [s for s in SUITES if s in set(self.suites)]
        return self


def load_config(source) -> RunConfig:
    """Parse a path, JSON string or dict; any problem raises ``ConfigError``."""
    try:
        if isinstance(source, dict):
            data = source
        elif isinstance(source, str) and source.lstrip().startswith("{"):
            data = json.loads(source)
        else:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        return RunConfig.model_validate(data)
    except (ValidationError, json.JSONDecodeError, OSError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
