"""Experiment configuration documents."""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GraphConfig(_Strict):
    m: int = Field(20, ge=1)
    rho_c: float = Field(0.35, ge=0)
    seed: int = Field(0, ge=0)
    file: str | None = None


class ModelConfig(_Strict):
    name: str = "gauss-vq"
    rc: float | None = None
    dmax: float | None = Field(None, gt=0)
    delta: float | None = Field(None, gt=0)


class HorizonConfig(_Strict):
    T: int = Field(5, ge=0)
    mse_target: float | None = Field(None, gt=0)
    emse_db: float | None = Field(None, gt=0)
    constant_distortion: bool = False
    k1: float = Field(1.0, ge=0)
    k2: float = Field(0.0, ge=0)
    sweep_T: list[int] | None = None


class SimulationConfig(_Strict):
    L: int = Field(10_000, ge=1)
    trials: int = Field(100, ge=1)
    sigma_x2: float = Field(1.0, ge=0)
    sigma_n2: float = Field(0.5, ge=0)
    dithered: bool = True
    threads: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _not_both_zero(self):
        if self.sigma_x2 == 0 and self.sigma_n2 == 0:
            raise ValueError("sigma_x2 and sigma_n2 cannot both be zero")
        return self


class ExperimentConfig(_Strict):
    graph: GraphConfig = GraphConfig()
    model: ModelConfig = ModelConfig()
    horizon: HorizonConfig = HorizonConfig()
    simulation: SimulationConfig = SimulationConfig()
    output_dir: str | None = None
    seed: int = Field(0, ge=0)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.model_validate(json.loads(Path(path).read_text()))
