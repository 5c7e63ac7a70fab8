"""Request/response models for the simulation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SimulateRequest(BaseModel):
    config_name: str | None = Field(
        default=None, description="bundled configuration to start from"
    )
    config: dict[str, str] = Field(
        default_factory=dict, description="key=value pairs, same schema as config files"
    )
    overrides: dict[str, str] = Field(
        default_factory=dict, description="applied after config/config_name"
    )
    seed: int | None = None
    include_trace: bool = True


class PhaseMetricsModel(BaseModel):
    name: str
    t_start_s: float
    t_end_s: float
    e_mean: float
    e_std: float


class SimulateResponse(BaseModel):
    seed: int
    diverged: bool
    abort_time_s: float | None
    phases: list[PhaseMetricsModel]
    overall: PhaseMetricsModel | None
    trace_csv: str | None


class SweepRequest(BaseModel):
    config_name: str | None = None
    config: dict[str, str] = Field(default_factory=dict)
    overrides: dict[str, str] = Field(default_factory=dict)
    grid: dict[str, list[float]]
    seed: int | None = None


class SweepCellModel(BaseModel):
    params: dict[str, float]
    seed: int
    diverged: bool
    phases: list[PhaseMetricsModel]


class SweepResponse(BaseModel):
    cells: list[SweepCellModel]
    csv: str


class FlatnessCheckRequest(BaseModel):
    scenario: str
    dt_s: float = 1e-3


class FlatnessCheckResponse(BaseModel):
    scenario: str
    max_dev_y1: float
    max_dev_y2: float
    tol_y1: float
    tol_y2: float
    passed: bool


class ObserverDemoRequest(BaseModel):
    config_name: str | None = "gamma_b_observer"
    config: dict[str, str] = Field(default_factory=dict)
    overrides: dict[str, str] = Field(default_factory=dict)
    seed: int | None = None


class ObserverDemoResponse(BaseModel):
    diverged: bool
    convergence_time_s: float | None
    selection_settle_time_s: float | None
    final_rel_error: float
    final_etilde_plus: float
    final_etilde_minus: float


class ConfigListResponse(BaseModel):
    configs: list[str]
    flatness_scenarios: list[str]
