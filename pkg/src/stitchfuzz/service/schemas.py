"""Pydantic request/response models for the stitchfuzz service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class SpecValidateRequest(BaseModel):
    spec_path: str


class SpecValidateResponse(BaseModel):
    ok: bool
    types: int = 0
    blocks: int = 0
    block_names: list[str] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
    errors: list[str] = Field(default_factory=list)


class BackendSelector(BaseModel):
    backend: Literal["virtual", "native"] = "virtual"
    harness_path: Optional[str] = None
    exec_timeout_secs: float = 10.0


class ExecRequest(BackendSelector):
    spec_path: str
    testcase_path: str


class OutcomeModel(BaseModel):
    kind: str
    index: Optional[int] = None
    crash_id: Optional[str] = None
    coverage_edges: int = 0
    summary: str


class ExecResponse(BaseModel):
    outcome: OutcomeModel


class StatsModel(BaseModel):
    schema_version: int = 1
    seed: int = 0
    spec_revision: int = 1
    executions: int = 0
    execs_per_sec: Optional[float] = None
    corpus_size: int = 0
    distinct_edges: int = 0
    bail_rate: float = 0.0
    crashes_found: int = 0
    unique_crashes: int = 0
    wall_time_secs: Optional[float] = None
    corpus_hash: Optional[str] = None


class CrashReportModel(BaseModel):
    block: str
    crash_id: str
    outcome_index: int
    discovery_execs: int
    discovery_wall_secs: Optional[float] = None
    original_instances: int
    minimized_instances: Optional[int] = None
    minimization_partial: bool = False


class CampaignRequest(BackendSelector):
    spec_path: str
    corpus_dir: str
    seed: int = 0
    budget_execs: Optional[int] = None
    budget_secs: Optional[float] = None
    workers: int = 1
    p_hint: Optional[float] = None
    param_op_ratio: Optional[float] = None
    stop_after_crashes: Optional[int] = None
    minimize_budget: Optional[int] = None
    baseline: bool = False  # test-only uniform-sampling mode


class CampaignCreated(BaseModel):
    campaign_id: str


class CampaignStatus(BaseModel):
    campaign_id: str
    state: Literal["running", "done", "error"]
    error: Optional[str] = None
    stats: Optional[StatsModel] = None
    crashes: list[CrashReportModel] = Field(default_factory=list)


class MinimizeRequest(BackendSelector):
    spec_path: str
    testcase_path: str
    out_path: Optional[str] = None
    budget_execs: int = 20000


class MinimizeResponse(BaseModel):
    block: str
    crash_id: str
    original_instances: int
    minimized_instances: int
    minimization_partial: bool
    out_path: Optional[str] = None


class ReproRequest(BaseModel):
    spec_path: str
    testcase_path: str
    out_path: str


class ReproResponse(BaseModel):
    out_path: str
