"""FastAPI control plane over the fuzzing engine.

Campaigns run as in-process background jobs: POST /campaigns returns an id,
GET /campaigns/{id} polls live stats, POST /campaigns/{id}/stop requests a
clean early stop. One-shot operations (validate, exec, minimize, repro,
stats) are synchronous. Error mapping: user/input problems are 400, engine
contract violations are 500.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..engine import (
    Campaign,
    CampaignResult,
    CrashReport,
    EngineConfig,
    minimize,
    run_uniform_baseline,
)
from ..errors import BackendContractViolation, NativeOnly, SpecError, StitchError
from ..native_codegen import NativeBackend, emit_reproducer
from ..spec_model import Specification, load_spec, spec_warnings
from ..testcase import Testcase, deserialize, serialize, validate
from ..virtual_backend import OutcomeKind, VirtualBackend
from .schemas import (
    BackendSelector,
    CampaignCreated,
    CampaignRequest,
    CampaignStatus,
    CrashReportModel,
    ExecRequest,
    ExecResponse,
    HealthResponse,
    MinimizeRequest,
    MinimizeResponse,
    OutcomeModel,
    ReproRequest,
    ReproResponse,
    SpecValidateRequest,
    SpecValidateResponse,
    StatsModel,
)


def _load_spec_or_400(path: str) -> Specification:
    if not os.path.exists(path):
        raise HTTPException(status_code=400, detail=f"spec not found: {path}")
    try:
        return load_spec(path)
    except SpecError as e:
        raise HTTPException(status_code=400, detail=f"spec error: {e}") from e


def _load_testcase_or_400(path: str, spec: Specification) -> Testcase:
    if not os.path.exists(path):
        raise HTTPException(status_code=400, detail=f"testcase not found: {path}")
    try:
        with open(path, "rb") as fh:
            return deserialize(fh.read(), spec)
    except StitchError as e:
        raise HTTPException(status_code=400, detail=f"testcase error: {e}") from e


def _backend_for(req: BackendSelector, spec: Specification, spec_path: str):
    if req.backend == "virtual":
        return VirtualBackend(spec, base_dir=os.path.dirname(os.path.abspath(spec_path)))
    if not req.harness_path:
        raise HTTPException(status_code=400, detail="native backend needs harness_path")
    if not os.path.exists(req.harness_path):
        raise HTTPException(
            status_code=400, detail=f"harness not found: {req.harness_path}"
        )
    return NativeBackend(req.harness_path, timeout=req.exec_timeout_secs)


def _crash_model(report: CrashReport) -> CrashReportModel:
    return CrashReportModel(
        block=report.block_name,
        crash_id=report.crash_id,
        outcome_index=report.outcome_index,
        discovery_execs=report.discovery_execs,
        discovery_wall_secs=report.discovery_wall_secs,
        original_instances=len(report.original.instances),
        minimized_instances=(
            len(report.minimized.instances) if report.minimized else None
        ),
        minimization_partial=report.partial,
    )


@dataclass
class CampaignJob:
    campaign_id: str
    campaign: Campaign | None
    thread: threading.Thread | None = None
    state: str = "running"
    error: str | None = None
    result: CampaignResult | None = None
    stats_snapshot: dict = field(default_factory=dict)


def create_app() -> FastAPI:
    app = FastAPI(title="stitchfuzz", version=__version__)
    jobs: dict[str, CampaignJob] = {}

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(version=__version__)

    @app.post("/spec/validate", response_model=SpecValidateResponse)
    def spec_validate(req: SpecValidateRequest) -> SpecValidateResponse:
        if not os.path.exists(req.spec_path):
            return SpecValidateResponse(
                ok=False, errors=[f"spec not found: {req.spec_path}"]
            )
        try:
            spec = load_spec(req.spec_path)
        except SpecError as e:
            return SpecValidateResponse(ok=False, errors=[str(e)])
        return SpecValidateResponse(
            ok=True,
            types=len(spec.types),
            blocks=len(spec.blocks),
            block_names=[b.name for b in spec.blocks],
            warnings=spec_warnings(spec),
        )

    @app.post("/exec", response_model=ExecResponse)
    def exec_testcase(req: ExecRequest) -> ExecResponse:
        spec = _load_spec_or_400(req.spec_path)
        t = _load_testcase_or_400(req.testcase_path, spec)
        try:
            report = validate(spec, t)
        except StitchError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        if not report.ok:
            raise HTTPException(
                status_code=400,
                detail={
                    "error": "testcase is not well-formed",
                    "violations": [
                        f"{v.rule.name} at instance {v.instance}, ref {v.ref_pos}"
                        for v in report.violations
                    ],
                },
            )
        backend = _backend_for(req, spec, req.spec_path)
        try:
            outcome = backend.execute(t)
        except BackendContractViolation as e:
            raise HTTPException(status_code=500, detail=str(e)) from e
        return ExecResponse(
            outcome=OutcomeModel(
                kind=outcome.kind.value,
                index=outcome.index,
                crash_id=outcome.crash_id,
                coverage_edges=len(outcome.coverage),
                summary=outcome.summary(),
            )
        )

    @app.post("/campaigns", response_model=CampaignCreated)
    def start_campaign(req: CampaignRequest) -> CampaignCreated:
        spec = _load_spec_or_400(req.spec_path)
        backend = _backend_for(req, spec, req.spec_path)
        if req.budget_execs is None and req.budget_secs is None:
            raise HTTPException(status_code=400, detail="a budget is required")
        config = EngineConfig(workers=req.workers)
        if req.p_hint is not None:
            config.p_hint = req.p_hint
        if req.param_op_ratio is not None:
            config.p_param = req.param_op_ratio
        if req.stop_after_crashes is not None:
            config.stop_after_crashes = req.stop_after_crashes
        if req.minimize_budget is not None:
            config.minimize_budget = req.minimize_budget

        campaign_id = uuid.uuid4().hex[:12]
        if req.baseline:
            job = CampaignJob(campaign_id=campaign_id, campaign=None)

            def run_baseline() -> None:
                try:
                    job.result = run_uniform_baseline(
                        spec, backend, seed=req.seed,
                        budget_execs=req.budget_execs or 0,
                    )
                    job.state = "done"
                except Exception as e:  # surfaced via status
                    job.state = "error"
                    job.error = f"{type(e).__name__}: {e}"

            job.thread = threading.Thread(target=run_baseline, daemon=True)
        else:
            campaign = Campaign(
                spec,
                backend,
                seed=req.seed,
                budget_execs=req.budget_execs,
                budget_secs=req.budget_secs,
                config=config,
                corpus_dir=req.corpus_dir,
            )
            job = CampaignJob(campaign_id=campaign_id, campaign=campaign)

            def run_job() -> None:
                try:
                    job.result = campaign.run()
                    job.state = "done"
                except Exception as e:
                    job.state = "error"
                    job.error = f"{type(e).__name__}: {e}"

            job.thread = threading.Thread(target=run_job, daemon=True)
        jobs[campaign_id] = job
        job.thread.start()
        return CampaignCreated(campaign_id=campaign_id)

    def _job_or_404(campaign_id: str) -> CampaignJob:
        job = jobs.get(campaign_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown campaign")
        return job

    @app.get("/campaigns/{campaign_id}", response_model=CampaignStatus)
    def campaign_status(campaign_id: str) -> CampaignStatus:
        job = _job_or_404(campaign_id)
        stats = None
        crashes: list[CrashReportModel] = []
        if job.result is not None:
            stats = StatsModel(**job.result.stats.to_dict())
            crashes = [_crash_model(job.result.reports[k]) for k in sorted(job.result.reports)]
        elif job.campaign is not None:
            s = job.campaign.stats
            stats = StatsModel(
                seed=s.seed,
                spec_revision=s.spec_revision,
                executions=s.executions,
                corpus_size=s.corpus_size,
                distinct_edges=s.distinct_edges,
                bail_rate=round(s.bail_rate, 6),
                crashes_found=s.crashes_found,
                unique_crashes=s.unique_crashes,
            )
            crashes = [
                _crash_model(job.campaign.reports[k])
                for k in sorted(job.campaign.reports)
            ]
        return CampaignStatus(
            campaign_id=campaign_id,
            state=job.state,  # type: ignore[arg-type]
            error=job.error,
            stats=stats,
            crashes=crashes,
        )

    @app.post("/campaigns/{campaign_id}/stop", response_model=CampaignStatus)
    def campaign_stop(campaign_id: str) -> CampaignStatus:
        job = _job_or_404(campaign_id)
        if job.campaign is not None:
            job.campaign._stop = True
        return campaign_status(campaign_id)

    @app.post("/minimize", response_model=MinimizeResponse)
    def minimize_crash(req: MinimizeRequest) -> MinimizeResponse:
        spec = _load_spec_or_400(req.spec_path)
        t = _load_testcase_or_400(req.testcase_path, spec)
        report = validate(spec, t)
        if not report.ok:
            raise HTTPException(status_code=400, detail="testcase is not well-formed")
        backend = _backend_for(req, spec, req.spec_path)
        outcome = backend.execute(t)
        if outcome.kind != OutcomeKind.CRASH:
            raise HTTPException(
                status_code=400,
                detail=f"testcase does not crash (outcome: {outcome.summary()})",
            )
        block_name = spec.blocks[t.instances[outcome.index].block].name
        crash = CrashReport(
            block_name=block_name,
            crash_id=outcome.crash_id,
            original=t,
            outcome_index=outcome.index,
            discovery_execs=0,
            discovery_wall_secs=None,
        )
        result = minimize(spec, backend, crash, budget=req.budget_execs)
        out_path = None
        if req.out_path:
            with open(req.out_path, "wb") as fh:
                fh.write(serialize(result.minimized))
            out_path = req.out_path
        return MinimizeResponse(
            block=block_name,
            crash_id=outcome.crash_id,
            original_instances=len(t.instances),
            minimized_instances=len(result.minimized.instances),
            minimization_partial=result.partial,
            out_path=out_path,
        )

    @app.post("/reproducers", response_model=ReproResponse)
    def emit_repro(req: ReproRequest) -> ReproResponse:
        spec = _load_spec_or_400(req.spec_path)
        t = _load_testcase_or_400(req.testcase_path, spec)
        try:
            source = emit_reproducer(spec, t)
        except NativeOnly as e:
            raise HTTPException(
                status_code=400, detail={"error": "NativeOnly", "message": str(e)}
            ) from e
        except StitchError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        source.write(req.out_path)
        return ReproResponse(out_path=req.out_path)

    @app.get("/stats", response_model=StatsModel)
    def read_stats(corpus_dir: str) -> StatsModel:
        path = os.path.join(corpus_dir, "stats.json")
        if not os.path.exists(path):
            raise HTTPException(status_code=400, detail=f"no stats.json in {corpus_dir}")
        with open(path) as fh:
            return StatsModel(**json.load(fh))

    return app
