"""HTTP service exposing simulations, sweeps, and demonstration runs.

The service is a thin wrapper over the core package: requests carry the
same key=value configuration schema as the config files, responses carry
per-phase metrics and (optionally) the trace CSV.  The bundled CLI talks to
this app either in process or over the network.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import config as cfgmod
from .. import sim
from .schemas import (
    ConfigListResponse,
    FlatnessCheckRequest,
    FlatnessCheckResponse,
    ObserverDemoRequest,
    ObserverDemoResponse,
    PhaseMetricsModel,
    SimulateRequest,
    SimulateResponse,
    SweepCellModel,
    SweepRequest,
    SweepResponse,
)


def _resolve_config(
    config_name: str | None,
    pairs: dict[str, str],
    overrides: dict[str, str],
    seed: int | None,
) -> sim.SimConfig:
    if config_name is not None:
        base_pairs = cfgmod.bundled_config_pairs(config_name)
        base_pairs.update(pairs)
    else:
        base_pairs = dict(pairs)
    cfg = cfgmod.build_sim_config(base_pairs)
    if overrides:
        cfg = cfgmod.apply_overrides(cfg, overrides)
    if seed is not None:
        cfg = cfg.with_params(seed=seed)
    return cfg


def _phase_model(ph: sim.PhaseMetrics) -> PhaseMetricsModel:
    return PhaseMetricsModel(
        name=ph.name, t_start_s=ph.t_start, t_end_s=ph.t_end,
        e_mean=ph.e_mean, e_std=ph.e_std,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="tethersim", version="0.1.0")

    @app.exception_handler(sim.ConfigError)
    async def _config_error(request, exc):  # noqa: ANN001
        raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/configs", response_model=ConfigListResponse)
    def configs() -> ConfigListResponse:
        return ConfigListResponse(
            configs=cfgmod.bundled_config_names(),
            flatness_scenarios=sorted(sim.flatness_scenarios()),
        )

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        try:
            cfg = _resolve_config(req.config_name, req.config, req.overrides, req.seed)
        except sim.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        trace = sim.run_closed_loop(cfg)
        phases: list[PhaseMetricsModel] = []
        overall = None
        if not trace.diverged:
            metrics = sim.tracking_metrics(trace)
            phases = [_phase_model(ph) for ph in metrics.phases]
            overall = _phase_model(metrics.overall)
        return SimulateResponse(
            seed=cfg.seed,
            diverged=trace.diverged,
            abort_time_s=trace.abort_time,
            phases=phases,
            overall=overall,
            trace_csv=trace.to_csv() if req.include_trace else None,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest) -> SweepResponse:
        try:
            cfg = _resolve_config(req.config_name, req.config, req.overrides, req.seed)
            cells = sim.sweep(cfg, {k: tuple(v) for k, v in req.grid.items()})
        except sim.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        models = [
            SweepCellModel(
                params=cell.params,
                seed=cell.seed,
                diverged=cell.diverged,
                phases=[_phase_model(ph) for ph in cell.metrics.phases]
                if cell.metrics
                else [],
            )
            for cell in cells
        ]
        return SweepResponse(cells=models, csv=sim.sweep_csv(cells))

    @app.post("/flatness-check", response_model=FlatnessCheckResponse)
    def flatness_check(req: FlatnessCheckRequest) -> FlatnessCheckResponse:
        try:
            result = sim.run_flatness_check(req.scenario, req.dt_s)
        except sim.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return FlatnessCheckResponse(**result)  # type: ignore[arg-type]

    @app.post("/observer-demo", response_model=ObserverDemoResponse)
    def observer_demo(req: ObserverDemoRequest) -> ObserverDemoResponse:
        try:
            cfg = _resolve_config(req.config_name, req.config, req.overrides, req.seed)
        except sim.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        result = sim.run_observer_demo(cfg)
        return ObserverDemoResponse(
            diverged=bool(result["diverged"]),
            convergence_time_s=result["convergence_time_s"],  # type: ignore[arg-type]
            selection_settle_time_s=result["selection_settle_time_s"],  # type: ignore[arg-type]
            final_rel_error=float(result["final_rel_error"]),  # type: ignore[arg-type]
            final_etilde_plus=float(result["final_etilde_plus"]),  # type: ignore[arg-type]
            final_etilde_minus=float(result["final_etilde_minus"]),  # type: ignore[arg-type]
        )

    return app


app = create_app()
