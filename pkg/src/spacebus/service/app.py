"""FastAPI application wrapping one broker and one registry.

Subscriptions over HTTP are consumer-paced only: a POST creates a fetch
subscription and each GET on it pops at most one message. Push delivery
needs a persistent connection, which belongs to the wire listener, not
this API.
"""

from __future__ import annotations

import base64
import itertools
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import errors
from ..broker.core import Broker, SubscriptionHandle
from ..clock import MS
from ..registry.core import ServiceEntry, SpaceRegistry
from ..registry.rpc import LocalRpcRouter, default_caller
from ..scenario.bench import bench_latency
from ..scenario.runner import run_scenario
from ..scenario.schema import scenario_from_doc, validate_scenario
from . import models

_STATUS = {
    errors.NotFoundError: 404,
    errors.ConflictError: 409,
    errors.StaleLeaseError: 410,
    errors.StaleHandleError: 410,
    errors.CallTimeoutError: 504,
    errors.UnreachableError: 502,
    errors.FederationUnavailableError: 502,
}


def _status_for(exc: errors.SpacebusError) -> int:
    for etype, code in _STATUS.items():
        if isinstance(exc, etype):
            return code
    return 400


def create_app(
    broker: Broker | None = None,
    registry: SpaceRegistry | None = None,
    *,
    space: str = "service",
) -> FastAPI:
    app = FastAPI(title="spacebus", version="1.0")
    app.state.broker = broker or Broker(dispatch="threaded")
    app.state.registry = registry or SpaceRegistry(
        space, caller=default_caller(LocalRpcRouter())
    )
    app.state.subs = {}
    app.state.sub_seq = itertools.count(1)
    app.state.lock = threading.Lock()

    @app.exception_handler(errors.SpacebusError)
    async def _domain_error(_req: Request, exc: errors.SpacebusError):
        body = models.ErrorBody(error_type=type(exc).__name__, message=str(exc))
        return JSONResponse(status_code=_status_for(exc), content=body.model_dump())

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True}

    # -- broker ------------------------------------------------------------

    @app.post("/broker/publish", response_model=models.PublishResponse)
    def publish(req: models.PublishRequest) -> models.PublishResponse:
        if req.payload_text is not None:
            payload = req.payload_text.encode()
        else:
            payload = base64.b64decode(req.payload_b64) if req.payload_b64 else b""
        delivered = app.state.broker.publish(
            req.topic, payload, headers=req.headers, publisher="http"
        )
        return models.PublishResponse(delivered=delivered)

    @app.post("/broker/subscriptions", response_model=models.SubscribeResponse)
    def subscribe(req: models.SubscribeRequest) -> models.SubscribeResponse:
        handle = app.state.broker.subscribe(
            req.pattern,
            mode="fetch",
            group=req.group,
            history_replay=req.history_replay,
            queue_capacity=req.queue_capacity,
        )
        with app.state.lock:
            sub_id = f"s{next(app.state.sub_seq)}"
            app.state.subs[sub_id] = handle
        return models.SubscribeResponse(sub_id=sub_id)

    def _get_sub(sub_id: str) -> SubscriptionHandle:
        with app.state.lock:
            handle = app.state.subs.get(sub_id)
        if handle is None:
            raise errors.NotFoundError(f"no subscription {sub_id!r}")
        return handle

    @app.get("/broker/subscriptions/{sub_id}/fetch", response_model=models.FetchResponse)
    def fetch(sub_id: str) -> models.FetchResponse:
        msg = _get_sub(sub_id).fetch()
        if msg is None:
            return models.FetchResponse(empty=True)
        return models.FetchResponse(
            empty=False,
            topic=str(msg.topic),
            payload_b64=base64.b64encode(msg.payload).decode(),
            headers=dict(msg.headers),
            publisher=msg.publisher,
            seq=msg.seq,
            time_ms=msg.publish_time // MS,
        )

    @app.delete("/broker/subscriptions/{sub_id}")
    def unsubscribe(sub_id: str) -> dict:
        handle = _get_sub(sub_id)
        handle.cancel()
        with app.state.lock:
            app.state.subs.pop(sub_id, None)
        return {"ok": True}

    @app.post("/broker/history")
    def declare_history(req: models.HistoryRequest) -> dict:
        app.state.broker.declare_history(req.pattern, req.capacity)
        return {"ok": True}

    # -- registry ----------------------------------------------------------

    @app.post("/registry/services", response_model=models.RegisterResponse)
    def register(req: models.ServiceModel) -> models.RegisterResponse:
        token = app.state.registry.register(ServiceEntry.from_dict(req.model_dump()))
        return models.RegisterResponse(token=token)

    @app.post("/registry/services/renew")
    def renew(req: models.RenewRequest) -> dict:
        app.state.registry.renew(req.token)
        return {"ok": True}

    @app.delete("/registry/services/{token}")
    def deregister(token: str) -> dict:
        app.state.registry.deregister(token)
        return {"ok": True}

    @app.post("/registry/find", response_model=models.FindResponse)
    def find(req: models.FindRequest) -> models.FindResponse:
        within = None
        if req.within is not None:
            x, y, z, r = req.within
            within = ((x, y, z), r)
        entries = app.state.registry.find(
            name=req.name, kind=req.kind, space=req.space, within=within
        )
        return models.FindResponse(
            services=[models.ServiceModel(**e.to_dict()) for e in entries]
        )

    @app.get("/registry/lookup/{name}", response_model=models.ServiceModel)
    def lookup(name: str) -> models.ServiceModel:
        return models.ServiceModel(**app.state.registry.lookup(name).to_dict())

    @app.post("/registry/call", response_model=models.CallResponse)
    def call(req: models.CallRequest) -> models.CallResponse:
        result = app.state.registry.call(
            req.service, req.op, req.args, timeout=req.timeout_s
        )
        return models.CallResponse(result=result)

    # -- scenarios and bench ----------------------------------------------

    @app.post("/scenarios/validate", response_model=models.ScenarioValidateResponse)
    def scenario_validate(req: models.ScenarioValidateRequest) -> models.ScenarioValidateResponse:
        problems = validate_scenario(req.scenario)
        return models.ScenarioValidateResponse(valid=not problems, problems=problems)

    @app.post("/scenarios/run", response_model=models.ScenarioRunResponse)
    def scenario_run(req: models.ScenarioRunRequest) -> models.ScenarioRunResponse:
        scenario = scenario_from_doc(req.scenario)
        result = run_scenario(scenario, seed=req.seed)
        return models.ScenarioRunResponse(
            passed=result.passed,
            seed=result.seed,
            events=len(result.log),
            digest=result.log.digest,
            expectations=[
                models.ExpectationModel(description=e.description, ok=e.ok, detail=e.detail)
                for e in result.expectations
            ],
            runtime_errors=result.runtime_errors,
        )

    @app.post("/bench", response_model=models.BenchResponse)
    def bench(req: models.BenchRequest) -> models.BenchResponse:
        report = bench_latency(
            n=req.n, size=req.size, rate_hz=req.rate_hz, transport=req.transport
        )
        return models.BenchResponse(**report.to_dict())

    return app
