"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    error_type: str
    message: str


class PublishRequest(BaseModel):
    topic: str
    payload_b64: str = ""
    payload_text: Optional[str] = None  # convenience; wins over payload_b64 if set
    headers: dict[str, str] = Field(default_factory=dict)


class PublishResponse(BaseModel):
    delivered: int


class SubscribeRequest(BaseModel):
    pattern: str
    group: Optional[str] = None
    history_replay: bool = False
    queue_capacity: Optional[int] = None


class SubscribeResponse(BaseModel):
    sub_id: str


class FetchResponse(BaseModel):
    empty: bool
    topic: Optional[str] = None
    payload_b64: Optional[str] = None
    headers: dict[str, str] = Field(default_factory=dict)
    publisher: Optional[str] = None
    seq: Optional[int] = None
    time_ms: Optional[int] = None


class HistoryRequest(BaseModel):
    pattern: str
    capacity: int


class ServiceModel(BaseModel):
    name: str
    kind: str
    space: str = ""
    address: str = ""
    attributes: dict[str, str] = Field(default_factory=dict)
    position: Optional[list[float]] = None
    local_only: bool = False
    ttl_s: float = 10.0


class RegisterResponse(BaseModel):
    token: str


class RenewRequest(BaseModel):
    token: str


class FindRequest(BaseModel):
    name: Optional[str] = None
    kind: Optional[str] = None
    space: Optional[str] = None
    within: Optional[list[float]] = None  # [x, y, z, radius_mm]


class FindResponse(BaseModel):
    services: list[ServiceModel]


class CallRequest(BaseModel):
    service: str
    op: str
    args: dict[str, Any] = Field(default_factory=dict)
    timeout_s: float = 5.0


class CallResponse(BaseModel):
    result: dict[str, Any]


class ScenarioRunRequest(BaseModel):
    scenario: dict[str, Any]
    seed: int = 0


class ExpectationModel(BaseModel):
    description: str
    ok: bool
    detail: str = ""


class ScenarioRunResponse(BaseModel):
    passed: bool
    seed: int
    events: int
    digest: str
    expectations: list[ExpectationModel]
    runtime_errors: list[str] = Field(default_factory=list)


class ScenarioValidateRequest(BaseModel):
    scenario: dict[str, Any]


class ScenarioValidateResponse(BaseModel):
    valid: bool
    problems: list[str]


class BenchRequest(BaseModel):
    n: int = 10_000
    size: int = 256
    rate_hz: float = 1000.0
    transport: str = "inproc"


class BenchResponse(BaseModel):
    transport: str
    n: int
    received: int
    size: int
    rate_hz: float
    elapsed_s: float
    p50_ms: float
    p99_ms: float
    p995_ms: float
    max_ms: float
