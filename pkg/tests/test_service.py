from __future__ import annotations

import base64

import pytest
from fastapi.testclient import TestClient

from spacebus.broker.core import Broker
from spacebus.registry.core import SpaceRegistry
from spacebus.registry.rpc import LocalRpcRouter, default_caller
from spacebus.service import create_app

POINTER = {"name": "wand1", "type": "wand", "loc": [0, 0, 1000], "aim": [0, 0, -1]}

LAMP_DOC = {
    "version": 1,
    "name": "mini-lamp",
    "space": {
        "hotspots": [{"id": "spot", "min": [-100, -100, -50], "max": [100, 100, 50]}],
        "workers": [{"kind": "lamp", "lamp_id": "desk", "hotspot": "spot"}],
    },
    "trace": [
        {"at_ms": 10, "pointer": dict(POINTER)},
        {"at_ms": 60, "pointer": dict(POINTER, buttons=["b1"])},
        {"at_ms": 110, "pointer": dict(POINTER)},
    ],
    "expectations": [
        {"topic": "lamp.desk.state", "payload": {"color": "red"}, "count": 1},
    ],
    "run_ms": 300,
}


@pytest.fixture
def api():
    broker = Broker(dispatch="inline")
    router = LocalRpcRouter()
    registry = SpaceRegistry("svc", caller=default_caller(router))
    app = create_app(broker, registry)
    client = TestClient(app, raise_server_exceptions=False)
    client.router = router
    yield client
    broker.close()


def test_healthz(api):
    assert api.get("/healthz").json() == {"ok": True}


class TestBroker:
    def test_publish_fetch_roundtrip(self, api):
        sub = api.post("/broker/subscriptions", json={"pattern": "news.#"}).json()["sub_id"]
        out = api.post(
            "/broker/publish",
            json={"topic": "news.sport", "payload_text": "goal", "headers": {"k": "v"}},
        )
        assert out.status_code == 200
        assert out.json()["delivered"] == 1
        msg = api.get(f"/broker/subscriptions/{sub}/fetch").json()
        assert msg["empty"] is False
        assert msg["topic"] == "news.sport"
        assert base64.b64decode(msg["payload_b64"]) == b"goal"
        assert msg["headers"]["k"] == "v"
        assert msg["publisher"] == "http"

    def test_fetch_empty(self, api):
        sub = api.post("/broker/subscriptions", json={"pattern": "a.b"}).json()["sub_id"]
        assert api.get(f"/broker/subscriptions/{sub}/fetch").json()["empty"] is True

    def test_payload_b64(self, api):
        sub = api.post("/broker/subscriptions", json={"pattern": "bin.*"}).json()["sub_id"]
        raw = bytes(range(8))
        api.post(
            "/broker/publish",
            json={"topic": "bin.blob", "payload_b64": base64.b64encode(raw).decode()},
        )
        msg = api.get(f"/broker/subscriptions/{sub}/fetch").json()
        assert base64.b64decode(msg["payload_b64"]) == raw

    def test_payload_text_wins(self, api):
        sub = api.post("/broker/subscriptions", json={"pattern": "a.b"}).json()["sub_id"]
        api.post(
            "/broker/publish",
            json={
                "topic": "a.b",
                "payload_text": "text",
                "payload_b64": base64.b64encode(b"blob").decode(),
            },
        )
        msg = api.get(f"/broker/subscriptions/{sub}/fetch").json()
        assert base64.b64decode(msg["payload_b64"]) == b"text"

    def test_unsubscribe(self, api):
        sub = api.post("/broker/subscriptions", json={"pattern": "a.b"}).json()["sub_id"]
        assert api.delete(f"/broker/subscriptions/{sub}").json() == {"ok": True}
        out = api.get(f"/broker/subscriptions/{sub}/fetch")
        assert out.status_code == 404
        assert out.json()["error_type"] == "NotFoundError"

    def test_unknown_subscription(self, api):
        assert api.get("/broker/subscriptions/s999/fetch").status_code == 404

    def test_bad_pattern_rejected(self, api):
        out = api.post("/broker/subscriptions", json={"pattern": "a..b"})
        assert out.status_code == 400
        assert out.json()["error_type"] == "MalformedPatternError"

    def test_bad_topic_on_publish(self, api):
        out = api.post("/broker/publish", json={"topic": "a.*", "payload_text": "x"})
        assert out.status_code == 400

    def test_history_replay(self, api):
        assert api.post(
            "/broker/history", json={"pattern": "news.#", "capacity": 5}
        ).json() == {"ok": True}
        api.post("/broker/publish", json={"topic": "news.a", "payload_text": "1"})
        api.post("/broker/publish", json={"topic": "news.b", "payload_text": "2"})
        sub = api.post(
            "/broker/subscriptions", json={"pattern": "news.#", "history_replay": True}
        ).json()["sub_id"]
        got = [
            base64.b64decode(api.get(f"/broker/subscriptions/{sub}/fetch").json()["payload_b64"])
            for _ in range(2)
        ]
        assert got == [b"1", b"2"]

    def test_bad_capacity(self, api):
        out = api.post("/broker/history", json={"pattern": "a.#", "capacity": 0})
        assert out.status_code == 400
        assert out.json()["error_type"] == "InvalidCapacityError"


class TestRegistry:
    def entry(self, **kw) -> dict:
        base = {"name": "lamp-1", "kind": "lamp", "address": "local://lamp-1"}
        base.update(kw)
        return base

    def test_register_lookup(self, api):
        token = api.post("/registry/services", json=self.entry()).json()["token"]
        assert token.startswith("lease-")
        entry = api.get("/registry/lookup/lamp-1").json()
        assert entry["name"] == "lamp-1"
        assert entry["kind"] == "lamp"
        assert entry["space"] == "svc"  # defaulted to the registry's space

    def test_lookup_missing(self, api):
        out = api.get("/registry/lookup/ghost")
        assert out.status_code == 404
        assert out.json()["error_type"] == "NotFoundError"

    def test_conflict(self, api):
        api.post("/registry/services", json=self.entry())
        out = api.post("/registry/services", json=self.entry(address="local://other"))
        assert out.status_code == 409

    def test_renew_and_deregister(self, api):
        token = api.post("/registry/services", json=self.entry()).json()["token"]
        assert api.post("/registry/services/renew", json={"token": token}).json() == {"ok": True}
        assert api.delete(f"/registry/services/{token}").json() == {"ok": True}
        out = api.post("/registry/services/renew", json={"token": token})
        assert out.status_code == 410
        assert out.json()["error_type"] == "StaleLeaseError"

    def test_find_filters(self, api):
        api.post("/registry/services", json=self.entry(name="lamp-a", position=[0, 0, 0]))
        api.post("/registry/services", json=self.entry(name="lamp-b", position=[5000, 0, 0]))
        api.post("/registry/services", json=self.entry(name="probe", kind="sensor"))
        found = api.post("/registry/find", json={"kind": "lamp"}).json()["services"]
        assert [s["name"] for s in found] == ["lamp-a", "lamp-b"]
        near = api.post(
            "/registry/find", json={"kind": "lamp", "within": [0, 0, 0, 1000]}
        ).json()["services"]
        assert [s["name"] for s in near] == ["lamp-a"]

    def test_find_needs_a_filter(self, api):
        out = api.post("/registry/find", json={})
        assert out.status_code == 400
        assert out.json()["error_type"] == "InvalidQueryError"

    def test_call_local_service(self, api):
        api.router.register("echo", lambda op, args: {"op": op, "args": args})
        api.post("/registry/services", json=self.entry(name="echo", address="local://echo"))
        out = api.post(
            "/registry/call", json={"service": "echo", "op": "ping", "args": {"n": 3}}
        )
        assert out.json() == {"result": {"op": "ping", "args": {"n": 3}}}

    def test_call_unknown_service(self, api):
        out = api.post("/registry/call", json={"service": "ghost", "op": "ping"})
        assert out.status_code == 404

    def test_call_unreachable_address(self, api):
        api.post(
            "/registry/services",
            json=self.entry(name="dead", address="loopback://127.0.0.1:1"),
        )
        out = api.post("/registry/call", json={"service": "dead", "op": "ping"})
        assert out.status_code == 502
        assert out.json()["error_type"] == "UnreachableError"


class TestScenarios:
    def test_validate_good(self, api):
        out = api.post("/scenarios/validate", json={"scenario": LAMP_DOC}).json()
        assert out == {"valid": True, "problems": []}

    def test_validate_bad(self, api):
        doc = dict(LAMP_DOC, version=9)
        out = api.post("/scenarios/validate", json={"scenario": doc}).json()
        assert out["valid"] is False
        assert any("version" in p for p in out["problems"])

    def test_run(self, api):
        out = api.post("/scenarios/run", json={"scenario": LAMP_DOC, "seed": 4})
        assert out.status_code == 200
        body = out.json()
        assert body["passed"] is True
        assert body["seed"] == 4
        assert body["events"] > 0
        assert len(body["digest"]) == 64
        assert all(e["ok"] for e in body["expectations"])

    def test_run_rejects_invalid(self, api):
        out = api.post("/scenarios/run", json={"scenario": {"version": 9}})
        assert out.status_code == 400
        assert out.json()["error_type"] == "ScenarioValidationError"


class TestBench:
    def test_too_few_samples(self, api):
        out = api.post("/bench", json={"n": 10})
        assert out.status_code == 400
        assert out.json()["error_type"] == "InsufficientSamplesError"

    def test_bad_rate(self, api):
        out = api.post("/bench", json={"n": 1000, "rate_hz": 0})
        assert out.status_code == 400
        assert out.json()["error_type"] == "InvalidRateError"

    def test_small_run(self, api):
        out = api.post("/bench", json={"n": 1000, "size": 64, "rate_hz": 50000})
        assert out.status_code == 200
        body = out.json()
        assert body["received"] == 1000
        assert body["transport"] == "inproc"
        assert body["p50_ms"] <= body["p99_ms"] <= body["p995_ms"] <= body["max_ms"]
