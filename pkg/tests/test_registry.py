from __future__ import annotations

import pytest

from spacebus.clock import MS, VirtualClock
from spacebus.errors import (
    ConflictError,
    InvalidQueryError,
    FederationUnavailableError,
    NotFoundError,
    StaleLeaseError,
    UnreachableError,
)
from spacebus.registry.core import Federation, ServiceEntry, SpaceRegistry
from spacebus.registry.rpc import (
    LocalRpcRouter,
    RegistryListener,
    RemoteRegistry,
    RpcServer,
    default_caller,
    rpc_call,
)

SECOND = 1_000_000_000


def entry(name, kind="worker", **kw):
    return ServiceEntry(name=name, kind=kind, **kw)


@pytest.fixture
def reg(vclock):
    return SpaceRegistry("lab", clock=vclock)


class TestLeases:
    def test_register_and_lookup(self, reg):
        token = reg.register(entry("cam", address="local://cam"))
        assert token == "lease-1"
        assert reg.lookup("cam").address == "local://cam"

    def test_expiry_without_renewal(self, reg, vclock):
        reg.register(entry("cam", ttl_s=2.0))
        vclock.advance_to(int(2.5 * SECOND))
        with pytest.raises(NotFoundError):
            reg.lookup("cam")

    def test_renewal_extends(self, reg, vclock):
        token = reg.register(entry("cam", ttl_s=2.0))
        vclock.advance_to(int(1.5 * SECOND))
        reg.renew(token)
        vclock.advance_to(int(3.0 * SECOND))
        assert reg.lookup("cam").name == "cam"

    def test_renew_expired_lease_is_stale(self, reg, vclock):
        token = reg.register(entry("cam", ttl_s=1.0))
        vclock.advance_to(3 * SECOND)
        with pytest.raises(StaleLeaseError):
            reg.renew(token)

    def test_renew_unknown_token(self, reg):
        with pytest.raises(StaleLeaseError):
            reg.renew("lease-99")

    def test_deregister(self, reg):
        token = reg.register(entry("cam"))
        reg.deregister(token)
        with pytest.raises(NotFoundError):
            reg.lookup("cam")

    def test_reregister_same_address_refreshes(self, reg, vclock):
        reg.register(entry("cam", address="local://cam", ttl_s=2.0))
        vclock.advance_to(1 * SECOND)
        token2 = reg.register(entry("cam", address="local://cam", ttl_s=2.0))
        vclock.advance_to(int(2.5 * SECOND))
        assert reg.lookup("cam").name == "cam"
        reg.renew(token2)

    def test_conflict_when_live_lease_other_address(self, reg):
        reg.register(entry("cam", address="local://a"))
        with pytest.raises(ConflictError):
            reg.register(entry("cam", address="local://b"))

    def test_dead_lease_frees_the_name(self, reg, vclock):
        reg.register(entry("cam", address="local://a", ttl_s=1.0))
        vclock.advance_to(2 * SECOND)
        reg.register(entry("cam", address="local://b"))
        assert reg.lookup("cam").address == "local://b"

    def test_sweep_drops_expired(self, reg, vclock):
        reg.register(entry("a", ttl_s=1.0))
        reg.register(entry("b", ttl_s=10.0))
        vclock.advance_to(2 * SECOND)
        removed = reg.sweep()
        assert removed == 1
        assert [e.name for e in reg.find(space="lab")] == ["b"]


class TestFind:
    def test_filters_and_ordering(self, reg):
        reg.register(entry("zeta", kind="display", space="lab"))
        reg.register(entry("alpha", kind="display", space="lab"))
        reg.register(entry("mid", kind="lamp", space="lab"))
        found = reg.find(kind="display")
        assert [e.name for e in found] == ["alpha", "zeta"]

    def test_find_by_name(self, reg):
        reg.register(entry("one"))
        assert [e.name for e in reg.find(name="one")] == ["one"]
        assert reg.find(name="nope") == []

    def test_within_radius(self, reg):
        reg.register(entry("near", position=(0.0, 0.0, 0.0)))
        reg.register(entry("far", position=(5000.0, 0.0, 0.0)))
        reg.register(entry("nowhere"))  # no position: excluded from spatial queries
        found = reg.find(within=((0.0, 0.0, 0.0), 1000.0))
        assert [e.name for e in found] == ["near"]

    def test_filters_and_together(self, reg):
        reg.register(entry("a", kind="cam", position=(0.0, 0.0, 0.0)))
        reg.register(entry("b", kind="cam", position=(9000.0, 0.0, 0.0)))
        reg.register(entry("c", kind="mic", position=(0.0, 0.0, 0.0)))
        found = reg.find(kind="cam", within=((0.0, 0.0, 0.0), 100.0))
        assert [e.name for e in found] == ["a"]

    def test_bad_radius(self, reg):
        with pytest.raises(InvalidQueryError):
            reg.find(within=((0.0, 0.0, 0.0), -5.0))

    def test_expired_excluded_lazily(self, reg, vclock):
        reg.register(entry("temp", ttl_s=1.0))
        vclock.advance_to(5 * SECOND)
        assert reg.find(space="lab") == []

    def test_unfiltered_find_is_invalid(self, reg):
        with pytest.raises(InvalidQueryError):
            reg.find()


class TestCall:
    def test_local_call(self, vclock):
        router = LocalRpcRouter()
        router.register("echo", lambda op, args: {"op": op, "args": args})
        reg = SpaceRegistry("lab", clock=vclock, caller=default_caller(router))
        reg.register(entry("echo", address="local://echo"))
        out = reg.call("echo", "ping", {"n": 1})
        assert out == {"op": "ping", "args": {"n": 1}}

    def test_call_unknown_service(self, vclock):
        reg = SpaceRegistry("lab", clock=vclock, caller=default_caller(LocalRpcRouter()))
        with pytest.raises(NotFoundError):
            reg.call("ghost", "ping", {})

    def test_call_failure_marks_suspect(self, vclock):
        router = LocalRpcRouter()

        def boom(op, args):
            raise RuntimeError("dead")

        router.register("flaky", boom)
        reg = SpaceRegistry("lab", clock=vclock, caller=default_caller(router))
        reg.register(entry("flaky", address="local://flaky"))
        with pytest.raises(UnreachableError):
            reg.call("flaky", "ping", {})
        assert reg.is_suspect("flaky")

    def test_success_clears_suspect(self, vclock):
        router = LocalRpcRouter()
        state = {"ok": False}

        def sometimes(op, args):
            if not state["ok"]:
                raise RuntimeError("warming up")
            return {"fine": True}

        router.register("svc", sometimes)
        reg = SpaceRegistry("lab", clock=vclock, caller=default_caller(router))
        reg.register(entry("svc", address="local://svc"))
        with pytest.raises(UnreachableError):
            reg.call("svc", "go", {})
        state["ok"] = True
        assert reg.call("svc", "go", {}) == {"fine": True}
        assert not reg.is_suspect("svc")


class TestRpcOverLoopback:
    def test_rpc_server_roundtrip(self):
        router = LocalRpcRouter()
        router.register("adder", lambda op, args: {"sum": args["a"] + args["b"]})
        server = RpcServer(router)
        try:
            out = rpc_call(server.host, server.port, "adder", "add", {"a": 2, "b": 3})
            assert out == {"sum": 5}
        finally:
            server.close()

    def test_typed_error_revival(self):
        router = LocalRpcRouter()

        def refuse(op, args):
            raise NotFoundError("nothing here")

        router.register("svc", refuse)
        server = RpcServer(router)
        try:
            with pytest.raises(NotFoundError):
                rpc_call(server.host, server.port, "svc", "q", {})
        finally:
            server.close()

    def test_unreachable_address(self):
        with pytest.raises(UnreachableError):
            rpc_call("127.0.0.1", 1, "svc", "q", {}, timeout=0.5)

    def test_registry_listener_and_remote(self, vclock):
        router = LocalRpcRouter()
        router.register("hello", lambda op, args: {"greeting": f"hi {args.get('who')}"})
        reg = SpaceRegistry("lab", clock=vclock, caller=default_caller(router))
        reg.register(entry("hello", kind="greeter", address="local://hello"))
        listener = RegistryListener(reg)
        try:
            remote = RemoteRegistry(f"loopback://{listener.host}:{listener.port}")
            found = remote.find(kind="greeter")
            assert [e.name for e in found] == ["hello"]
            assert remote.lookup("hello").kind == "greeter"
            out = remote.call("hello", "greet", {"who": "you"})
            assert out == {"greeting": "hi you"}
            with pytest.raises(NotFoundError):
                remote.lookup("ghost")
        finally:
            listener.close()


class TestFederation:
    def make_member(self, vclock, names, space):
        reg = SpaceRegistry(space, clock=vclock)
        for n in names:
            reg.register(entry(n, kind="cam", space=space))
        return reg

    def test_fanout_in_member_order(self, vclock):
        fed = Federation()
        fed.join("east", self.make_member(vclock, ["e1", "e2"], "east"))
        fed.join("west", self.make_member(vclock, ["w1"], "west"))
        entries, errors = fed.find(kind="cam")
        assert [e.name for e in entries] == ["e1", "e2", "w1"]
        assert errors == {}

    def test_local_only_excluded(self, vclock):
        reg = SpaceRegistry("east", clock=vclock)
        reg.register(entry("secret", kind="cam", local_only=True))
        reg.register(entry("open", kind="cam"))
        fed = Federation()
        fed.join("east", reg)
        entries, _ = fed.find(kind="cam")
        assert [e.name for e in entries] == ["open"]
        # direct (non-federated) find still sees it
        assert {e.name for e in reg.find(kind="cam")} == {"secret", "open"}

    def test_dead_member_partial_results(self, vclock):
        fed = Federation()
        fed.join("alive", self.make_member(vclock, ["a1"], "alive"))
        fed.join("dead", RemoteRegistry("loopback://127.0.0.1:1", timeout=0.5))
        entries, errors = fed.find(kind="cam")
        assert [e.name for e in entries] == ["a1"]
        assert set(errors) == {"dead"}

    def test_all_dead_raises(self, vclock):
        fed = Federation()
        fed.join("d1", RemoteRegistry("loopback://127.0.0.1:1", timeout=0.5))
        with pytest.raises(FederationUnavailableError):
            fed.find(kind="cam")

    def test_empty_federation_raises(self):
        with pytest.raises(FederationUnavailableError):
            Federation().find()

    def test_leave(self, vclock):
        fed = Federation()
        fed.join("east", self.make_member(vclock, ["e1"], "east"))
        fed.join("west", self.make_member(vclock, ["w1"], "west"))
        fed.leave("west")
        entries, _ = fed.find(kind="cam")
        assert [e.name for e in entries] == ["e1"]

    def test_bad_query_not_swallowed(self, vclock):
        fed = Federation()
        fed.join("east", self.make_member(vclock, ["e1"], "east"))
        with pytest.raises(InvalidQueryError):
            fed.find(within=((0.0, 0.0, 0.0), -1.0))
