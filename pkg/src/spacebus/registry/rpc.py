"""Address-resolved request/response plumbing.

Two address schemes:

  local://<key>        in-process handler looked up on a shared router
  loopback://host:port one TCP frame out, one frame back

The default caller understands both, so a registry can route a call to
whichever kind of endpoint the entry advertises. A registry itself can
also be served over loopback (RegistryListener) and consumed remotely
(RemoteRegistry), which is what federation across processes uses.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
from typing import Any, Callable, Optional

from ..broker.wire import encode_frame, read_frame
from ..errors import (
    CallTimeoutError,
    FrameCodecError,
    NotFoundError,
    SpacebusError,
    UnreachableError,
)
from .core import ServiceEntry, SpaceRegistry

logger = logging.getLogger(__name__)

Handler = Callable[[str, dict[str, Any]], dict[str, Any]]


class LocalRpcRouter:
    """Keyed dispatch table for in-process services."""

    def __init__(self) -> None:
        self._handlers: dict[str, Handler] = {}
        self._lock = threading.Lock()

    def register(self, key: str, handler: Handler) -> None:
        with self._lock:
            self._handlers[key] = handler

    def unregister(self, key: str) -> None:
        with self._lock:
            self._handlers.pop(key, None)

    def dispatch(self, key: str, op: str, args: dict[str, Any]) -> dict[str, Any]:
        with self._lock:
            handler = self._handlers.get(key)
        if handler is None:
            raise UnreachableError(f"no local handler for {key!r}")
        return handler(op, args)


def _parse_hostport(rest: str) -> tuple[str, int]:
    host, sep, port = rest.rpartition(":")
    if not sep or not port.isdigit():
        raise UnreachableError(f"bad loopback address {rest!r}")
    return host or "127.0.0.1", int(port)


def rpc_call(
    host: str,
    port: int,
    service: str,
    op: str,
    args: dict[str, Any],
    *,
    timeout: float = 5.0,
) -> dict[str, Any]:
    """One request frame, one reply frame, over a fresh connection."""
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as e:
        raise UnreachableError(f"{host}:{port}: {e}") from e
    try:
        sock.settimeout(timeout)
        payload = json.dumps(args, sort_keys=True).encode()
        sock.sendall(encode_frame(service, {"x-op": op}, payload))
        stream = sock.makefile("rb")
        try:
            frame = read_frame(stream)
        except socket.timeout as e:
            raise CallTimeoutError(f"{service}.{op}: no reply in {timeout}s") from e
        except FrameCodecError as e:
            raise UnreachableError(f"{service}.{op}: {e}") from e
        if frame is None:
            raise UnreachableError(f"{service}.{op}: connection closed")
        topic, headers, body = frame
        if topic == "+err":
            raise _revive(headers.get("x-error-type", ""), headers.get("x-error", "call failed"))
        return json.loads(body.decode()) if body else {}
    except socket.timeout as e:
        raise CallTimeoutError(f"{service}.{op}: no reply in {timeout}s") from e
    finally:
        sock.close()


def _revive(err_type: str, message: str) -> SpacebusError:
    """Rebuild a typed error from its wire form; defaults to UnreachableError."""
    from .. import errors as errmod

    cls = getattr(errmod, err_type, None)
    if isinstance(cls, type) and issubclass(cls, SpacebusError) and cls is not SpacebusError:
        try:
            return cls(message)
        except TypeError:
            pass
    return UnreachableError(message)


def default_caller(router: Optional[LocalRpcRouter] = None) -> Callable:
    """Caller for SpaceRegistry.call covering both address schemes."""

    def call(address: str, service: str, op: str, args: dict[str, Any], timeout: float) -> dict[str, Any]:
        if address.startswith("local://"):
            if router is None:
                raise UnreachableError(f"{service}: no local router bound")
            try:
                return router.dispatch(address[len("local://"):], op, args)
            except SpacebusError:
                raise  # typed errors cross the boundary as themselves
            except Exception as e:
                raise UnreachableError(f"{service}.{op}: {e}") from e
        if address.startswith("loopback://"):
            host, port = _parse_hostport(address[len("loopback://"):])
            return rpc_call(host, port, service, op, args, timeout=timeout)
        raise UnreachableError(f"{service}: unsupported address {address!r}")

    return call


class _FrameServer:
    """Accept loop + per-connection request/reply framing."""

    def __init__(self, host: str, port: int, handle: Callable[[str, dict[str, str], bytes], tuple[str, dict[str, str], bytes]]):
        self._srv = socket.create_server((host, port))
        self.host, self.port = self._srv.getsockname()[:2]
        self._handle = handle
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def close(self) -> None:
        self._stop.set()
        try:
            self._srv.close()
        except OSError:
            pass

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._srv.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn: socket.socket) -> None:
        stream = conn.makefile("rb")
        try:
            while True:
                frame = read_frame(stream)
                if frame is None:
                    return
                topic, headers, payload = frame
                try:
                    rt, rh, rp = self._handle(topic, headers, payload)
                except SpacebusError as e:
                    rt, rh, rp = "+err", {"x-error": str(e), "x-error-type": type(e).__name__}, b""
                except Exception as e:
                    logger.exception("rpc handler failed")
                    rt, rh, rp = "+err", {"x-error": str(e), "x-error-type": ""}, b""
                conn.sendall(encode_frame(rt, rh, rp))
        except (FrameCodecError, OSError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass


class RpcServer:
    """Serves router keys over loopback TCP; address is loopback://host:port."""

    def __init__(self, router: LocalRpcRouter, host: str = "127.0.0.1", port: int = 0):
        self.router = router
        self._server = _FrameServer(host, port, self._handle)
        self.host, self.port = self._server.host, self._server.port

    @property
    def address(self) -> str:
        return f"loopback://{self._server.address}"

    def close(self) -> None:
        self._server.close()

    def _handle(self, topic: str, headers: dict[str, str], payload: bytes):
        op = headers.get("x-op", "")
        args = json.loads(payload.decode()) if payload else {}
        result = self.router.dispatch(topic, op, args)
        return "+ok", {}, json.dumps(result, sort_keys=True).encode()


class RegistryListener:
    """Exposes one registry's verbs over loopback TCP.

    The frame topic is the verb; the payload is a JSON document. Answers
    come back as +ok with a JSON body, or +err with the error type named
    in a header so the client can raise the same thing.
    """

    def __init__(self, registry: SpaceRegistry, host: str = "127.0.0.1", port: int = 0):
        self.registry = registry
        self._server = _FrameServer(host, port, self._handle)
        self.host, self.port = self._server.host, self._server.port

    @property
    def address(self) -> str:
        return f"loopback://{self._server.address}"

    def close(self) -> None:
        self._server.close()

    def _handle(self, verb: str, headers: dict[str, str], payload: bytes):
        doc = json.loads(payload.decode()) if payload else {}
        if verb == "register":
            token = self.registry.register(ServiceEntry.from_dict(doc))
            body = {"token": token}
        elif verb == "renew":
            self.registry.renew(doc["token"])
            body = {}
        elif verb == "deregister":
            self.registry.deregister(doc["token"])
            body = {}
        elif verb == "find":
            query = dict(doc)
            if query.get("within") is not None:
                center, radius = query["within"]
                query["within"] = (tuple(center), float(radius))
            entries = self.registry.find(**query)
            body = {"entries": [e.to_dict() for e in entries]}
        elif verb == "call":
            result = self.registry.call(
                doc["service"], doc["op"], doc.get("args") or {},
                timeout=float(doc.get("timeout", 5.0)),
            )
            body = {"result": result}
        else:
            raise NotFoundError(f"unknown verb {verb!r}")
        return "+ok", {}, json.dumps(body, sort_keys=True).encode()


class RemoteRegistry:
    """Client for a registry served by RegistryListener.

    Presents the same find/call surface as SpaceRegistry, so a Federation
    can hold local and remote members interchangeably.
    """

    def __init__(self, address: str, *, timeout: float = 5.0):
        if address.startswith("loopback://"):
            address = address[len("loopback://"):]
        self.host, self.port = _parse_hostport(address)
        self.timeout = timeout

    def _verb(self, verb: str, doc: dict[str, Any], *, timeout: Optional[float] = None) -> dict[str, Any]:
        return rpc_call(
            self.host, self.port, verb, "", doc, timeout=timeout or self.timeout
        )

    def register(self, entry: ServiceEntry) -> str:
        return self._verb("register", entry.to_dict())["token"]

    def renew(self, token: str) -> None:
        self._verb("renew", {"token": token})

    def deregister(self, token: str) -> None:
        self._verb("deregister", {"token": token})

    def find(self, **query: Any) -> list[ServiceEntry]:
        doc = dict(query)
        if doc.get("within") is not None:
            center, radius = doc["within"]
            doc["within"] = [list(center), radius]
        out = self._verb("find", doc)
        return [ServiceEntry.from_dict(d) for d in out["entries"]]

    def lookup(self, name: str) -> ServiceEntry:
        hits = self.find(name=name)
        if not hits:
            raise NotFoundError(f"no service named {name!r}")
        return hits[0]

    def call(self, service: str, op: str, args: Optional[dict[str, Any]] = None, *, timeout: float = 5.0) -> dict[str, Any]:
        out = self._verb(
            "call",
            {"service": service, "op": op, "args": dict(args or {}), "timeout": timeout},
            timeout=timeout + 1.0,
        )
        return out["result"]
