"""Loopback TCP access to a broker, speaking the length-prefixed frames.

One socket carries everything for a client. Control frames set an
``x-action`` header (publish is the default action); server replies carry
``x-reply`` echoing the request's ``x-req`` id; pushed deliveries carry
``x-sub`` with the remote subscription id. Header keys starting with
``x-`` are reserved for the protocol and stripped from message headers.
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
from typing import Callable, Optional

from ..errors import CallTimeoutError, FrameCodecError, UnreachableError
from .core import Broker, Message
from .wire import encode_frame, read_frame

logger = logging.getLogger(__name__)

_RESERVED = "x-"


def _clean(headers: dict[str, str]) -> dict[str, str]:
    return {k: v for k, v in headers.items() if not k.startswith(_RESERVED)}


class BrokerListener:
    """Serves a broker on a loopback TCP address."""

    def __init__(self, broker: Broker, host: str = "127.0.0.1", port: int = 0):
        self.broker = broker
        self._srv = socket.create_server((host, port))
        self.host, self.port = self._srv.getsockname()[:2]
        self._conn_seq = itertools.count(1)
        self._stop = threading.Event()
        self._conns: set[socket.socket] = set()
        self._lock = threading.Lock()
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
        with self._lock:
            conns = list(self._conns)
        for c in conns:
            for op in (lambda: c.shutdown(socket.SHUT_RDWR), c.close):
                try:
                    op()
                except OSError:
                    pass

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _addr = self._srv.accept()
            except OSError:
                return
            with self._lock:
                self._conns.add(conn)
            threading.Thread(
                target=self._serve, args=(conn, next(self._conn_seq)), daemon=True
            ).start()

    def _serve(self, conn: socket.socket, conn_id: int) -> None:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        stream = conn.makefile("rb")
        wlock = threading.Lock()
        subs: dict[str, object] = {}
        sub_seq = itertools.count(1)
        publisher = f"conn-{conn_id}"

        def send(topic: str, headers: dict[str, str], payload: bytes = b"") -> None:
            data = encode_frame(topic, headers, payload)
            with wlock:
                conn.sendall(data)

        def deliver(sub_id: str, msg: Message) -> None:
            headers = dict(msg.headers)
            headers["x-sub"] = sub_id
            headers["x-publisher"] = msg.publisher
            headers["x-seq"] = str(msg.seq)
            headers["x-time"] = str(msg.publish_time)
            try:
                send(str(msg.topic), headers, msg.payload)
            except OSError:
                pass  # reader side will notice the dead socket

        try:
            while True:
                frame = read_frame(stream)
                if frame is None:
                    break
                topic, headers, payload = frame
                action = headers.get("x-action", "publish")
                req = headers.get("x-req")
                try:
                    self._handle(
                        topic, headers, payload, action,
                        publisher, subs, sub_seq, send, deliver,
                    )
                    if req is not None and action != "fetch":
                        send("+ok", {"x-reply": req})
                except FrameCodecError:
                    raise
                except Exception as e:  # surfaced to the client, connection stays up
                    if req is not None:
                        send("+err", {"x-reply": req, "x-error": str(e)})
                    else:
                        logger.warning("listener request failed: %s", e)
        except (FrameCodecError, OSError) as e:
            logger.debug("connection %s dropped: %s", conn_id, e)
        finally:
            for handle in subs.values():
                try:
                    handle.cancel()  # type: ignore[attr-defined]
                except Exception:
                    pass
            with self._lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _handle(self, topic, headers, payload, action, publisher, subs, sub_seq, send, deliver) -> None:
        if action == "publish":
            self.broker.publish(topic, payload, _clean(headers), publisher=publisher)
        elif action == "subscribe":
            # client picks the id so its callback is in place before any replay
            sub_id = headers.get("x-sub") or str(next(sub_seq))
            mode = headers.get("x-mode", "push")
            cb = (lambda m, s=sub_id: deliver(s, m)) if mode == "push" else None
            handle = self.broker.subscribe(
                topic,
                mode=mode,
                callback=cb,
                group=headers.get("x-group"),
                history_replay=headers.get("x-history-replay") == "1",
            )
            subs[sub_id] = handle
            req = headers.get("x-req")
            if req is not None:
                send("+ok", {"x-reply": req, "x-sub": sub_id})
                headers.pop("x-req")  # reply already sent
        elif action == "fetch":
            handle = subs.get(headers.get("x-sub", ""))
            req = headers.get("x-req", "")
            if handle is None:
                send("+err", {"x-reply": req, "x-error": "unknown subscription"})
                return
            msg = handle.fetch()  # type: ignore[attr-defined]
            if msg is None:
                send("+empty", {"x-reply": req})
            else:
                h = dict(msg.headers)
                h["x-reply"] = req
                h["x-publisher"] = msg.publisher
                h["x-seq"] = str(msg.seq)
                h["x-time"] = str(msg.publish_time)
                send(str(msg.topic), h, msg.payload)
        elif action == "cancel":
            handle = subs.pop(headers.get("x-sub", ""), None)
            if handle is not None:
                handle.cancel()  # type: ignore[attr-defined]
        elif action == "declare-history":
            self.broker.declare_history(topic, int(headers.get("x-capacity", "1")))
        else:
            raise FrameCodecError(f"unknown action {action!r}")


class BrokerClient:
    """Client side of the loopback protocol."""

    def __init__(self, host: str, port: int, *, timeout: float = 5.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise UnreachableError(f"broker at {host}:{port}: {e}") from e
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock.settimeout(None)
        self._stream = self._sock.makefile("rb")
        self._wlock = threading.Lock()
        self._req_seq = itertools.count(1)
        self._pending: dict[str, tuple[threading.Event, list]] = {}
        self._callbacks: dict[str, Callable] = {}
        self._plock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _send(self, topic: str, headers: dict[str, str], payload: bytes = b"") -> None:
        data = encode_frame(topic, headers, payload)
        with self._wlock:
            self._sock.sendall(data)

    def _request(self, topic: str, headers: dict[str, str], payload: bytes = b"", timeout: float = 5.0):
        req = str(next(self._req_seq))
        headers = dict(headers)
        headers["x-req"] = req
        ev: threading.Event = threading.Event()
        slot: list = []
        with self._plock:
            self._pending[req] = (ev, slot)
        self._send(topic, headers, payload)
        if not ev.wait(timeout):
            with self._plock:
                self._pending.pop(req, None)
            raise CallTimeoutError(f"no reply within {timeout}s")
        return slot[0]

    def _read_loop(self) -> None:
        try:
            while True:
                frame = read_frame(self._stream)
                if frame is None:
                    break
                topic, headers, payload = frame
                reply = headers.get("x-reply")
                if reply is not None:
                    with self._plock:
                        entry = self._pending.pop(reply, None)
                    if entry is not None:
                        entry[1].append((topic, headers, payload))
                        entry[0].set()
                    continue
                sub_id = headers.get("x-sub")
                if sub_id is not None:
                    cb = self._callbacks.get(sub_id)
                    if cb is not None:
                        try:
                            cb(topic, _clean(headers), payload)
                        except Exception:
                            logger.exception("push callback failed")
        except (FrameCodecError, OSError):
            pass
        finally:
            self._closed = True
            # unblock anyone waiting on a reply
            with self._plock:
                pending = list(self._pending.values())
                self._pending.clear()
            for ev, _slot in pending:
                ev.set()

    def publish(self, topic: str, payload: bytes = b"", headers: Optional[dict[str, str]] = None) -> None:
        self._send(topic, dict(headers or {}), payload)

    def subscribe(
        self,
        pattern: str,
        callback: Callable[[str, dict[str, str], bytes], None],
        *,
        group: Optional[str] = None,
        history_replay: bool = False,
    ) -> str:
        sub_id = f"c{next(self._req_seq)}"
        headers = {"x-action": "subscribe", "x-mode": "push", "x-sub": sub_id}
        if group:
            headers["x-group"] = group
        if history_replay:
            headers["x-history-replay"] = "1"
        # callback registered before the request goes out so replays are not lost
        self._callbacks[sub_id] = callback
        topic, rh, _ = self._request(pattern, headers)
        if topic == "+err":
            self._callbacks.pop(sub_id, None)
            raise UnreachableError(rh.get("x-error", "subscribe failed"))
        return sub_id

    def subscribe_fetch(self, pattern: str, *, history_replay: bool = False) -> str:
        headers = {"x-action": "subscribe", "x-mode": "fetch"}
        if history_replay:
            headers["x-history-replay"] = "1"
        topic, rh, _ = self._request(pattern, headers)
        if topic == "+err":
            raise UnreachableError(rh.get("x-error", "subscribe failed"))
        return rh["x-sub"]

    def fetch(self, sub_id: str, *, timeout: float = 5.0):
        topic, rh, payload = self._request(
            "+fetch", {"x-action": "fetch", "x-sub": sub_id}, timeout=timeout
        )
        if topic == "+empty":
            return None
        if topic == "+err":
            raise UnreachableError(rh.get("x-error", "fetch failed"))
        return topic, _clean(rh), payload

    def cancel(self, sub_id: str) -> None:
        self._callbacks.pop(sub_id, None)
        self._send("+cancel", {"x-action": "cancel", "x-sub": sub_id})

    def declare_history(self, pattern: str, capacity: int) -> None:
        self._request(pattern, {"x-action": "declare-history", "x-capacity": str(capacity)})

    def close(self) -> None:
        self._closed = True
        # shutdown, not just close: the reader thread's stream keeps the
        # descriptor alive, and the peer needs its FIN now
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
