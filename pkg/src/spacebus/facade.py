"""Application-facing API: capabilities instead of topics.

A SpaceHandle wraps one broker and one registry. Applications ask it
for capability objects (transcript, speaker, pointing, hotspots,
display) and never touch a topic string; the mapping lives here. All
callbacks for one handle run on a single dispatch timeline, so user
code needs no locks of its own.

The broker side accepts either an in-process Broker or a
``loopback://host:port`` address; same for the registry. Construction
is atomic: if any part fails to connect, nothing stays half-open.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from dataclasses import dataclass
from typing import Any, Callable, Optional, Union

from .broker.core import Broker, Message
from .broker.listener import BrokerClient
from .clock import SystemClock
from .errors import (
    ClosedHandleError,
    ConnectError,
    InvalidArgumentError,
    SpacebusError,
)
from .geometry import Aabb, Vec3
from .pointer import PointerSample, decode
from .registry.core import SpaceRegistry
from .registry.rpc import RemoteRegistry
from .topics import Topic

logger = logging.getLogger(__name__)

HOTSPOT_ENGINE_SERVICE = "hotspot-engine"

BrokerLike = Union[Broker, str]
RegistryLike = Union[SpaceRegistry, RemoteRegistry, str]


@dataclass
class SpaceConfig:
    broker: BrokerLike
    registry: RegistryLike
    space_id: str = "space"
    default_speaker_location: Optional[str] = None


class _RemoteBrokerPort:
    """Adapts BrokerClient to the subscribe/publish surface the facade uses."""

    def __init__(self, address: str):
        addr = address[len("loopback://"):] if address.startswith("loopback://") else address
        host, _, port = addr.rpartition(":")
        if not port.isdigit():
            raise ConnectError("broker", f"bad address {address!r}")
        self.client = BrokerClient(host or "127.0.0.1", int(port))
        self._clock = SystemClock()

    def publish(self, topic: str, payload: bytes, headers=None, *, publisher: str = "facade") -> None:
        self.client.publish(topic, payload, headers)

    def subscribe(self, pattern: str, *, mode: str = "push", callback=None, **_kw):
        def shim(topic: str, headers: dict[str, str], payload: bytes) -> None:
            callback(
                Message(
                    topic=Topic.parse(topic),
                    payload=payload,
                    headers=headers,
                    publish_time=self._clock.now_ns(),
                    seq=0,
                    publisher=headers.get("x-publisher", "remote"),
                    global_seq=0,
                )
            )

        sub_id = self.client.subscribe(pattern, shim)
        port = self

        class _Handle:
            def cancel(self) -> None:
                port.client.cancel(sub_id)

        return _Handle()

    def close(self) -> None:
        self.client.close()


def connect(config: SpaceConfig) -> "SpaceHandle":
    """Open a handle; on any failure nothing is left connected."""
    port: Any = None
    opened_port = False
    try:
        if isinstance(config.broker, str):
            try:
                port = _RemoteBrokerPort(config.broker)
            except SpacebusError as e:
                raise ConnectError("broker", str(e)) from e
            opened_port = True
        elif isinstance(config.broker, Broker):
            if config.broker.is_closed:
                raise ConnectError("broker", "broker is shut down")
            port = config.broker
        else:
            raise ConnectError("broker", f"unsupported broker {type(config.broker).__name__}")

        if isinstance(config.registry, str):
            registry: Any = RemoteRegistry(config.registry)
        else:
            registry = config.registry
        try:
            registry.find(name="connect-probe")
        except SpacebusError as e:
            raise ConnectError("registry", str(e)) from e

        return SpaceHandle(config, port, registry)
    except ConnectError:
        if opened_port and port is not None:
            port.close()
        raise


class SpaceHandle:
    """Created via connect(); owns the dispatch timeline and all capabilities."""

    def __init__(self, config: SpaceConfig, port: Any, registry: Any):
        self.config = config
        self.space_id = config.space_id
        self._port = port
        self._owns_port = isinstance(config.broker, str)
        self._registry = registry
        self._subs: list = []
        self._closed = False
        self._lock = threading.Lock()
        # inline brokers already serialize callbacks on the publish timeline;
        # everything else funnels through one dispatcher thread
        self._inline = isinstance(port, Broker) and port.dispatch == "inline"
        self._q: Optional[queue.Queue] = None
        self._thread: Optional[threading.Thread] = None
        if not self._inline:
            self._q = queue.Queue()
            self._thread = threading.Thread(target=self._pump, daemon=True)
            self._thread.start()
        self.transcript = TranscriptCapability(self)
        self.speaker = SpeakerCapability(self)
        self.pointing = PointingCapability(self)
        self.hotspots = HotspotsCapability(self)

    # -- dispatch timeline -------------------------------------------------

    def _pump(self) -> None:
        assert self._q is not None
        while True:
            item = self._q.get()
            if item is None:
                return
            fn, arg = item
            self._run_callback(fn, arg)

    @staticmethod
    def _run_callback(fn: Callable, arg: Any) -> None:
        try:
            fn(arg)
        except Exception:
            logger.exception("facade callback failed")

    def _dispatch(self, fn: Callable, arg: Any) -> None:
        if self._inline:
            self._run_callback(fn, arg)
        else:
            assert self._q is not None
            self._q.put((fn, arg))

    def _subscribe(self, pattern: str, handler: Callable[[Message], None]):
        with self._lock:
            if self._closed:
                raise ClosedHandleError("handle is closed")
            sub = self._port.subscribe(
                pattern, mode="push", callback=lambda msg: self._dispatch(handler, msg)
            )
            self._subs.append(sub)
            return sub

    def _check_open(self) -> None:
        if self._closed:
            raise ClosedHandleError("handle is closed")

    # -- direct operations -------------------------------------------------

    def publish(self, topic: str, payload: bytes, headers: Optional[dict[str, str]] = None) -> None:
        self._check_open()
        self._port.publish(topic, payload, headers, publisher="facade")

    def call_service(
        self,
        name: str,
        op: str,
        args: Optional[dict[str, Any]] = None,
        *,
        timeout: float = 5.0,
    ) -> dict[str, Any]:
        self._check_open()
        return self._registry.call(name, op, args or {}, timeout=timeout)

    def display(self, display_id: str) -> "DisplayCapability":
        self._check_open()
        return DisplayCapability(self, display_id)

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            subs, self._subs = self._subs, []
        for sub in subs:
            try:
                sub.cancel()
            except SpacebusError:
                pass
        if self._q is not None:
            self._q.put(None)
        if self._owns_port:
            self._port.close()


def _parse_json(msg: Message) -> Optional[dict[str, Any]]:
    try:
        obj = json.loads(msg.payload.decode())
        return obj if isinstance(obj, dict) else None
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None


class TranscriptCapability:
    def __init__(self, handle: SpaceHandle):
        self._handle = handle

    def _on_stage(self, stage: str, callback: Callable[[dict[str, Any]], None]) -> None:
        def handler(msg: Message) -> None:
            obj = _parse_json(msg)
            if obj is not None:
                callback(obj)

        self._handle._subscribe(f"#.{stage}.transcript", handler)

    def on_final(self, callback: Callable[[dict[str, Any]], None]) -> None:
        self._on_stage("final", callback)

    def on_interim(self, callback: Callable[[dict[str, Any]], None]) -> None:
        self._on_stage("interim", callback)


class SpeakerCapability:
    def __init__(self, handle: SpaceHandle):
        self._handle = handle

    def speak(self, text: str, *, location: Optional[str] = None, voice: str = "default") -> None:
        """Fire-and-forget: the request is queued for the location's speaker."""
        if not isinstance(text, str) or not text.strip():
            raise InvalidArgumentError("speak needs non-empty text")
        loc = location or self._handle.config.default_speaker_location
        if not loc:
            raise InvalidArgumentError("no speaker location given or configured")
        command = {"text": text, "location": loc, "voice": voice}
        self._handle.publish(
            f"speaker.{loc}.speak",
            json.dumps(command, sort_keys=True, separators=(",", ":")).encode(),
        )


class PointingCapability:
    def __init__(self, handle: SpaceHandle):
        self._handle = handle

    def on_event(
        self,
        callback: Callable[[PointerSample], None],
        *,
        pattern: str = "#.pointing",
    ) -> None:
        def handler(msg: Message) -> None:
            try:
                sample = decode(msg.payload)
            except SpacebusError as e:
                logger.warning("undecodable pointer sample: %s", e)
                return
            callback(sample)

        self._handle._subscribe(pattern, handler)


class HotspotsCapability:
    def __init__(self, handle: SpaceHandle):
        self._handle = handle

    def create(
        self,
        hotspot_id: str,
        box_min: tuple[float, float, float],
        box_max: tuple[float, float, float],
        *,
        frame: Optional[str] = None,
        accepts_drop: bool = False,
        parent: Optional[str] = None,
    ) -> "HotspotHandle":
        Aabb(Vec3(*box_min), Vec3(*box_max))  # fail fast on a bad box
        self._handle.call_service(
            HOTSPOT_ENGINE_SERVICE,
            "create_hotspot",
            {
                "id": hotspot_id,
                "min": list(box_min),
                "max": list(box_max),
                "frame": frame,
                "accepts_drop": accepts_drop,
                "parent": parent,
            },
        )
        return HotspotHandle(self._handle, hotspot_id)


class HotspotHandle:
    """One created hotspot: event hooks by kind plus drag helpers."""

    def __init__(self, handle: SpaceHandle, hotspot_id: str):
        self._handle = handle
        self.id = hotspot_id

    def on(self, kind: str, callback: Callable[[dict[str, Any]], None]) -> None:
        # dragDrop is sugar for "something was dropped here": the dragEnd
        # carrying a payload
        want_drop = kind == "dragDrop"
        topic_kind = "dragEnd" if want_drop else kind

        def handler(msg: Message) -> None:
            event = _parse_json(msg)
            if event is None:
                return
            if want_drop and "payload" not in event:
                return
            callback(event)

        self._handle._subscribe(f"{self.id}.{topic_kind}.hotspot", handler)

    def set_drag_payload(self, pointer: str, payload: Any) -> None:
        self._handle.call_service(
            HOTSPOT_ENGINE_SERVICE,
            "set_drag_payload",
            {"pointer": pointer, "payload": payload},
        )

    def remove(self) -> None:
        self._handle.call_service(
            HOTSPOT_ENGINE_SERVICE, "remove_hotspot", {"id": self.id}
        )


class DisplayCapability:
    def __init__(self, handle: SpaceHandle, display_id: str):
        self._handle = handle
        self.id = display_id
        self._service = f"display-{display_id}"

    def on_input2d(self, callback: Callable[[dict[str, Any]], None]) -> None:
        def handler(msg: Message) -> None:
            obj = _parse_json(msg)
            if obj is not None:
                callback(obj)

        self._handle._subscribe(f"display.{self.id}.input2d", handler)

    def create_window(self, **args: Any) -> str:
        return self._handle.call_service(self._service, "create_window", args)["window"]

    def put_item(self, layer: str, item_id: str, item: Any) -> None:
        self._handle.call_service(
            self._service, "put_item", {"layer": layer, "id": item_id, "item": item}
        )

    def remove_item(self, layer: str, item_id: str) -> None:
        self._handle.call_service(
            self._service, "remove_item", {"layer": layer, "id": item_id}
        )

    def get_layers(self) -> dict[str, Any]:
        return self._handle.call_service(self._service, "get_layers", {})
