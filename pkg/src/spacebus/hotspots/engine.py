"""Turns pointer samples into hotspot interaction events.

Every pointer is tracked against every hotspot: crossing a box boundary
makes enter/leave, dwelling inside makes move, button edges make
button_down/button_up with capture (the up goes to whoever saw the down,
wherever the pointer is now), and a held button that wanders far enough
becomes a drag. Within one ingested sample events come out grouped:
leaves, enters, moves, button downs, button ups, then drag transitions
(start, leave, enter, end), then gestures. Hotspots are visited in
insertion order throughout, which is what makes parent-before-child hold
when parents are added first.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional

from ..broker.core import Broker
from ..clock import MS, Clock, SystemClock
from ..errors import (
    ConflictError,
    FrameError,
    InvalidArgumentError,
    InvalidHierarchyError,
    NoDragContextError,
    NotFoundError,
    RejectedPublishError,
)
from ..geometry import (
    Aabb,
    FrameGraph,
    Ray,
    Vec3,
    point_to_ray_distance,
    ray_aabb_intersect,
)
from ..pointer import PointerSample, decode, normalize
from .events import HotspotEvent

logger = logging.getLogger(__name__)

DRAG_THRESHOLD_MM = 30.0
TAP_MAX_MS = 400
SWIPE_MIN_MM = 120.0
SWIPE_WINDOW_MS = 500
EVENT_BUFFER_CAP = 1024

POINTING_PATTERN = "#.pointing"


@dataclass(frozen=True)
class Hotspot:
    id: str
    box: Aabb
    frame: str
    accepts_drop: bool = False
    parent: Optional[str] = None


@dataclass
class _HitInfo:
    t: float
    root: Vec3
    local: Vec3


@dataclass
class _Press:
    button: str
    source: str
    press_point: Vec3  # root frame, where the button went down
    press_time_ns: int
    drag_active: bool = False
    payload: Any = None
    target: Optional[str] = None
    left_source: bool = False


@dataclass
class _PointerState:
    inside: set[str] = field(default_factory=set)
    buttons: frozenset[str] = field(default_factory=frozenset)
    captures: dict[str, list[str]] = field(default_factory=dict)  # label -> hotspots
    press: Optional[_Press] = None
    last_hit: dict[str, _HitInfo] = field(default_factory=dict)
    swipe: dict[str, deque] = field(default_factory=dict)  # hotspot -> (t_ns, point)
    hand_closed: bool = False


def _word_ok(w: str) -> bool:
    return bool(w) and "." not in w and not any(c.isspace() for c in w)


class HotspotEngine:
    """Owns the hotspot set and the per-pointer interaction state."""

    def __init__(
        self,
        broker: Broker,
        frames: FrameGraph,
        *,
        clock: Optional[Clock] = None,
        root_frame: str = "root",
    ):
        self.broker = broker
        self.frames = frames
        self.clock = clock or SystemClock()
        self.root_frame = root_frame
        self._hotspots: dict[str, Hotspot] = {}
        self._pointers: dict[str, _PointerState] = {}
        self._buffer: deque[tuple[str, bytes]] = deque()
        self.dropped_events = 0
        self.decode_errors = 0
        self._sub = None

    # -- hotspot set -------------------------------------------------------

    def add_hotspot(
        self,
        hid: str,
        box: Aabb,
        *,
        frame: Optional[str] = None,
        accepts_drop: bool = False,
        parent: Optional[str] = None,
    ) -> Hotspot:
        if not _word_ok(hid):
            raise InvalidArgumentError(f"hotspot id {hid!r} is not a topic word")
        if hid in self._hotspots:
            raise ConflictError(f"hotspot {hid!r} already exists")
        frame = frame or self.root_frame
        if not self.frames.has_frame(frame):
            raise FrameError(f"unknown frame {frame!r}")
        if parent is not None and parent not in self._hotspots:
            raise InvalidHierarchyError(f"parent hotspot {parent!r} must exist first")
        hs = Hotspot(id=hid, box=box, frame=frame, accepts_drop=accepts_drop, parent=parent)
        self._hotspots[hid] = hs
        return hs

    def remove_hotspot(self, hid: str) -> None:
        if hid not in self._hotspots:
            raise NotFoundError(f"no hotspot {hid!r}")
        del self._hotspots[hid]
        for st in self._pointers.values():
            st.inside.discard(hid)
            st.last_hit.pop(hid, None)
            st.swipe.pop(hid, None)
            for hotspots in st.captures.values():
                if hid in hotspots:
                    hotspots.remove(hid)
            if st.press is not None and st.press.source == hid:
                st.press = None

    def hotspots(self) -> list[Hotspot]:
        return list(self._hotspots.values())

    # -- wiring ------------------------------------------------------------

    def start(self) -> None:
        """Subscribe to every pointer stream on the broker."""
        if self._sub is not None:
            return
        self._sub = self.broker.subscribe(
            POINTING_PATTERN, mode="push", callback=self._on_pointer_message
        )

    def stop(self) -> None:
        if self._sub is not None:
            self._sub.cancel()
            self._sub = None

    def _on_pointer_message(self, msg) -> None:
        try:
            sample = decode(msg.payload)
        except Exception as e:
            self.decode_errors += 1
            logger.warning("undecodable pointer sample on %s: %s", msg.topic, e)
            return
        self.ingest(sample)

    def set_drag_payload(self, pointer: str, payload: Any) -> None:
        st = self._pointers.get(pointer)
        if st is None or st.press is None:
            raise NoDragContextError(f"pointer {pointer!r} has no press in progress")
        st.press.payload = payload

    # -- the state machine -------------------------------------------------

    def ingest(self, sample: PointerSample) -> list[HotspotEvent]:
        sample = normalize(sample)
        now_ns = self.clock.now_ns()
        now_ms = now_ns // MS
        st = self._pointers.setdefault(sample.name, _PointerState())

        ray = Ray(sample.loc, sample.aim)
        src_frame = sample.details.get("frame", self.root_frame)
        if src_frame != self.root_frame:
            ray = self.frames.transform_ray(ray, src_frame, self.root_frame)

        hits: dict[str, _HitInfo] = {}
        for hid, hs in self._hotspots.items():
            to_local = self.frames.resolve(self.root_frame, hs.frame)
            h = ray_aabb_intersect(to_local.apply_ray(ray), hs.box)
            if h is not None:
                hits[hid] = _HitInfo(
                    t=h.t,
                    root=to_local.inverse().apply_point(h.point),
                    local=h.point,
                )

        inside_now = set(hits)
        events: list[HotspotEvent] = []

        def emit(kind: str, hid: str, **extras: Any) -> None:
            info = hits.get(hid) or st.last_hit.get(hid)
            events.append(
                HotspotEvent(
                    kind=kind,
                    hotspot=hid,
                    pointer=sample.name,
                    pointer_type=sample.type,
                    time_ms=now_ms,
                    point=info.root if info else None,
                    local_point=info.local if info else None,
                    extras=extras,
                )
            )

        # leaves, then enters, then moves
        leaves = [h for h in self._hotspots if h in st.inside and h not in inside_now]
        enters = [h for h in self._hotspots if h in inside_now and h not in st.inside]
        moves = [h for h in self._hotspots if h in inside_now and h in st.inside]
        for hid in leaves:
            emit("leave", hid)
            st.swipe.pop(hid, None)
        for hid in enters:
            emit("enter", hid)
        for hid in moves:
            emit("move", hid)

        # button edges; the up goes to whoever captured the down
        cur_buttons = frozenset(sample.buttons)
        downs = sorted(cur_buttons - st.buttons)
        ups = sorted(st.buttons - cur_buttons)
        for label in downs:
            capturers = [h for h in self._hotspots if h in inside_now]
            for hid in capturers:
                emit("button_down", hid, button=label)
            if capturers:
                st.captures[label] = capturers
            if st.press is None and hits:
                source = min(hits, key=lambda h: (hits[h].t, h))
                st.press = _Press(
                    button=label,
                    source=source,
                    press_point=hits[source].root,
                    press_time_ns=now_ns,
                )
        for label in ups:
            for hid in st.captures.pop(label, []):
                emit("button_up", hid, button=label, drag_active=bool(
                    st.press is not None
                    and st.press.button == label
                    and st.press.drag_active
                ))

        # drag lifecycle
        press = st.press
        if press is not None and press.source in leaves:
            press.left_source = True
        if press is not None and not press.drag_active and press.button in cur_buttons:
            travel = point_to_ray_distance(press.press_point, ray)
            if travel > DRAG_THRESHOLD_MM:
                press.drag_active = True
                emit("dragStart", press.source)
        if press is not None and press.drag_active:
            candidates = [
                h
                for h in hits
                if self._hotspots[h].accepts_drop
                and (h != press.source or press.left_source)
            ]
            desired = (
                min(candidates, key=lambda h: (hits[h].t, h)) if candidates else None
            )
            if desired != press.target:
                if press.target is not None:
                    emit("dragLeave", press.target)
                if desired is not None:
                    emit("dragEnter", desired)
                press.target = desired

        tap_source: Optional[str] = None
        if press is not None and press.button in ups:
            if press.drag_active:
                if press.target is not None and press.target != press.source:
                    emit("dragEnd", press.target, payload=press.payload, source=press.source)
                    emit("dragEnd", press.source, target=press.target)
                elif press.target == press.source and press.target is not None:
                    emit("dragEnd", press.source, payload=press.payload, source=press.source)
                else:
                    emit("dragEnd", press.source, target=None)
            elif now_ns - press.press_time_ns <= TAP_MAX_MS * MS:
                tap_source = press.source
            st.press = None

        # gestures: taps, then swipes, then grabs
        if tap_source is not None:
            emit("gesture_tap", tap_source)

        if cur_buttons:
            st.swipe.clear()
        else:
            for hid in self._hotspots:
                if hid not in inside_now:
                    continue
                window = st.swipe.setdefault(hid, deque())
                window.append((now_ns, hits[hid].root))
                horizon = now_ns - SWIPE_WINDOW_MS * MS
                while window and window[0][0] < horizon:
                    window.popleft()
                start_pt = window[0][1]
                end_pt = window[-1][1]
                disp = end_pt - start_pt
                if disp.norm() >= SWIPE_MIN_MM:
                    emit(
                        "gesture_swipe",
                        hid,
                        displacement=[disp.x, disp.y, disp.z],
                        distance_mm=disp.norm(),
                    )
                    window.clear()

        if sample.type == "kinect":
            closed = sample.details.get("hand_state") == "closed"
            if closed and not st.hand_closed:
                for hid in self._hotspots:
                    if hid in inside_now:
                        emit("gesture_grab", hid)
            st.hand_closed = closed

        # commit state for the next sample
        st.inside = inside_now
        st.buttons = cur_buttons
        for hid, info in hits.items():
            st.last_hit[hid] = info

        for ev in events:
            self._publish(str(ev.topic()), ev.encode())
        return events

    # -- emission with a crash cushion ------------------------------------

    def _publish(self, topic: str, payload: bytes) -> None:
        while self._buffer:
            t0, p0 = self._buffer[0]
            try:
                self.broker.publish(t0, p0, publisher="hotspot-engine")
            except RejectedPublishError:
                break
            self._buffer.popleft()
        try:
            self.broker.publish(topic, payload, publisher="hotspot-engine")
        except RejectedPublishError:
            if len(self._buffer) >= EVENT_BUFFER_CAP:
                self._buffer.popleft()
                self.dropped_events += 1
            self._buffer.append((topic, payload))

    def attach_broker(self, broker: Broker) -> None:
        """Swap in a live broker (after a restart) and drain anything buffered."""
        self.broker = broker
        self._sub = None
        self.start()
        while self._buffer:
            t0, p0 = self._buffer[0]
            try:
                self.broker.publish(t0, p0, publisher="hotspot-engine")
            except RejectedPublishError:
                return
            self._buffer.popleft()

    @property
    def buffered_events(self) -> int:
        return len(self._buffer)

    # -- rpc surface -------------------------------------------------------

    def rpc_handler(self, op: str, args: dict[str, Any]) -> dict[str, Any]:
        if op == "create_hotspot":
            box = Aabb(Vec3(*args["min"]), Vec3(*args["max"]))
            self.add_hotspot(
                args["id"],
                box,
                frame=args.get("frame"),
                accepts_drop=bool(args.get("accepts_drop", False)),
                parent=args.get("parent"),
            )
            return {"id": args["id"]}
        if op == "remove_hotspot":
            self.remove_hotspot(args["id"])
            return {}
        if op == "list_hotspots":
            return {"hotspots": [h.id for h in self.hotspots()]}
        if op == "set_drag_payload":
            self.set_drag_payload(args["pointer"], args.get("payload"))
            return {}
        raise NotFoundError(f"unknown op {op!r}")
