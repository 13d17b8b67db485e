"""Checks a stream of hotspot events for protocol violations.

Feed it events in emission order; it holds the per-pointer book and
records every rule break instead of raising, so a long run reports all
of its problems at once.

Rules enforced:
  * enter/leave strictly alternate per (hotspot, pointer), starting with enter
  * move only lands while inside
  * button_down/button_up strictly alternate per (hotspot, pointer, label)
  * drag per pointer: dragStart only with no drag open, dragEnter/dragLeave
    only inside an open drag and alternating per hotspot, dragEnd only
    inside an open drag and at most once per hotspot per drag
  * gesture_swipe only while inside; gesture_grab only from kinect pointers
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str
    index: int  # position in the fed stream


@dataclass
class _DragBook:
    open: bool = False
    entered: set[str] = field(default_factory=set)  # hotspots currently dragEnter'd
    ended: set[str] = field(default_factory=set)  # hotspots that saw dragEnd this drag


class TraceValidator:
    def __init__(self) -> None:
        self.violations: list[Violation] = []
        self._inside: set[tuple[str, str]] = set()  # (hotspot, pointer)
        self._held: set[tuple[str, str, str]] = set()  # (hotspot, pointer, label)
        self._drags: dict[str, _DragBook] = {}
        self._count = 0

    def _flag(self, rule: str, detail: str) -> None:
        self.violations.append(Violation(rule, detail, self._count))

    def feed(self, event: dict[str, Any]) -> None:
        kind = event.get("kind")
        hid = event.get("hotspot", "?")
        ptr = event.get("pointer", "?")
        key = (hid, ptr)
        drag = self._drags.setdefault(ptr, _DragBook())

        if kind == "enter":
            if key in self._inside:
                self._flag("enter-alternation", f"double enter {key}")
            self._inside.add(key)
        elif kind == "leave":
            if key not in self._inside:
                self._flag("leave-alternation", f"leave without enter {key}")
            self._inside.discard(key)
        elif kind == "move":
            if key not in self._inside:
                self._flag("move-inside", f"move while outside {key}")
        elif kind == "button_down":
            label = event.get("button", "?")
            bkey = (hid, ptr, label)
            if bkey in self._held:
                self._flag("button-alternation", f"double down {bkey}")
            if key not in self._inside:
                self._flag("button-inside", f"down while outside {key}")
            self._held.add(bkey)
        elif kind == "button_up":
            label = event.get("button", "?")
            bkey = (hid, ptr, label)
            if bkey not in self._held:
                self._flag("button-alternation", f"up without down {bkey}")
            self._held.discard(bkey)
        elif kind == "dragStart":
            if drag.open:
                self._flag("drag-lifecycle", f"dragStart while drag open for {ptr}")
            self._drags[ptr] = _DragBook(open=True)
        elif kind == "dragEnter":
            if not drag.open:
                self._flag("drag-lifecycle", f"dragEnter with no drag open for {ptr}")
            if hid in drag.entered:
                self._flag("drag-enter-alternation", f"double dragEnter {key}")
            drag.entered.add(hid)
        elif kind == "dragLeave":
            if not drag.open:
                self._flag("drag-lifecycle", f"dragLeave with no drag open for {ptr}")
            if hid not in drag.entered:
                self._flag("drag-enter-alternation", f"dragLeave without dragEnter {key}")
            drag.entered.discard(hid)
        elif kind == "dragEnd":
            if not drag.open:
                self._flag("drag-lifecycle", f"dragEnd with no drag open for {ptr}")
            if hid in drag.ended:
                self._flag("drag-end-once", f"second dragEnd {key} in one drag")
            drag.ended.add(hid)
            # the source's end closes the drag: it is the event carrying a
            # "target" key, or the payload event when source and target are
            # the same hotspot
            if "target" in event or event.get("source") == hid:
                self._drags[ptr] = _DragBook()
        elif kind == "gesture_swipe":
            if key not in self._inside:
                self._flag("gesture-inside", f"swipe while outside {key}")
        elif kind == "gesture_grab":
            if event.get("pointer_type") != "kinect":
                self._flag("gesture-source", f"grab from {event.get('pointer_type')!r}")

        self._count += 1

    def feed_payload(self, payload: bytes) -> None:
        import json

        self.feed(json.loads(payload.decode()))

    @property
    def ok(self) -> bool:
        return not self.violations
