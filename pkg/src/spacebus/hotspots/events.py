"""Hotspot event records and their broker encoding.

Topic shape: ``<hotspot-id>.<kind>.hotspot`` where kind is one of the
interaction words (enter, leave, move, button_down, button_up, dragStart,
dragEnter, dragLeave, dragEnd) or ``gesture_<type>``. Payloads are JSON
with sorted keys so identical events encode identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from ..geometry import Vec3
from ..topics import Topic

KINDS = frozenset(
    {
        "enter",
        "leave",
        "move",
        "button_down",
        "button_up",
        "dragStart",
        "dragEnter",
        "dragLeave",
        "dragEnd",
        "gesture_tap",
        "gesture_swipe",
        "gesture_grab",
    }
)


@dataclass(frozen=True)
class HotspotEvent:
    kind: str
    hotspot: str
    pointer: str
    pointer_type: str
    time_ms: int
    point: Optional[Vec3] = None  # root frame
    local_point: Optional[Vec3] = None  # hotspot frame
    extras: dict[str, Any] = field(default_factory=dict)

    def topic(self) -> Topic:
        return Topic((self.hotspot, self.kind, "hotspot"))

    def to_obj(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "kind": self.kind,
            "hotspot": self.hotspot,
            "pointer": self.pointer,
            "pointer_type": self.pointer_type,
            "time_ms": self.time_ms,
        }
        if self.point is not None:
            obj["point"] = [self.point.x, self.point.y, self.point.z]
        if self.local_point is not None:
            obj["local_point"] = [self.local_point.x, self.local_point.y, self.local_point.z]
        obj.update(self.extras)
        return obj

    def encode(self) -> bytes:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":")).encode()
