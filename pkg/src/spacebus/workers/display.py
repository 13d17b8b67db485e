"""Headless display worker.

Owns a physical surface and the hotspot slab sitting on it. Hotspot
events for that slab are flattened to pixel coordinates and republished
as 2D input events with the original event embedded, which is the shape
a web view can consume directly. Content is modeled as four fixed
layers (cursor over canvas over content over background) holding
abstract items; cursors track every non-mouse pointer automatically,
everything else arrives via commands on the broker or registry calls.
"""

from __future__ import annotations

import itertools
import json
import logging
from typing import Any

from ..broker.core import Broker, Message
from ..errors import OffPlaneError
from ..geometry import DisplaySurface, Vec3, project_to_display

logger = logging.getLogger(__name__)

LAYER_ORDER = ("cursor", "canvas", "content", "background")

# event kinds that carry a usable point
_POINTED_KINDS = frozenset(
    {"enter", "move", "button_down", "button_up", "dragStart", "dragEnter", "dragLeave", "dragEnd", "gesture_tap", "gesture_swipe", "gesture_grab"}
)


class DisplayWorker:
    def __init__(
        self,
        broker: Broker,
        *,
        display_id: str,
        surface: DisplaySurface,
        hotspot: str,
    ):
        self.broker = broker
        self.display_id = display_id
        self.surface = surface
        self.hotspot = hotspot
        self.layers: dict[str, dict[str, Any]] = {layer: {} for layer in LAYER_ORDER}
        self.dropped_offplane = 0
        self.dropped_outside = 0
        self._window_seq = itertools.count(1)
        self._subs: list = []

    def start(self) -> None:
        if self._subs:
            return
        self._subs = [
            self.broker.subscribe(
                f"{self.hotspot}.*.hotspot", mode="push", callback=self._on_hotspot_event
            ),
            self.broker.subscribe(
                f"display.{self.display_id}.command",
                mode="push",
                callback=self._on_command,
            ),
        ]

    def stop(self) -> None:
        for s in self._subs:
            s.cancel()
        self._subs = []

    # -- 2D input ----------------------------------------------------------

    def _on_hotspot_event(self, msg: Message) -> None:
        try:
            event = json.loads(msg.payload.decode())
        except json.JSONDecodeError as e:
            logger.warning("undecodable hotspot event: %s", e)
            return
        kind = event.get("kind")

        if kind == "leave":
            self.layers["cursor"].pop(self._cursor_id(event), None)
            return
        if kind not in _POINTED_KINDS or event.get("point") is None:
            return

        point = Vec3(*event["point"])
        try:
            pixel = project_to_display(self.surface, point)
        except OffPlaneError:
            self.dropped_offplane += 1
            return
        if pixel is None:
            self.dropped_outside += 1
            return
        px, py = pixel

        if event.get("pointer_type") != "mouse" and kind in ("enter", "move"):
            self.layers["cursor"][self._cursor_id(event)] = {"px": px, "py": py}

        out = {
            "kind": kind,
            "px": px,
            "py": py,
            "pointer": event.get("pointer"),
            "event": event,
        }
        self.broker.publish(
            f"display.{self.display_id}.input2d",
            json.dumps(out, sort_keys=True, separators=(",", ":")).encode(),
            publisher=f"display-{self.display_id}",
        )

    @staticmethod
    def _cursor_id(event: dict[str, Any]) -> str:
        return f"cursor-{event.get('pointer', 'unknown')}"

    # -- layer mutations ---------------------------------------------------

    def _on_command(self, msg: Message) -> None:
        try:
            cmd = json.loads(msg.payload.decode())
            self._apply(cmd.get("op", ""), cmd)
        except Exception as e:
            self.broker.publish(
                f"display.{self.display_id}.error",
                json.dumps({"error": str(e)}, sort_keys=True).encode(),
                publisher=f"display-{self.display_id}",
            )

    def _apply(self, op: str, args: dict[str, Any]) -> dict[str, Any]:
        if op == "put_item":
            layer = args["layer"]
            if layer not in self.layers:
                raise ValueError(f"no layer {layer!r} (have {list(LAYER_ORDER)})")
            self.layers[layer][str(args["id"])] = args.get("item", {})
            return {}
        if op == "remove_item":
            layer = args["layer"]
            if layer not in self.layers:
                raise ValueError(f"no layer {layer!r} (have {list(LAYER_ORDER)})")
            self.layers[layer].pop(str(args["id"]), None)
            return {}
        raise ValueError(f"unknown display op {op!r}")

    # -- rpc surface -------------------------------------------------------

    def rpc_handler(self, op: str, args: dict[str, Any]) -> dict[str, Any]:
        if op == "create_window":
            wid = f"win-{next(self._window_seq)}"
            self.layers["content"][wid] = {
                "rect": args.get("rect", [0, 0, self.surface.width_px, self.surface.height_px]),
                "url": args.get("url"),
            }
            return {"window": wid}
        if op == "get_layers":
            return {"order": list(LAYER_ORDER), "layers": {k: dict(v) for k, v in self.layers.items()}}
        return self._apply(op, args)
