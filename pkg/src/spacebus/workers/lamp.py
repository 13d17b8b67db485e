"""Lamp actuator worker.

Watches one hotspot. A drop (dragEnd with a payload) recolors the lamp
by sentiment: positive is green, negative is red, anything else is an
error message and no change. A plain button_up of the toggle button
that did not conclude a drag flips the lamp between off and whatever
color it last showed.
"""

from __future__ import annotations

import json
import logging

from ..broker.core import Broker, Message

logger = logging.getLogger(__name__)

SENTIMENT_COLORS = {"positive": "green", "negative": "red"}
DEFAULT_COLOR = "red"  # a recording sign lights up red
TOGGLE_BUTTON = "b1"


class LampWorker:
    def __init__(self, broker: Broker, *, lamp_id: str, hotspot: str):
        self.broker = broker
        self.lamp_id = lamp_id
        self.hotspot = hotspot
        self.color = "off"
        self.last_color = DEFAULT_COLOR
        self.errors = 0
        self._subs: list = []

    def start(self) -> None:
        if self._subs:
            return
        self._subs = [
            self.broker.subscribe(
                f"{self.hotspot}.dragEnd.hotspot", mode="push", callback=self._on_drag_end
            ),
            self.broker.subscribe(
                f"{self.hotspot}.button_up.hotspot", mode="push", callback=self._on_button_up
            ),
        ]

    def stop(self) -> None:
        for s in self._subs:
            s.cancel()
        self._subs = []

    def _on_drag_end(self, msg: Message) -> None:
        try:
            event = json.loads(msg.payload.decode())
        except json.JSONDecodeError as e:
            self._error(f"undecodable dragEnd event: {e}")
            return
        if "payload" not in event:
            return  # the drag's source-side notification, nothing dropped here
        payload = event["payload"]
        sentiment = payload.get("sentiment") if isinstance(payload, dict) else None
        color = SENTIMENT_COLORS.get(sentiment)
        if color is None:
            self._error(f"no usable sentiment in drop payload: {payload!r}")
            return
        self.color = color
        self.last_color = color
        self._publish_state()

    def _on_button_up(self, msg: Message) -> None:
        try:
            event = json.loads(msg.payload.decode())
        except json.JSONDecodeError as e:
            self._error(f"undecodable button event: {e}")
            return
        if event.get("button") != TOGGLE_BUTTON or event.get("drag_active"):
            return
        if self.color == "off":
            self.color = self.last_color
        else:
            self.last_color = self.color
            self.color = "off"
        self._publish_state()

    def _publish_state(self) -> None:
        self.broker.publish(
            f"lamp.{self.lamp_id}.state",
            json.dumps(
                {"lamp": self.lamp_id, "color": self.color},
                sort_keys=True,
                separators=(",", ":"),
            ).encode(),
            publisher=f"lamp-{self.lamp_id}",
        )

    def _error(self, message: str) -> None:
        self.errors += 1
        self.broker.publish(
            f"lamp.{self.lamp_id}.error",
            json.dumps({"error": message}, sort_keys=True, separators=(",", ":")).encode(),
            publisher=f"lamp-{self.lamp_id}",
        )
