"""Text-to-speech worker, simulated.

Consumes SpeakCommand JSON from its queue topic in fetch mode, so speech
requests wait their turn instead of talking over each other. An
utterance runs 60 ms per whitespace-separated word between a
speaking-started and a speaking-ended message. A volume value rides
along: swipe gestures on a configured hotspot nudge it by 10 per swipe,
up for upward displacement, down otherwise.
"""

from __future__ import annotations

import json
import logging
from typing import Optional

from ..broker.core import Broker, Message
from ..clock import MS, Scheduler

logger = logging.getLogger(__name__)

MS_PER_WORD = 60
VOLUME_STEP = 10
VOLUME_MIN = 0
VOLUME_MAX = 100
VOLUME_START = 50


def queue_topic(location: str) -> str:
    return f"speaker.{location}.speak"


class SpeakerWorker:
    def __init__(
        self,
        broker: Broker,
        scheduler: Scheduler,
        *,
        location: str,
        volume_hotspot: Optional[str] = None,
    ):
        self.broker = broker
        self.scheduler = scheduler
        self.location = location
        self.volume_hotspot = volume_hotspot
        self.volume = VOLUME_START
        self.busy = False
        self.spoken = 0
        self.errors = 0
        self._queue_sub = None
        self._swipe_sub = None

    def start(self) -> None:
        if self._queue_sub is not None:
            return
        self._queue_sub = self.broker.subscribe(
            queue_topic(self.location),
            mode="fetch",
            on_enqueue=self._on_enqueue,
        )
        if self.volume_hotspot is not None:
            self._swipe_sub = self.broker.subscribe(
                f"{self.volume_hotspot}.gesture_swipe.hotspot",
                mode="push",
                callback=self._on_swipe,
            )

    def stop(self) -> None:
        for sub in (self._queue_sub, self._swipe_sub):
            if sub is not None:
                sub.cancel()
        self._queue_sub = None
        self._swipe_sub = None

    # -- speech queue ------------------------------------------------------

    def _on_enqueue(self) -> None:
        # a command landed; look at the queue once the current callback ends
        self.scheduler.schedule(self.scheduler.clock.now_ns(), self._attempt)

    def _attempt(self) -> None:
        if self.busy or self._queue_sub is None:
            return
        while True:
            msg = self._queue_sub.fetch()
            if msg is None:
                return
            command = self._parse(msg)
            if command is not None:
                break
        text, voice = command
        words = text.split()
        duration_ns = len(words) * MS_PER_WORD * MS
        self.busy = True
        self._publish(
            "speaking-started",
            {"text": text, "voice": voice, "duration_ms": duration_ns // MS},
        )
        self.scheduler.schedule(
            self.scheduler.clock.now_ns() + duration_ns, lambda: self._finish(text)
        )

    def _finish(self, text: str) -> None:
        self.busy = False
        self.spoken += 1
        self._publish("speaking-ended", {"text": text})
        self._attempt()

    def _parse(self, msg: Message) -> Optional[tuple[str, str]]:
        try:
            obj = json.loads(msg.payload.decode())
            text = obj["text"]
            if not isinstance(text, str) or not text.strip():
                raise ValueError("text must be a non-empty string")
            voice = obj.get("voice", "default")
        except Exception as e:
            self.errors += 1
            self._publish("error", {"error": str(e)})
            return None
        return text, str(voice)

    # -- volume ------------------------------------------------------------

    def _on_swipe(self, msg: Message) -> None:
        try:
            event = json.loads(msg.payload.decode())
            dy = float(event.get("displacement", [0, 0, 0])[1])
        except Exception as e:
            logger.warning("bad swipe event: %s", e)
            return
        delta = VOLUME_STEP if dy > 0 else -VOLUME_STEP
        new = max(VOLUME_MIN, min(VOLUME_MAX, self.volume + delta))
        if new != self.volume:
            self.volume = new
            self._publish("volume", {"volume": self.volume, "delta": delta})

    def _publish(self, kind: str, obj: dict) -> None:
        self.broker.publish(
            f"speaker.{self.location}.{kind}",
            json.dumps(obj, sort_keys=True, separators=(",", ":")).encode(),
            publisher=f"speaker-{self.location}",
        )
