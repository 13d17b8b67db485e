"""Speech-to-text worker, simulated.

Each configured channel has a range (close or far). Scripted utterances
arrive as JSON on ``audio.<channel>.utterance``; recognition is modeled
as one interim every two words (prefixes of the final text) and a final
carrying the keyword hits. While any speaker in the space is mid-
utterance, far-range channels discard incoming speech entirely; close-
range channels keep transcribing, which is what lets people talk to the
room while it talks back.

Saying "this is <name> speaking" on a channel binds that name as the
channel's speaker_id until somebody else says it.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from ..broker.core import Broker, Message
from ..clock import MS, Scheduler
from ..errors import InvalidArgumentError

logger = logging.getLogger(__name__)

MS_PER_WORD = 60  # same pacing the speaker worker uses
INTERIM_EVERY_WORDS = 2

_IDENTIFY_RE = re.compile(r"\bthis is (\w+) speaking\b", re.IGNORECASE)

RANGES = ("close", "far")


class SpeakingMonitor:
    """Tracks when any speaker in the space is talking."""

    def __init__(self, broker: Broker):
        self.broker = broker
        self._open: dict[str, int] = {}  # loc -> started ns
        self.intervals: list[tuple[str, int, int]] = []  # (loc, start, end)
        self._subs: list = []

    def start(self) -> None:
        if self._subs:
            return
        self._subs = [
            self.broker.subscribe(
                "speaker.*.speaking-started", mode="push", callback=self._on_started
            ),
            self.broker.subscribe(
                "speaker.*.speaking-ended", mode="push", callback=self._on_ended
            ),
        ]

    def stop(self) -> None:
        for s in self._subs:
            s.cancel()
        self._subs = []

    def _on_started(self, msg: Message) -> None:
        loc = msg.topic.words[1]
        self._open[loc] = msg.publish_time

    def _on_ended(self, msg: Message) -> None:
        loc = msg.topic.words[1]
        start = self._open.pop(loc, None)
        if start is not None:
            self.intervals.append((loc, start, msg.publish_time))

    def speaking_at(self, t_ns: int) -> bool:
        """True when t falls in any [started, ended) window, or in one
        that has started and not yet ended."""
        if any(start <= t_ns for start in self._open.values()):
            return True
        return any(start <= t_ns < end for _loc, start, end in self.intervals)


@dataclass
class ChannelConfig:
    channel: int
    range: str  # "close" | "far"
    keywords: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.range not in RANGES:
            raise InvalidArgumentError(
                f"channel {self.channel}: range must be one of {RANGES}"
            )


def utterance_topic(channel: int) -> str:
    return f"audio.{channel}.utterance"


def spot_keywords(text: str, keywords: list[str]) -> list[str]:
    """Configured keywords present in the text, whole-word, any case."""
    hits = []
    for kw in keywords:
        if re.search(rf"\b{re.escape(kw)}\b", text, re.IGNORECASE):
            hits.append(kw)
    return hits


class TranscriptWorker:
    def __init__(
        self,
        broker: Broker,
        scheduler: Scheduler,
        monitor: SpeakingMonitor,
        *,
        channels: list[ChannelConfig],
    ):
        if not channels:
            raise InvalidArgumentError("transcript worker needs at least one channel")
        seen = set()
        for ch in channels:
            if ch.channel in seen:
                raise InvalidArgumentError(f"duplicate channel {ch.channel}")
            seen.add(ch.channel)
        self.broker = broker
        self.scheduler = scheduler
        self.monitor = monitor
        self.channels = {ch.channel: ch for ch in channels}
        self.speaker_ids: dict[int, Optional[str]] = {ch.channel: None for ch in channels}
        self.suppressed: dict[int, int] = {ch.channel: 0 for ch in channels}
        self._subs: list = []

    def start(self) -> None:
        if self._subs:
            return
        for ch in self.channels.values():
            self._subs.append(
                self.broker.subscribe(
                    utterance_topic(ch.channel),
                    mode="push",
                    callback=lambda msg, c=ch: self._on_utterance(c, msg),
                )
            )

    def stop(self) -> None:
        for s in self._subs:
            s.cancel()
        self._subs = []

    def _on_utterance(self, ch: ChannelConfig, msg: Message) -> None:
        try:
            text = json.loads(msg.payload.decode())["text"]
            if not isinstance(text, str) or not text.strip():
                raise ValueError("utterance text must be a non-empty string")
        except Exception as e:
            logger.warning("bad utterance on channel %s: %s", ch.channel, e)
            return

        start_ns = msg.publish_time
        if ch.range == "far" and self.monitor.speaking_at(start_ns):
            self.suppressed[ch.channel] += 1
            return

        m = _IDENTIFY_RE.search(text)
        if m:
            self.speaker_ids[ch.channel] = m.group(1)
        speaker_id = self.speaker_ids[ch.channel]

        words = text.split()
        text = " ".join(words)  # interims are then true prefixes of the final
        n = len(words)
        interim_lengths = list(range(INTERIM_EVERY_WORDS, n, INTERIM_EVERY_WORDS)) or [n]
        for length in interim_lengths:
            self.scheduler.schedule(
                start_ns + length * MS_PER_WORD * MS,
                lambda w=words[:length]: self._emit(ch, "interim", " ".join(w), speaker_id),
            )
        self.scheduler.schedule(
            start_ns + n * MS_PER_WORD * MS,
            lambda: self._emit(ch, "final", text, speaker_id),
        )

    def _emit(self, ch: ChannelConfig, stage: str, text: str, speaker_id: Optional[str]) -> None:
        obj = {
            "channel": ch.channel,
            "range": ch.range,
            "stage": stage,
            "text": text,
            "speaker_id": speaker_id,
        }
        if stage == "final":
            obj["keywords_spotted"] = spot_keywords(text, ch.keywords)
        self.broker.publish(
            f"{ch.range}-range.{stage}.transcript",
            json.dumps(obj, sort_keys=True, separators=(",", ":")).encode(),
            publisher=f"transcript-{ch.channel}",
        )
