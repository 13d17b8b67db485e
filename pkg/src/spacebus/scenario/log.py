"""Event logs and their on-disk recording format.

The log is the full broker traffic of a run in publish order. Each
entry digests its payload; the log keeps a running sha256 chain over
(time, topic, payload), so two runs agree end-to-end exactly when their
chain digests agree.

Recordings are JSON lines: a header holding the scenario document and
seed, one line per entry (payload base64), and a footer with the chain
digest. Replay refuses a file whose format version it does not speak.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import ReplayVersionError

RECORDING_VERSION = 1


@dataclass(frozen=True)
class LogEntry:
    index: int
    time_ms: int
    topic: str
    payload: bytes
    payload_digest: str  # sha256 hex of the payload alone

    def payload_json(self) -> Any:
        try:
            return json.loads(self.payload.decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None


class EventLog:
    def __init__(self) -> None:
        self.entries: list[LogEntry] = []
        self._chain = hashlib.sha256()

    def record(self, time_ms: int, topic: str, payload: bytes) -> LogEntry:
        entry = LogEntry(
            index=len(self.entries),
            time_ms=time_ms,
            topic=topic,
            payload=payload,
            payload_digest=hashlib.sha256(payload).hexdigest(),
        )
        self.entries.append(entry)
        self._chain.update(str(time_ms).encode())
        self._chain.update(b"\x00")
        self._chain.update(topic.encode())
        self._chain.update(b"\x00")
        self._chain.update(payload)
        self._chain.update(b"\x01")
        return entry

    @property
    def digest(self) -> str:
        return self._chain.hexdigest()

    def __len__(self) -> int:
        return len(self.entries)

    def slice_around(self, index: int, radius: int = 5) -> list[LogEntry]:
        lo = max(0, index - radius)
        hi = min(len(self.entries), index + radius + 1)
        return self.entries[lo:hi]


@dataclass
class Recording:
    scenario_doc: dict[str, Any]
    seed: int
    digest: str
    entries: list[LogEntry] = field(default_factory=list)


def save_recording(path: str, scenario_doc: dict[str, Any], seed: int, log: EventLog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "recording_version": RECORDING_VERSION,
            "seed": seed,
            "scenario": scenario_doc,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for e in log.entries:
            line = {
                "i": e.index,
                "t": e.time_ms,
                "topic": e.topic,
                "payload": base64.b64encode(e.payload).decode(),
            }
            fh.write(json.dumps(line, sort_keys=True) + "\n")
        fh.write(json.dumps({"digest": log.digest}, sort_keys=True) + "\n")


def load_recording(path: str) -> Recording:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty recording")
    header = json.loads(lines[0])
    version = header.get("recording_version")
    if version != RECORDING_VERSION:
        raise ReplayVersionError(
            f"recording version {version!r} not supported (this build speaks {RECORDING_VERSION})"
        )
    footer = json.loads(lines[-1])
    if "digest" not in footer:
        raise ValueError(f"{path}: truncated recording (no digest footer)")
    entries = []
    for line in lines[1:-1]:
        obj = json.loads(line)
        payload = base64.b64decode(obj["payload"])
        entries.append(
            LogEntry(
                index=obj["i"],
                time_ms=obj["t"],
                topic=obj["topic"],
                payload=payload,
                payload_digest=hashlib.sha256(payload).hexdigest(),
            )
        )
    return Recording(
        scenario_doc=header["scenario"],
        seed=int(header.get("seed", 0)),
        digest=footer["digest"],
        entries=entries,
    )
