"""Builds a space from a scenario and runs its trace deterministically.

Everything shares one virtual clock and an inline-dispatch broker, so a
run is a single logical timeline: identical (scenario, seed) means an
identical event log, byte for byte. The seed's only job is to shuffle
worker start order, which perturbs subscription order; expectations are
supposed to hold anyway, and the acceptance suite leans on that.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..broker.core import Broker
from ..clock import MS, Scheduler, VirtualClock
from ..errors import SpacebusError
from ..geometry import (
    Aabb,
    DisplaySurface,
    FrameGraph,
    RigidTransform,
    UnitVec3,
    Vec3,
)
from ..hotspots.engine import HotspotEngine
from ..pointer import PointerSample, encode
from ..registry.core import ServiceEntry, SpaceRegistry
from ..registry.rpc import LocalRpcRouter, default_caller
from ..topics import Topic, matches, parse_pattern
from ..workers import (
    DisplayWorker,
    FaceRecognitionStub,
    LampWorker,
    ProximityWorker,
    SpeakerWorker,
    SpeakingMonitor,
    TranscriptWorker,
    VisionWorker,
)
from ..workers.transcript import ChannelConfig
from .log import EventLog, save_recording
from .schema import Scenario

logger = logging.getLogger(__name__)

SERVICE_TTL_S = 10.0


@dataclass
class ExpectationResult:
    description: str
    ok: bool
    detail: str = ""


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    log: EventLog
    expectations: list[ExpectationResult] = field(default_factory=list)
    runtime_errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.runtime_errors and all(e.ok for e in self.expectations)

    def report_lines(self) -> list[str]:
        lines = []
        for err in self.runtime_errors:
            lines.append(f"ERROR {err}")
        for e in self.expectations:
            mark = "PASS" if e.ok else "FAIL"
            lines.append(f"{mark} {e.description}")
            if not e.ok and e.detail:
                lines.extend("     " + ln for ln in e.detail.splitlines())
        lines.append(
            f"{'PASSED' if self.passed else 'FAILED'} "
            f"({sum(e.ok for e in self.expectations)}/{len(self.expectations)} expectations, "
            f"{len(self.log)} events, digest {self.log.digest[:16]})"
        )
        return lines


class SpaceSession:
    """One constructed space: broker, registry, engine, workers, log tap."""

    def __init__(self, scenario: Scenario, seed: int = 0):
        self.scenario = scenario
        self.seed = seed
        self.clock = VirtualClock()
        self.scheduler = Scheduler(self.clock)
        self.broker = Broker(clock=self.clock, dispatch="inline")
        self.log = EventLog()
        self.frames = FrameGraph()
        self.frames.add_frame("root")
        self.router = LocalRpcRouter()
        self.registry = SpaceRegistry(
            scenario.name, clock=self.clock, caller=default_caller(self.router)
        )
        self.monitor = SpeakingMonitor(self.broker)
        self.runtime_errors: list[str] = []
        self._end_ns = scenario.end_ms() * MS
        self._lease_tokens: list[str] = []

        # the tap sees every publish in order; registered first so nothing
        # in the log depends on worker start order
        self.broker.subscribe(
            "#",
            mode="push",
            callback=lambda m: self.log.record(m.publish_time // MS, str(m.topic), m.payload),
        )

        space = scenario.space
        self._build_frames(space.get("frames") or [])
        self.surfaces = self._build_surfaces(space.get("surfaces") or [])
        for h in space.get("history") or []:
            self.broker.declare_history(h["pattern"], int(h["capacity"]))

        self.engine = HotspotEngine(self.broker, self.frames, clock=self.clock)
        for hs in space.get("hotspots") or []:
            self.engine.add_hotspot(
                hs["id"],
                Aabb(Vec3(*hs["min"]), Vec3(*hs["max"])),
                frame=hs.get("frame"),
                accepts_drop=bool(hs.get("accepts_drop", False)),
                parent=hs.get("parent"),
            )
        self.engine.start()
        self._register_service("hotspot-engine", "engine", self.engine.rpc_handler)
        self.monitor.start()

        self.workers: list[Any] = []
        self.face_stub: Optional[FaceRecognitionStub] = None
        for cfg in space.get("workers") or []:
            self.workers.append(self._build_worker(cfg))

        rng = random.Random(seed)
        start_order = list(self.workers)
        rng.shuffle(start_order)
        for worker in start_order:
            worker.start()

        self._schedule_trace()

    # -- construction ------------------------------------------------------

    def _build_frames(self, specs: list[dict[str, Any]]) -> None:
        for fr in specs:
            translation = Vec3(*(fr.get("translation") or (0.0, 0.0, 0.0)))
            rot = fr.get("rotation")
            if rot:
                axis = UnitVec3.normalize(*rot["axis"])
                angle = math.radians(float(rot["angle_deg"]))
                tf = RigidTransform.from_axis_angle(axis, angle, translation)
            else:
                tf = RigidTransform.from_translation(translation)
            self.frames.add_frame(fr["name"], fr.get("parent", "root"), tf)

    @staticmethod
    def _build_surfaces(specs: list[dict[str, Any]]) -> dict[str, DisplaySurface]:
        out = {}
        for sf in specs:
            out[sf["id"]] = DisplaySurface(
                origin=Vec3(*sf["origin"]),
                u=UnitVec3.normalize(*sf["u"]),
                v=UnitVec3.normalize(*sf["v"]),
                width_mm=float(sf["width_mm"]),
                height_mm=float(sf["height_mm"]),
                width_px=int(sf["width_px"]),
                height_px=int(sf["height_px"]),
            )
        return out

    def _register_service(self, name: str, kind: str, handler: Callable) -> None:
        self.router.register(name, handler)
        token = self.registry.register(
            ServiceEntry(
                name=name,
                kind=kind,
                space=self.scenario.name,
                address=f"local://{name}",
                ttl_s=SERVICE_TTL_S,
            )
        )
        self._lease_tokens.append(token)
        self._arm_renewal(token)

    def _arm_renewal(self, token: str) -> None:
        period_ns = int(SERVICE_TTL_S / 2 * 1e9)

        def renew() -> None:
            self.registry.renew(token)
            nxt = self.clock.now_ns() + period_ns
            if nxt <= self._end_ns:
                self.scheduler.schedule(nxt, renew)

        first = self.clock.now_ns() + period_ns
        if first <= self._end_ns:
            self.scheduler.schedule(first, renew)

    def _build_worker(self, cfg: dict[str, Any]) -> Any:
        kind = cfg["kind"]
        if kind == "speaker":
            return SpeakerWorker(
                self.broker,
                self.scheduler,
                location=cfg["location"],
                volume_hotspot=cfg.get("volume_hotspot"),
            )
        if kind == "transcript":
            channels = [
                ChannelConfig(
                    channel=ch["channel"],
                    range=ch["range"],
                    keywords=list(ch.get("keywords") or []),
                )
                for ch in cfg["channels"]
            ]
            return TranscriptWorker(self.broker, self.scheduler, self.monitor, channels=channels)
        if kind == "vision":
            if self.face_stub is None:
                self.face_stub = FaceRecognitionStub(dict(cfg.get("faces") or {}))
                self._register_service("face-recognition", "identity", self.face_stub.rpc_handler)
            else:
                self.face_stub.known.update(cfg.get("faces") or {})
            return VisionWorker(self.broker, self.registry, frame=cfg.get("frame"))
        if kind == "lamp":
            return LampWorker(self.broker, lamp_id=cfg["lamp_id"], hotspot=cfg["hotspot"])
        if kind == "display":
            worker = DisplayWorker(
                self.broker,
                display_id=cfg["display_id"],
                surface=self.surfaces[cfg["surface"]],
                hotspot=cfg["hotspot"],
            )
            self._register_service(f"display-{cfg['display_id']}", "display", worker.rpc_handler)
            return worker
        if kind == "proximity":
            return ProximityWorker(
                self.broker,
                reference=tuple(cfg["reference"]),
                threshold_mm=float(cfg.get("threshold_mm", 2500.0)),
                hysteresis_mm=float(cfg.get("hysteresis_mm", 100.0)),
            )
        raise ValueError(f"unknown worker kind {kind!r}")

    # -- trace -------------------------------------------------------------

    def _schedule_trace(self) -> None:
        for item in self.scenario.trace:
            at_ns = int(item["at_ms"]) * MS
            self.scheduler.schedule(at_ns, lambda it=item: self._play(it))

    def _play(self, item: dict[str, Any]) -> None:
        try:
            if "pointer" in item:
                p = item["pointer"]
                sample = PointerSample(
                    loc=Vec3(*p["loc"]),
                    aim=UnitVec3.normalize(*p["aim"]),
                    buttons=tuple(p.get("buttons") or ()),
                    type=p["type"],
                    name=p["name"],
                    details=dict(p.get("details") or {}),
                )
                self.broker.publish(str(sample.topic()), encode(sample), publisher="trace")
            elif "body" in item:
                b = item["body"]
                self.broker.publish(
                    f"body.{b['body_id']}.skeleton",
                    json.dumps(b, sort_keys=True, separators=(",", ":")).encode(),
                    publisher="trace",
                )
            elif "utterance" in item:
                u = item["utterance"]
                self.broker.publish(
                    f"audio.{u['channel']}.utterance",
                    json.dumps({"text": u["text"]}, sort_keys=True, separators=(",", ":")).encode(),
                    publisher="trace",
                )
            elif "speak" in item:
                s = item["speak"]
                command = {
                    "text": s["text"],
                    "location": s["location"],
                    "voice": s.get("voice", "default"),
                }
                self.broker.publish(
                    f"speaker.{s['location']}.speak",
                    json.dumps(command, sort_keys=True, separators=(",", ":")).encode(),
                    publisher="trace",
                )
            elif "drag_payload" in item:
                d = item["drag_payload"]
                self.engine.set_drag_payload(d["pointer"], d.get("payload"))
            elif "call" in item:
                c = item["call"]
                try:
                    result = self.registry.call(
                        c["service"], c["op"], c.get("args") or {},
                        timeout=float(c.get("timeout", 5.0)),
                    )
                    outcome = {"op": c["op"], "result": result}
                    suffix = "result"
                except SpacebusError as e:
                    outcome = {"op": c["op"], "error": str(e)}
                    suffix = "error"
                self.broker.publish(
                    f"harness.{c['service']}.{suffix}",
                    json.dumps(outcome, sort_keys=True, separators=(",", ":")).encode(),
                    publisher="trace",
                )
        except SpacebusError as e:
            self.runtime_errors.append(
                f"trace item at {item.get('at_ms')}ms failed: {e}"
            )

    # -- run + evaluate ----------------------------------------------------

    def run(self) -> RunResult:
        self.scheduler.run_until(self._end_ns)
        result = RunResult(
            scenario=self.scenario,
            seed=self.seed,
            log=self.log,
            runtime_errors=list(self.runtime_errors),
        )
        for exp in self.scenario.expectations:
            result.expectations.append(self._evaluate(exp))
        return result

    # -- expectation engine ------------------------------------------------

    def _evaluate(self, exp: dict[str, Any]) -> ExpectationResult:
        if "ordered" in exp:
            return self._evaluate_ordered(exp["ordered"])
        desc = _describe(exp)
        window = _window_entries(self.log, exp)
        hits = [e for e in window if _entry_matches(exp, e)]
        if exp.get("absent"):
            if hits:
                return ExpectationResult(
                    desc, False,
                    f"expected no matches, found {len(hits)}; first at "
                    f"t={hits[0].time_ms}ms\n" + _context(self.log, hits[0].index),
                )
            return ExpectationResult(desc, True)
        want = exp.get("count")
        if want is None:
            if hits:
                return ExpectationResult(desc, True)
            return ExpectationResult(desc, False, self._miss_detail(exp, window))
        if len(hits) == want:
            return ExpectationResult(desc, True)
        detail = f"expected exactly {want} matches, found {len(hits)}"
        anchor = hits[0].index if hits else (window[0].index if window else 0)
        return ExpectationResult(desc, False, detail + "\n" + _context(self.log, anchor))

    def _evaluate_ordered(self, preds: list[dict[str, Any]]) -> ExpectationResult:
        desc = "ordered: " + " -> ".join(_describe(p) for p in preds)
        pos = 0
        last_index = -1
        for i, pred in enumerate(preds):
            found = None
            for e in self.log.entries[pos:]:
                if _in_window(pred, e) and _entry_matches(pred, e):
                    found = e
                    break
            if found is None:
                detail = (
                    f"member {i} ({_describe(pred)}) not found after log index {last_index}\n"
                    + _context(self.log, last_index if last_index >= 0 else 0)
                )
                return ExpectationResult(desc, False, detail)
            last_index = found.index
            pos = found.index + 1
        return ExpectationResult(desc, True)

    def _miss_detail(self, exp: dict[str, Any], window: list) -> str:
        near = [
            e
            for e in window
            if matches(parse_pattern(exp["topic"]), Topic.parse(e.topic))
        ]
        if near:
            lines = [f"{len(near)} events matched the topic but not the payload:"]
            for e in near[:5]:
                lines.append(f"  t={e.time_ms}ms {e.topic} {_preview(e.payload)}")
            return "\n".join(lines) + "\n" + _context(self.log, near[0].index)
        anchor = window[0].index if window else max(0, len(self.log.entries) - 1)
        return "no events matched the topic in the window\n" + _context(self.log, anchor)


def _describe(pred: dict[str, Any]) -> str:
    parts = [str(pred.get("topic"))]
    if "payload" in pred:
        parts.append(f"payload⊇{json.dumps(pred['payload'], sort_keys=True)}")
    if pred.get("within"):
        parts.append(f"within {pred['within'][0]}..{pred['within'][1]}ms")
    if pred.get("absent"):
        parts.append("absent")
    if pred.get("count") is not None:
        parts.append(f"count={pred['count']}")
    return " ".join(parts)


def _in_window(pred: dict[str, Any], entry) -> bool:
    within = pred.get("within")
    if not within:
        return True
    return within[0] <= entry.time_ms <= within[1]


def _window_entries(log: EventLog, pred: dict[str, Any]) -> list:
    return [e for e in log.entries if _in_window(pred, e)]


def _entry_matches(pred: dict[str, Any], entry) -> bool:
    if not matches(parse_pattern(pred["topic"]), Topic.parse(entry.topic)):
        return False
    if "payload" in pred:
        return _subset(pred["payload"], entry.payload_json())
    return True


def _subset(expected: Any, actual: Any) -> bool:
    if isinstance(expected, dict):
        if not isinstance(actual, dict):
            return False
        return all(k in actual and _subset(v, actual[k]) for k, v in expected.items())
    if isinstance(expected, list):
        if not isinstance(actual, list) or len(expected) != len(actual):
            return False
        return all(_subset(x, y) for x, y in zip(expected, actual))
    if isinstance(expected, float) or isinstance(actual, float):
        try:
            return math.isclose(float(expected), float(actual), rel_tol=1e-9, abs_tol=1e-9)
        except (TypeError, ValueError):
            return False
    return expected == actual


def _preview(payload: bytes, limit: int = 100) -> str:
    text = payload.decode("utf-8", "replace")
    return text if len(text) <= limit else text[: limit - 3] + "..."


def _context(log: EventLog, index: int, radius: int = 5) -> str:
    lines = [f"log context around index {index}:"]
    for e in log.slice_around(index, radius):
        marker = ">" if e.index == index else " "
        lines.append(f" {marker} [{e.index}] t={e.time_ms}ms {e.topic} {_preview(e.payload, 80)}")
    return "\n".join(lines)


def run_scenario(
    scenario: Scenario,
    *,
    seed: int = 0,
    record_path: Optional[str] = None,
) -> RunResult:
    session = SpaceSession(scenario, seed=seed)
    result = session.run()
    if record_path:
        save_recording(record_path, scenario.doc, seed, result.log)
    return result
