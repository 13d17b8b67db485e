"""Scenario documents: YAML shape, loading, and validation.

A scenario is one YAML document with four parts:

  space:        frames, surfaces, history exchanges, hotspots, workers
  trace:        timestamped inputs (pointer, body, utterance, speak,
                drag_payload, call), times in virtual ms, non-decreasing
  expectations: what the run must (or must not) produce
  run_ms:       optional cap on how far past the trace the clock runs

Validation is all-at-once: every problem found is reported together so
authors fix a file in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from ..errors import MalformedPatternError, ScenarioValidationError
from ..topics import parse_pattern

SCHEMA_VERSION = 1

TRACE_KINDS = ("pointer", "body", "utterance", "speak", "drag_payload", "call")
WORKER_KINDS = ("speaker", "transcript", "vision", "lamp", "display", "proximity")

DEFAULT_GRACE_MS = 10_000


@dataclass
class Scenario:
    name: str
    doc: dict[str, Any]  # the full parsed document, kept verbatim for recording

    @property
    def space(self) -> dict[str, Any]:
        return self.doc.get("space") or {}

    @property
    def trace(self) -> list[dict[str, Any]]:
        return self.doc.get("trace") or []

    @property
    def expectations(self) -> list[dict[str, Any]]:
        return self.doc.get("expectations") or []

    def end_ms(self) -> int:
        """How far the virtual clock runs: trace end and expectation
        windows, plus grace for worker tails."""
        last = 0
        for item in self.trace:
            last = max(last, int(item.get("at_ms", 0)))
        for exp in self.expectations:
            for pred in _flatten_predicates(exp):
                within = pred.get("within")
                if within:
                    last = max(last, int(within[1]))
        return last + int(self.doc.get("run_ms", DEFAULT_GRACE_MS))


def _flatten_predicates(exp: dict[str, Any]) -> list[dict[str, Any]]:
    if "ordered" in exp:
        return list(exp["ordered"] or [])
    return [exp]


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return scenario_from_doc(doc)


def scenario_from_doc(doc: Any) -> Scenario:
    problems = validate_scenario(doc)
    if problems:
        raise ScenarioValidationError(problems)
    return Scenario(name=str(doc.get("name", "unnamed")), doc=doc)


def _is_triple(v: Any) -> bool:
    return (
        isinstance(v, (list, tuple))
        and len(v) == 3
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v)
    )


def _check_pattern(p: Any) -> Optional[str]:
    if not isinstance(p, str):
        return f"topic pattern must be a string, got {type(p).__name__}"
    try:
        parse_pattern(p)
    except MalformedPatternError as e:
        return str(e)
    return None


def validate_scenario(doc: Any) -> list[str]:
    """Every problem in the document, as human-readable strings."""
    problems: list[str] = []
    say = problems.append

    if not isinstance(doc, dict):
        return ["scenario must be a mapping at top level"]
    if doc.get("version") != SCHEMA_VERSION:
        say(f"version must be {SCHEMA_VERSION}, got {doc.get('version')!r}")

    space = doc.get("space") or {}
    if not isinstance(space, dict):
        say("space must be a mapping")
        space = {}

    frame_names = {"root"}
    for i, fr in enumerate(space.get("frames") or []):
        where = f"space.frames[{i}]"
        if not isinstance(fr, dict) or not fr.get("name"):
            say(f"{where}: needs a name")
            continue
        if fr["name"] in frame_names:
            say(f"{where}: duplicate frame {fr['name']!r}")
        parent = fr.get("parent", "root")
        if parent not in frame_names:
            say(f"{where}: parent {parent!r} not declared before use")
        if "translation" in fr and not _is_triple(fr["translation"]):
            say(f"{where}: translation must be [x, y, z]")
        rot = fr.get("rotation")
        if rot is not None:
            if not isinstance(rot, dict) or not _is_triple(rot.get("axis")) or "angle_deg" not in rot:
                say(f"{where}: rotation needs axis [x,y,z] and angle_deg")
        frame_names.add(fr["name"])

    surface_ids = set()
    for i, sf in enumerate(space.get("surfaces") or []):
        where = f"space.surfaces[{i}]"
        if not isinstance(sf, dict) or not sf.get("id"):
            say(f"{where}: needs an id")
            continue
        if sf["id"] in surface_ids:
            say(f"{where}: duplicate surface {sf['id']!r}")
        surface_ids.add(sf["id"])
        for key in ("origin", "u", "v"):
            if not _is_triple(sf.get(key)):
                say(f"{where}: {key} must be [x, y, z]")
        for key in ("width_mm", "height_mm", "width_px", "height_px"):
            v = sf.get(key)
            if not isinstance(v, (int, float)) or v <= 0:
                say(f"{where}: {key} must be a positive number")

    for i, h in enumerate(space.get("history") or []):
        where = f"space.history[{i}]"
        if not isinstance(h, dict):
            say(f"{where}: must be a mapping")
            continue
        err = _check_pattern(h.get("pattern"))
        if err:
            say(f"{where}: {err}")
        cap = h.get("capacity")
        if not isinstance(cap, int) or cap < 1:
            say(f"{where}: capacity must be a positive integer")

    hotspot_ids = set()
    for i, hs in enumerate(space.get("hotspots") or []):
        where = f"space.hotspots[{i}]"
        if not isinstance(hs, dict) or not hs.get("id"):
            say(f"{where}: needs an id")
            continue
        if hs["id"] in hotspot_ids:
            say(f"{where}: duplicate hotspot {hs['id']!r}")
        if not _is_triple(hs.get("min")) or not _is_triple(hs.get("max")):
            say(f"{where}: min and max must be [x, y, z]")
        fr = hs.get("frame", "root")
        if fr not in frame_names:
            say(f"{where}: frame {fr!r} not declared")
        parent = hs.get("parent")
        if parent is not None and parent not in hotspot_ids:
            say(f"{where}: parent {parent!r} not declared before use")
        hotspot_ids.add(hs["id"])

    speaker_locations = set()
    transcript_channels: set[int] = set()
    display_ids = set()
    for i, w in enumerate(space.get("workers") or []):
        where = f"space.workers[{i}]"
        if not isinstance(w, dict):
            say(f"{where}: must be a mapping")
            continue
        kind = w.get("kind")
        if kind not in WORKER_KINDS:
            say(f"{where}: kind must be one of {WORKER_KINDS}, got {kind!r}")
            continue
        if kind == "speaker":
            if not w.get("location"):
                say(f"{where}: speaker needs a location")
            else:
                speaker_locations.add(w["location"])
            vh = w.get("volume_hotspot")
            if vh is not None and vh not in hotspot_ids:
                say(f"{where}: volume_hotspot {vh!r} not declared")
        elif kind == "transcript":
            channels = w.get("channels")
            if not isinstance(channels, list) or not channels:
                say(f"{where}: transcript needs a non-empty channels list")
                continue
            for j, ch in enumerate(channels):
                cw = f"{where}.channels[{j}]"
                if not isinstance(ch, dict) or not isinstance(ch.get("channel"), int):
                    say(f"{cw}: needs an integer channel")
                    continue
                if ch["channel"] in transcript_channels:
                    say(f"{cw}: duplicate channel {ch['channel']}")
                transcript_channels.add(ch["channel"])
                if ch.get("range") not in ("close", "far"):
                    say(f"{cw}: range must be close or far")
        elif kind == "vision":
            faces = w.get("faces", {})
            if not isinstance(faces, dict):
                say(f"{where}: faces must map body ids to identities")
        elif kind == "lamp":
            if not w.get("lamp_id"):
                say(f"{where}: lamp needs lamp_id")
            if w.get("hotspot") not in hotspot_ids:
                say(f"{where}: hotspot {w.get('hotspot')!r} not declared")
        elif kind == "display":
            if not w.get("display_id"):
                say(f"{where}: display needs display_id")
            else:
                display_ids.add(w["display_id"])
            if w.get("hotspot") not in hotspot_ids:
                say(f"{where}: hotspot {w.get('hotspot')!r} not declared")
            if w.get("surface") not in surface_ids:
                say(f"{where}: surface {w.get('surface')!r} not declared")
        elif kind == "proximity":
            if not _is_triple(w.get("reference")):
                say(f"{where}: proximity needs reference [x, y, z]")

    trace = doc.get("trace") or []
    if not isinstance(trace, list):
        say("trace must be a list")
        trace = []
    prev_ms = -1
    for i, item in enumerate(trace):
        where = f"trace[{i}]"
        if not isinstance(item, dict):
            say(f"{where}: must be a mapping")
            continue
        at = item.get("at_ms")
        if not isinstance(at, int) or at < 0:
            say(f"{where}: at_ms must be a non-negative integer")
        else:
            if at < prev_ms:
                say(f"{where}: at_ms {at} goes backwards (previous {prev_ms})")
            prev_ms = max(prev_ms, at)
        kinds = [k for k in TRACE_KINDS if k in item]
        if len(kinds) != 1:
            say(f"{where}: needs exactly one of {TRACE_KINDS}")
            continue
        kind = kinds[0]
        body = item[kind]
        if not isinstance(body, dict):
            say(f"{where}: {kind} must be a mapping")
            continue
        if kind == "pointer":
            if not body.get("name") or not body.get("type"):
                say(f"{where}: pointer needs name and type")
            if not _is_triple(body.get("loc")) or not _is_triple(body.get("aim")):
                say(f"{where}: pointer needs loc and aim triples")
        elif kind == "body":
            if not body.get("body_id"):
                say(f"{where}: body needs body_id")
            joints = body.get("joints")
            if not isinstance(joints, dict) or not _is_triple(joints.get("hand")) or not _is_triple(joints.get("elbow")):
                say(f"{where}: body needs joints.hand and joints.elbow")
        elif kind == "utterance":
            if not isinstance(body.get("channel"), int):
                say(f"{where}: utterance needs an integer channel")
            elif transcript_channels and body["channel"] not in transcript_channels:
                say(f"{where}: channel {body['channel']} has no transcript worker")
            if not body.get("text"):
                say(f"{where}: utterance needs text")
        elif kind == "speak":
            if not body.get("text"):
                say(f"{where}: speak needs text")
            loc = body.get("location")
            if not loc:
                say(f"{where}: speak needs location")
            elif speaker_locations and loc not in speaker_locations:
                say(f"{where}: no speaker worker at location {loc!r}")
        elif kind == "drag_payload":
            if not body.get("pointer"):
                say(f"{where}: drag_payload needs pointer")
        elif kind == "call":
            if not body.get("service") or not body.get("op"):
                say(f"{where}: call needs service and op")

    expectations = doc.get("expectations") or []
    if not isinstance(expectations, list):
        say("expectations must be a list")
        expectations = []
    for i, exp in enumerate(expectations):
        where = f"expectations[{i}]"
        if not isinstance(exp, dict):
            say(f"{where}: must be a mapping")
            continue
        if "ordered" in exp:
            seq = exp["ordered"]
            if not isinstance(seq, list) or not seq:
                say(f"{where}: ordered must be a non-empty list")
                continue
            for j, pred in enumerate(seq):
                _validate_predicate(pred, f"{where}.ordered[{j}]", say, ordered_member=True)
        else:
            _validate_predicate(exp, where, say, ordered_member=False)

    return problems


def _validate_predicate(pred: Any, where: str, say, *, ordered_member: bool) -> None:
    if not isinstance(pred, dict):
        say(f"{where}: must be a mapping")
        return
    err = _check_pattern(pred.get("topic"))
    if err:
        say(f"{where}: {err}")
    within = pred.get("within")
    if within is not None:
        ok = (
            isinstance(within, (list, tuple))
            and len(within) == 2
            and all(isinstance(v, int) and v >= 0 for v in within)
            and within[0] <= within[1]
        )
        if not ok:
            say(f"{where}: within must be [start_ms, end_ms] with start <= end")
    count = pred.get("count")
    if count is not None and (not isinstance(count, int) or count < 0):
        say(f"{where}: count must be a non-negative integer")
    if ordered_member and ("absent" in pred or "count" in pred):
        say(f"{where}: ordered members take only topic/payload/within")
    if pred.get("absent") and count is not None:
        say(f"{where}: absent and count cannot be combined")
