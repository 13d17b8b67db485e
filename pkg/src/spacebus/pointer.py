"""Pointer samples and their wire form.

A sample is a position plus an aim direction plus whatever buttons are
held, tagged with the device type and instance name. The JSON encoding
always writes the same six top-level keys in the same order, so two
encodes of the same sample are byte-identical; decode accepts any key
order but nothing extra and nothing missing.

Auxiliary data (source coordinate frame, capture time) rides inside
``details`` untouched.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .errors import DecodeError, DegeneratePoseError, VocabularyError
from .geometry import UnitVec3, Vec3
from .topics import Topic

# Devices with a fixed button set; anything else passes through unchecked.
BUTTON_VOCABULARY: dict[str, frozenset[str]] = {
    "wand": frozenset({"b1", "b2", "b3"}),
    "vive": frozenset({"grip", "menu", "system", "trackpad"}),
}

AIM_TOL = 1e-3

_KEY_ORDER = ("loc", "aim", "buttons", "type", "name", "details")


@dataclass(frozen=True)
class PointerSample:
    loc: Vec3
    aim: UnitVec3
    buttons: tuple[str, ...]
    type: str
    name: str
    details: dict[str, Any] = field(default_factory=dict)

    def topic(self) -> Topic:
        return Topic((self.name, self.type, "pointing"))


def _check_vocabulary(ptype: str, buttons: tuple[str, ...]) -> None:
    vocab = BUTTON_VOCABULARY.get(ptype)
    if vocab is None:
        return
    bad = [b for b in buttons if b not in vocab]
    if bad:
        raise VocabularyError(
            f"{ptype} has no button {bad[0]!r} (knows {sorted(vocab)})"
        )


def _check_word(value: str, fieldname: str) -> None:
    if not value or "." in value or any(c.isspace() for c in value):
        raise DecodeError(fieldname, f"{value!r} is not usable as a topic word")


def normalize(sample: PointerSample) -> PointerSample:
    """Canonical form: sorted unique buttons, exactly unit aim. Idempotent."""
    _check_word(sample.name, "name")
    _check_word(sample.type, "type")
    buttons = tuple(sorted(set(sample.buttons)))
    _check_vocabulary(sample.type, buttons)
    aim = UnitVec3.normalize(sample.aim.x, sample.aim.y, sample.aim.z)
    return replace(sample, buttons=buttons, aim=aim)


def to_json_obj(sample: PointerSample) -> dict[str, Any]:
    return {
        "loc": [sample.loc.x, sample.loc.y, sample.loc.z],
        "aim": [sample.aim.x, sample.aim.y, sample.aim.z],
        "buttons": list(sample.buttons),
        "type": sample.type,
        "name": sample.name,
        "details": sample.details,
    }


def encode(sample: PointerSample) -> bytes:
    sample = normalize(sample)
    return json.dumps(to_json_obj(sample), separators=(",", ":")).encode()


def _triple(obj: Any, fieldname: str) -> tuple[float, float, float]:
    if not isinstance(obj, (list, tuple)) or len(obj) != 3:
        raise DecodeError(fieldname, "expected a list of three numbers")
    out = []
    for v in obj:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise DecodeError(fieldname, f"{v!r} is not a finite number")
        out.append(float(v))
    return (out[0], out[1], out[2])


def from_json_obj(obj: Any) -> PointerSample:
    if not isinstance(obj, dict):
        raise DecodeError("", "pointer sample must be a JSON object")
    extra = set(obj) - set(_KEY_ORDER)
    if extra:
        raise DecodeError(sorted(extra)[0], "unexpected key")
    for key in _KEY_ORDER:
        if key not in obj:
            raise DecodeError(key, "missing")

    loc = Vec3(*_triple(obj["loc"], "loc"))

    ax, ay, az = _triple(obj["aim"], "aim")
    n = math.sqrt(ax * ax + ay * ay + az * az)
    if abs(n - 1.0) > AIM_TOL:
        raise DecodeError("aim", f"|aim| = {n:.6f}, must be within {AIM_TOL} of 1")
    aim = UnitVec3(ax / n, ay / n, az / n)

    raw_buttons = obj["buttons"]
    if not isinstance(raw_buttons, list) or any(not isinstance(b, str) for b in raw_buttons):
        raise DecodeError("buttons", "expected a list of strings")

    ptype = obj["type"]
    if not isinstance(ptype, str):
        raise DecodeError("type", "expected a string")
    name = obj["name"]
    if not isinstance(name, str):
        raise DecodeError("name", "expected a string")
    details = obj["details"]
    if not isinstance(details, dict):
        raise DecodeError("details", "expected an object")

    return normalize(
        PointerSample(
            loc=loc,
            aim=aim,
            buttons=tuple(raw_buttons),
            type=ptype,
            name=name,
            details=details,
        )
    )


def decode(data: bytes) -> PointerSample:
    try:
        obj = json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DecodeError("", f"not valid JSON: {e}") from e
    return from_json_obj(obj)


def kinect_pointing(
    hand: Vec3,
    elbow: Vec3,
    *,
    name: str,
    details: Optional[dict[str, Any]] = None,
    buttons: tuple[str, ...] = (),
) -> PointerSample:
    """Skeleton joints to a pointer: aim along the forearm, located at the hand."""
    v = hand - elbow
    if v.norm() < 1e-6:
        raise DegeneratePoseError("hand and elbow coincide; no pointing direction")
    return PointerSample(
        loc=hand,
        aim=v.unit(),
        buttons=buttons,
        type="kinect",
        name=name,
        details=dict(details or {}),
    )
