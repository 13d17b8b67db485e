from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from spacebus.errors import DecodeError, DegeneratePoseError, VocabularyError
from spacebus.geometry import UnitVec3, Vec3
from spacebus.pointer import (
    PointerSample,
    decode,
    encode,
    kinect_pointing,
    normalize,
)


def sample(**kw) -> PointerSample:
    base = dict(
        loc=Vec3(1.0, 2.0, 3.0),
        aim=UnitVec3(0.0, 0.0, -1.0),
        buttons=(),
        type="wand",
        name="wand1",
        details={},
    )
    base.update(kw)
    return PointerSample(**base)


GOLDEN = (
    b'{"loc":[1.0,2.0,3.0],"aim":[0.0,0.0,-1.0],"buttons":["b1"],'
    b'"type":"wand","name":"wand1","details":{}}'
)


class TestEncode:
    def test_golden_bytes(self):
        assert encode(sample(buttons=("b1",))) == GOLDEN

    def test_key_order_fixed(self):
        keys = list(json.loads(encode(sample()).decode()).keys())
        assert keys == ["loc", "aim", "buttons", "type", "name", "details"]

    def test_button_dedup_and_sort(self):
        data = json.loads(encode(sample(buttons=("b3", "b1", "b3"))).decode())
        assert data["buttons"] == ["b1", "b3"]

    def test_encode_is_stable(self):
        s = sample(buttons=("b2", "b1"), details={"frame": "table"})
        assert encode(s) == encode(s)

    def test_details_pass_through(self):
        data = json.loads(encode(sample(details={"frame": "desk", "n": 3})).decode())
        assert data["details"] == {"frame": "desk", "n": 3}

    def test_topic(self):
        assert str(sample().topic()) == "wand1.wand.pointing"


class TestDecode:
    def test_roundtrip(self):
        s = sample(buttons=("b1", "b2"), details={"frame": "desk"})
        back = decode(encode(s))
        assert back == normalize(s)

    def test_any_key_order_accepted(self):
        obj = json.loads(GOLDEN.decode())
        shuffled = json.dumps(dict(reversed(list(obj.items())))).encode()
        assert decode(shuffled) == decode(GOLDEN)

    def test_missing_key(self):
        obj = json.loads(GOLDEN.decode())
        del obj["aim"]
        with pytest.raises(DecodeError) as e:
            decode(json.dumps(obj).encode())
        assert e.value.field == "aim"

    def test_extra_key(self):
        obj = json.loads(GOLDEN.decode())
        obj["velocity"] = [0, 0, 0]
        with pytest.raises(DecodeError) as e:
            decode(json.dumps(obj).encode())
        assert e.value.field == "velocity"

    def test_aim_off_unit_rejected(self):
        obj = json.loads(GOLDEN.decode())
        obj["aim"] = [0, 0, -1.01]
        with pytest.raises(DecodeError) as e:
            decode(json.dumps(obj).encode())
        assert e.value.field == "aim"

    def test_aim_slightly_off_renormalized(self):
        obj = json.loads(GOLDEN.decode())
        obj["aim"] = [0.0, 0.0, -1.0005]
        s = decode(json.dumps(obj).encode())
        assert abs(s.aim.norm() - 1.0) < 1e-12

    def test_bad_triple(self):
        obj = json.loads(GOLDEN.decode())
        obj["loc"] = [1, 2]
        with pytest.raises(DecodeError) as e:
            decode(json.dumps(obj).encode())
        assert e.value.field == "loc"

    def test_nan_rejected(self):
        raw = GOLDEN.replace(b'"loc":[1.0,2.0,3.0]', b'"loc":[NaN,2.0,3.0]')
        with pytest.raises(DecodeError):
            decode(raw)

    def test_not_json(self):
        with pytest.raises(DecodeError):
            decode(b"\xff\x01")

    def test_dotted_name_rejected(self):
        obj = json.loads(GOLDEN.decode())
        obj["name"] = "a.b"
        with pytest.raises(DecodeError) as e:
            decode(json.dumps(obj).encode())
        assert e.value.field == "name"


class TestVocabulary:
    def test_wand_buttons(self):
        normalize(sample(buttons=("b1", "b2", "b3")))

    def test_wand_rejects_unknown(self):
        with pytest.raises(VocabularyError):
            normalize(sample(buttons=("trigger",)))

    def test_vive_buttons(self):
        normalize(sample(type="vive", name="vive1", buttons=("grip", "menu")))

    def test_vive_rejects_wand_buttons(self):
        with pytest.raises(VocabularyError):
            normalize(sample(type="vive", name="vive1", buttons=("b1",)))

    def test_unknown_type_unchecked(self):
        normalize(sample(type="gamepad", name="p1", buttons=("x", "y", "start")))


class TestNormalize:
    def test_idempotent(self):
        s = normalize(sample(buttons=("b3", "b1", "b1")))
        assert normalize(s) == s

    @given(
        st.lists(st.sampled_from(["b1", "b2", "b3"]), max_size=6),
        st.floats(min_value=-1, max_value=1),
        st.floats(min_value=-1, max_value=1),
    )
    def test_property_idempotent(self, buttons, ax, ay):
        if abs(ax) + abs(ay) < 1e-3:
            return
        s = sample(buttons=tuple(buttons), aim=UnitVec3.normalize(ax, ay, 0.5))
        once = normalize(s)
        assert normalize(once) == once

    @given(st.lists(st.sampled_from(["b1", "b2", "b3"]), max_size=6))
    def test_property_roundtrip_bytes_stable(self, buttons):
        s = sample(buttons=tuple(buttons))
        assert encode(decode(encode(s))) == encode(s)


class TestKinect:
    def test_aim_along_forearm(self):
        s = kinect_pointing(Vec3(100.0, 0.0, 0.0), Vec3(0.0, 0.0, 0.0), name="body1")
        assert s.type == "kinect"
        assert s.loc == Vec3(100.0, 0.0, 0.0)
        assert s.aim.as_tuple() == (1.0, 0.0, 0.0)
        assert str(s.topic()) == "body1.kinect.pointing"

    def test_degenerate_pose(self):
        with pytest.raises(DegeneratePoseError):
            kinect_pointing(Vec3(1.0, 1.0, 1.0), Vec3(1.0, 1.0, 1.0), name="b")

    def test_details_carried(self):
        s = kinect_pointing(
            Vec3(1.0, 0.0, 0.0), Vec3(0.0, 0.0, 0.0), name="b", details={"hand_state": "closed"}
        )
        assert s.details["hand_state"] == "closed"
