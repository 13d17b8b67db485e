"""Vision worker, simulated.

Body frames (skeleton joints plus hand state) come in on
``body.<id>.skeleton``; each one becomes a kinect pointer sample aimed
along elbow-to-hand, published on the standard pointing topic, plus a
``body.<id>.location`` message other workers use for proximity.

Identity is filled in lazily: when a tracked body faces the camera and
has no name yet, the worker asks the face-recognition service through
the registry. The answer shows up in the details of every sample after
that; the sample being processed goes out un-named.
"""

from __future__ import annotations

import json
import logging
from typing import Any, Optional

from ..broker.core import Broker, Message
from ..errors import DegeneratePoseError, SpacebusError
from ..geometry import Vec3
from ..pointer import encode, kinect_pointing
from ..registry.core import SpaceRegistry

logger = logging.getLogger(__name__)

SKELETON_PATTERN = "body.*.skeleton"
FACE_SERVICE = "face-recognition"


class FaceRecognitionStub:
    """Registry-served identity oracle: fixture body ids map to names."""

    def __init__(self, known: dict[str, str]):
        self.known = dict(known)
        self.queries = 0

    def rpc_handler(self, op: str, args: dict[str, Any]) -> dict[str, Any]:
        if op != "identify":
            raise SpacebusError(f"unknown op {op!r}")
        self.queries += 1
        return {"identity": self.known.get(args.get("body_id", ""))}


class VisionWorker:
    def __init__(self, broker: Broker, registry: SpaceRegistry, *, frame: Optional[str] = None):
        self.broker = broker
        self.registry = registry
        self.frame = frame  # coordinate frame joints are expressed in
        self.identities: dict[str, str] = {}
        self.skipped = 0
        self.published = 0
        self._sub = None

    def start(self) -> None:
        if self._sub is None:
            self._sub = self.broker.subscribe(
                SKELETON_PATTERN, mode="push", callback=self._on_frame
            )

    def stop(self) -> None:
        if self._sub is not None:
            self._sub.cancel()
            self._sub = None

    def _on_frame(self, msg: Message) -> None:
        try:
            obj = json.loads(msg.payload.decode())
            body_id = obj["body_id"]
            joints = obj["joints"]
            hand = Vec3(*joints["hand"])
            elbow = Vec3(*joints["elbow"])
        except Exception as e:
            self.skipped += 1
            logger.warning("unusable body frame: %s", e)
            return

        details: dict[str, Any] = {"hand_state": obj.get("hand_state", "open")}
        if self.frame is not None:
            details["frame"] = self.frame
        identity = self.identities.get(body_id)
        if identity is not None:
            details["identity"] = identity

        try:
            sample = kinect_pointing(hand, elbow, name=body_id, details=details)
        except DegeneratePoseError:
            self.skipped += 1
            return
        self.broker.publish(
            str(sample.topic()), encode(sample), publisher="vision"
        )

        head = joints.get("head")
        location = head if head is not None else joints["hand"]
        self.broker.publish(
            f"body.{body_id}.location",
            json.dumps(
                {"body_id": body_id, "position": list(location)},
                sort_keys=True,
                separators=(",", ":"),
            ).encode(),
            publisher="vision",
        )
        self.published += 1

        # resolve identity after publishing, so it lands on later samples
        if obj.get("facing_camera") and body_id not in self.identities:
            try:
                result = self.registry.call(
                    FACE_SERVICE, "identify", {"body_id": body_id}
                )
            except SpacebusError as e:
                logger.warning("identity query failed for %s: %s", body_id, e)
                return
            name = result.get("identity")
            if name:
                self.identities[body_id] = name
