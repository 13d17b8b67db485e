"""Simulated space workers: audio, vision, actuator, and display roles.

Each worker is wired only to the broker (and registry where noted) and
advances on the shared scheduler, so a whole space of them replays
identically under the virtual clock.
"""

from .display import DisplayWorker
from .lamp import LampWorker
from .proximity import ProximityWorker, proximity_level
from .speaker import SpeakerWorker
from .transcript import SpeakingMonitor, TranscriptWorker
from .vision import FaceRecognitionStub, VisionWorker

__all__ = [
    "DisplayWorker",
    "FaceRecognitionStub",
    "LampWorker",
    "ProximityWorker",
    "SpeakerWorker",
    "SpeakingMonitor",
    "TranscriptWorker",
    "VisionWorker",
    "proximity_level",
]
