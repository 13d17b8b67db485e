"""Exception hierarchy shared across the spacebus package."""

from __future__ import annotations


class SpacebusError(Exception):
    """Base class for all spacebus errors."""


# Topic / pattern handling

class MalformedTopicError(SpacebusError):
    """A published topic violates the topic word rules."""


class MalformedPatternError(SpacebusError):
    """A subscription pattern could not be parsed."""


# Broker

class RejectedPublishError(SpacebusError):
    """Publish attempted on a broker that has shut down."""


class ModeMismatchError(SpacebusError):
    """A fetch was attempted on a push-mode handle (or vice versa)."""


class StaleHandleError(SpacebusError):
    """A subscription handle was used after cancellation."""


class InvalidSubscriptionError(SpacebusError):
    """Subscription options are inconsistent (e.g. group on a fetch queue)."""


class InvalidCapacityError(SpacebusError):
    """History exchange capacity must be >= 1."""


class FrameCodecError(SpacebusError):
    """A wire frame could not be encoded or decoded."""


# Registry

class ConflictError(SpacebusError):
    """A name is already claimed by a live lease held by someone else."""


class StaleLeaseError(SpacebusError):
    """Renewal attempted with an expired or unknown lease token."""


class InvalidQueryError(SpacebusError):
    """A registry lookup was issued without any criteria."""


class FederationUnavailableError(SpacebusError):
    """Every federation member failed to answer."""


class NotFoundError(SpacebusError):
    """No live registry entry matches the requested service name."""


class CallTimeoutError(SpacebusError):
    """A request/response call did not complete within its timeout."""


class UnreachableError(SpacebusError):
    """The resolved service address refused or dropped the connection."""


# Geometry

class GeometryError(SpacebusError):
    """Invalid geometric construction (non-unit axis, bad box, ...)."""


class FrameError(SpacebusError):
    """Coordinate frame mismatch or unresolvable frame path."""


class OffPlaneError(SpacebusError):
    """A point handed to a display projection is not on the surface plane."""


# Pointer model

class DecodeError(SpacebusError):
    """A pointer wire record is malformed; holds the offending field name."""

    def __init__(self, field: str, reason: str = ""):
        self.field = field
        super().__init__(f"bad pointer field {field!r}" + (f": {reason}" if reason else ""))


class VocabularyError(SpacebusError):
    """A sample carries a button label outside its device vocabulary."""


class IdentityError(SpacebusError):
    """A sample has no usable pointer identity."""


class DegeneratePoseError(SpacebusError):
    """Arm joints coincide; no pointing direction can be derived."""


# Hotspot engine

class InvalidHierarchyError(SpacebusError):
    """Hotspot parent missing or child box not contained in the parent."""


class NoDragContextError(SpacebusError):
    """Payload attach attempted while the pointer holds no press/drag."""


# Facade

class ConnectError(SpacebusError):
    """Space connection failed; `component` names broker or registry."""

    def __init__(self, component: str, reason: str = ""):
        self.component = component
        super().__init__(f"cannot connect to {component}" + (f": {reason}" if reason else ""))


class ClosedHandleError(SpacebusError):
    """Operation on a SpaceHandle that has been closed."""


class InvalidArgumentError(SpacebusError):
    """A facade call received an unusable argument."""


# Scenario harness

class ScenarioValidationError(SpacebusError):
    """Scenario document failed validation; `items` lists every problem."""

    def __init__(self, items: list[str]):
        self.items = list(items)
        super().__init__("scenario invalid:\n" + "\n".join(f"  - {i}" for i in items))


class ExpectationError(SpacebusError):
    """An expectation failed during a scenario run."""


class ReplayVersionError(SpacebusError):
    """Recorded log schema version is not supported by this build."""


class InvalidRateError(SpacebusError):
    """Benchmark rate must be a positive number."""


class InsufficientSamplesError(SpacebusError):
    """Benchmark needs >= 1000 messages for stable tail percentiles."""


class InvalidInputError(SpacebusError):
    """Generic invalid input to a worker-level computation."""
