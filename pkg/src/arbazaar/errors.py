"""Exception types shared across the toolkit.

Every error raised on a contract violation derives from ArBazaarError so
callers (CLI, HTTP service) can map them to exit codes / status codes in
one place.
"""


class ArBazaarError(Exception):
    """Base class for all toolkit errors."""


# -- geometry ----------------------------------------------------------------

class TapOutOfBounds(ArBazaarError):
    """Tap coordinates fall outside the camera image."""


# -- session -----------------------------------------------------------------

class ConfigInvalid(ArBazaarError):
    """A configuration file or object violates its schema."""


class SessionEnded(ArBazaarError):
    """The session clock is already past the final trajectory keyframe."""


class TrackingLost(ArBazaarError):
    """Operation needs live tracking but the session is in the Lost state."""


class UnknownPlane(ArBazaarError):
    """No detected plane with the given id."""


class UnknownAnchor(ArBazaarError):
    """No anchor with the given id (never created, or deleted)."""


# -- authoring ---------------------------------------------------------------

class IndexOutOfRange(ArBazaarError):
    """Prefab catalog index outside the catalog bounds."""


class NoHit(ArBazaarError):
    """A tap ray missed every detected plane."""


class UnknownId(ArBazaarError):
    """No placed character with the given identification number."""


class ScaleOutOfRange(ArBazaarError):
    """Requested character scale outside (0.01, 100]."""


# -- geodesy -----------------------------------------------------------------

class NearSingular(ArBazaarError):
    """ECEF point too close to the Earth center to invert."""


class CoincidentPoints(ArBazaarError):
    """Bearing undefined: the two geodetic points coincide."""


# -- navigation --------------------------------------------------------------

class EmptyScene(ArBazaarError):
    """The scene document holds no characters."""


# -- persistence -------------------------------------------------------------

class MalformedDocument(ArBazaarError):
    """Scene document bytes are not syntactically valid."""


class SchemaViolation(ArBazaarError):
    """Scene document parsed but a field is missing or out of range."""


class VersionUnsupported(ArBazaarError):
    """Scene document format version not supported by this build."""


class UnknownScene(ArBazaarError):
    """No stored scene with the given scene id."""


class InvalidSceneId(ArBazaarError):
    """Scene id does not match ``[a-z0-9-]{1,64}``."""


class UnknownSession(ArBazaarError):
    """No live session with the given session id."""
