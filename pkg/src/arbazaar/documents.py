"""Scene document model: the saved payload handed from authoring to viewing.

A version-1 document carries a georeference, the camera pose at save time
and one record per placed character (id, kind, local position, yaw and
scale). Everything is plain data so documents compare by value and
serialize without surprises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SchemaViolation
from .geodesy import GeoReference
from .geometry import Pose

SUPPORTED_VERSION = 1

SCALE_MIN = 0.01   # exclusive
SCALE_MAX = 100.0  # inclusive


@dataclass(frozen=True)
class CharacterRecord:
    """One saved character in the scene's local frame."""

    id: int
    kind: str
    position: tuple[float, float, float]
    yaw_deg: float
    scale: float

    def __post_init__(self):
        if not isinstance(self.id, int) or isinstance(self.id, bool) or self.id <= 0:
            raise SchemaViolation(f"character id must be a positive integer, got {self.id!r}")
        if not self.kind:
            raise SchemaViolation("character kind must be a non-empty string")
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise SchemaViolation(f"character {self.id}: position must be 3 finite numbers")
        object.__setattr__(self, "position", pos)
        if not math.isfinite(self.yaw_deg):
            raise SchemaViolation(f"character {self.id}: yaw must be finite")
        object.__setattr__(self, "yaw_deg", float(self.yaw_deg) % 360.0)
        if not (math.isfinite(self.scale) and SCALE_MIN < self.scale <= SCALE_MAX):
            raise SchemaViolation(
                f"character {self.id}: scale {self.scale} outside ({SCALE_MIN}, {SCALE_MAX}]")
        object.__setattr__(self, "scale", float(self.scale))


@dataclass(frozen=True)
class SceneDocument:
    version: int
    scene_id: str
    georeference: GeoReference
    authoring_camera: Pose
    characters: tuple[CharacterRecord, ...]

    def __post_init__(self):
        if not isinstance(self.version, int) or isinstance(self.version, bool):
            raise SchemaViolation(f"version must be an integer, got {self.version!r}")
        if not self.scene_id:
            raise SchemaViolation("scene_id must be a non-empty string")
        object.__setattr__(self, "characters", tuple(self.characters))
        ids = [c.id for c in self.characters]
        if len(set(ids)) != len(ids):
            raise SchemaViolation("character ids must be unique within a scene")
