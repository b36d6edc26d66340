"""Interactive authoring of anchored characters on a live session.

The authoring scene wraps a Session with the curator-facing feature set:
pick a prefab kind from the catalog, place it with a screen tap, relocate
or rescale it by its identification number, delete it, and save the whole
arrangement as a georeferenced scene document.

Placed characters are anchored at their tap hit point and turned to face
the camera that placed them. Identification numbers start at 1 and are
never reused within a scene, even after deletion; relocation keeps the
number (and the scale) of the character it moves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .documents import CharacterRecord, SceneDocument
from .errors import ConfigInvalid, IndexOutOfRange, NoHit, ScaleOutOfRange, UnknownId
from .geodesy import GeoReference
from .geometry import Pose
from .session import Session

SCALE_MIN = 0.01   # exclusive
SCALE_MAX = 100.0  # inclusive


@dataclass(frozen=True)
class PrefabKind:
    """Catalog entry: a placeable character template at scale 1.0."""

    name: str
    footprint_radius_m: float
    height_m: float

    def __post_init__(self):
        if not self.name:
            raise ConfigInvalid("prefab kind needs a name")
        if self.footprint_radius_m <= 0 or self.height_m <= 0:
            raise ConfigInvalid(f"prefab {self.name}: radius and height must be positive")


# placeholder heritage catalog; prefab geometry is data, not code
DEFAULT_CATALOG = (
    PrefabKind("dancer", footprint_radius_m=0.35, height_m=1.7),
    PrefabKind("merchant", footprint_radius_m=0.45, height_m=1.75),
    PrefabKind("guard", footprint_radius_m=0.4, height_m=1.85),
    PrefabKind("musician", footprint_radius_m=0.4, height_m=1.7),
)


@dataclass(frozen=True)
class PlacedCharacter:
    id: int
    kind: str
    anchor_id: int
    yaw_deg: float
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "yaw_deg", self.yaw_deg % 360.0)


class AuthoringScene:
    """Single-writer authoring state over one session's anchors."""

    def __init__(self, catalog=DEFAULT_CATALOG):
        self.catalog = tuple(catalog)
        if not self.catalog:
            raise ConfigInvalid("prefab catalog must not be empty")
        names = [k.name for k in self.catalog]
        if len(set(names)) != len(names):
            raise ConfigInvalid("prefab kind names must be unique")
        self.characters: dict[int, PlacedCharacter] = {}
        self.next_id = 1
        self.selected_kind_index = 0

    @property
    def selected_kind(self) -> PrefabKind:
        return self.catalog[self.selected_kind_index]

    def select_prefab_kind(self, index: int) -> PrefabKind:
        if not 0 <= index < len(self.catalog):
            raise IndexOutOfRange(
                f"catalog index {index} out of range [0, {len(self.catalog)})")
        self.selected_kind_index = index
        return self.catalog[index]

    def place_prefab(self, session: Session, tap: tuple[float, float]) -> PlacedCharacter:
        hit, yaw = self._hit_and_yaw(session, tap)
        anchor_id = session.create_anchor(Pose(position=hit.point), hit.plane_id)
        character = PlacedCharacter(
            id=self.next_id,
            kind=self.selected_kind.name,
            anchor_id=anchor_id,
            yaw_deg=yaw,
            scale=1.0,
        )
        self.characters[character.id] = character
        self.next_id += 1
        return character

    def relocate_prefab(self, session: Session, char_id: int,
                        tap: tuple[float, float]) -> PlacedCharacter:
        """Move a character to a new tap hit, keeping its id, kind and scale.

        On NoHit (or while tracking is lost) the character is untouched.
        """
        old = self._get(char_id)
        hit, yaw = self._hit_and_yaw(session, tap)
        anchor_id = session.create_anchor(Pose(position=hit.point), hit.plane_id)
        session.delete_anchor(old.anchor_id)
        moved = replace(old, anchor_id=anchor_id, yaw_deg=yaw)
        self.characters[char_id] = moved
        return moved

    def scale_prefab(self, char_id: int, scale: float) -> PlacedCharacter:
        if not SCALE_MIN < scale <= SCALE_MAX:
            raise ScaleOutOfRange(
                f"scale {scale} outside ({SCALE_MIN}, {SCALE_MAX}]")
        old = self._get(char_id)
        scaled = replace(old, scale=float(scale))
        self.characters[char_id] = scaled
        return scaled

    def delete_prefab(self, session: Session, char_id: int) -> None:
        old = self._get(char_id)
        session.delete_anchor(old.anchor_id)
        del self.characters[char_id]

    def save_scene(self, session: Session, georef: GeoReference,
                   scene_id: str) -> SceneDocument:
        """Snapshot the scene as a version-1 document in the local frame."""
        records = []
        for char_id in sorted(self.characters):
            c = self.characters[char_id]
            position = session.resolve_anchor(c.anchor_id).pose.position
            records.append(CharacterRecord(
                id=c.id,
                kind=c.kind,
                position=tuple(float(v) for v in position),
                yaw_deg=c.yaw_deg,
                scale=c.scale,
            ))
        return SceneDocument(
            version=1,
            scene_id=scene_id,
            georeference=georef,
            authoring_camera=session.estimated_camera,
            characters=tuple(records),
        )

    def character_position(self, session: Session, char_id: int) -> np.ndarray:
        return session.resolve_anchor(self._get(char_id).anchor_id).pose.position

    # -- helpers ------------------------------------------------------------

    def _get(self, char_id: int) -> PlacedCharacter:
        if char_id not in self.characters:
            raise UnknownId(f"no character with id {char_id}")
        return self.characters[char_id]

    def _hit_and_yaw(self, session: Session, tap) -> tuple:
        hits = session.hit_test(tap)
        if not hits:
            raise NoHit(f"tap {tap} missed every detected plane")
        hit = hits[0]
        return hit, facing_yaw_deg(hit.point, session.estimated_camera.position)


def facing_yaw_deg(char_position, camera_position) -> float:
    """Compass-style yaw (clockwise from above, 0 = local -z) turning a
    character at char_position toward the camera, horizontal projection."""
    f = np.asarray(camera_position, dtype=np.float64) - np.asarray(char_position, dtype=np.float64)
    if math.hypot(f[0], f[2]) < 1e-12:
        return 0.0  # camera straight overhead: orientation is arbitrary
    return math.degrees(math.atan2(f[0], -f[2])) % 360.0


# -- catalog files ------------------------------------------------------------

def catalog_from_json(obj) -> tuple[PrefabKind, ...]:
    if not isinstance(obj, list) or not obj:
        raise ConfigInvalid("catalog must be a non-empty list of prefab kinds")
    try:
        return tuple(
            PrefabKind(name=str(entry["name"]),
                       footprint_radius_m=float(entry["footprint_radius_m"]),
                       height_m=float(entry["height_m"]))
            for entry in obj
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad catalog entry: {exc}") from exc


def load_catalog(path: str | Path) -> tuple[PrefabKind, ...]:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read catalog {path}: {exc}") from exc
    return catalog_from_json(obj)
