"""Canonical scene-document bytes and the durable scene store.

The wire format is JSON with a determinism rule so that equal documents
produce byte-identical files: keys sorted lexicographically, no
insignificant whitespace, and every number rendered as the shortest
decimal string that round-trips to the same double (integral values lose
the trailing ``.0``). That makes golden-file tests exact and lets the
viewer fetch scenes byte-for-byte as they were saved.

The store keeps one file per scene under a data directory; writes go
through a temp file and an atomic rename, so concurrent readers always see
a complete previously-put document.
"""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
import threading
from pathlib import Path

from .documents import CharacterRecord, SceneDocument
from .errors import (
    InvalidSceneId,
    MalformedDocument,
    SchemaViolation,
    UnknownScene,
    VersionUnsupported,
)
from .geodesy import Geodetic, GeoReference
from .geometry import Pose

SCENE_ID_RE = re.compile(r"^[a-z0-9-]{1,64}$")

_CHARACTER_KEYS = {"id", "kind", "position", "scale", "yaw_deg"}
_DOCUMENT_KEYS = {"authoring_camera", "characters", "georeference", "scene_id", "version"}
_GEOREF_KEYS = {"heading_deg", "origin"}
_ORIGIN_KEYS = {"alt_m", "lat_deg", "lon_deg"}
_POSE_KEYS = {"orientation", "position"}


# -- canonical JSON ------------------------------------------------------------

def format_number(x) -> str:
    """Shortest decimal representation that round-trips the double x."""
    if isinstance(x, bool):
        raise TypeError("booleans are not scene numbers")
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {x!r} cannot be encoded")
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))  # also folds -0.0 into 0
    return repr(x)


def canonical_json(value) -> str:
    if isinstance(value, dict):
        items = ",".join(
            f"{json.dumps(k)}:{canonical_json(value[k])}" for k in sorted(value))
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in value) + "]"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return format_number(value)
    if value is None:
        return "null"
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


# -- document <-> plain JSON objects ---------------------------------------------

def scene_to_obj(doc: SceneDocument) -> dict:
    return {
        "version": doc.version,
        "scene_id": doc.scene_id,
        "georeference": {
            "heading_deg": doc.georeference.heading_deg,
            "origin": {
                "lat_deg": doc.georeference.origin.lat_deg,
                "lon_deg": doc.georeference.origin.lon_deg,
                "alt_m": doc.georeference.origin.alt_m,
            },
        },
        "authoring_camera": {
            "position": [float(v) for v in doc.authoring_camera.position],
            "orientation": [float(v) for v in doc.authoring_camera.orientation],
        },
        "characters": [
            {
                "id": c.id,
                "kind": c.kind,
                "position": list(c.position),
                "yaw_deg": c.yaw_deg,
                "scale": c.scale,
            }
            for c in doc.characters
        ],
    }


def encode_scene(doc: SceneDocument) -> bytes:
    return canonical_json(scene_to_obj(doc)).encode("ascii")


def _expect_keys(obj: dict, keys: set, what: str) -> None:
    got = set(obj)
    if got != keys:
        missing = keys - got
        extra = got - keys
        detail = []
        if missing:
            detail.append(f"missing {sorted(missing)}")
        if extra:
            detail.append(f"unexpected {sorted(extra)}")
        raise SchemaViolation(f"{what}: {', '.join(detail)}")


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise SchemaViolation(f"{what} must be finite")
    return float(value)


def _vector(value, n: int, what: str) -> tuple:
    if not isinstance(value, list) or len(value) != n:
        raise SchemaViolation(f"{what} must be a list of {n} numbers")
    return tuple(_number(v, what) for v in value)


def decode_scene(data: bytes | str) -> SceneDocument:
    """Parse and validate scene-document bytes.

    Raises MalformedDocument on broken syntax, VersionUnsupported on a
    version other than 1, SchemaViolation on missing fields or bad ranges.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not valid UTF-8: {exc}") from exc

    def reject_constant(name):
        raise MalformedDocument(f"non-finite literal {name} is not valid JSON")

    try:
        obj = json.loads(data, parse_constant=reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaViolation("scene document must be a JSON object")

    version = obj.get("version")
    if isinstance(version, bool) or not isinstance(version, int):
        raise SchemaViolation(f"version must be an integer, got {version!r}")
    if version != 1:
        raise VersionUnsupported(f"scene document version {version} is not supported")

    _expect_keys(obj, _DOCUMENT_KEYS, "scene document")
    scene_id = obj["scene_id"]
    if not isinstance(scene_id, str) or not scene_id:
        raise SchemaViolation("scene_id must be a non-empty string")

    georef_obj = obj["georeference"]
    if not isinstance(georef_obj, dict):
        raise SchemaViolation("georeference must be an object")
    _expect_keys(georef_obj, _GEOREF_KEYS, "georeference")
    origin_obj = georef_obj["origin"]
    if not isinstance(origin_obj, dict):
        raise SchemaViolation("georeference origin must be an object")
    _expect_keys(origin_obj, _ORIGIN_KEYS, "georeference origin")
    try:
        georef = GeoReference(
            origin=Geodetic(
                lat_deg=_number(origin_obj["lat_deg"], "lat_deg"),
                lon_deg=_number(origin_obj["lon_deg"], "lon_deg"),
                alt_m=_number(origin_obj["alt_m"], "alt_m"),
            ),
            heading_deg=_number(georef_obj["heading_deg"], "heading_deg"),
        )
    except ValueError as exc:
        raise SchemaViolation(str(exc)) from exc

    camera_obj = obj["authoring_camera"]
    if not isinstance(camera_obj, dict):
        raise SchemaViolation("authoring_camera must be an object")
    _expect_keys(camera_obj, _POSE_KEYS, "authoring_camera")
    try:
        camera = Pose(position=_vector(camera_obj["position"], 3, "camera position"),
                      orientation=_vector(camera_obj["orientation"], 4, "camera orientation"))
    except ValueError as exc:
        raise SchemaViolation(str(exc)) from exc

    characters_obj = obj["characters"]
    if not isinstance(characters_obj, list):
        raise SchemaViolation("characters must be a list")
    records = []
    for entry in characters_obj:
        if not isinstance(entry, dict):
            raise SchemaViolation("character record must be an object")
        _expect_keys(entry, _CHARACTER_KEYS, "character record")
        char_id = entry["id"]
        if isinstance(char_id, bool) or not isinstance(char_id, int):
            raise SchemaViolation(f"character id must be an integer, got {char_id!r}")
        kind = entry["kind"]
        if not isinstance(kind, str):
            raise SchemaViolation("character kind must be a string")
        records.append(CharacterRecord(
            id=char_id,
            kind=kind,
            position=_vector(entry["position"], 3, f"character {char_id} position"),
            yaw_deg=_number(entry["yaw_deg"], f"character {char_id} yaw_deg"),
            scale=_number(entry["scale"], f"character {char_id} scale"),
        ))

    return SceneDocument(
        version=version,
        scene_id=scene_id,
        georeference=georef,
        authoring_camera=camera,
        characters=tuple(records),
    )


# -- durable store -----------------------------------------------------------------

def validate_scene_id(scene_id: str) -> str:
    if not isinstance(scene_id, str) or not SCENE_ID_RE.match(scene_id):
        raise InvalidSceneId(f"scene id {scene_id!r} must match [a-z0-9-]{{1,64}}")
    return scene_id


class SceneStore:
    """File-per-scene store; put overwrites, contents survive restarts."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, scene_id: str) -> Path:
        return self.data_dir / f"{scene_id}.json"

    def put_scene(self, scene_id: str, doc: SceneDocument) -> bool:
        """Store doc under scene_id; returns True when the id was new."""
        validate_scene_id(scene_id)
        if doc.scene_id != scene_id:
            raise ValueError(
                f"document carries scene_id {doc.scene_id!r}, expected {scene_id!r}")
        payload = encode_scene(doc)
        path = self._path(scene_id)
        with self._lock:
            created = not path.exists()
            fd, tmp = tempfile.mkstemp(dir=self.data_dir, prefix=f".{scene_id}.")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(payload)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return created

    def get_scene_bytes(self, scene_id: str) -> bytes:
        validate_scene_id(scene_id)
        path = self._path(scene_id)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise UnknownScene(f"no scene stored under {scene_id!r}") from None

    def get_scene(self, scene_id: str) -> SceneDocument:
        return decode_scene(self.get_scene_bytes(scene_id))

    def list_scenes(self) -> list[tuple[str, int]]:
        """(scene_id, character_count) pairs sorted by scene id."""
        out = []
        for path in sorted(self.data_dir.glob("*.json")):
            scene_id = path.stem
            if not SCENE_ID_RE.match(scene_id):
                continue
            try:
                doc = decode_scene(path.read_bytes())
            except (MalformedDocument, SchemaViolation, VersionUnsupported):
                continue
            out.append((scene_id, len(doc.characters)))
        return out
