"""User-view flow: walk to the authored spot, then relocalize the scene.

Saved character positions are local to the authoring session. Their
georeference turns them back into Earth coordinates, which buys two
things: a GPS navigation target (a point on the line of sight from the
authoring camera toward the content) and, once the user arrives, the same
characters expressed in the *new* session's local frame.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .documents import SUPPORTED_VERSION, SceneDocument
from .errors import ConfigInvalid, EmptyScene, VersionUnsupported
from .geodesy import (
    Geodetic,
    GeoReference,
    geodetic_to_local,
    haversine_distance,
    initial_bearing,
    local_to_geodetic,
)
from .geometry import Pose, quat_from_yaw


@dataclass(frozen=True)
class NavConfig:
    """Approach standoff from the content and the arrival radius, meters."""

    standoff_m: float = 15.0
    arrival_radius_m: float = 2.0

    def __post_init__(self):
        if self.standoff_m <= 0 or self.arrival_radius_m <= 0:
            raise ConfigInvalid("standoff and arrival radius must be positive")
        if self.standoff_m < self.arrival_radius_m:
            raise ConfigInvalid("standoff must be at least the arrival radius")


@dataclass(frozen=True)
class Guidance:
    """One navigation update toward the approach point."""

    distance_m: float
    relative_bearing_deg: float  # target bearing minus user heading, (-180, 180]
    arrived: bool


@dataclass(frozen=True)
class RelocalizedCharacter:
    id: int
    kind: str
    pose: Pose
    scale: float


def wrap_relative_deg(angle: float) -> float:
    """Wrap an angle difference into (-180, 180]."""
    a = angle % 360.0
    if a > 180.0:
        a -= 360.0
    return a


def approach_point(doc: SceneDocument, cfg: NavConfig = NavConfig()) -> Geodetic:
    """Navigation target on the authoring-camera -> content sight line.

    The point sits standoff_m short of the character centroid, clamped to
    the authoring camera position when the content is closer than that.
    """
    if not doc.characters:
        raise EmptyScene(f"scene {doc.scene_id!r} has no characters to approach")
    centroid = np.mean([c.position for c in doc.characters], axis=0)
    camera = doc.authoring_camera.position
    gap = camera - centroid
    length = float(np.linalg.norm(gap))
    if length <= cfg.standoff_m:
        local = camera
    else:
        local = centroid + gap * (cfg.standoff_m / length)
    return local_to_geodetic(doc.georeference, local)


def guidance_update(target: Geodetic, user_pos: Geodetic, user_heading_deg: float,
                    cfg: NavConfig = NavConfig()) -> Guidance:
    distance = haversine_distance(user_pos, target)
    if (user_pos.lat_deg, user_pos.lon_deg) == (target.lat_deg, target.lon_deg):
        return Guidance(distance_m=0.0, relative_bearing_deg=0.0, arrived=True)
    bearing = initial_bearing(user_pos, target)
    return Guidance(
        distance_m=distance,
        relative_bearing_deg=wrap_relative_deg(bearing - user_heading_deg),
        arrived=distance < cfg.arrival_radius_m,
    )


def relocalize(doc: SceneDocument, new_georef: GeoReference) -> list[RelocalizedCharacter]:
    """Express the saved characters in a new session's local frame.

    Positions go local -> geodetic -> new local through the two
    georeferences; yaws turn by the heading difference so each character
    keeps its compass facing. The result is ready to anchor in the new
    session.
    """
    if doc.version != SUPPORTED_VERSION:
        raise VersionUnsupported(f"cannot relocalize version {doc.version} documents")
    yaw_shift = doc.georeference.heading_deg - new_georef.heading_deg
    out = []
    for c in doc.characters:
        geo = local_to_geodetic(doc.georeference, c.position)
        position = geodetic_to_local(new_georef, geo)
        yaw = (c.yaw_deg + yaw_shift) % 360.0
        out.append(RelocalizedCharacter(
            id=c.id,
            kind=c.kind,
            pose=Pose(position=position, orientation=quat_from_yaw(yaw)),
            scale=c.scale,
        ))
    return out


# -- simulated GPS tracks -------------------------------------------------------

@dataclass(frozen=True)
class GpsFix:
    t_s: float
    position: Geodetic
    heading_deg: float


def load_gps_track(path: str | Path) -> list[GpsFix]:
    """Read a simulated GPS track: CSV rows ``t_s,lat_deg,lon_deg,heading_deg``.

    A header row is skipped when its first field is not numeric.
    """
    fixes = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or not row[0].strip():
                    continue
                try:
                    t = float(row[0])
                except ValueError:
                    continue  # header row
                if len(row) < 4:
                    raise ConfigInvalid(f"track row needs 4 fields, got {row}")
                fixes.append(GpsFix(
                    t_s=t,
                    position=Geodetic(float(row[1]), float(row[2])),
                    heading_deg=float(row[3]) % 360.0,
                ))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read GPS track {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigInvalid(f"bad GPS track {path}: {exc}") from exc
    return fixes
