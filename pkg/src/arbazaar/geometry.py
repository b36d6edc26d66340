"""Rigid transforms, pinhole camera rays and ray/plane hit testing.

Coordinate conventions used throughout the toolkit:

* world and camera frames are right-handed with y up,
* the camera looks along its local -z axis,
* image coordinates (u, v) start at the top-left pixel corner with v
  growing downward, principal point at the image center, square pixels,
* plane frames carry their normal on the local +y axis.

Quaternions are stored (w, x, y, z) and kept unit-length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TapOutOfBounds

_UNIT_TOL = 1e-9
# forward hits only; keeps a ray that starts on a plane from hitting it
_RAY_EPS = 1e-6


def _as_vec3(value) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64).reshape(3).copy()
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite 3-vector: {value!r}")
    v.setflags(write=False)
    return v


def _as_quat(value) -> np.ndarray:
    q = np.asarray(value, dtype=np.float64).reshape(4).copy()
    norm = float(np.linalg.norm(q))
    if not math.isfinite(norm) or norm < _UNIT_TOL:
        raise ValueError(f"degenerate quaternion: {value!r}")
    if abs(norm - 1.0) > 1e-12:
        # leave already-unit inputs untouched so decoded values stay bitwise
        q /= norm
    q.setflags(write=False)
    return q


# -- quaternion algebra -------------------------------------------------------

def quat_identity() -> np.ndarray:
    return _as_quat((1.0, 0.0, 0.0, 0.0))


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b; rotating by the result applies b first, then a."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate 3-vector v by unit quaternion q."""
    w, x, y, z = q
    u = np.array([x, y, z])
    uv = np.cross(u, np.asarray(v, dtype=np.float64))
    return np.asarray(v, dtype=np.float64) + 2.0 * (w * uv + np.cross(u, uv))


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    ax = np.asarray(axis, dtype=np.float64)
    n = float(np.linalg.norm(ax))
    if n < _UNIT_TOL:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * angle_rad
    return np.concatenate(([math.cos(half)], math.sin(half) / n * ax))


def quat_from_yaw(yaw_deg: float) -> np.ndarray:
    """Orientation of a character facing yaw_deg.

    Yaw is measured clockwise when seen from above (compass-like); yaw 0
    faces the frame's -z axis. Clockwise-from-above is a negative rotation
    about +y in right-handed terms.
    """
    return quat_from_axis_angle((0.0, 1.0, 0.0), -math.radians(yaw_deg))


def quat_slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Spherical linear interpolation along the shorter arc."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        out = (1.0 - t) * a + t * b
        return out / np.linalg.norm(out)
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    out = (math.sin((1.0 - t) * theta) / s) * a + (math.sin(t * theta) / s) * b
    return out / np.linalg.norm(out)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix of unit quaternion q."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


# -- rigid transforms ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: position in meters plus unit quaternion (w, x, y, z).

    A Pose maps local-frame coordinates into the parent frame:
    ``world = R(orientation) @ local + position``.
    """

    position: np.ndarray = field(default_factory=lambda: _as_vec3((0.0, 0.0, 0.0)))
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        object.__setattr__(self, "orientation", _as_quat(self.orientation))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return (np.array_equal(self.position, other.position)
                and np.array_equal(self.orientation, other.orientation))

    def transform_point(self, p) -> np.ndarray:
        return quat_rotate(self.orientation, p) + self.position

    def rotate_vector(self, v) -> np.ndarray:
        return quat_rotate(self.orientation, v)

    def inverse_transform_point(self, p) -> np.ndarray:
        return quat_rotate(quat_conjugate(self.orientation),
                           np.asarray(p, dtype=np.float64) - self.position)

    def forward(self) -> np.ndarray:
        """World direction of the local -z axis."""
        return quat_rotate(self.orientation, np.array([0.0, 0.0, -1.0]))

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_translation(x: float, y: float, z: float) -> "Pose":
        return Pose(position=(x, y, z))

    @staticmethod
    def from_yaw_position(yaw_deg: float, position) -> "Pose":
        return Pose(position=position, orientation=quat_from_yaw(yaw_deg))

    def approx_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        if float(np.linalg.norm(self.position - other.position)) > tol:
            return False
        return abs(float(np.dot(self.orientation, other.orientation))) >= 1.0 - tol


def compose(a: Pose, b: Pose) -> Pose:
    """Pose applying b first, then a (a.transform after b.transform)."""
    return Pose(
        position=a.transform_point(b.position),
        orientation=quat_multiply(a.orientation, b.orientation),
    )


def invert(p: Pose) -> Pose:
    q_inv = quat_conjugate(p.orientation)
    return Pose(position=-quat_rotate(q_inv, p.position), orientation=q_inv)


def interpolate_pose(a: Pose, b: Pose, t: float) -> Pose:
    """Linear position / spherical orientation blend, t in [0, 1]."""
    return Pose(
        position=(1.0 - t) * a.position + t * b.position,
        orientation=quat_slerp(a.orientation, b.orientation, t),
    )


# -- pinhole camera ------------------------------------------------------------

@dataclass(frozen=True)
class CameraIntrinsics:
    """Ideal pinhole camera: image size in pixels plus vertical field of view."""

    width_px: int
    height_px: int
    vertical_fov_deg: float

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0.0 < self.vertical_fov_deg < 180.0:
            raise ValueError("vertical fov must lie in (0, 180) degrees")

    @property
    def focal_px(self) -> float:
        return (self.height_px / 2.0) / math.tan(math.radians(self.vertical_fov_deg) / 2.0)

    @property
    def horizontal_fov_deg(self) -> float:
        return math.degrees(2.0 * math.atan((self.width_px / 2.0) / self.focal_px))


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin))
        d = np.asarray(self.direction, dtype=np.float64).reshape(3).copy()
        n = float(np.linalg.norm(d))
        if not math.isfinite(n) or n < _UNIT_TOL:
            raise ValueError("ray direction must be nonzero")
        d /= n
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)

    def point_at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


def screen_ray(camera: Pose, k: CameraIntrinsics, tap: tuple[float, float]) -> Ray:
    """Back-project a screen tap through the pinhole model into a world ray.

    Taps on the far edges (u == width, v == height) are accepted: screen
    coordinates span the image edge-to-edge, not pixel centers.
    """
    u, v = float(tap[0]), float(tap[1])
    if not (0.0 <= u <= k.width_px) or not (0.0 <= v <= k.height_px):
        raise TapOutOfBounds(f"tap ({u}, {v}) outside {k.width_px}x{k.height_px} image")
    f = k.focal_px
    d_cam = np.array([
        (u - k.width_px / 2.0) / f,
        -(v - k.height_px / 2.0) / f,   # v grows downward, y is up
        -1.0,
    ])
    return Ray(origin=camera.position, direction=camera.rotate_vector(d_cam))


# -- planes and hits -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PlaneGeometry:
    """Rectangular horizontal plane patch.

    ``center`` places the plane frame in the world; the plane normal is the
    frame's local +y axis and the rectangle spans +-half_extent on the local
    x and z axes.
    """

    center: Pose
    half_extent_x: float
    half_extent_z: float

    def __post_init__(self):
        if self.half_extent_x < 0.0 or self.half_extent_z < 0.0:
            raise ValueError("plane half extents must be >= 0")

    def normal(self) -> np.ndarray:
        return self.center.rotate_vector(np.array([0.0, 1.0, 0.0]))

    def contains_local(self, x: float, z: float, tol: float = 1e-9) -> bool:
        return abs(x) <= self.half_extent_x + tol and abs(z) <= self.half_extent_z + tol

    def translated(self, offset) -> "PlaneGeometry":
        return PlaneGeometry(
            center=Pose(position=self.center.position + _as_vec3(offset),
                        orientation=self.center.orientation),
            half_extent_x=self.half_extent_x,
            half_extent_z=self.half_extent_z,
        )


@dataclass(frozen=True, eq=False)
class Hit:
    point: np.ndarray
    distance: float

    def __post_init__(self):
        object.__setattr__(self, "point", _as_vec3(self.point))


def pose_to_json(p: Pose) -> dict:
    return {
        "position": [float(c) for c in p.position],
        "orientation": [float(c) for c in p.orientation],
    }


def pose_from_json(obj) -> Pose:
    if not isinstance(obj, dict) or "position" not in obj:
        raise ValueError(f"expected a pose object, got {obj!r}")
    return Pose(position=obj["position"],
                orientation=obj.get("orientation", (1.0, 0.0, 0.0, 0.0)))


def raycast_plane(ray: Ray, plane: PlaneGeometry) -> Hit | None:
    """Nearest forward intersection of ray with the plane rectangle, or None.

    None covers rays parallel to the plane, intersections behind the origin
    (t <= 1e-6) and intersections outside the rectangular extent.
    """
    o = plane.center.inverse_transform_point(ray.origin)
    d = quat_rotate(quat_conjugate(plane.center.orientation), ray.direction)
    if abs(d[1]) < 1e-12:
        return None
    t = -o[1] / d[1]
    if t <= _RAY_EPS:
        return None
    local = o + t * d
    if not plane.contains_local(local[0], local[2]):
        return None
    return Hit(point=ray.point_at(t), distance=float(t))
