"""Simulated AR session: scripted camera, plane detection, anchors, drift.

The simulator stands in for a phone AR runtime. A session is driven by a
trajectory of camera keyframes and a set of ground-truth horizontal planes.
Stepping the clock moves the camera, grows the detected portion of each
plane that has been observed long enough, and toggles tracking loss windows.

Two world frames matter:

* the *true* frame, where the ground-truth trajectory and planes live;
* the *estimated* frame the session exposes, which equals the true frame
  until a tracking reacquire applies a residual drift offset. Content held
  at fixed estimated coordinates then sits at ``estimated + drift`` in the
  true world, which is exactly how drifted AR content misses its physical
  spot.

Anchors store poses in the estimated frame and never move once created.

Detection model: each ground-truth plane is sampled on a 0.25 m grid; a
sample accumulates observation time whenever it is inside the camera
frustum and within detection range while tracking. Samples observed for at
least the dwell time become part of the detected extent, which is the
bounding rectangle (in the plane frame) of all observed samples.

A Session is a single-writer state machine; callers must serialize
mutations. FrameState snapshots are immutable and freely shareable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    ConfigInvalid,
    SessionEnded,
    TrackingLost,
    UnknownAnchor,
    UnknownPlane,
)
from .geometry import (
    CameraIntrinsics,
    Pose,
    PlaneGeometry,
    interpolate_pose,
    pose_from_json,
    raycast_plane,
    screen_ray,
)

FOOTPRINT_GRID_M = 0.25
_DWELL_TOL = 1e-9


class TrackingState(Enum):
    TRACKING = "Tracking"
    LOST = "Lost"


@dataclass(frozen=True)
class TrackingEvent:
    """One loss window: tracking drops at lose_at_s, returns at reacquire_at_s
    with a residual drift offset folded into the estimated frame."""

    lose_at_s: float
    reacquire_at_s: float
    residual_drift: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.lose_at_s < self.reacquire_at_s:
            raise ConfigInvalid("tracking event must lose before it reacquires")


@dataclass(frozen=True)
class SessionConfig:
    intrinsics: CameraIntrinsics
    trajectory: tuple[tuple[float, Pose], ...]
    world_planes: tuple[PlaneGeometry, ...] = ()
    detection_dwell_s: float = 0.5
    detection_range_m: float = 8.0
    max_hit_range_m: float = 50.0
    tracking_events: tuple[TrackingEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "trajectory",
                           tuple((float(t), p) for t, p in self.trajectory))
        object.__setattr__(self, "world_planes", tuple(self.world_planes))
        object.__setattr__(self, "tracking_events",
                           tuple(sorted(self.tracking_events, key=lambda e: e.lose_at_s)))
        if not self.trajectory:
            raise ConfigInvalid("trajectory needs at least one keyframe")
        times = [t for t, _ in self.trajectory]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigInvalid("keyframe times must be strictly increasing")
        if self.detection_dwell_s <= 0 or self.detection_range_m <= 0 or self.max_hit_range_m <= 0:
            raise ConfigInvalid("dwell and ranges must be positive")
        for a, b in zip(self.tracking_events, self.tracking_events[1:]):
            if b.lose_at_s < a.reacquire_at_s:
                raise ConfigInvalid("tracking events must not overlap")

    @property
    def end_time_s(self) -> float:
        """Sessions with a single keyframe hold that pose forever."""
        if len(self.trajectory) == 1:
            return math.inf
        return self.trajectory[-1][0]

    def camera_at(self, t: float) -> Pose:
        traj = self.trajectory
        if t <= traj[0][0]:
            return traj[0][1]
        if t >= traj[-1][0]:
            return traj[-1][1]
        for (t0, p0), (t1, p1) in zip(traj, traj[1:]):
            if t0 <= t <= t1:
                return interpolate_pose(p0, p1, (t - t0) / (t1 - t0))
        raise AssertionError("unreachable: keyframe times are ordered")


@dataclass(frozen=True)
class DetectedPlaneSummary:
    plane_id: int
    geometry: PlaneGeometry


@dataclass(frozen=True)
class AnchorSummary:
    anchor_id: int
    pose: Pose
    stale: bool


@dataclass(frozen=True)
class FrameState:
    """Immutable snapshot of one simulation frame (estimated-frame values)."""

    clock_s: float
    estimated_camera: Pose
    tracking_state: TrackingState
    planes: tuple[DetectedPlaneSummary, ...]
    anchors: tuple[AnchorSummary, ...]
    ended: bool


@dataclass(frozen=True)
class SessionHit:
    plane_id: int
    point: np.ndarray
    distance: float


@dataclass(frozen=True)
class ResolvedAnchor:
    pose: Pose
    stale: bool


class _PlaneTracker:
    """Per-plane detection bookkeeping over a fixed footprint sampling grid."""

    def __init__(self, plane: PlaneGeometry, dwell_s: float):
        self.plane = plane
        self._dwell = dwell_s
        xs = _grid_coords(plane.half_extent_x)
        zs = _grid_coords(plane.half_extent_z)
        gx, gz = np.meshgrid(xs, zs, indexing="ij")
        self.local_x = gx.ravel()
        self.local_z = gz.ravel()
        local = np.stack([self.local_x, np.zeros_like(self.local_x), self.local_z], axis=1)
        rot = _quat_matrix(plane.center.orientation)
        self.world = local @ rot.T + plane.center.position
        self.observed_s = np.zeros(len(self.local_x))
        self.detected: PlaneGeometry | None = None

    def accrue(self, camera: Pose, intrinsics: CameraIntrinsics,
               range_m: float, dt: float) -> None:
        rel = self.world - camera.position
        cam = rel @ _quat_matrix(camera.orientation)  # == R^T @ rel per row
        depth = -cam[:, 2]
        tan_v = math.tan(math.radians(intrinsics.vertical_fov_deg) / 2.0)
        tan_h = tan_v * intrinsics.width_px / intrinsics.height_px
        visible = (
            (depth > 1e-9)
            & (np.abs(cam[:, 0]) <= tan_h * depth)
            & (np.abs(cam[:, 1]) <= tan_v * depth)
            & (np.einsum("ij,ij->i", rel, rel) <= range_m * range_m)
        )
        if visible.any():
            self.observed_s[visible] += dt
            self._refresh()

    def force_observe_all(self) -> None:
        self.observed_s[:] = np.inf
        self._refresh()

    def _refresh(self) -> None:
        mask = self.observed_s + _DWELL_TOL >= self._dwell
        if not mask.any():
            return
        x = self.local_x[mask]
        z = self.local_z[mask]
        cx, cz = (x.min() + x.max()) / 2.0, (z.min() + z.max()) / 2.0
        self.detected = PlaneGeometry(
            center=Pose(position=self.plane.center.transform_point((cx, 0.0, cz)),
                        orientation=self.plane.center.orientation),
            half_extent_x=(x.max() - x.min()) / 2.0,
            half_extent_z=(z.max() - z.min()) / 2.0,
        )


def _grid_coords(half_extent: float) -> np.ndarray:
    if half_extent == 0.0:
        return np.zeros(1)
    n = max(2, int(math.ceil(2.0 * half_extent / FOOTPRINT_GRID_M)) + 1)
    return np.linspace(-half_extent, half_extent, n)


def _quat_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


class Session:
    """Single-writer simulated AR session."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.clock_s = 0.0
        self._ended = config.end_time_s <= 0.0
        self._trackers = [_PlaneTracker(p, config.detection_dwell_s)
                          for p in config.world_planes]
        self._anchors: dict[int, Pose] = {}
        self._next_anchor_id = 1

    # -- frame bookkeeping ------------------------------------------------

    @property
    def true_camera(self) -> Pose:
        return self.config.camera_at(self.clock_s)

    @property
    def tracking_state(self) -> TrackingState:
        for ev in self.config.tracking_events:
            if ev.lose_at_s <= self.clock_s < ev.reacquire_at_s:
                return TrackingState.LOST
        return TrackingState.TRACKING

    def _drift(self) -> np.ndarray:
        d = np.zeros(3)
        for ev in self.config.tracking_events:
            if self.clock_s >= ev.reacquire_at_s:
                d += ev.residual_drift
        return d

    @property
    def estimated_camera(self) -> Pose:
        """True camera expressed in the estimated frame (exact while drift-free)."""
        d = self._drift()
        true = self.true_camera
        if not d.any():
            return true
        return Pose(position=true.position - d, orientation=true.orientation)

    def estimated_to_true_offset(self) -> np.ndarray:
        """Translation taking estimated-frame points into the true world."""
        return self._drift()

    @property
    def detected_planes(self) -> dict[int, PlaneGeometry]:
        d = self._drift()
        out = {}
        for plane_id, tracker in enumerate(self._trackers):
            if tracker.detected is None:
                continue
            out[plane_id] = tracker.detected.translated(-d) if d.any() else tracker.detected
        return out

    @property
    def anchors(self) -> dict[int, Pose]:
        return dict(self._anchors)

    @property
    def ended(self) -> bool:
        return self._ended

    def frame_state(self) -> FrameState:
        stale = self.tracking_state is TrackingState.LOST
        return FrameState(
            clock_s=self.clock_s,
            estimated_camera=self.estimated_camera,
            tracking_state=self.tracking_state,
            planes=tuple(DetectedPlaneSummary(pid, geom)
                         for pid, geom in sorted(self.detected_planes.items())),
            anchors=tuple(AnchorSummary(aid, pose, stale)
                          for aid, pose in sorted(self._anchors.items())),
            ended=self._ended,
        )

    # -- operations ---------------------------------------------------------

    def step(self, dt_s: float) -> FrameState:
        if dt_s <= 0.0:
            raise ValueError("dt_s must be positive")
        if self._ended:
            raise SessionEnded(f"session ended at clock {self.clock_s}")
        end = self.config.end_time_s
        new_clock = min(self.clock_s + dt_s, end)
        effective_dt = new_clock - self.clock_s
        self.clock_s = new_clock
        if new_clock >= end:
            self._ended = True
        if self.tracking_state is TrackingState.TRACKING and effective_dt > 0.0:
            camera = self.true_camera
            for tracker in self._trackers:
                tracker.accrue(camera, self.config.intrinsics,
                               self.config.detection_range_m, effective_dt)
        return self.frame_state()

    def hit_test(self, tap: tuple[float, float]) -> list[SessionHit]:
        """Hits of the tap ray against detected plane extents, nearest first."""
        if self.tracking_state is TrackingState.LOST:
            raise TrackingLost("hit tests are unavailable while tracking is lost")
        ray = screen_ray(self.estimated_camera, self.config.intrinsics, tap)
        hits = []
        for plane_id, geom in self.detected_planes.items():
            hit = raycast_plane(ray, geom)
            if hit is not None and hit.distance <= self.config.max_hit_range_m:
                hits.append(SessionHit(plane_id=plane_id, point=hit.point,
                                       distance=hit.distance))
        hits.sort(key=lambda h: (h.distance, h.plane_id))
        return hits

    def create_anchor(self, pose: Pose, plane_id: int) -> int:
        if self.tracking_state is TrackingState.LOST:
            raise TrackingLost("cannot create anchors while tracking is lost")
        if plane_id not in self.detected_planes:
            raise UnknownPlane(f"plane {plane_id} is not detected")
        anchor_id = self._next_anchor_id
        self._next_anchor_id += 1
        self._anchors[anchor_id] = pose
        return anchor_id

    def resolve_anchor(self, anchor_id: int) -> ResolvedAnchor:
        if anchor_id not in self._anchors:
            raise UnknownAnchor(f"anchor {anchor_id} does not exist")
        return ResolvedAnchor(pose=self._anchors[anchor_id],
                              stale=self.tracking_state is TrackingState.LOST)

    def delete_anchor(self, anchor_id: int) -> None:
        if anchor_id not in self._anchors:
            raise UnknownAnchor(f"anchor {anchor_id} does not exist")
        del self._anchors[anchor_id]

    # -- simulation controls --------------------------------------------------

    def force_full_detection(self) -> None:
        """Mark every ground-truth plane fully detected (simulation shortcut)."""
        for tracker in self._trackers:
            tracker.force_observe_all()


# -- config files -----------------------------------------------------------------

def session_config_from_json(obj: dict) -> SessionConfig:
    try:
        intr = obj["intrinsics"]
        intrinsics = CameraIntrinsics(
            width_px=int(intr["width_px"]),
            height_px=int(intr["height_px"]),
            vertical_fov_deg=float(intr["vertical_fov_deg"]),
        )
        trajectory = tuple(
            (float(kf["time_s"]), pose_from_json(kf["pose"]))
            for kf in obj["trajectory"]
        )
        planes = tuple(
            PlaneGeometry(center=pose_from_json(p["center"]),
                          half_extent_x=float(p["half_extent_x"]),
                          half_extent_z=float(p["half_extent_z"]))
            for p in obj.get("world_planes", [])
        )
        events = tuple(
            TrackingEvent(lose_at_s=float(e["lose_at_s"]),
                          reacquire_at_s=float(e["reacquire_at_s"]),
                          residual_drift=tuple(float(c) for c in
                                               e.get("residual_drift", (0, 0, 0))))
            for e in obj.get("tracking_events", [])
        )
        return SessionConfig(
            intrinsics=intrinsics,
            trajectory=trajectory,
            world_planes=planes,
            detection_dwell_s=float(obj.get("detection_dwell_s", 0.5)),
            detection_range_m=float(obj.get("detection_range_m", 8.0)),
            max_hit_range_m=float(obj.get("max_hit_range_m", 50.0)),
            tracking_events=events,
        )
    except ConfigInvalid:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigInvalid(f"bad session config: {exc}") from exc


def load_session_config(path: str | Path) -> SessionConfig:
    """Load a SessionConfig from a JSON file (schema: session.schema)."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read session config {path}: {exc}") from exc
    return session_config_from_json(obj)
