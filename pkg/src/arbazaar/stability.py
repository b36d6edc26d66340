"""Measurable stand-ins for the framework evaluation: stability and range.

Two tracker models are compared on identical simulated sessions. The
marker-based model tracks only while a square ground marker is fully
inside the camera frustum, and its augmentations carry per-frame
reprojection noise (flicker). The markerless model tracks whenever at
least one detected plane exists, which persists once acquired.

A stability run holds content anchored dead ahead at a configured depth,
shakes the camera laterally with a sinusoid, and reports:

* mean frame-to-frame reprojection displacement of the anchor (px),
* peak reprojection offset from the rest pose (px), which for lateral
  amplitude A at depth d is focal_px * A / d,
* world drift of the anchor in the true frame (m),
* tracking uptime over the measured frames.

The distance run asks how far along the forward ground line a tap can
still place content; the answer is bounded by the detected plane extent
and by the session's maximum hit range.

All randomness is seeded, so reports are reproducible byte for byte.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid
from .geometry import CameraIntrinsics, PlaneGeometry, Pose
from .session import Session, SessionConfig, TrackingEvent, TrackingState

DEFAULT_INTRINSICS = CameraIntrinsics(width_px=1920, height_px=1080, vertical_fov_deg=60.0)
STABILITY_CSV_HEADER = ("tracker", "jitter_amp_m", "jitter_freq_hz",
                        "reproj_px", "drift_m", "uptime")


class TrackerKind(Enum):
    MARKER_BASED = "MarkerBased"
    MARKERLESS = "Markerless"


@dataclass(frozen=True)
class TrackerModel:
    kind: TrackerKind
    marker_pose: Pose | None = None
    marker_size_m: float = 0.3
    flicker_noise_px: float = 0.0

    def __post_init__(self):
        if self.flicker_noise_px < 0:
            raise ConfigInvalid("flicker noise must be >= 0")
        if self.kind is TrackerKind.MARKER_BASED:
            if self.marker_pose is None:
                raise ConfigInvalid("marker-based tracker needs a marker pose")
            if self.marker_size_m <= 0:
                raise ConfigInvalid("marker size must be positive")

    def marker_corners(self) -> np.ndarray:
        """World corners of the square marker (local x-z plane)."""
        s = self.marker_size_m / 2.0
        corners = [(-s, 0.0, -s), (-s, 0.0, s), (s, 0.0, -s), (s, 0.0, s)]
        return np.array([self.marker_pose.transform_point(c) for c in corners])

    def is_tracking(self, session: Session) -> bool:
        if session.tracking_state is not TrackingState.TRACKING:
            return False
        if self.kind is TrackerKind.MARKERLESS:
            return bool(session.detected_planes)
        camera = session.true_camera
        k = session.config.intrinsics
        tan_v = math.tan(math.radians(k.vertical_fov_deg) / 2.0)
        tan_h = tan_v * k.width_px / k.height_px
        for corner in self.marker_corners():
            local = camera.inverse_transform_point(corner)
            depth = -local[2]
            if depth <= 1e-9:
                return False
            if abs(local[0]) > tan_h * depth or abs(local[1]) > tan_v * depth:
                return False
        return True


@dataclass(frozen=True)
class StabilityConfig:
    tracker: TrackerModel
    jitter_amplitude_m: float = 0.0
    jitter_freq_hz: float = 1.0
    duration_s: float = 5.0
    frame_rate_hz: float = 30.0
    anchor_depth_m: float = 2.0
    camera_height_m: float = 1.6
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    world_planes: tuple[PlaneGeometry, ...] = (
        PlaneGeometry(center=Pose(), half_extent_x=10.0, half_extent_z=10.0),
    )
    tracking_events: tuple[TrackingEvent, ...] = ()
    detection_dwell_s: float = 0.5
    detection_range_m: float = 8.0
    seed: int = 0
    # measured-phase camera path (time from measurement start); replaces the
    # built-in lateral jitter when set, e.g. for marker-visibility sweeps
    trajectory_override: tuple[tuple[float, Pose], ...] | None = None

    def __post_init__(self):
        if self.duration_s <= 0 or self.frame_rate_hz <= 0:
            raise ConfigInvalid("duration and frame rate must be positive")
        if self.jitter_amplitude_m < 0 or self.jitter_freq_hz < 0:
            raise ConfigInvalid("jitter amplitude and frequency must be >= 0")
        if self.anchor_depth_m <= 0:
            raise ConfigInvalid("anchor depth must be positive")
        if not self.world_planes:
            raise ConfigInvalid("stability runs need at least one world plane")
        if self.trajectory_override is not None:
            if not self.trajectory_override:
                raise ConfigInvalid("trajectory override must not be empty")
            if self.trajectory_override[-1][0] < self.duration_s:
                raise ConfigInvalid("trajectory override must span the run duration")


@dataclass(frozen=True)
class StabilityRow:
    tracker: str
    jitter_amplitude_m: float
    jitter_freq_hz: float
    mean_reproj_jitter_px: float
    world_drift_m: float
    uptime: float
    peak_reproj_offset_px: float  # not part of the CSV contract


def _project_px(camera: Pose, k: CameraIntrinsics, point) -> np.ndarray | None:
    """Pinhole projection to pixel coordinates; the point may be off-screen.
    None when the point is not in front of the camera."""
    local = camera.inverse_transform_point(point)
    depth = -local[2]
    if depth <= 1e-9:
        return None
    f = k.focal_px
    return np.array([
        k.width_px / 2.0 + f * local[0] / depth,
        k.height_px / 2.0 - f * local[1] / depth,
    ])


def _jitter_trajectory(cfg: StabilityConfig, warmup_s: float, n_frames: int,
                       dt: float) -> tuple[tuple[float, Pose], ...]:
    if cfg.trajectory_override is not None:
        first = cfg.trajectory_override[0][1]
        return ((0.0, first),) + tuple(
            (warmup_s + t, pose) for t, pose in cfg.trajectory_override)
    base_y = cfg.camera_height_m
    keyframes = [(0.0, Pose(position=(0.0, base_y, 0.0)))]
    for k in range(n_frames + 1):
        t = k * dt
        x = cfg.jitter_amplitude_m * math.sin(2.0 * math.pi * cfg.jitter_freq_hz * t)
        keyframes.append((warmup_s + t, Pose(position=(x, base_y, 0.0))))
    return tuple(keyframes)


def run_stability_test(cfg: StabilityConfig) -> StabilityRow:
    dt = 1.0 / cfg.frame_rate_hz
    n_frames = int(round(cfg.duration_s * cfg.frame_rate_hz))
    warmup_s = cfg.detection_dwell_s + 0.5
    session = Session(SessionConfig(
        intrinsics=cfg.intrinsics,
        trajectory=_jitter_trajectory(cfg, warmup_s, n_frames, dt),
        world_planes=cfg.world_planes,
        detection_dwell_s=cfg.detection_dwell_s,
        detection_range_m=cfg.detection_range_m,
        tracking_events=tuple(
            TrackingEvent(ev.lose_at_s + warmup_s, ev.reacquire_at_s + warmup_s,
                          ev.residual_drift)
            for ev in cfg.tracking_events),
    ))
    warmup_steps = int(math.ceil(warmup_s / dt))
    for _ in range(warmup_steps):
        session.step(warmup_s / warmup_steps)
    if not session.detected_planes:
        raise ConfigInvalid("no plane detected during warmup; "
                            "check plane layout and detection range")
    plane_id = min(session.detected_planes)
    anchor_pose = Pose(position=(0.0, cfg.camera_height_m, -cfg.anchor_depth_m))
    anchor_id = session.create_anchor(anchor_pose, plane_id)

    rng = np.random.default_rng(cfg.seed)
    rest_px = _project_px(session.estimated_camera, cfg.intrinsics,
                          session.resolve_anchor(anchor_id).pose.position)
    initial_true = (session.resolve_anchor(anchor_id).pose.position
                    + session.estimated_to_true_offset())

    tracked_frames = 0
    prev_px = None
    jitter_sum = 0.0
    jitter_pairs = 0
    peak = 0.0
    for _ in range(n_frames):
        session.step(dt)
        if not cfg.tracker.is_tracking(session):
            prev_px = None  # jitter pairs must not span tracking gaps
            continue
        tracked_frames += 1
        anchor = session.resolve_anchor(anchor_id).pose.position
        px = _project_px(session.estimated_camera, cfg.intrinsics, anchor)
        if px is None:
            prev_px = None  # anchor behind the camera: no reprojection sample
            continue
        px = px + rng.normal(0.0, cfg.tracker.flicker_noise_px, 2)
        if rest_px is not None:
            peak = max(peak, float(np.linalg.norm(px - rest_px)))
        if prev_px is not None:
            jitter_sum += float(np.linalg.norm(px - prev_px))
            jitter_pairs += 1
        prev_px = px

    final_true = (session.resolve_anchor(anchor_id).pose.position
                  + session.estimated_to_true_offset())
    return StabilityRow(
        tracker=cfg.tracker.kind.value,
        jitter_amplitude_m=cfg.jitter_amplitude_m,
        jitter_freq_hz=cfg.jitter_freq_hz,
        mean_reproj_jitter_px=jitter_sum / jitter_pairs if jitter_pairs else 0.0,
        world_drift_m=float(np.linalg.norm(final_true - initial_true)),
        uptime=tracked_frames / n_frames,
        peak_reproj_offset_px=peak,
    )


@dataclass(frozen=True)
class DistanceConfig:
    extent_m: float
    camera_height_m: float = 1.6
    max_hit_range_m: float = 50.0
    plane_half_width_m: float = 4.0
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS

    def __post_init__(self):
        if self.extent_m < 0:
            raise ConfigInvalid("plane extent must be >= 0")
        if self.camera_height_m <= 0 or self.max_hit_range_m <= 0:
            raise ConfigInvalid("camera height and hit range must be positive")


def run_distance_test(cfg: DistanceConfig) -> float:
    """Farthest forward ground distance at which a tap still places content.

    Binary-searches the ground line ahead of a level camera; each probe
    projects the candidate ground point to its pixel and runs the session
    hit test there. Resolution 0.1 m.
    """
    if cfg.extent_m <= 0.0:
        return 0.0
    plane = PlaneGeometry(center=Pose(position=(0.0, 0.0, -cfg.extent_m / 2.0)),
                          half_extent_x=cfg.plane_half_width_m,
                          half_extent_z=cfg.extent_m / 2.0)
    session = Session(SessionConfig(
        intrinsics=cfg.intrinsics,
        trajectory=((0.0, Pose(position=(0.0, cfg.camera_height_m, 0.0))),),
        world_planes=(plane,),
        max_hit_range_m=cfg.max_hit_range_m,
    ))
    session.force_full_detection()
    k = cfg.intrinsics

    def tap_hits(ground_m: float) -> bool:
        v = k.height_px / 2.0 + k.focal_px * cfg.camera_height_m / ground_m
        if not 0.0 <= v <= k.height_px:
            return False
        return bool(session.hit_test((k.width_px / 2.0, v)))

    hi_bound = max(cfg.extent_m, cfg.max_hit_range_m) + 1.0
    probes = np.linspace(hi_bound / 400.0, hi_bound, 400)
    hits = [tap_hits(float(g)) for g in probes]
    if not any(hits):
        return 0.0
    last_hit = max(i for i, h in enumerate(hits) if h)
    lo = float(probes[last_hit])
    hi = float(probes[last_hit + 1]) if last_hit + 1 < len(probes) else hi_bound
    while hi - lo > 0.01:
        mid = (lo + hi) / 2.0
        if tap_hits(mid):
            lo = mid
        else:
            hi = mid
    return round((lo + hi) / 2.0, 1)


def write_stability_csv(rows, path: str | Path) -> None:
    """Fixed-header report CSV; deterministic for a fixed RNG seed."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STABILITY_CSV_HEADER)
        for r in rows:
            writer.writerow([r.tracker, repr(r.jitter_amplitude_m),
                             repr(r.jitter_freq_hz), repr(r.mean_reproj_jitter_px),
                             repr(r.world_drift_m), repr(r.uptime)])
