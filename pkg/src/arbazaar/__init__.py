"""AR scene authoring, persistence and relocation simulation toolkit."""

from .geometry import (
    CameraIntrinsics,
    Hit,
    PlaneGeometry,
    Pose,
    Ray,
    compose,
    invert,
    raycast_plane,
    screen_ray,
)

__all__ = [
    "CameraIntrinsics",
    "Hit",
    "PlaneGeometry",
    "Pose",
    "Ray",
    "compose",
    "invert",
    "raycast_plane",
    "screen_ray",
]

__version__ = "0.1.0"
