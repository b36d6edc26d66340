"""Earth-frame math binding a session-local frame to geodetic coordinates.

Conversions between geodetic (lat/lon/alt), Earth-centered Earth-fixed and
local East-North-Up frames use the WGS84 ellipsoid. Guidance distances and
bearings use spherical great-circle formulas, which is plenty for
meters-level pedestrian navigation.

A GeoReference anchors a session-local frame (right-handed, y up, forward
-z) on the Earth: ``origin`` is the geodetic location of the local origin
and ``heading_deg`` is the compass bearing of the local -z axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPoints, NearSingular

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

# mean Earth radius for great-circle distance
EARTH_RADIUS_M = 6371000.0


def normalize_lon_deg(lon: float) -> float:
    """Wrap longitude into (-180, 180]."""
    lon = math.fmod(lon, 360.0)
    if lon <= -180.0:
        lon += 360.0
    elif lon > 180.0:
        lon -= 360.0
    return lon


@dataclass(frozen=True)
class Geodetic:
    """WGS84 geodetic coordinates; altitude is ellipsoidal height in meters."""

    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lat_deg, self.lon_deg, self.alt_m)):
            raise ValueError("geodetic components must be finite")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        object.__setattr__(self, "lon_deg", normalize_lon_deg(self.lon_deg))


@dataclass(frozen=True)
class Ecef:
    x_m: float
    y_m: float
    z_m: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x_m, self.y_m, self.z_m)):
            raise ValueError("ECEF components must be finite")

    def norm(self) -> float:
        return math.sqrt(self.x_m ** 2 + self.y_m ** 2 + self.z_m ** 2)


@dataclass(frozen=True)
class EnuVector:
    east_m: float
    north_m: float
    up_m: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.east_m, self.north_m, self.up_m)):
            raise ValueError("ENU components must be finite")


@dataclass(frozen=True)
class GeoReference:
    """Geodetic anchor of a session-local frame.

    heading_deg is the compass bearing (clockwise from true north) of the
    local frame's -z axis, normalized into [0, 360).
    """

    origin: Geodetic
    heading_deg: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.heading_deg):
            raise ValueError("heading must be finite")
        object.__setattr__(self, "heading_deg", self.heading_deg % 360.0)


# -- geodetic <-> ECEF ---------------------------------------------------------

def geodetic_to_ecef(g: Geodetic) -> Ecef:
    lat = math.radians(g.lat_deg)
    lon = math.radians(g.lon_deg)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    return Ecef(
        x_m=(n + g.alt_m) * cos_lat * math.cos(lon),
        y_m=(n + g.alt_m) * cos_lat * math.sin(lon),
        z_m=(n * (1.0 - WGS84_E2) + g.alt_m) * sin_lat,
    )


def ecef_to_geodetic(e: Ecef) -> Geodetic:
    """Invert geodetic_to_ecef by iterative latitude refinement.

    Iterates until the latitude update drops below 1e-12 rad (at most 20
    rounds). Points within 1 m of the Earth center are rejected: latitude
    is not meaningful there.
    """
    if e.norm() <= 1.0:
        raise NearSingular(f"ECEF point {e} too close to Earth center")
    lon = math.atan2(e.y_m, e.x_m)
    p = math.hypot(e.x_m, e.y_m)
    if p < 1e-9:
        # on the polar axis the closed form is exact
        lat = math.copysign(math.pi / 2.0, e.z_m)
        alt = abs(e.z_m) - WGS84_B
        return Geodetic(math.degrees(lat), math.degrees(lon), alt)
    lat = math.atan2(e.z_m, p * (1.0 - WGS84_E2))
    for _ in range(20):
        sin_lat = math.sin(lat)
        n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
        alt = p / math.cos(lat) - n
        new_lat = math.atan2(e.z_m, p * (1.0 - WGS84_E2 * n / (n + alt)))
        done = abs(new_lat - lat) < 1e-12
        lat = new_lat
        if done:
            break
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    if abs(lat) < math.pi / 4.0:
        alt = p / cos_lat - n
    else:
        alt = e.z_m / sin_lat - n * (1.0 - WGS84_E2)
    return Geodetic(math.degrees(lat), math.degrees(lon), alt)


# -- local tangent (ENU) frame ---------------------------------------------------

def _enu_rotation(origin: Geodetic) -> np.ndarray:
    """Rows are the east, north and up unit vectors expressed in ECEF."""
    lat = math.radians(origin.lat_deg)
    lon = math.radians(origin.lon_deg)
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array([
        [-so, co, 0.0],
        [-sl * co, -sl * so, cl],
        [cl * co, cl * so, sl],
    ])


def enu_between(origin: Geodetic, target: Geodetic) -> EnuVector:
    """ENU vector from origin to target (ECEF difference in the tangent frame)."""
    o = geodetic_to_ecef(origin)
    t = geodetic_to_ecef(target)
    d = np.array([t.x_m - o.x_m, t.y_m - o.y_m, t.z_m - o.z_m])
    e, n, u = _enu_rotation(origin) @ d
    return EnuVector(east_m=float(e), north_m=float(n), up_m=float(u))


def geodetic_from_enu(origin: Geodetic, v: EnuVector) -> Geodetic:
    """Exact inverse of enu_between at the same origin."""
    o = geodetic_to_ecef(origin)
    d = _enu_rotation(origin).T @ np.array([v.east_m, v.north_m, v.up_m])
    return ecef_to_geodetic(Ecef(o.x_m + d[0], o.y_m + d[1], o.z_m + d[2]))


# -- great-circle guidance -------------------------------------------------------

def haversine_distance(a: Geodetic, b: Geodetic) -> float:
    """Great-circle surface distance in meters; altitude is ignored."""
    lat1, lat2 = math.radians(a.lat_deg), math.radians(b.lat_deg)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon_deg) - math.radians(a.lon_deg)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing(a: Geodetic, b: Geodetic) -> float:
    """Forward azimuth at a of the great circle toward b, degrees in [0, 360)."""
    if a.lat_deg == b.lat_deg and a.lon_deg == b.lon_deg:
        raise CoincidentPoints("bearing undefined for coincident points")
    lat1, lat2 = math.radians(a.lat_deg), math.radians(b.lat_deg)
    dlon = math.radians(b.lon_deg) - math.radians(a.lon_deg)
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    return math.degrees(math.atan2(y, x)) % 360.0


def destination_point(start: Geodetic, bearing_deg: float, distance_m: float) -> Geodetic:
    """Point reached by travelling distance_m along the great circle at bearing_deg."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    lat1 = math.radians(start.lat_deg)
    lon1 = math.radians(start.lon_deg)
    lat2 = math.asin(math.sin(lat1) * math.cos(delta)
                     + math.cos(lat1) * math.sin(delta) * math.cos(theta))
    lon2 = lon1 + math.atan2(math.sin(theta) * math.sin(delta) * math.cos(lat1),
                             math.cos(delta) - math.sin(lat1) * math.sin(lat2))
    return Geodetic(math.degrees(lat2), normalize_lon_deg(math.degrees(lon2)), start.alt_m)


# -- session-local frame <-> Earth -----------------------------------------------

def local_to_enu(georef: GeoReference, p) -> EnuVector:
    """Rotate a session-local point into the ENU frame at the georeference origin."""
    x, y, z = (float(c) for c in np.asarray(p, dtype=np.float64).reshape(3))
    h = math.radians(georef.heading_deg)
    ch, sh = math.cos(h), math.sin(h)
    return EnuVector(
        east_m=x * ch - z * sh,
        north_m=-x * sh - z * ch,
        up_m=y,
    )


def enu_to_local(georef: GeoReference, v: EnuVector) -> np.ndarray:
    h = math.radians(georef.heading_deg)
    ch, sh = math.cos(h), math.sin(h)
    return np.array([
        v.east_m * ch - v.north_m * sh,
        v.up_m,
        -v.east_m * sh - v.north_m * ch,
    ])


def local_to_geodetic(georef: GeoReference, p) -> Geodetic:
    return geodetic_from_enu(georef.origin, local_to_enu(georef, p))


def geodetic_to_local(georef: GeoReference, g: Geodetic) -> np.ndarray:
    return enu_to_local(georef, enu_between(georef.origin, g))
