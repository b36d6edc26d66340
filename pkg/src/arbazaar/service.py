"""HTTP face of the toolkit: scene storage plus live authoring sessions.

The service owns a durable SceneStore and a registry of live sessions.
Each session pairs a Session (the simulated AR runtime) with an
AuthoringScene (the five-feature editor state); mutations on one session
are serialized behind a per-session lock, so concurrent requests apply in
arrival order.

Error mapping (also in README.md):

* 400 - malformed/invalid payloads: SchemaViolation, MalformedDocument,
        VersionUnsupported, ConfigInvalid, TapOutOfBounds,
        IndexOutOfRange, ScaleOutOfRange
* 404 - missing things: UnknownScene, UnknownSession, UnknownId,
        UnknownAnchor, UnknownPlane
* 409 - valid requests the session state cannot satisfy: NoHit,
        TrackingLost, SessionEnded, EmptyScene
* 422 - InvalidSceneId

Scene payloads returned by GET /api/scenes/{id} are the stored canonical
bytes, untouched.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from fastapi import Body, FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import errors as err
from .authoring import AuthoringScene, PlacedCharacter, catalog_from_json, load_catalog
from .geodesy import Geodetic, GeoReference
from .geometry import Pose, pose_to_json
from .navigation import NavConfig, approach_point, guidance_update, relocalize
from .persistence import SceneStore, decode_scene, encode_scene, validate_scene_id
from .session import FrameState, Session, session_config_from_json

STATUS_BY_ERROR = {
    err.SchemaViolation: 400,
    err.MalformedDocument: 400,
    err.VersionUnsupported: 400,
    err.ConfigInvalid: 400,
    err.TapOutOfBounds: 400,
    err.IndexOutOfRange: 400,
    err.ScaleOutOfRange: 400,
    err.CoincidentPoints: 400,
    err.NearSingular: 400,
    err.UnknownScene: 404,
    err.UnknownSession: 404,
    err.UnknownId: 404,
    err.UnknownAnchor: 404,
    err.UnknownPlane: 404,
    err.NoHit: 409,
    err.TrackingLost: 409,
    err.SessionEnded: 409,
    err.EmptyScene: 409,
    err.InvalidSceneId: 422,
}


@dataclass
class LiveSession:
    session: Session
    scene: AuthoringScene
    lock: threading.Lock


def frame_to_json(frame: FrameState) -> dict:
    return {
        "clock_s": frame.clock_s,
        "tracking_state": frame.tracking_state.value,
        "estimated_camera": pose_to_json(frame.estimated_camera),
        "planes": [
            {
                "plane_id": p.plane_id,
                "center": pose_to_json(p.geometry.center),
                "half_extent_x": p.geometry.half_extent_x,
                "half_extent_z": p.geometry.half_extent_z,
            }
            for p in frame.planes
        ],
        "anchors": [
            {"anchor_id": a.anchor_id, "pose": pose_to_json(a.pose), "stale": a.stale}
            for a in frame.anchors
        ],
        "ended": frame.ended,
    }


def character_to_json(char: PlacedCharacter, session: Session) -> dict:
    position = session.resolve_anchor(char.anchor_id).pose.position
    return {
        "id": char.id,
        "kind": char.kind,
        "anchor_id": char.anchor_id,
        "yaw_deg": char.yaw_deg,
        "scale": char.scale,
        "position": [float(v) for v in position],
    }


def _georef_from_json(obj) -> GeoReference:
    try:
        origin = obj["origin"]
        return GeoReference(
            origin=Geodetic(lat_deg=float(origin["lat_deg"]),
                            lon_deg=float(origin["lon_deg"]),
                            alt_m=float(origin.get("alt_m", 0.0))),
            heading_deg=float(obj["heading_deg"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise err.SchemaViolation(f"bad georeference: {exc}") from exc


def create_app(data_dir: str | Path) -> FastAPI:
    app = FastAPI(title="arbazaar", version="0.1.0")
    store = SceneStore(data_dir)
    sessions: dict[str, LiveSession] = {}
    registry_lock = threading.Lock()

    @app.exception_handler(err.ArBazaarError)
    async def handle_toolkit_error(request: Request, exc: err.ArBazaarError):
        status = STATUS_BY_ERROR.get(type(exc), 500)
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "message": str(exc)})

    def live(session_id: str) -> LiveSession:
        with registry_lock:
            if session_id not in sessions:
                raise err.UnknownSession(f"no live session {session_id!r}")
            return sessions[session_id]

    # -- scenes ----------------------------------------------------------

    @app.put("/api/scenes/{scene_id}")
    async def put_scene(scene_id: str, request: Request):
        validate_scene_id(scene_id)
        doc = decode_scene(await request.body())
        if doc.scene_id != scene_id:
            raise err.SchemaViolation(
                f"scene_id in document ({doc.scene_id!r}) differs from URL ({scene_id!r})")
        created = store.put_scene(scene_id, doc)
        return Response(content=store.get_scene_bytes(scene_id),
                        media_type="application/json",
                        status_code=201 if created else 200)

    @app.get("/api/scenes/{scene_id}")
    def get_scene(scene_id: str):
        return Response(content=store.get_scene_bytes(scene_id),
                        media_type="application/json")

    @app.get("/api/scenes")
    def list_scenes():
        return [{"scene_id": sid, "character_count": n} for sid, n in store.list_scenes()]

    # -- sessions ----------------------------------------------------------

    @app.post("/api/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        if "config" not in payload:
            raise err.ConfigInvalid("session body needs a 'config' object")
        config = session_config_from_json(payload["config"])
        if "catalog" in payload:
            catalog = catalog_from_json(payload["catalog"])
        elif "catalog_path" in payload:
            catalog = load_catalog(payload["catalog_path"])
        else:
            catalog = None
        scene = AuthoringScene(catalog=catalog) if catalog else AuthoringScene()
        session_id = uuid.uuid4().hex[:12]
        with registry_lock:
            sessions[session_id] = LiveSession(session=Session(config), scene=scene,
                                               lock=threading.Lock())
        return {"session_id": session_id}

    @app.post("/api/sessions/{session_id}/step")
    def step_session(session_id: str, payload: dict = Body(...)):
        ls = live(session_id)
        dt = payload.get("dt_s")
        if not isinstance(dt, (int, float)) or isinstance(dt, bool) or dt <= 0:
            raise err.ConfigInvalid(f"dt_s must be a positive number, got {dt!r}")
        with ls.lock:
            return frame_to_json(ls.session.step(float(dt)))

    @app.post("/api/sessions/{session_id}/tap")
    def tap(session_id: str, payload: dict = Body(...)):
        ls = live(session_id)
        try:
            u, v = float(payload["u_px"]), float(payload["v_px"])
        except (KeyError, TypeError, ValueError) as exc:
            raise err.ConfigInvalid(f"tap needs numeric u_px and v_px: {exc}") from exc
        action = payload.get("action", "place")
        with ls.lock:
            if action == "place":
                char = ls.scene.place_prefab(ls.session, (u, v))
                status = 201  # a new character came into being
            elif action == "relocate":
                if "id" not in payload:
                    raise err.ConfigInvalid("relocate taps need an 'id'")
                char = ls.scene.relocate_prefab(ls.session, int(payload["id"]), (u, v))
                status = 200
            else:
                raise err.ConfigInvalid(f"unknown tap action {action!r}")
            return JSONResponse(status_code=status,
                                content=character_to_json(char, ls.session))

    @app.post("/api/sessions/{session_id}/select")
    def select_kind(session_id: str, payload: dict = Body(...)):
        ls = live(session_id)
        index = payload.get("index")
        if not isinstance(index, int) or isinstance(index, bool):
            raise err.ConfigInvalid(f"select needs an integer index, got {index!r}")
        with ls.lock:
            kind = ls.scene.select_prefab_kind(index)
        return {"index": index, "name": kind.name,
                "footprint_radius_m": kind.footprint_radius_m,
                "height_m": kind.height_m}

    @app.post("/api/sessions/{session_id}/scale")
    def scale_character(session_id: str, payload: dict = Body(...)):
        ls = live(session_id)
        try:
            char_id = int(payload["id"])
            value = float(payload["scale"])
        except (KeyError, TypeError, ValueError) as exc:
            raise err.ConfigInvalid(f"scale needs 'id' and 'scale': {exc}") from exc
        with ls.lock:
            char = ls.scene.scale_prefab(char_id, value)
            return character_to_json(char, ls.session)

    @app.delete("/api/sessions/{session_id}/characters/{char_id}", status_code=204)
    def delete_character(session_id: str, char_id: int):
        ls = live(session_id)
        with ls.lock:
            ls.scene.delete_prefab(ls.session, char_id)
        return Response(status_code=204)

    @app.post("/api/sessions/{session_id}/save")
    def save_scene(session_id: str, payload: dict = Body(...)):
        ls = live(session_id)
        scene_id = payload.get("scene_id")
        if not isinstance(scene_id, str):
            raise err.ConfigInvalid("save needs a string scene_id")
        validate_scene_id(scene_id)
        if "georeference" not in payload:
            raise err.SchemaViolation("save needs a georeference")
        georef = _georef_from_json(payload["georeference"])
        with ls.lock:
            doc = ls.scene.save_scene(ls.session, georef, scene_id)
        store.put_scene(scene_id, doc)
        return Response(content=encode_scene(doc), media_type="application/json",
                        status_code=201)

    @app.get("/api/sessions/{session_id}/state")
    def session_state(session_id: str):
        ls = live(session_id)
        with ls.lock:
            frame = ls.session.frame_state()
            characters = [character_to_json(c, ls.session)
                          for _, c in sorted(ls.scene.characters.items())]
            return {
                "frame": frame_to_json(frame),
                "characters": characters,
                "selected_kind_index": ls.scene.selected_kind_index,
                "catalog": [{"name": k.name,
                             "footprint_radius_m": k.footprint_radius_m,
                             "height_m": k.height_m} for k in ls.scene.catalog],
            }

    # -- guidance -------------------------------------------------------------

    @app.post("/api/guidance")
    def guidance(payload: dict = Body(...)):
        try:
            scene_id = payload["scene_id"]
            lat = float(payload["lat_deg"])
            lon = float(payload["lon_deg"])
            heading = float(payload["heading_deg"])
        except (KeyError, TypeError, ValueError) as exc:
            raise err.ConfigInvalid(
                f"guidance needs scene_id, lat_deg, lon_deg, heading_deg: {exc}") from exc
        doc = store.get_scene(validate_scene_id(scene_id))
        cfg = NavConfig()
        target = approach_point(doc, cfg)
        user = Geodetic(lat_deg=lat, lon_deg=lon, alt_m=doc.georeference.origin.alt_m)
        update = guidance_update(target, user, heading, cfg)
        body = {
            "guidance": {
                "distance_m": update.distance_m,
                "relative_bearing_deg": update.relative_bearing_deg,
                "arrived": update.arrived,
            },
            "approach_point": {"lat_deg": target.lat_deg, "lon_deg": target.lon_deg},
        }
        if update.arrived:
            # the viewer's fresh session is anchored at the user's fix with
            # their current heading; altitude is taken from the document
            new_georef = GeoReference(origin=user, heading_deg=heading)
            body["characters"] = [
                {"id": c.id, "kind": c.kind, "scale": c.scale,
                 "pose": pose_to_json(c.pose)}
                for c in relocalize(doc, new_georef)
            ]
        return body

    return app
