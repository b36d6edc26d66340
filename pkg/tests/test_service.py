import json
import math

import pytest
from fastapi.testclient import TestClient

from arbazaar.geodesy import Geodetic, destination_point, geodetic_from_enu, EnuVector
from arbazaar.persistence import decode_scene, encode_scene
from arbazaar.service import create_app

from test_persistence import GOLDEN, make_doc

ORIGIN = Geodetic(15.335, 76.462, 467.0)

SESSION_BODY = {
    "config": {
        "intrinsics": {"width_px": 1920, "height_px": 1080, "vertical_fov_deg": 60},
        "trajectory": [
            {"time_s": 0, "pose": {"position": [0, 2.5, 0],
                                   "orientation": [0.7071067811865476, -0.7071067811865476, 0, 0]}}
        ],
        "world_planes": [
            {"center": {"position": [0, 0, 0]}, "half_extent_x": 10, "half_extent_z": 10}
        ],
    }
}

GEOREF_BODY = {"heading_deg": 0,
               "origin": {"lat_deg": ORIGIN.lat_deg, "lon_deg": ORIGIN.lon_deg,
                          "alt_m": ORIGIN.alt_m}}


@pytest.fixture()
def client(tmp_path):
    return TestClient(create_app(tmp_path / "data"))


def start_session(client) -> str:
    resp = client.post("/api/sessions", json=SESSION_BODY)
    assert resp.status_code == 201
    sid = resp.json()["session_id"]
    for _ in range(3):
        assert client.post(f"/api/sessions/{sid}/step", json={"dt_s": 0.25}).status_code == 200
    return sid


# -- scene endpoints ---------------------------------------------------------

def test_put_get_scene_roundtrip(client):
    resp = client.put("/api/scenes/bazaar-demo", content=GOLDEN)
    assert resp.status_code == 201
    resp = client.put("/api/scenes/bazaar-demo", content=GOLDEN)
    assert resp.status_code == 200  # overwrite
    got = client.get("/api/scenes/bazaar-demo")
    assert got.status_code == 200
    assert got.content == GOLDEN  # byte-identical canonical payload


def test_get_unknown_scene_404(client):
    assert client.get("/api/scenes/nope").status_code == 404


def test_put_scene_schema_violation_400(client):
    bad = json.loads(GOLDEN)
    bad["characters"][0]["scale"] = 0
    resp = client.put("/api/scenes/bazaar-demo", content=json.dumps(bad))
    assert resp.status_code == 400
    assert resp.json()["error"] == "SchemaViolation"


def test_put_scene_malformed_400(client):
    resp = client.put("/api/scenes/bazaar-demo", content=b"{nope")
    assert resp.status_code == 400
    assert resp.json()["error"] == "MalformedDocument"


def test_put_scene_invalid_id_422(client):
    resp = client.put("/api/scenes/Bad_Id", content=GOLDEN)
    assert resp.status_code == 422
    assert resp.json()["error"] == "InvalidSceneId"


def test_put_scene_id_mismatch_400(client):
    resp = client.put("/api/scenes/other-name", content=GOLDEN)
    assert resp.status_code == 400


def test_list_scenes_sorted(client):
    doc_b = make_doc(scene_id="beta", characters=())
    doc_a = make_doc(scene_id="alpha")
    client.put("/api/scenes/beta", content=encode_scene(doc_b))
    client.put("/api/scenes/alpha", content=encode_scene(doc_a))
    resp = client.get("/api/scenes")
    assert resp.status_code == 200
    assert resp.json() == [{"scene_id": "alpha", "character_count": 1},
                           {"scene_id": "beta", "character_count": 0}]


def test_scene_survives_restart_byte_identical(tmp_path):
    data_dir = tmp_path / "data"
    with TestClient(create_app(data_dir)) as first:
        first.put("/api/scenes/bazaar-demo", content=GOLDEN)
    with TestClient(create_app(data_dir)) as second:
        assert second.get("/api/scenes/bazaar-demo").content == GOLDEN


# -- session lifecycle ----------------------------------------------------------

def test_create_session_and_step(client):
    resp = client.post("/api/sessions", json=SESSION_BODY)
    assert resp.status_code == 201
    sid = resp.json()["session_id"]
    frame = client.post(f"/api/sessions/{sid}/step", json={"dt_s": 0.25}).json()
    assert frame["clock_s"] == pytest.approx(0.25)
    assert frame["tracking_state"] == "Tracking"
    assert frame["planes"] == []  # dwell not yet satisfied
    frame = client.post(f"/api/sessions/{sid}/step", json={"dt_s": 0.3}).json()
    assert len(frame["planes"]) == 1
    assert frame["planes"][0]["plane_id"] == 0


def test_bad_session_config_400(client):
    resp = client.post("/api/sessions", json={"config": {"intrinsics": {}}})
    assert resp.status_code == 400
    assert resp.json()["error"] == "ConfigInvalid"


def test_unknown_session_404(client):
    for call in (
        lambda: client.post("/api/sessions/zzz/step", json={"dt_s": 1}),
        lambda: client.post("/api/sessions/zzz/tap", json={"u_px": 0, "v_px": 0}),
        lambda: client.post("/api/sessions/zzz/select", json={"index": 0}),
        lambda: client.post("/api/sessions/zzz/scale", json={"id": 1, "scale": 2}),
        lambda: client.delete("/api/sessions/zzz/characters/1"),
        lambda: client.post("/api/sessions/zzz/save",
                            json={"scene_id": "x", "georeference": GEOREF_BODY}),
        lambda: client.get("/api/sessions/zzz/state"),
    ):
        resp = call()
        assert resp.status_code == 404
        assert resp.json()["error"] == "UnknownSession"


def test_step_validation(client):
    sid = start_session(client)
    assert client.post(f"/api/sessions/{sid}/step", json={"dt_s": -1}).status_code == 400
    assert client.post(f"/api/sessions/{sid}/step", json={}).status_code == 400


# -- authoring over HTTP -----------------------------------------------------------

def test_tap_place_and_errors(client):
    sid = start_session(client)
    resp = client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 540})
    assert resp.status_code == 201
    char = resp.json()
    assert char["id"] == 1
    assert char["kind"] == "dancer"
    assert char["scale"] == 1.0
    assert char["position"][1] == pytest.approx(0.0, abs=1e-9)

    # ray parallel to the floor: no hit
    resp = client.post(f"/api/sessions/{sid}/tap",
                       json={"u_px": 960, "v_px": 540, "action": "relocate", "id": 99})
    assert resp.status_code == 404

    resp = client.post(f"/api/sessions/{sid}/tap",
                       json={"u_px": -5, "v_px": 540})
    assert resp.status_code == 400
    assert resp.json()["error"] == "TapOutOfBounds"

    resp = client.post(f"/api/sessions/{sid}/tap",
                       json={"u_px": 960, "v_px": 540, "action": "banana"})
    assert resp.status_code == 400


def test_tap_no_hit_409(tmp_path):
    # forward-looking camera: the top half of the screen is sky
    body = json.loads(json.dumps(SESSION_BODY))
    body["config"]["trajectory"][0]["pose"] = {"position": [0, 1.6, 0]}
    client = TestClient(create_app(tmp_path / "data"))
    sid = client.post("/api/sessions", json=body).json()["session_id"]
    for _ in range(3):
        client.post(f"/api/sessions/{sid}/step", json={"dt_s": 0.25})
    resp = client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 100})
    assert resp.status_code == 409
    assert resp.json()["error"] == "NoHit"


def test_tap_while_tracking_lost_409(tmp_path):
    body = json.loads(json.dumps(SESSION_BODY))
    body["config"]["tracking_events"] = [{"lose_at_s": 1.0, "reacquire_at_s": 9.0}]
    client = TestClient(create_app(tmp_path / "data"))
    sid = client.post("/api/sessions", json=body).json()["session_id"]
    for _ in range(6):
        client.post(f"/api/sessions/{sid}/step", json={"dt_s": 0.25})
    resp = client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 540})
    assert resp.status_code == 409
    assert resp.json()["error"] == "TrackingLost"


def test_select_scale_delete_flow(client):
    sid = start_session(client)
    resp = client.post(f"/api/sessions/{sid}/select", json={"index": 1})
    assert resp.status_code == 200
    assert resp.json()["name"] == "merchant"
    assert client.post(f"/api/sessions/{sid}/select", json={"index": 9}).status_code == 400

    char = client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 540}).json()
    assert char["kind"] == "merchant"

    resp = client.post(f"/api/sessions/{sid}/scale", json={"id": char["id"], "scale": 2.5})
    assert resp.status_code == 200
    assert resp.json()["scale"] == 2.5
    resp = client.post(f"/api/sessions/{sid}/scale", json={"id": char["id"], "scale": 0})
    assert resp.status_code == 400
    assert resp.json()["error"] == "ScaleOutOfRange"
    resp = client.post(f"/api/sessions/{sid}/scale", json={"id": 77, "scale": 2})
    assert resp.status_code == 404

    assert client.delete(f"/api/sessions/{sid}/characters/{char['id']}").status_code == 204
    assert client.delete(f"/api/sessions/{sid}/characters/{char['id']}").status_code == 404


def test_relocate_over_http(client):
    sid = start_session(client)
    placed = client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 540}).json()
    moved = client.post(
        f"/api/sessions/{sid}/tap",
        json={"u_px": 1300, "v_px": 600, "action": "relocate", "id": placed["id"]})
    assert moved.status_code == 200
    body = moved.json()
    assert body["id"] == placed["id"]
    assert body["position"] != placed["position"]


def test_save_and_state(client):
    sid = start_session(client)
    client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 540})
    client.post(f"/api/sessions/{sid}/tap", json={"u_px": 1200, "v_px": 640})
    resp = client.post(f"/api/sessions/{sid}/save",
                       json={"scene_id": "hampi-court", "georeference": GEOREF_BODY})
    assert resp.status_code == 201
    saved = decode_scene(resp.content)
    assert len(saved.characters) == 2
    assert client.get("/api/scenes/hampi-court").content == resp.content

    state = client.get(f"/api/sessions/{sid}/state").json()
    assert [c["id"] for c in state["characters"]] == [1, 2]
    assert state["frame"]["tracking_state"] == "Tracking"
    assert state["selected_kind_index"] == 0
    assert len(state["catalog"]) == 4

    resp = client.post(f"/api/sessions/{sid}/save",
                       json={"scene_id": "NOPE!", "georeference": GEOREF_BODY})
    assert resp.status_code == 422


# -- guidance -------------------------------------------------------------------

def saved_scene(client) -> str:
    sid = start_session(client)
    client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 540})
    client.post(f"/api/sessions/{sid}/save",
                json={"scene_id": "walkable", "georeference": GEOREF_BODY})
    return "walkable"


def test_guidance_far_and_arrival(client):
    scene_id = saved_scene(client)
    far = destination_point(ORIGIN, 180.0, 100.0)
    resp = client.post("/api/guidance", json={
        "scene_id": scene_id, "lat_deg": far.lat_deg, "lon_deg": far.lon_deg,
        "heading_deg": 0.0})
    assert resp.status_code == 200
    body = resp.json()
    assert body["guidance"]["arrived"] is False
    assert body["guidance"]["distance_m"] == pytest.approx(100.0, abs=1.0)
    assert "characters" not in body

    ap = body["approach_point"]
    resp = client.post("/api/guidance", json={
        "scene_id": scene_id, "lat_deg": ap["lat_deg"], "lon_deg": ap["lon_deg"],
        "heading_deg": 90.0})
    body = resp.json()
    assert body["guidance"]["arrived"] is True
    assert len(body["characters"]) == 1
    assert body["characters"][0]["kind"] == "dancer"


def test_guidance_unknown_scene_404(client):
    resp = client.post("/api/guidance", json={
        "scene_id": "ghost", "lat_deg": 0, "lon_deg": 0, "heading_deg": 0})
    assert resp.status_code == 404


def test_guidance_empty_scene_409(client):
    sid = start_session(client)
    client.post(f"/api/sessions/{sid}/save",
                json={"scene_id": "empty-lot", "georeference": GEOREF_BODY})
    resp = client.post("/api/guidance", json={
        "scene_id": "empty-lot", "lat_deg": 0, "lon_deg": 0, "heading_deg": 0})
    assert resp.status_code == 409
    assert resp.json()["error"] == "EmptyScene"


def test_guidance_relocalized_positions_match_oracle(client):
    # author at heading 0, view from the approach point facing the content:
    # the character must appear ahead of the viewer (negative z)
    sid = start_session(client)
    client.post(f"/api/sessions/{sid}/tap", json={"u_px": 960, "v_px": 540})
    client.post(f"/api/sessions/{sid}/save",
                json={"scene_id": "front-check", "georeference": GEOREF_BODY})
    doc = decode_scene(client.get("/api/scenes/front-check").content)
    geo = geodetic_from_enu(ORIGIN, EnuVector(0.0, -20.0, 0.0))  # 20 m south
    resp = client.post("/api/guidance", json={
        "scene_id": "front-check", "lat_deg": geo.lat_deg, "lon_deg": geo.lon_deg,
        "heading_deg": 0.0})
    body = resp.json()
    if body["guidance"]["arrived"]:
        char = body["characters"][0]
        assert char["pose"]["position"][2] < 0
