"""Operator command line: scripted authoring, the HTTP server, offline
navigation playback and the evaluation harness.

Commands:

* ``author``   run an action script against a simulated session and write
               the saved scene document
* ``serve``    start the HTTP service (BAZAAR_DATA_DIR, when set, overrides
               the --data-dir flag)
* ``navigate`` replay a GPS track against a saved scene, printing one
               guidance line per fix and the relocalized characters on
               arrival
* ``eval``     stability / distance simulation reports (CSV)
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .authoring import AuthoringScene, load_catalog
from .errors import ArBazaarError, ConfigInvalid
from .geometry import CameraIntrinsics, Pose, pose_from_json
from .navigation import NavConfig, approach_point, guidance_update, load_gps_track, relocalize
from .persistence import decode_scene, encode_scene
from .session import Session, load_session_config
from .stability import (
    DistanceConfig,
    StabilityConfig,
    TrackerKind,
    TrackerModel,
    run_distance_test,
    run_stability_test,
    write_stability_csv,
)

DEFAULT_DATA_DIR = "bazaar-data"


def _load_json(path: str | Path, what: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read {what} {path}: {exc}") from exc


# -- author ----------------------------------------------------------------------

def _georef_from_json(obj):
    from .geodesy import Geodetic, GeoReference
    try:
        origin = obj["origin"]
        return GeoReference(
            origin=Geodetic(float(origin["lat_deg"]), float(origin["lon_deg"]),
                            float(origin.get("alt_m", 0.0))),
            heading_deg=float(obj["heading_deg"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad georeference: {exc}") from exc


def run_author(args) -> int:
    config = load_session_config(args.config)
    catalog = load_catalog(args.catalog) if args.catalog else None
    script = _load_json(args.script, "action script")
    if isinstance(script, dict):
        script = script.get("actions")
    if not isinstance(script, list):
        raise ConfigInvalid("action script must be a list of actions")

    session = Session(config)
    scene = AuthoringScene(catalog=catalog) if catalog else AuthoringScene()
    saved_bytes = None

    for i, action in enumerate(script):
        if not isinstance(action, dict) or "op" not in action:
            raise ConfigInvalid(f"action {i}: need an object with an 'op' field")
        op = action["op"]
        try:
            if op == "step":
                frame = session.step(float(action.get("dt_s", 0.1)))
                print(f"step -> clock {frame.clock_s:.2f}s, "
                      f"{len(frame.planes)} plane(s), {frame.tracking_state.value}")
            elif op == "select":
                kind = scene.select_prefab_kind(int(action["index"]))
                print(f"select -> {kind.name}")
            elif op == "place":
                char = scene.place_prefab(session, (float(action["u_px"]),
                                                    float(action["v_px"])))
                pos = scene.character_position(session, char.id)
                print(f"place -> id {char.id} ({char.kind}) at "
                      f"({pos[0]:.3f}, {pos[1]:.3f}, {pos[2]:.3f})")
            elif op == "relocate":
                char = scene.relocate_prefab(session, int(action["id"]),
                                             (float(action["u_px"]), float(action["v_px"])))
                pos = scene.character_position(session, char.id)
                print(f"relocate -> id {char.id} now at "
                      f"({pos[0]:.3f}, {pos[1]:.3f}, {pos[2]:.3f})")
            elif op == "scale":
                char = scene.scale_prefab(int(action["id"]), float(action["scale"]))
                print(f"scale -> id {char.id} scale {char.scale:g}")
            elif op == "delete":
                scene.delete_prefab(session, int(action["id"]))
                print(f"delete -> id {action['id']}")
            elif op == "save":
                doc = scene.save_scene(session, _georef_from_json(action["georeference"]),
                                       str(action["scene_id"]))
                saved_bytes = encode_scene(doc)
                print(f"save -> scene {doc.scene_id!r} with {len(doc.characters)} character(s)")
            else:
                raise ConfigInvalid(f"action {i}: unknown op {op!r}")
        except KeyError as exc:
            raise ConfigInvalid(f"action {i} ({op}): missing field {exc}") from exc

    if saved_bytes is None:
        print("error: the script never saved a scene; nothing to write", file=sys.stderr)
        return 2
    Path(args.out).write_bytes(saved_bytes)
    print(f"wrote {args.out}")
    return 0


# -- serve -----------------------------------------------------------------------

def run_serve(args) -> int:
    import uvicorn

    from .service import create_app

    data_dir = os.environ.get("BAZAAR_DATA_DIR") or args.data_dir
    app = create_app(data_dir)
    print(f"serving scenes from {Path(data_dir).resolve()} "
          f"on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- navigate ---------------------------------------------------------------------

def run_navigate(args) -> int:
    try:
        doc = decode_scene(Path(args.scene).read_bytes())
    except OSError as exc:
        raise ConfigInvalid(f"cannot read scene {args.scene}: {exc}") from exc
    cfg = NavConfig(standoff_m=args.standoff, arrival_radius_m=args.arrival_radius)
    target = approach_point(doc, cfg)
    print(f"approach point: lat {target.lat_deg:.7f} lon {target.lon_deg:.7f}")
    for fix in load_gps_track(args.track):
        g = guidance_update(target, fix.position, fix.heading_deg, cfg)
        print(f"t={fix.t_s:.1f}s distance={g.distance_m:.1f}m "
              f"bearing={g.relative_bearing_deg:+.1f}deg "
              f"arrived={'yes' if g.arrived else 'no'}")
        if g.arrived:
            from .geodesy import Geodetic, GeoReference
            new_georef = GeoReference(
                origin=Geodetic(fix.position.lat_deg, fix.position.lon_deg,
                                doc.georeference.origin.alt_m),
                heading_deg=fix.heading_deg)
            print("arrived: relocalized characters in the viewer frame")
            for c in relocalize(doc, new_georef):
                p = c.pose.position
                print(f"  id={c.id} kind={c.kind} "
                      f"x={p[0]:.3f} y={p[1]:.3f} z={p[2]:.3f} scale={c.scale:g}")
            return 0
    print("track ended before arrival")
    return 0


# -- eval ------------------------------------------------------------------------

def _intrinsics_from_json(obj) -> CameraIntrinsics:
    return CameraIntrinsics(width_px=int(obj["width_px"]),
                            height_px=int(obj["height_px"]),
                            vertical_fov_deg=float(obj["vertical_fov_deg"]))


def _tracker_from_json(obj) -> TrackerModel:
    try:
        kind = TrackerKind(obj["kind"])
    except (KeyError, ValueError) as exc:
        raise ConfigInvalid(
            f"tracker kind must be one of {[k.value for k in TrackerKind]}") from exc
    marker_pose = pose_from_json(obj["marker_pose"]) if "marker_pose" in obj else None
    return TrackerModel(
        kind=kind,
        marker_pose=marker_pose,
        marker_size_m=float(obj.get("marker_size_m", 0.3)),
        flicker_noise_px=float(obj.get("flicker_noise_px", 0.0)),
    )


def run_eval_stability(args) -> int:
    cfg = _load_json(args.config, "stability config")
    runs = cfg.get("runs")
    if not isinstance(runs, list) or not runs:
        raise ConfigInvalid("stability config needs a non-empty 'runs' list")
    default_seed = int(cfg.get("seed", 0))
    rows = []
    for i, run in enumerate(runs):
        try:
            kwargs = dict(
                tracker=_tracker_from_json(run["tracker"]),
                jitter_amplitude_m=float(run.get("jitter_amplitude_m", 0.0)),
                jitter_freq_hz=float(run.get("jitter_freq_hz", 1.0)),
                duration_s=float(run.get("duration_s", 5.0)),
                frame_rate_hz=float(run.get("frame_rate_hz", 30.0)),
                anchor_depth_m=float(run.get("anchor_depth_m", 2.0)),
                camera_height_m=float(run.get("camera_height_m", 1.6)),
                seed=int(run.get("seed", default_seed)),
            )
            if "intrinsics" in run:
                kwargs["intrinsics"] = _intrinsics_from_json(run["intrinsics"])
            row = run_stability_test(StabilityConfig(**kwargs))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"stability run {i}: {exc}") from exc
        rows.append(row)
        print(f"run {i}: {row.tracker} jitter={row.mean_reproj_jitter_px:.3f}px "
              f"drift={row.world_drift_m:.4f}m uptime={row.uptime:.3f}")
    write_stability_csv(rows, args.out)
    print(f"wrote {args.out}")
    return 0


def run_eval_distance(args) -> int:
    cfg = _load_json(args.config, "distance config")
    runs = cfg.get("runs")
    if not isinstance(runs, list) or not runs:
        raise ConfigInvalid("distance config needs a non-empty 'runs' list")
    lines = ["extent_m,max_hit_range_m,distance_m"]
    for i, run in enumerate(runs):
        try:
            dc = DistanceConfig(
                extent_m=float(run["extent_m"]),
                camera_height_m=float(run.get("camera_height_m", 1.6)),
                max_hit_range_m=float(run.get("max_hit_range_m", 50.0)),
                plane_half_width_m=float(run.get("plane_half_width_m", 4.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"distance run {i}: {exc}") from exc
        d = run_distance_test(dc)
        print(f"run {i}: extent={dc.extent_m:g}m range={dc.max_hit_range_m:g}m -> {d:g}m")
        lines.append(f"{dc.extent_m:g},{dc.max_hit_range_m:g},{d:g}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arbazaar",
                                     description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("author", help="run a scripted authoring session")
    p.add_argument("--config", required=True, help="session config JSON (see session.schema)")
    p.add_argument("--script", required=True, help="JSON list of authoring actions")
    p.add_argument("--out", required=True, help="output scene document path")
    p.add_argument("--catalog", help="prefab catalog JSON (default: built-in)")
    p.set_defaults(func=run_author)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--data-dir", default=DEFAULT_DATA_DIR,
                   help="scene storage directory (BAZAAR_DATA_DIR overrides)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=run_serve)

    p = sub.add_parser("navigate", help="replay a GPS track against a saved scene")
    p.add_argument("--scene", required=True, help="scene document JSON")
    p.add_argument("--track", required=True,
                   help="CSV track: t_s,lat_deg,lon_deg,heading_deg")
    p.add_argument("--standoff", type=float, default=15.0)
    p.add_argument("--arrival-radius", type=float, default=2.0)
    p.set_defaults(func=run_navigate)

    p = sub.add_parser("eval", help="simulation reports")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)
    ps = eval_sub.add_parser("stability", help="tracker stability sweep")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=run_eval_stability)
    pd = eval_sub.add_parser("distance", help="max placement distance sweep")
    pd.add_argument("--config", required=True)
    pd.add_argument("--out", required=True)
    pd.set_defaults(func=run_eval_distance)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ArBazaarError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
