"""Line-delimited JSON protocol server.

One session per connection; each request is a single JSON object on one
line and receives exactly one reply echoing its ``request_id``.  Flow
precompute is the only long-running step and reports progress through
unsolicited ``flow_progress`` pushes.  See PROTOCOL.md for the full
message vocabulary.
"""

from __future__ import annotations

import base64
import io
import json
import socketserver
import threading
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import flow as flowmod
from . import metrics, track as trackmod, video as videomod
from .errors import (
    FlowTrackError,
    NoSuchAnchorError,
    ParseError,
    SessionStateError,
    UnknownOpError,
)
from .flow.cache import read_cache
from .video import Point2D

DEFAULT_PORT = 7414


@dataclass
class Session:
    video: videomod.VideoSequence | None = None
    flow: flowmod.FlowVolume | None = None
    flow_status: str = "idle"  # idle | pending | ready | failed
    flow_error: str = ""
    flow_done: int = 0
    flow_total: int = 0
    tracks: dict[str, trackmod.Track] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _require(condition: bool, error: FlowTrackError):
    if not condition:
        raise error


def _get_track(session: Session, payload: dict) -> trackmod.Track:
    tid = str(payload.get("track_id", ""))
    t = session.tracks.get(tid)
    if t is None:
        raise NoSuchAnchorError(f"no track with id {tid!r}")
    return t


def _require_ready(session: Session):
    _require(session.flow_status == "ready" and session.flow is not None,
             SessionStateError(
                 f"flow is {session.flow_status}; track edits need it ready"))


def _track_meta(session: Session) -> dict:
    v = session.video
    return {"source": v.source_path if v else "", "W": v.width if v else 0,
            "H": v.height if v else 0, "T": v.frame_count if v else 0,
            "created": ""}


def _span_reply(session: Session, tr: trackmod.Track, frame: int,
                stats: trackmod.RebuildStats | None) -> dict:
    left, right = trackmod._neighbors(tr.anchors, frame)
    lo = 0 if left is None else left.t
    hi = tr.frame_count - 1 if right is None else right.t
    pts = [{"frame": t, "x": float(tr.points[t, 0]),
            "y": float(tr.points[t, 1]), "visible": bool(tr.visibility[t])}
           for t in range(lo, hi + 1)]
    out = {"track_id": tr.id, "span": [lo, hi], "points": pts}
    if stats is not None:
        out["stats"] = {"elapsed_ms": stats.elapsed_ms,
                        "frames_touched": stats.frames_touched}
    return out


def _start_flow(session: Session, cfg: flowmod.FlowConfig, push):
    session.flow_status = "pending"
    session.flow_done = 0
    session.flow_total = session.video.frame_count - 1

    def progress(done, total):
        session.flow_done = done
        if push:
            push({"op": "flow_progress", "done": done, "total": total})

    def work():
        try:
            vol = flowmod.compute_flow(session.video, cfg, progress=progress)
            with session.lock:
                session.flow = vol
                session.flow_status = "ready"
        except Exception as exc:  # surfaced through flow_status
            with session.lock:
                session.flow_status = "failed"
                session.flow_error = str(exc)
        if push:
            push({"op": "flow_status", "status": session.flow_status})

    threading.Thread(target=work, daemon=True).start()


def _op_load_video(session: Session, payload: dict, push) -> dict:
    path = payload["path"]
    kind = payload.get("kind", "tiff_stack")
    channel = payload.get("channel")
    vid = videomod.load_sequence(path, kind=kind, channel=channel)
    if "rescale" in payload:
        w, h = payload["rescale"]
        vid = videomod.rescale_sequence(vid, int(w), int(h))
    session.video = vid
    session.tracks.clear()
    session.flow = None
    cache = payload.get("flow_cache")
    if cache:
        session.flow = read_cache(cache)
        session.flow_status = "ready"
    else:
        cfg = flowmod.FlowConfig(**payload.get("flow_config", {}))
        _start_flow(session, cfg, push)
    return {"W": vid.width, "H": vid.height, "T": vid.frame_count,
            "flow_status": session.flow_status}


def _op_create_track(session: Session, payload: dict, push) -> dict:
    _require_ready(session)
    seed = trackmod.Anchor(
        t=int(payload["frame"]),
        pos=Point2D(float(payload["x"]), float(payload["y"])),
        visible=bool(payload.get("visible", True)))
    tr = trackmod.new_track(session.flow, seed,
                            label=str(payload.get("label", "")))
    session.tracks[tr.id] = tr
    return {"track": trackmod.track_to_dict(tr, _track_meta(session))}


def _op_insert_anchor(session: Session, payload: dict, push) -> dict:
    _require_ready(session)
    tr = _get_track(session, payload)
    anchor = trackmod.Anchor(
        t=int(payload["frame"]),
        pos=Point2D(float(payload["x"]), float(payload["y"])),
        visible=bool(payload.get("visible", True)))
    stats = trackmod.insert_anchor(tr, anchor, session.flow)
    return _span_reply(session, tr, anchor.t, stats)


def _op_remove_anchor(session: Session, payload: dict, push) -> dict:
    _require_ready(session)
    tr = _get_track(session, payload)
    frame = int(payload["frame"])
    trackmod.remove_anchor(tr, frame, session.flow)
    return _span_reply(session, tr, frame, None)


def _op_set_visibility(session: Session, payload: dict, push) -> dict:
    _require_ready(session)
    tr = _get_track(session, payload)
    frame = int(payload["frame"])
    anchor = tr.anchor_at(frame)
    if anchor is None:
        raise NoSuchAnchorError(f"no anchor on frame {frame}")
    anchor.visible = bool(payload["visible"])
    tr.visibility = trackmod.visibility_from_anchors(tr.anchors,
                                                     tr.frame_count)
    return {"track": trackmod.track_to_dict(tr, _track_meta(session))}


def _op_get_track(session: Session, payload: dict, push) -> dict:
    tr = _get_track(session, payload)
    return {"track": trackmod.track_to_dict(tr, _track_meta(session))}


def _op_list_tracks(session: Session, payload: dict, push) -> dict:
    return {"tracks": [
        {"id": t.id, "label": t.label, "anchors": len(t.anchors)}
        for t in session.tracks.values()
    ]}


def _op_delete_track(session: Session, payload: dict, push) -> dict:
    tr = _get_track(session, payload)
    del session.tracks[tr.id]
    return {"deleted": tr.id}


def _op_get_frame(session: Session, payload: dict, push) -> dict:
    _require(session.video is not None,
             SessionStateError("no video loaded"))
    t = int(payload["frame"])
    _require(0 <= t < session.video.frame_count,
             SessionStateError(f"frame {t} out of range"))
    img = Image.fromarray(
        np.round(session.video.pixels[t] * 255).astype(np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return {"frame": t,
            "png_base64": base64.b64encode(buf.getvalue()).decode("ascii")}


def _op_flow_status(session: Session, payload: dict, push) -> dict:
    return {"status": session.flow_status, "done": session.flow_done,
            "total": session.flow_total, "error": session.flow_error}


def _op_evaluate_app(session: Session, payload: dict, push) -> dict:
    pred = session.tracks.get(str(payload.get("track_id", "")))
    _require(pred is not None, NoSuchAnchorError("unknown track_id"))
    if "ref_track_id" in payload:
        ref = session.tracks.get(str(payload["ref_track_id"]))
        _require(ref is not None, NoSuchAnchorError("unknown ref_track_id"))
        ref_pts, ref_vis = ref.points, ref.visibility
    else:
        rows = sorted(payload["ref_points"], key=lambda p: int(p["frame"]))
        ref_pts = np.array([[float(p["x"]), float(p["y"])] for p in rows])
        ref_vis = np.array([bool(p.get("visible", True)) for p in rows])
    cfg = metrics.APPConfig(tuple(payload.get("thresholds",
                                              metrics.DEFAULT_THRESHOLDS)))
    vis = metrics.joint_visibility(pred.visibility, ref_vis)
    report = metrics.app(pred.points, ref_pts, vis, cfg)
    return {"report": metrics.report_row(pred.id, report)}


def _op_export_tracks(session: Session, payload: dict, push) -> dict:
    doc = {"tracks": [trackmod.track_to_dict(t, _track_meta(session))
                      for t in session.tracks.values()]}
    path = payload.get("path")
    if path:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    return {"document": doc}


def _op_import_tracks(session: Session, payload: dict, push) -> dict:
    if "path" in payload:
        with open(payload["path"]) as fh:
            doc = json.load(fh)
    else:
        doc = payload["document"]
    ids = []
    for tdoc in doc["tracks"]:
        tr = trackmod.track_from_dict(tdoc)
        session.tracks[tr.id] = tr
        ids.append(tr.id)
    return {"imported": ids}


_OPS = {
    "load_video": _op_load_video,
    "flow_status": _op_flow_status,
    "create_track": _op_create_track,
    "insert_anchor": _op_insert_anchor,
    "remove_anchor": _op_remove_anchor,
    "set_visibility": _op_set_visibility,
    "get_track": _op_get_track,
    "list_tracks": _op_list_tracks,
    "delete_track": _op_delete_track,
    "get_frame": _op_get_frame,
    "evaluate_app": _op_evaluate_app,
    "export_tracks": _op_export_tracks,
    "import_tracks": _op_import_tracks,
}


def handle_message(session: Session, msg: dict, push=None) -> dict:
    """Dispatch one request; always returns a reply object."""
    request_id = msg.get("request_id") if isinstance(msg, dict) else None
    try:
        if not isinstance(msg, dict) or "op" not in msg:
            raise ParseError("message must be an object with an 'op' field")
        op = msg["op"]
        handler = _OPS.get(op)
        if handler is None:
            raise UnknownOpError(f"unknown op {op!r}")
        with session.lock:
            result = handler(session, msg.get("payload", {}), push)
        reply = {"request_id": request_id, "op": op, "ok": True}
        reply.update(result)
        return reply
    except FlowTrackError as exc:
        return {"request_id": request_id, "ok": False,
                "error": {"code": exc.code, "message": str(exc)}}
    except (KeyError, TypeError, ValueError) as exc:
        return {"request_id": request_id, "ok": False,
                "error": {"code": "bad_request", "message": str(exc)}}


def handle_line(session: Session, line: str, push=None) -> dict:
    """Parse one protocol line and dispatch; parse failures keep the
    session usable."""
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"request_id": None, "ok": False,
                "error": {"code": ParseError.code, "message": str(exc)}}
    return handle_message(session, msg, push)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session()
        write_lock = threading.Lock()

        def send(obj: dict):
            data = (json.dumps(obj) + "\n").encode("utf-8")
            with write_lock:
                try:
                    self.wfile.write(data)
                    self.wfile.flush()
                except OSError:
                    pass

        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            send(handle_line(session, line, push=send))


class ProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def serve(host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> ProtocolServer:
    """Create (but do not run) the TCP server; caller owns serve_forever."""
    return ProtocolServer((host, port), _Handler)


def serve_forever(host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
    with serve(host, port) as srv:
        srv.serve_forever()
