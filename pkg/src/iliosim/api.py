"""Network API consumed by the exercise UI, plus the embedded HTTP server.

The service keeps live sessions in memory, persists every accepted command
to the store, and serializes command submission per session (single-writer
per session id; distinct sessions run in parallel). Responses are
deterministic given the store state apart from wall-clock timestamps.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import assess, cohort, session
from .anatomy import AnatomyModel, default_anatomy, load_anatomy
from .documents import (
    build_session_document,
    metrics_to_doc,
    normalize_view_params,
    parse_session_document,
    rebuild_state,
    session_metrics_from_document,
    views_from_params,
)
from .errors import (
    CorruptDocument,
    CursorOutOfRange,
    DegenerateTable,
    EmptyCategory,
    IllegalInPhase,
    InvalidCommand,
    MissingField,
    MissingMetrics,
    NonUnitVector,
    NotConfirmed,
    NotFound,
    SimulatorError,
    ValidationError,
    VersionMismatch,
)
from .fluoro import radiograph_to_doc
from .geometry import vec
from .store import SessionStore

_CONFLICT_ERRORS = (IllegalInPhase, CursorOutOfRange, NotConfirmed)
_BAD_REQUEST_ERRORS = (
    InvalidCommand,
    ValidationError,
    NonUnitVector,
    MissingField,
    VersionMismatch,
    CorruptDocument,
    EmptyCategory,
    DegenerateTable,
    MissingMetrics,
)


@dataclass(frozen=True)
class ApiRequest:
    method: str
    path: str
    body: dict | None = None


@dataclass(frozen=True)
class ApiResponse:
    status: int
    body: dict


@dataclass
class _LiveSession:
    model: AnatomyModel
    view_params: dict
    views: dict
    state: session.SessionState
    operator_id: str | None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SimulatorService:
    """Request handler over a session store; thread-safe."""

    def __init__(self, store: SessionStore, clock=time.time):
        self.store = store
        self.clock = clock
        self._sessions: dict[str, _LiveSession] = {}
        self._registry_lock = threading.Lock()

    # -- payload builders ----------------------------------------------------

    def _wire_payload(self, live: _LiveSession) -> dict:
        pose = live.state.pose
        t1, t2 = live.model.skin_basis()
        rel = vec(pose.entry) - vec(live.model.skin_landmark())
        d = vec(pose.direction)
        return {
            "entry": list(pose.entry),
            "entry_skin_uv": [float(np.dot(rel, t1)), float(np.dot(rel, t2))],
            "direction": list(pose.direction),
            # skin-frame decomposition so the UI can draw the overlay
            # without doing geometry: tangential components + inward cosine
            "direction_skin_uv": [float(np.dot(d, t1)), float(np.dot(d, t2))],
            "direction_inward": float(np.dot(d, vec(live.model.skin_inward_normal))),
            "depth": pose.depth,
            "wire_length": pose.wire_length,
            "wire_diameter": pose.wire_diameter,
        }

    def _state_payload(self, live: _LiveSession) -> dict:
        state = live.state
        current, previous = session.visible_images(state)
        return {
            "phase": state.phase.value,
            "wire": self._wire_payload(live),
            "counters": {"xrays": state.xray_count, "trials": state.trial_count},
            "image_count": len(state.radiographs),
            "image_cursor": state.image_cursor,
            "images": {
                "current": radiograph_to_doc(current) if current else None,
                "previous": radiograph_to_doc(previous) if previous else None,
            },
        }

    def _report_payload(self, live: _LiveSession) -> dict:
        metrics = assess.session_metrics(live.state, live.model)
        return {
            "assessment": assess.ASSESSMENT_TEXT[metrics.final_assessment],
            "metrics": metrics_to_doc(metrics),
            "lesson_id": assess.lesson_for(metrics.final_assessment),
        }

    def _persist(self, session_id: str, live: _LiveSession) -> None:
        doc = build_session_document(
            live.model, live.view_params, live.state, live.operator_id
        )
        self.store.save_as(session_id, doc)

    def _live(self, session_id: str) -> _LiveSession:
        with self._registry_lock:
            live = self._sessions.get(session_id)
            if live is not None:
                return live
        # fall back to the store (service restart)
        doc = self.store.load(session_id)
        model, views, state = rebuild_state(doc)
        live = _LiveSession(
            model=model,
            view_params=normalize_view_params(doc["views"]),
            views=views,
            state=state,
            operator_id=doc.get("operator_id"),
        )
        with self._registry_lock:
            return self._sessions.setdefault(session_id, live)

    # -- endpoints --------------------------------------------------------------

    def create_session(self, body: dict | None) -> ApiResponse:
        body = body or {}
        model = (
            load_anatomy(body["anatomy"]) if "anatomy" in body else default_anatomy()
        )
        view_params = normalize_view_params(body.get("views"))
        views = views_from_params(model, view_params)
        live = _LiveSession(
            model=model,
            view_params=view_params,
            views=views,
            state=session.initial_state(model),
            operator_id=body.get("operator_id"),
        )
        with self._registry_lock:
            session_id = self.store.next_id()
            self._persist(session_id, live)
            self._sessions[session_id] = live
        return ApiResponse(200, {"id": session_id, "state": self._state_payload(live)})

    def submit_command(self, session_id: str, body: dict | None) -> ApiResponse:
        if not body or "command" not in body:
            raise InvalidCommand("request body needs a 'command' field")
        cmd = session.command_from_doc(body["command"])
        live = self._live(session_id)
        with live.lock:
            live.state = session.apply_command(
                live.state, live.model, live.views, cmd, now=float(self.clock())
            )
            self._persist(session_id, live)
            payload = {"state": self._state_payload(live)}
            if live.state.phase is session.Phase.CONFIRMED:
                payload["report"] = self._report_payload(live)
        return ApiResponse(200, payload)

    def confirm(self, session_id: str) -> ApiResponse:
        live = self._live(session_id)
        with live.lock:
            live.state = session.apply_command(
                live.state, live.model, live.views, session.Confirm(), now=float(self.clock())
            )
            self._persist(session_id, live)
            payload = self._report_payload(live)
            payload["state"] = self._state_payload(live)
        return ApiResponse(200, payload)

    def get_session(self, session_id: str) -> ApiResponse:
        live = self._live(session_id)
        with live.lock:
            doc = build_session_document(
                live.model, live.view_params, live.state, live.operator_id
            )
        return ApiResponse(200, doc)

    def get_report(self, session_id: str) -> ApiResponse:
        live = self._live(session_id)
        with live.lock:
            return ApiResponse(200, self._report_payload(live))

    def analyze_cohort(self, body: dict | None) -> ApiResponse:
        if not body or "roster" not in body:
            raise ValidationError("request body needs a 'roster' field")
        profiles = cohort.roster_from_doc(body["roster"])
        metrics = {}
        for doc in body.get("sessions", []):
            doc = parse_session_document(doc)
            operator_id = doc.get("operator_id")
            if operator_id:
                metrics[operator_id] = session_metrics_from_document(doc)
        report = cohort.cohort_report(
            profiles, metrics, alpha=float(body.get("alpha", cohort.DEFAULT_ALPHA))
        )
        return ApiResponse(
            200,
            {
                "report": cohort.report_to_doc(report),
                "table": cohort.render_report_table(report),
            },
        )

    # -- router ------------------------------------------------------------------

    def handle(self, req: ApiRequest) -> ApiResponse:
        try:
            return self._route(req)
        except NotFound as exc:
            return ApiResponse(404, {"error": "NotFound", "message": str(exc)})
        except _CONFLICT_ERRORS as exc:
            return ApiResponse(409, {"error": type(exc).__name__, "message": str(exc)})
        except _BAD_REQUEST_ERRORS as exc:
            return ApiResponse(400, {"error": type(exc).__name__, "message": str(exc)})
        except SimulatorError as exc:
            return ApiResponse(400, {"error": type(exc).__name__, "message": str(exc)})

    def _route(self, req: ApiRequest) -> ApiResponse:
        method, path = req.method.upper(), req.path.rstrip("/")
        if method == "POST" and path == "/sessions":
            return self.create_session(req.body)
        if method == "POST" and path == "/cohort/analyze":
            return self.analyze_cohort(req.body)
        m = re.fullmatch(r"/sessions/([^/]+)", path)
        if m and method == "GET":
            return self.get_session(m.group(1))
        m = re.fullmatch(r"/sessions/([^/]+)/commands", path)
        if m and method == "POST":
            return self.submit_command(m.group(1), req.body)
        m = re.fullmatch(r"/sessions/([^/]+)/confirm", path)
        if m and method == "POST":
            return self.confirm(m.group(1))
        m = re.fullmatch(r"/sessions/([^/]+)/report", path)
        if m and method == "GET":
            return self.get_report(m.group(1))
        raise NotFound(f"no endpoint for {method} {req.path}")


# --- HTTP front end -----------------------------------------------------------------


def serve(store_dir: str, port: int, host: str = "127.0.0.1"):
    """Run the blocking HTTP server (used by the CLI `serve` subcommand)."""
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    service = SimulatorService(SessionStore(store_dir))

    class Handler(BaseHTTPRequestHandler):
        def _respond(self, response: ApiResponse):
            payload = json.dumps(response.body).encode("utf-8")
            self.send_response(response.status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(payload)

        def _body(self):
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return None
            raw = self.rfile.read(length)
            try:
                parsed = json.loads(raw)
            except json.JSONDecodeError:
                return {"_malformed": True}
            return parsed if isinstance(parsed, dict) else {"_malformed": True}

        def _dispatch(self, method):
            body = self._body()
            if body is not None and body.get("_malformed"):
                self._respond(
                    ApiResponse(400, {"error": "CorruptDocument", "message": "invalid JSON body"})
                )
                return
            self._respond(service.handle(ApiRequest(method, self.path, body)))

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_OPTIONS(self):
            self._respond(ApiResponse(200, {}))

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer((host, port), Handler)
    print(f"iliosim API serving on http://{host}:{port} (store: {store_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0
