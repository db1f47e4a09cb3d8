"""Session documents: canonical serialization, parsing, verification.

A session document embeds its anatomy configuration, the view parameters,
the full event list and (once confirmed) the derived metrics. Replaying
the stored event list must reproduce the stored metrics exactly; event
times are stored, so replay reuses them.

Canonical form: JSON with sorted keys, no whitespace, full-precision
floats, one trailing newline. Identical documents serialize to identical
bytes.
"""

from __future__ import annotations

import json

from . import assess, session
from .anatomy import AnatomyModel, load_anatomy
from .errors import CorruptDocument, VersionMismatch
from .fluoro import ViewName, standard_views

SESSION_FORMAT_VERSION = 1

DEFAULT_VIEW_PARAMS = {
    "inlet_tilt_deg": 45.0,
    "outlet_tilt_deg": 45.0,
    "source_to_detector": 1000.0,
    "detector_diameter": 300.0,
}


def canonical_json(obj) -> str:
    return (
        json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
        + "\n"
    )


def normalize_view_params(params: dict | None) -> dict:
    params = dict(params or {})
    unknown = set(params) - set(DEFAULT_VIEW_PARAMS)
    if unknown:
        raise CorruptDocument(f"unknown view parameter(s): {sorted(unknown)}")
    out = dict(DEFAULT_VIEW_PARAMS)
    out.update({k: float(v) for k, v in params.items()})
    return out


def views_from_params(model: AnatomyModel, params: dict):
    p = normalize_view_params(params)
    return standard_views(
        model,
        inlet_tilt_deg=p["inlet_tilt_deg"],
        outlet_tilt_deg=p["outlet_tilt_deg"],
        source_to_detector=p["source_to_detector"],
        detector_diameter=p["detector_diameter"],
    )


# --- field conversions ---------------------------------------------------------


def pose_to_doc(pose: session.WirePose) -> dict:
    return {
        "entry": list(pose.entry),
        "direction": list(pose.direction),
        "depth": pose.depth,
        "wire_length": pose.wire_length,
        "wire_diameter": pose.wire_diameter,
    }


def pose_from_doc(doc: dict) -> session.WirePose:
    return session.WirePose(
        entry=tuple(float(x) for x in doc["entry"]),
        direction=tuple(float(x) for x in doc["direction"]),
        depth=float(doc["depth"]),
        wire_length=float(doc["wire_length"]),
        wire_diameter=float(doc["wire_diameter"]),
    )


def event_to_doc(event: session.SessionEvent) -> dict:
    out = {
        "seq": event.seq,
        "wall_time": event.wall_time,
        "command": session.command_to_doc(event.command),
        "pose_after": pose_to_doc(event.pose_after),
    }
    if event.radiograph_ref is not None:
        out["radiograph_ref"] = event.radiograph_ref
    return out


def event_from_doc(doc: dict) -> session.SessionEvent:
    return session.SessionEvent(
        seq=int(doc["seq"]),
        wall_time=float(doc["wall_time"]),
        command=session.command_from_doc(doc["command"]),
        pose_after=pose_from_doc(doc["pose_after"]),
        radiograph_ref=doc.get("radiograph_ref"),
    )


def metrics_to_doc(m: assess.SessionMetrics) -> dict:
    return {
        "xray_count": m.xray_count,
        "trial_count": m.trial_count,
        "iatrogenic_level": m.iatrogenic_level,
        "duration": m.duration,
        "final_assessment": m.final_assessment.value,
    }


def metrics_from_doc(doc: dict) -> assess.SessionMetrics:
    return assess.SessionMetrics(
        xray_count=int(doc["xray_count"]),
        trial_count=int(doc["trial_count"]),
        iatrogenic_level=int(doc["iatrogenic_level"]),
        duration=float(doc["duration"]),
        final_assessment=assess.TrajectoryAssessment(doc["final_assessment"]),
    )


# --- whole documents ---------------------------------------------------------------


def build_session_document(
    model: AnatomyModel,
    view_params: dict,
    state: session.SessionState,
    operator_id: str | None = None,
) -> dict:
    doc = {
        "format_version": SESSION_FORMAT_VERSION,
        "anatomy": model.to_config(),
        "views": normalize_view_params(view_params),
        "events": [event_to_doc(e) for e in state.events],
    }
    if operator_id is not None:
        doc["operator_id"] = operator_id
    if state.phase is session.Phase.CONFIRMED:
        doc["metrics"] = metrics_to_doc(assess.session_metrics(state, model))
    return doc


def parse_session_document(doc) -> dict:
    """Validate shape and version; returns the document as a dict."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise CorruptDocument(f"session document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptDocument("session document must be a JSON object")
    version = doc.get("format_version")
    if version != SESSION_FORMAT_VERSION:
        raise VersionMismatch(f"unsupported session format_version {version!r}")
    for field in ("anatomy", "views", "events"):
        if field not in doc:
            raise CorruptDocument(f"session document missing {field!r}")
    if not isinstance(doc["events"], list):
        raise CorruptDocument("events must be a list")
    return doc


def rebuild_state(doc: dict):
    """(model, views, state) reconstructed by replaying the event list."""
    doc = parse_session_document(doc)
    model = load_anatomy(doc["anatomy"])
    views = views_from_params(model, doc["views"])
    try:
        events = [event_from_doc(e) for e in doc["events"]]
        state = session.replay_events(model, views, events)
    except Exception as exc:
        raise CorruptDocument(f"event list does not replay: {exc}") from exc
    if [e.seq for e in state.events] != [e.seq for e in events]:
        raise CorruptDocument("replayed event count differs from document")
    return model, views, state


def session_metrics_from_document(doc: dict) -> assess.SessionMetrics:
    """Stored metrics of a confirmed session document."""
    doc = parse_session_document(doc)
    if "metrics" not in doc:
        raise CorruptDocument("session document has no metrics (not confirmed)")
    return metrics_from_doc(doc["metrics"])
