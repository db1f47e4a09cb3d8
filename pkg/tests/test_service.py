"""Documents, store, and the request/response API."""

import json
import threading

import pytest

from iliosim.anatomy import default_anatomy
from iliosim.api import ApiRequest, SimulatorService
from iliosim.assess import session_metrics
from iliosim.documents import (
    build_session_document,
    canonical_json,
    metrics_to_doc,
    rebuild_state,
    session_metrics_from_document,
)
from iliosim.errors import CorruptDocument, NotFound, VersionMismatch
from iliosim.fluoro import ViewName, standard_views
from iliosim.session import Confirm, Place, PushIn, Return, XRay, replay
from iliosim.store import SessionStore

MODEL = default_anatomy()
VIEWS = standard_views(MODEL)

CONFIRMED_SCRIPT = [
    XRay(ViewName.AP),
    Place(2.0, 1.5),
    PushIn(60.0),
    XRay(ViewName.INLET),
    Return(),
    PushIn(75.0),
    Confirm(),
]


def confirmed_document(operator_id=None):
    state, _ = replay(MODEL, VIEWS, CONFIRMED_SCRIPT)
    return build_session_document(MODEL, {}, state, operator_id)


def make_clock():
    ticks = iter(range(10_000))
    return lambda: float(next(ticks))


# --- documents ------------------------------------------------------------------


def test_document_replay_reproduces_metrics_exactly():
    doc = confirmed_document()
    model, views, state = rebuild_state(doc)
    assert metrics_to_doc(session_metrics(state, model)) == doc["metrics"]


def test_document_canonical_bytes_are_stable():
    assert canonical_json(confirmed_document()) == canonical_json(confirmed_document())


def test_parse_rejects_bad_documents():
    with pytest.raises(VersionMismatch):
        rebuild_state({"format_version": 999})
    with pytest.raises(CorruptDocument):
        rebuild_state({"format_version": 1, "anatomy": MODEL.to_config(), "views": {}})
    doc = confirmed_document()
    # event 3 happens while inserted: a PLACE there cannot replay
    doc["events"][3]["command"] = {"type": "place", "delta": [1, 1]}
    with pytest.raises(CorruptDocument):
        rebuild_state(doc)


# --- store -----------------------------------------------------------------------


def test_store_round_trip_bytes(tmp_path):
    store = SessionStore(tmp_path)
    doc = confirmed_document()
    doc_id = store.save(doc)
    assert doc_id == "s-000001"
    loaded = store.load(doc_id)
    assert canonical_json(loaded) == canonical_json(doc)
    assert store.load_bytes(doc_id) == canonical_json(doc).encode("utf-8")


def test_store_sequential_ids(tmp_path):
    store = SessionStore(tmp_path)
    assert store.save(confirmed_document()) == "s-000001"
    assert store.save(confirmed_document()) == "s-000002"
    assert store.list_ids() == ["s-000001", "s-000002"]


def test_store_not_found_and_version_mismatch(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(NotFound):
        store.load("s-000042")
    bad = confirmed_document()
    bad["format_version"] = 999
    (tmp_path / "s-000009.json").write_text(json.dumps(bad))
    with pytest.raises(VersionMismatch):
        store.load("s-000009")
    (tmp_path / "s-000010.json").write_text("{not json")
    with pytest.raises(CorruptDocument):
        store.load("s-000010")


# --- API -------------------------------------------------------------------------


def make_service(tmp_path, name="store"):
    return SimulatorService(SessionStore(tmp_path / name), clock=make_clock())


def post(service, path, body=None):
    return service.handle(ApiRequest("POST", path, body))


def get(service, path):
    return service.handle(ApiRequest("GET", path))


def command(service, sid, doc):
    return post(service, f"/sessions/{sid}/commands", {"command": doc})


def test_create_and_inspect_session(tmp_path):
    svc = make_service(tmp_path)
    r = post(svc, "/sessions", {"operator_id": "op7"})
    assert r.status == 200
    assert r.body["id"] == "s-000001"
    state = r.body["state"]
    assert state["phase"] == "positioning"
    assert state["counters"] == {"xrays": 0, "trials": 0}
    assert state["wire"]["entry_skin_uv"] == [0.0, 0.0]

    doc = get(svc, "/sessions/s-000001").body
    assert doc["operator_id"] == "op7"
    assert doc["events"] == []


def test_submit_commands_and_dual_image_panel(tmp_path):
    svc = make_service(tmp_path)
    sid = post(svc, "/sessions").body["id"]
    assert command(svc, sid, {"type": "xray", "view": "ap"}).status == 200
    r = command(svc, sid, {"type": "xray", "view": "inlet"})
    images = r.body["state"]["images"]
    assert images["current"]["view"] == "inlet"
    assert images["previous"]["view"] == "ap"
    assert r.body["state"]["counters"]["xrays"] == 2


def test_illegal_command_maps_to_409(tmp_path):
    svc = make_service(tmp_path)
    sid = post(svc, "/sessions").body["id"]
    command(svc, sid, {"type": "push_in", "advance": 20.0})
    r = command(svc, sid, {"type": "place", "delta": [1.0, 0.0]})
    assert r.status == 409
    assert r.body["error"] == "IllegalInPhase"
    r = command(svc, sid, {"type": "previous"})
    assert r.status == 409
    assert r.body["error"] == "CursorOutOfRange"


def test_malformed_command_maps_to_400(tmp_path):
    svc = make_service(tmp_path)
    sid = post(svc, "/sessions").body["id"]
    r = command(svc, sid, {"type": "push_in", "advance": -5})
    assert r.status == 400
    assert r.body["error"] == "InvalidCommand"
    r = post(svc, f"/sessions/{sid}/commands", {"noise": 1})
    assert r.status == 400


def test_unknown_session_and_path_are_404(tmp_path):
    svc = make_service(tmp_path)
    assert get(svc, "/sessions/s-404404").status == 404
    assert post(svc, "/nowhere").status == 404


def test_confirm_success_has_no_lesson(tmp_path):
    svc = make_service(tmp_path)
    sid = post(svc, "/sessions").body["id"]
    command(svc, sid, {"type": "push_in", "advance": 75.0})
    r = post(svc, f"/sessions/{sid}/confirm")
    assert r.status == 200
    assert r.body["assessment"] == "Success"
    assert r.body["lesson_id"] is None
    assert r.body["metrics"]["iatrogenic_level"] == 1
    report = get(svc, f"/sessions/{sid}/report")
    assert report.body["assessment"] == "Success"


def test_confirm_antero_cranial_exit_names_penetration_and_lesson(tmp_path):
    svc = make_service(tmp_path)
    sid = post(svc, "/sessions").body["id"]
    # 5 mm along the short axis, i.e. toward the antero-cranial wall
    command(svc, sid, {"type": "place", "delta": [-3.5355339059327378, -3.5355339059327378]})
    command(svc, sid, {"type": "push_in", "advance": 90.0})
    r = post(svc, f"/sessions/{sid}/confirm")
    assert r.status == 200
    assert r.body["assessment"] == "Antero-cranial penetration"
    assert r.body["lesson_id"] == "lesson.antero-cranial"


def test_report_on_unconfirmed_session_is_409(tmp_path):
    svc = make_service(tmp_path)
    sid = post(svc, "/sessions").body["id"]
    r = get(svc, f"/sessions/{sid}/report")
    assert r.status == 409
    assert r.body["error"] == "NotConfirmed"


def test_session_survives_service_restart(tmp_path):
    store = SessionStore(tmp_path / "store")
    svc = SimulatorService(store, clock=make_clock())
    sid = post(svc, "/sessions").body["id"]
    command(svc, sid, {"type": "xray", "view": "ap"})
    command(svc, sid, {"type": "push_in", "advance": 40.0})

    svc2 = SimulatorService(store, clock=make_clock())
    state = get(svc2, f"/sessions/{sid}").body
    assert len(state["events"]) == 2
    r = command(svc2, sid, {"type": "return"})
    assert r.status == 200
    assert r.body["state"]["phase"] == "positioning"


def test_api_determinism_across_fresh_stores(tmp_path):
    script = [
        ("POST", "/sessions", {"operator_id": "op1"}),
        ("POST", "/sessions/s-000001/commands", {"command": {"type": "xray", "view": "ap"}}),
        ("POST", "/sessions/s-000001/commands", {"command": {"type": "push_in", "advance": 60.0}}),
        ("POST", "/sessions/s-000001/commands", {"command": {"type": "xray", "view": "outlet"}}),
        ("POST", "/sessions/s-000001/confirm", None),
        ("GET", "/sessions/s-000001", None),
        ("GET", "/sessions/s-000001/report", None),
    ]
    svc_a = make_service(tmp_path, "a")
    svc_b = make_service(tmp_path, "b")
    for method, path, body in script:
        ra = svc_a.handle(ApiRequest(method, path, body))
        rb = svc_b.handle(ApiRequest(method, path, body))
        assert ra.status == rb.status
        assert canonical_json(ra.body) == canonical_json(rb.body)


def test_per_session_commands_serialize(tmp_path):
    for attempt in range(8):
        svc = make_service(tmp_path, f"t{attempt}")
        sid = post(svc, "/sessions").body["id"]
        results = []

        def submit(doc):
            results.append(command(svc, sid, doc))

        t1 = threading.Thread(target=submit, args=({"type": "push_in", "advance": 10.0},))
        t2 = threading.Thread(target=submit, args=({"type": "return"},))
        t1.start(), t2.start()
        t1.join(), t2.join()
        assert all(r.status == 200 for r in results)
        doc = get(svc, f"/sessions/{sid}").body
        assert len(doc["events"]) == 2
        final_depth = doc["events"][-1]["pose_after"]["depth"]
        # the two serial orders end at depth 0 (push, return) or 10 (return, push)
        assert final_depth in (0.0, 10.0)


def test_cohort_analyze_endpoint(tmp_path):
    svc = make_service(tmp_path)
    sessions = [confirmed_document(operator_id=f"op{i}") for i in range(4)]
    roster = {
        "format_version": 1,
        "seed": 3,
        "operators": [
            {
                "operator_id": f"op{i}",
                "experience": "zero",
                "items": [
                    {"item_id": "t1", "category": "theoretical", "correct": True},
                    {"item_id": "p1", "category": "procedural", "correct": False},
                ],
            }
            for i in range(4)
        ],
    }
    r = post(svc, "/cohort/analyze", {"roster": roster, "sessions": sessions})
    assert r.status == 200
    assert r.body["report"]["groups"]["g1"]["all"]["n"] == 2
    assert "Radiographic controls" in r.body["table"]
    # missing sessions for the roster -> bad request
    r = post(svc, "/cohort/analyze", {"roster": roster, "sessions": sessions[:2]})
    assert r.status == 400
    assert r.body["error"] == "MissingMetrics"
