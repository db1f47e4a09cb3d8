#!/usr/bin/env python3
"""Record API response fixtures for the frontend contract tests.

Drives the in-process service through two scripted sessions and captures
the exact payloads the HTTP API would return at each labeled step.
Regenerate after any API payload change:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import tempfile
from pathlib import Path

from iliosim.api import ApiRequest, SimulatorService
from iliosim.store import SessionStore

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "states.json"


def make_service(root):
    ticks = iter(range(100_000))
    return SimulatorService(SessionStore(root), clock=lambda: float(next(ticks)))


def run():
    fixtures = {}
    with tempfile.TemporaryDirectory() as tmp:
        svc = make_service(Path(tmp) / "a")
        sid = svc.handle(ApiRequest("POST", "/sessions", {"operator_id": "fixture"})).body["id"]

        def cmd(doc):
            r = svc.handle(ApiRequest("POST", f"/sessions/{sid}/commands", {"command": doc}))
            assert r.status == 200, r.body
            return r.body

        fresh = svc.handle(ApiRequest("POST", "/sessions", {})).body
        fixtures["fresh"] = {"state": fresh["state"]}

        fixtures["one_xray"] = cmd({"type": "xray", "view": "ap"})
        fixtures["two_xrays"] = cmd({"type": "xray", "view": "inlet"})
        fixtures["walked_previous"] = cmd({"type": "previous"})
        fixtures["walked_back"] = cmd({"type": "following"})
        fixtures["inserted"] = cmd({"type": "push_in", "advance": 40.0})
        fixtures["returned"] = cmd({"type": "return"})
        cmd({"type": "push_in", "advance": 75.0})
        confirm = svc.handle(ApiRequest("POST", f"/sessions/{sid}/confirm"))
        assert confirm.status == 200
        fixtures["confirmed_success"] = confirm.body

        # a rejected command, for the error-shape fixture
        rejected = svc.handle(
            ApiRequest("POST", f"/sessions/{sid}/commands", {"command": {"type": "xray", "view": "ap"}})
        )
        assert rejected.status == 409
        fixtures["rejected_after_confirm"] = {"status": 409, "body": rejected.body}

        # second session: antero-cranial exit (5 mm along the short axis)
        svc2 = make_service(Path(tmp) / "b")
        sid2 = svc2.handle(ApiRequest("POST", "/sessions", {})).body["id"]

        def cmd2(doc):
            r = svc2.handle(ApiRequest("POST", f"/sessions/{sid2}/commands", {"command": doc}))
            assert r.status == 200, r.body
            return r.body

        cmd2({"type": "place", "delta": [-3.5355339059327378, -3.5355339059327378]})
        cmd2({"type": "push_in", "advance": 90.0})
        confirm2 = svc2.handle(ApiRequest("POST", f"/sessions/{sid2}/confirm"))
        assert confirm2.status == 200
        assert confirm2.body["lesson_id"] == "lesson.antero-cranial"
        fixtures["confirmed_antero_cranial"] = confirm2.body

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixtures, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({len(fixtures)} fixtures)")


if __name__ == "__main__":
    run()
