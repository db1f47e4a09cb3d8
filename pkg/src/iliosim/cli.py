"""Headless command line: scripted sessions, cohort analysis, API server.

Subcommands:
    simulate  --script F [--anatomy F] [--views F] [--operator ID] --out F
    analyze   --roster F --sessions DIR --out F
    serve     [--port N] [--store DIR]
    views     [--anatomy F]

Exit codes: 0 success, 1 runtime error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import assess, cohort, session
from .anatomy import default_anatomy, load_anatomy
from .documents import (
    build_session_document,
    canonical_json,
    metrics_to_doc,
    normalize_view_params,
    parse_session_document,
    session_metrics_from_document,
    views_from_params,
)
from .errors import MissingMetrics, SimulatorError

DEFAULT_STORE_ENV = "ILIOSIM_STORE"
DEFAULT_STORE_DIR = "iliosim-store"

_DATA_DIR = Path(__file__).parent / "data"
DEMO_ANATOMY = _DATA_DIR / "demo_anatomy.json"
DEMO_SCRIPT = _DATA_DIR / "demo_script.json"


def _read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_model(anatomy_path: str | None):
    if anatomy_path is None:
        return default_anatomy()
    return load_anatomy(_read_json(anatomy_path))


def _load_script(path: str) -> list[session.Command]:
    doc = _read_json(path)
    if isinstance(doc, dict):
        doc = doc.get("commands")
    if not isinstance(doc, list):
        raise SimulatorError("script must be a JSON list or {'commands': [...]}")
    return [session.command_from_doc(c) for c in doc]


def _cmd_simulate(args) -> int:
    model = _load_model(args.anatomy)
    view_params = normalize_view_params(_read_json(args.views) if args.views else None)
    views = views_from_params(model, view_params)
    script = _load_script(args.script)
    state, _ = session.replay(model, views, script)
    doc = build_session_document(model, view_params, state, args.operator)
    Path(args.out).write_text(canonical_json(doc), encoding="utf-8")
    if state.phase is session.Phase.CONFIRMED:
        metrics = assess.session_metrics(state, model)
        summary = metrics_to_doc(metrics)
        summary["assessment"] = assess.ASSESSMENT_TEXT[metrics.final_assessment]
        lesson = assess.lesson_for(metrics.final_assessment)
        if lesson:
            summary["lesson_id"] = lesson
    else:
        summary = {"phase": state.phase.value, "events": len(state.events)}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_analyze(args) -> int:
    profiles = cohort.roster_from_doc(_read_json(args.roster))
    metrics = {}
    sessions_dir = Path(args.sessions)
    for path in sorted(sessions_dir.glob("*.json")):
        doc = parse_session_document(_read_json(path))
        operator_id = doc.get("operator_id") or path.stem
        if "metrics" in doc:
            metrics[operator_id] = session_metrics_from_document(doc)
    missing = [p.operator_id for p in profiles if p.operator_id not in metrics]
    if missing:
        raise MissingMetrics(f"no confirmed session for operator(s): {', '.join(missing)}")
    report = cohort.cohort_report(profiles, metrics, alpha=args.alpha)
    Path(args.out).write_text(canonical_json(cohort.report_to_doc(report)), encoding="utf-8")
    print(cohort.render_report_table(report), end="")
    return 0


def _cmd_serve(args) -> int:
    from .api import serve

    return serve(args.store, args.port, host=args.host)


def _cmd_views(args) -> int:
    model = _load_model(args.anatomy)
    view_params = normalize_view_params(_read_json(args.views) if args.views else None)
    views = views_from_params(model, view_params)
    out = {}
    for name, spec in views.items():
        doc = asdict(spec)
        doc["name"] = spec.name.value
        out[name.value] = doc
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iliosim",
        description="Iliosacral guide-wire insertion simulator (headless tools)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="replay a command script, write the session document")
    p.add_argument("--anatomy", help="anatomy config JSON (default: built-in anatomy)")
    p.add_argument("--script", required=True, help="command script JSON")
    p.add_argument("--views", help="view parameters JSON")
    p.add_argument("--operator", help="operator id recorded in the session document")
    p.add_argument("--out", required=True, help="output session document path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="aggregate a roster against stored sessions")
    p.add_argument("--roster", required=True, help="roster JSON")
    p.add_argument("--sessions", required=True, help="directory of session documents")
    p.add_argument("--alpha", type=float, default=cohort.DEFAULT_ALPHA)
    p.add_argument("--out", required=True, help="output report JSON path")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument(
        "--store",
        default=os.environ.get(DEFAULT_STORE_ENV, DEFAULT_STORE_DIR),
        help=f"session store directory (default: ${DEFAULT_STORE_ENV} or ./{DEFAULT_STORE_DIR})",
    )
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("views", help="dump the three standard view specs")
    p.add_argument("--anatomy", help="anatomy config JSON (default: built-in anatomy)")
    p.add_argument("--views", help="view parameters JSON")
    p.set_defaults(func=_cmd_views)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SimulatorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
