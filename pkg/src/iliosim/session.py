"""Event-sourced exercise engine: wire kinematics and the command set.

Commands mirror the device buttons: PLACE and ORIENTATE adjust the wire
while it is outside the body, PUSH IN advances it, RETURN withdraws it
while holding entry point and orientation, INLET/OUTLET/AP take X-rays,
PREVIOUS/FOLLOWING browse the image history, CONFIRM freezes the session.

States are immutable; apply_command returns a new state and never mutates
its input, so a rejected command leaves the session untouched. Every
accepted command appends exactly one event, which makes sessions exactly
replayable from their event list.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import assess
from .anatomy import AnatomyModel, project_to_skin
from .errors import (
    CursorOutOfRange,
    IllegalInPhase,
    InvalidCommand,
    NonUnitVector,
    ScriptError,
    ValidationError,
)
from .fluoro import Radiograph, ViewName, ViewSpec, render_radiograph
from .geometry import Vec3, as_tuple, is_unit, vec

DEFAULT_WIRE_LENGTH = 300.0
DEFAULT_WIRE_DIAMETER = 2.5

ENTRY_ON_SKIN_TOL = 1e-6


class Phase(enum.Enum):
    POSITIONING = "positioning"
    INSERTED = "inserted"
    CONFIRMED = "confirmed"


@dataclass(frozen=True)
class WirePose:
    entry: Vec3  # on the skin plane
    direction: Vec3  # unit, pointing into the body
    depth: float = 0.0
    wire_length: float = DEFAULT_WIRE_LENGTH
    wire_diameter: float = DEFAULT_WIRE_DIAMETER

    @property
    def tip(self) -> Vec3:
        return as_tuple(vec(self.entry) + self.depth * vec(self.direction))


def validate_pose(model: AnatomyModel, pose: WirePose) -> None:
    if abs(model.skin_plane.signed_distance(pose.entry)) > ENTRY_ON_SKIN_TOL:
        raise ValidationError("wire entry point must lie on the skin plane")
    if not is_unit(pose.direction):
        raise NonUnitVector("wire direction must be a unit vector")
    if float(np.dot(vec(pose.direction), vec(model.skin_inward_normal))) <= 0.0:
        raise ValidationError("wire direction must point into the body")
    if not 0.0 <= pose.depth <= pose.wire_length:
        raise ValidationError("wire depth must be within [0, wire_length]")


# --- commands ------------------------------------------------------------------


@dataclass(frozen=True)
class Place:
    """Translate the entry point on the skin by (du, dv) mm in the
    deterministic skin tangent basis."""

    du: float
    dv: float


@dataclass(frozen=True)
class Orientate:
    direction: Vec3


@dataclass(frozen=True)
class PushIn:
    advance: float


@dataclass(frozen=True)
class Return:
    pass


@dataclass(frozen=True)
class XRay:
    view: ViewName


@dataclass(frozen=True)
class Previous:
    pass


@dataclass(frozen=True)
class Following:
    pass


@dataclass(frozen=True)
class Confirm:
    pass


Command = Place | Orientate | PushIn | Return | XRay | Previous | Following | Confirm


def command_to_doc(cmd: Command) -> dict:
    if isinstance(cmd, Place):
        return {"type": "place", "delta": [cmd.du, cmd.dv]}
    if isinstance(cmd, Orientate):
        return {"type": "orientate", "direction": list(cmd.direction)}
    if isinstance(cmd, PushIn):
        return {"type": "push_in", "advance": cmd.advance}
    if isinstance(cmd, Return):
        return {"type": "return"}
    if isinstance(cmd, XRay):
        return {"type": "xray", "view": cmd.view.value}
    if isinstance(cmd, Previous):
        return {"type": "previous"}
    if isinstance(cmd, Following):
        return {"type": "following"}
    if isinstance(cmd, Confirm):
        return {"type": "confirm"}
    raise InvalidCommand(f"unknown command object {cmd!r}")


def command_from_doc(doc: dict) -> Command:
    """Parse a command document; direction vectors are renormalized when
    within 1e-3 of unit length (text-format rounding)."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise InvalidCommand("command document needs a 'type' field")
    kind = doc["type"]
    try:
        if kind == "place":
            du, dv = (float(x) for x in doc["delta"])
            return Place(du, dv)
        if kind == "orientate":
            d = vec(doc["direction"])
            n = float(np.linalg.norm(d))
            if not np.all(np.isfinite(d)) or abs(n - 1.0) > 1e-3:
                raise InvalidCommand(f"orientate direction has norm {n:.6g}")
            return Orientate(as_tuple(d / n))
        if kind == "push_in":
            return PushIn(float(doc["advance"]))
        if kind == "return":
            return Return()
        if kind == "xray":
            return XRay(ViewName(doc["view"]))
        if kind == "previous":
            return Previous()
        if kind == "following":
            return Following()
        if kind == "confirm":
            return Confirm()
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidCommand(f"malformed {kind!r} command: {exc}") from exc
    raise InvalidCommand(f"unknown command type {kind!r}")


# --- session state ----------------------------------------------------------------


@dataclass(frozen=True)
class SessionEvent:
    seq: int  # dense from 1
    wall_time: float
    command: Command
    pose_after: WirePose
    radiograph_ref: int | None = None  # seq of the radiograph an XRay produced


@dataclass(frozen=True)
class SessionState:
    phase: Phase
    pose: WirePose
    events: tuple[SessionEvent, ...] = ()
    radiographs: tuple[Radiograph, ...] = ()
    image_cursor: int = -1
    attempts: tuple[assess.AttemptRecord, ...] = ()
    xray_count: int = 0

    @property
    def trial_count(self) -> int:
        return sum(1 for a in self.attempts if not a.is_final)


def initial_state(model: AnatomyModel) -> SessionState:
    """Fresh session: wire at the skin landmark, aimed along the corridor."""
    pose = WirePose(entry=model.skin_landmark(), direction=model.corridor.axis)
    validate_pose(model, pose)
    return SessionState(phase=Phase.POSITIONING, pose=pose)


def visible_images(state: SessionState) -> tuple[Radiograph | None, Radiograph | None]:
    """The dual display: (current, previous) at the image cursor."""
    cur = state.radiographs[state.image_cursor] if state.image_cursor >= 0 else None
    prev = state.radiographs[state.image_cursor - 1] if state.image_cursor >= 1 else None
    return cur, prev


def _append_event(
    state: SessionState,
    cmd: Command,
    now: float,
    pose: WirePose,
    radiograph_ref: int | None = None,
    **changes,
) -> SessionState:
    event = SessionEvent(
        seq=len(state.events) + 1,
        wall_time=float(now),
        command=cmd,
        pose_after=pose,
        radiograph_ref=radiograph_ref,
    )
    return replace(state, pose=pose, events=state.events + (event,), **changes)


def apply_command(
    state: SessionState,
    model: AnatomyModel,
    views: dict[ViewName, ViewSpec],
    cmd: Command,
    now: float,
) -> SessionState:
    """Apply one command, returning the successor state.

    Raises IllegalInPhase, CursorOutOfRange or InvalidCommand without
    touching the input state.
    """
    if state.phase is Phase.CONFIRMED:
        raise IllegalInPhase("session already confirmed")

    if isinstance(cmd, Place):
        if state.phase is not Phase.POSITIONING:
            raise IllegalInPhase("PLACE is only allowed while outside the body")
        if not (math.isfinite(cmd.du) and math.isfinite(cmd.dv)):
            raise InvalidCommand("PLACE delta must be finite")
        t1, t2 = model.skin_basis()
        moved = vec(state.pose.entry) + cmd.du * t1 + cmd.dv * t2
        pose = replace(state.pose, entry=project_to_skin(model, moved))
        return _append_event(state, cmd, now, pose)

    if isinstance(cmd, Orientate):
        if state.phase is not Phase.POSITIONING:
            raise IllegalInPhase("ORIENTATE is only allowed while outside the body")
        if not is_unit(cmd.direction):
            raise InvalidCommand("ORIENTATE direction must be a unit vector")
        if float(np.dot(vec(cmd.direction), vec(model.skin_inward_normal))) <= 0.0:
            raise InvalidCommand("ORIENTATE direction must point into the body")
        pose = replace(state.pose, direction=as_tuple(cmd.direction))
        return _append_event(state, cmd, now, pose)

    if isinstance(cmd, PushIn):
        if not (math.isfinite(cmd.advance) and cmd.advance > 0.0):
            raise InvalidCommand("PUSH IN advance must be positive")
        # physical wire cannot advance past its own length
        depth = min(state.pose.depth + cmd.advance, state.pose.wire_length)
        pose = replace(state.pose, depth=depth)
        return _append_event(state, cmd, now, pose, phase=Phase.INSERTED)

    if isinstance(cmd, Return):
        attempts = state.attempts
        result = assess.classify_wire(model, state.pose)
        if result.engaged_bone:
            attempts = attempts + (
                assess.AttemptRecord(
                    index=len(attempts) + 1,
                    max_depth=state.pose.depth,
                    label=result.label,
                    exit=result.exit,
                    is_final=False,
                ),
            )
        pose = replace(state.pose, depth=0.0)
        return _append_event(
            state, cmd, now, pose, phase=Phase.POSITIONING, attempts=attempts
        )

    if isinstance(cmd, XRay):
        view = views.get(cmd.view)
        if view is None:
            raise InvalidCommand(f"no view configured for {cmd.view}")
        seq = state.xray_count + 1
        radiograph = render_radiograph(view, model, state.pose, seq, taken_at=float(now))
        return _append_event(
            state,
            cmd,
            now,
            state.pose,
            radiograph_ref=seq,
            radiographs=state.radiographs + (radiograph,),
            xray_count=seq,
            image_cursor=len(state.radiographs),  # the fresh image is current
        )

    if isinstance(cmd, Previous):
        if state.image_cursor <= 0:
            raise CursorOutOfRange("already at the oldest image")
        return _append_event(
            state, cmd, now, state.pose, image_cursor=state.image_cursor - 1
        )

    if isinstance(cmd, Following):
        if state.image_cursor >= len(state.radiographs) - 1:
            raise CursorOutOfRange("already at the newest image")
        return _append_event(
            state, cmd, now, state.pose, image_cursor=state.image_cursor + 1
        )

    if isinstance(cmd, Confirm):
        result = assess.classify_wire(model, state.pose)
        final = assess.AttemptRecord(
            index=len(state.attempts) + 1,
            max_depth=state.pose.depth,
            label=result.label,
            exit=result.exit,
            is_final=True,
        )
        return _append_event(
            state,
            cmd,
            now,
            state.pose,
            phase=Phase.CONFIRMED,
            attempts=state.attempts + (final,),
        )

    raise InvalidCommand(f"unknown command {cmd!r}")


def replay(
    model: AnatomyModel,
    views: dict[ViewName, ViewSpec],
    script: list[Command],
) -> tuple[SessionState, tuple[SessionEvent, ...]]:
    """Run a command script headlessly under a synthetic clock (one tick
    per command). Deterministic: identical inputs give identical logs."""
    state = initial_state(model)
    for index, cmd in enumerate(script):
        try:
            state = apply_command(state, model, views, cmd, now=float(index))
        except Exception as exc:
            raise ScriptError(index, exc) from exc
    return state, state.events


def replay_events(
    model: AnatomyModel,
    views: dict[ViewName, ViewSpec],
    events,
) -> SessionState:
    """Re-apply a stored event list, reusing each event's wall time."""
    state = initial_state(model)
    for event in events:
        state = apply_command(state, model, views, event.command, now=event.wall_time)
    return state
