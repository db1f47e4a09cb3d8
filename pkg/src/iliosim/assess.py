"""Trajectory assessment: intra/extra-osseous labeling, the final comment,
the 5-level iatrogenic index and session metrics.

The wire axis is sampled at <= 0.5 mm steps; a sample counts as intra-bone
when the corridor signed distance is at most -wire_radius_allowance, so a
wire whose axis merely grazes the wall is already extra-osseous. Because
the corridor is convex, a straight wire has at most one intra-bone run.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .anatomy import (
    AnatomyModel,
    ExitDirection,
    bone_inside_eroded,
    bone_signed_distance_many,
    classify_exit_direction,
)
from .errors import NotConfirmed, ValidationError
from .geometry import Vec3, as_tuple, vec

SAMPLING_STEP = 0.5  # mm, well under the 5.5 mm semi-minor axis


class WireLabel(enum.Enum):
    INTRA_OSSEOUS = "intra_osseous"
    EXTRA_OSSEOUS = "extra_osseous"


class TrajectoryAssessment(enum.Enum):
    SUCCESS = "success"
    ANTERO_CRANIAL_PENETRATION = "antero_cranial_penetration"
    POSTERO_CAUDAL_PENETRATION = "postero_caudal_penetration"
    INADEQUATE_PROGRESSION = "inadequate_progression"
    EXCESSIVE_PROGRESSION = "excessive_progression"


ASSESSMENT_TEXT = {
    TrajectoryAssessment.SUCCESS: "Success",
    TrajectoryAssessment.ANTERO_CRANIAL_PENETRATION: "Antero-cranial penetration",
    TrajectoryAssessment.POSTERO_CAUDAL_PENETRATION: "Postero-caudal penetration",
    TrajectoryAssessment.INADEQUATE_PROGRESSION: "Inadequate wire progression",
    TrajectoryAssessment.EXCESSIVE_PROGRESSION: "Excessive wire progression",
}

_LESSONS = {
    TrajectoryAssessment.ANTERO_CRANIAL_PENETRATION: "lesson.antero-cranial",
    TrajectoryAssessment.POSTERO_CAUDAL_PENETRATION: "lesson.postero-caudal",
    TrajectoryAssessment.INADEQUATE_PROGRESSION: "lesson.inadequate-progression",
    TrajectoryAssessment.EXCESSIVE_PROGRESSION: "lesson.excessive-progression",
}


@dataclass(frozen=True)
class AttemptRecord:
    """One trial (RETURN) or final (CONFIRM) trajectory."""

    index: int
    max_depth: float
    label: WireLabel
    exit: ExitDirection | None
    is_final: bool

    def __post_init__(self):
        if (self.exit is not None) != (self.label is WireLabel.EXTRA_OSSEOUS):
            raise ValidationError("exit present iff label is extra-osseous")


@dataclass(frozen=True)
class WireClassification:
    label: WireLabel
    exit: ExitDirection | None
    penetration_interval: tuple[float, float] | None  # mm along the wire
    first_violation: Vec3 | None  # first extra-osseous sample after entry

    @property
    def engaged_bone(self) -> bool:
        """True when the wire penetrated bone or ran extra-osseously past
        the bone entry plane; skin-level positioning does not engage."""
        return (
            self.penetration_interval is not None
            or self.label is WireLabel.EXTRA_OSSEOUS
        )


@dataclass(frozen=True)
class SessionMetrics:
    xray_count: int
    trial_count: int
    iatrogenic_level: int  # 1..5
    duration: float  # seconds, last event minus first
    final_assessment: TrajectoryAssessment


def wire_samples(pose, step: float = SAMPLING_STEP) -> tuple[np.ndarray, np.ndarray]:
    """(params, points): wire axis sampled from entry to tip, endpoints exact."""
    depth = float(pose.depth)
    if depth <= 0.0:
        t = np.array([0.0])
    else:
        n = max(int(math.ceil(depth / step)), 1)
        t = np.linspace(0.0, depth, n + 1)
    pts = vec(pose.entry) + t[:, None] * vec(pose.direction)
    return t, pts


def classify_wire(
    model: AnatomyModel, pose, step: float = SAMPLING_STEP
) -> WireClassification:
    """Label a wire pose intra- or extra-osseous.

    A penetrating wire is intra-osseous iff, once inside bone, it never
    re-exits before the tip; the exit of a re-exiting wire is classified
    at the first violating sample. A wire that never penetrates is
    intra-osseous (empty interval) while it stays lateral of the bone
    entry plane, but extra-osseous once it has advanced past it outside
    bone (a deep miss is hazardous, not a skin-level reposition).
    """
    t, pts = wire_samples(pose, step)
    inside = bone_inside_eroded(model, pts, model.wire_radius_allowance)

    c = model.corridor
    u = (pts - vec(c.center)) @ vec(c.axis)
    # past the effective entry cap: the wire-radius sphere has fully
    # crossed the bone entry plane
    reached = u >= -c.half_length + model.wire_radius_allowance

    idx = np.nonzero(inside)[0]
    if idx.size == 0:
        miss = np.nonzero(reached)[0]
        if miss.size == 0:
            return WireClassification(WireLabel.INTRA_OSSEOUS, None, None, None)
        p_violation = as_tuple(pts[int(miss[0])])
        exit_dir = classify_exit_direction(model, p_violation)
        return WireClassification(WireLabel.EXTRA_OSSEOUS, exit_dir, None, p_violation)

    first = int(idx[0])
    after = inside[first:]
    if bool(np.all(after)):
        return WireClassification(
            WireLabel.INTRA_OSSEOUS, None, (float(t[first]), float(t[-1])), None
        )
    violation = first + int(np.argmin(after))  # first False past the entry
    interval = (float(t[first]), float(t[violation - 1]))
    p_violation = as_tuple(pts[violation])
    exit_dir = classify_exit_direction(model, p_violation)
    return WireClassification(WireLabel.EXTRA_OSSEOUS, exit_dir, interval, p_violation)


def assess_final(model: AnatomyModel, pose) -> TrajectoryAssessment:
    """The simulator's final comment for a confirmed trajectory.

    Precedence: side-wall penetration > excessive progression > inadequate
    progression. An extra-osseous wire whose first violation is explained
    by the far cortex alone (still within the cylinder walls) has crossed
    the far cortex: that is excessive progression, not a penetration.
    """
    result = classify_wire(model, pose)
    if result.label is WireLabel.EXTRA_OSSEOUS:
        d_no_far = float(
            bone_signed_distance_many(
                model, vec(result.first_violation), ignore_far_cap=True
            )
        )
        if d_no_far <= -model.wire_radius_allowance:
            return TrajectoryAssessment.EXCESSIVE_PROGRESSION
        if result.exit is ExitDirection.ANTERO_CRANIAL:
            return TrajectoryAssessment.ANTERO_CRANIAL_PENETRATION
        return TrajectoryAssessment.POSTERO_CAUDAL_PENETRATION
    tip = vec(pose.tip)
    if model.far_cortex_plane.signed_distance(tip) > 0.0:
        return TrajectoryAssessment.EXCESSIVE_PROGRESSION
    if model.sufficiency_plane.signed_distance(tip) < 0.0:
        return TrajectoryAssessment.INADEQUATE_PROGRESSION
    return TrajectoryAssessment.SUCCESS


def iatrogenic_level(trials, final: WireLabel) -> int:
    """Map trial and final trajectory labels to the 1..5 iatrogenic index.

    With a final intra-osseous trajectory: 1 when every trial stayed in
    bone, 2 when some trial was extra-osseous. With a final extra-osseous
    trajectory: 3 after all-intra trials, 4 after an extra-osseous trial,
    5 when no trial was made at all. No trials with an intra-osseous final
    also maps to the minimum level 1.
    """
    some_extra = any(label is WireLabel.EXTRA_OSSEOUS for label in trials)
    if final is WireLabel.INTRA_OSSEOUS:
        return 2 if some_extra else 1
    if not list(trials):
        return 5
    return 4 if some_extra else 3


def session_metrics(state, model: AnatomyModel) -> SessionMetrics:
    """Metrics of a confirmed session: counters, index, duration, comment."""
    from .session import Phase  # local import to avoid a cycle

    if state.phase is not Phase.CONFIRMED:
        raise NotConfirmed("metrics require a confirmed session")
    final = state.attempts[-1]
    trials = [a.label for a in state.attempts if not a.is_final]
    duration = state.events[-1].wall_time - state.events[0].wall_time
    return SessionMetrics(
        xray_count=state.xray_count,
        trial_count=len(trials),
        iatrogenic_level=iatrogenic_level(trials, final.label),
        duration=float(duration),
        final_assessment=assess_final(model, state.pose),
    )


def lesson_for(assessment: TrajectoryAssessment) -> str | None:
    """The lesson id for a failed trajectory; a success teaches nothing."""
    return _LESSONS.get(assessment)
