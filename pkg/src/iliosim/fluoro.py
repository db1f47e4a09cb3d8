"""Simulated C-arm: the three standard views and vector radiographs.

Radiographs are cone-beam (point source) perspective projections onto a
circular detector, rendered as vector scenes: the wire segment plus the
corridor silhouette. Rasterization is a client concern.

Detector coordinates are millimetres with the origin at the detector
center, axes (up x normal, up).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .anatomy import AnatomyModel
from .errors import BehindSource, InvalidAngle, ValidationError
from .geometry import Vec3, as_tuple, normalize, rotation_about, vec

DEFAULT_SOURCE_TO_DETECTOR = 1000.0
DEFAULT_DETECTOR_DIAMETER = 300.0
DEFAULT_INLET_TILT_DEG = 45.0
DEFAULT_OUTLET_TILT_DEG = 45.0

_SILHOUETTE_SAMPLES = 64
_CROSS_HALF = 8.0  # arm half-length of the skin landmark cross, mm

Point2 = tuple[float, float]
Polyline2 = tuple[Point2, ...]


class ViewName(enum.Enum):
    INLET = "inlet"
    OUTLET = "outlet"
    AP = "ap"


@dataclass(frozen=True)
class ViewSpec:
    name: ViewName
    source: Vec3
    detector_center: Vec3
    detector_normal: Vec3  # unit, source-to-detector direction
    up: Vec3  # unit, perpendicular to detector_normal
    detector_diameter: float = DEFAULT_DETECTOR_DIAMETER

    @property
    def source_to_detector(self) -> float:
        return float(
            np.dot(vec(self.detector_center) - vec(self.source), vec(self.detector_normal))
        )

    def image_axes(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.cross(vec(self.up), vec(self.detector_normal))
        return u, vec(self.up)


@dataclass(frozen=True)
class Radiograph:
    """One rendered view: wire projection plus anatomy silhouette.

    `taken_at` is excluded from equality so replayed renders compare equal.
    """

    view_name: ViewName
    seq: int
    wire_2d: tuple[Point2, ...]  # 2 points, or 1 when depth = 0
    silhouette: tuple[Polyline2, ...]
    clipped: bool
    taken_at: float = field(default=0.0, compare=False)


def _patient_frame(model: AnatomyModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(lateral, anterior, cranial) axes derived from the anatomy.

    The antero-cranial danger direction bisects anterior and cranial, and
    the ellipse long axis bisects anterior and caudal; anterior/cranial are
    recovered as their sum/difference.
    """
    x = vec(model.corridor.axis)
    ac = vec(model.antero_cranial_dir)
    major = vec(model.corridor.major_dir)
    anterior = normalize(ac + major)
    cranial = ac - major
    cranial = normalize(cranial - np.dot(cranial, anterior) * anterior)
    return x, anterior, cranial


def standard_views(
    model: AnatomyModel,
    inlet_tilt_deg: float = DEFAULT_INLET_TILT_DEG,
    outlet_tilt_deg: float = DEFAULT_OUTLET_TILT_DEG,
    source_to_detector: float = DEFAULT_SOURCE_TO_DETECTOR,
    detector_diameter: float = DEFAULT_DETECTOR_DIAMETER,
) -> dict[ViewName, ViewSpec]:
    """Construct the inlet, outlet and AP views around the corridor center.

    The AP beam runs anterior-to-posterior (supine patient); inlet tilts it
    caudally and outlet cranially about the patient's lateral axis. Every
    detector is centered on the corridor center's projection, with the
    source halfway along the beam (magnification 2 at the center).
    """
    for name, tilt in (("inlet", inlet_tilt_deg), ("outlet", outlet_tilt_deg)):
        if not 0.0 < tilt < 90.0:
            raise InvalidAngle(f"{name} tilt must be in (0, 90) degrees, got {tilt}")
    if not source_to_detector > 0.0:
        raise ValidationError("source_to_detector must be positive")
    if not detector_diameter > 0.0:
        raise ValidationError("detector_diameter must be positive")

    lateral, anterior, cranial = _patient_frame(model)
    center = vec(model.corridor.center)

    def build(name: ViewName, beam: np.ndarray, up: np.ndarray) -> ViewSpec:
        src = center - 0.5 * source_to_detector * beam
        det = center + 0.5 * source_to_detector * beam
        return ViewSpec(
            name=name,
            source=as_tuple(src),
            detector_center=as_tuple(det),
            detector_normal=as_tuple(beam),
            up=as_tuple(up),
            detector_diameter=detector_diameter,
        )

    ap_beam = -anterior
    r_in = rotation_about(lateral, math.radians(inlet_tilt_deg))
    r_out = rotation_about(lateral, -math.radians(outlet_tilt_deg))
    return {
        ViewName.AP: build(ViewName.AP, ap_beam, cranial),
        ViewName.INLET: build(ViewName.INLET, r_in @ ap_beam, r_in @ cranial),
        ViewName.OUTLET: build(ViewName.OUTLET, r_out @ ap_beam, r_out @ cranial),
    }


def project_points(view: ViewSpec, points: np.ndarray) -> np.ndarray:
    """Central projection of an (N, 3) array onto the detector, as (N, 2)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    src = vec(view.source)
    n = vec(view.detector_normal)
    rel = pts - src
    denom = rel @ n
    if np.any(denom <= 0.0):
        raise BehindSource("point at or behind the X-ray source plane")
    scale = view.source_to_detector / denom
    on_plane = src + rel * scale[:, None]
    u_axis, v_axis = view.image_axes()
    offs = on_plane - vec(view.detector_center)
    return np.column_stack([offs @ u_axis, offs @ v_axis])


def project_point(view: ViewSpec, p) -> Point2:
    """Project one 3D point; detector mm with origin at the detector center."""
    q = project_points(view, vec(p))[0]
    return (float(q[0]), float(q[1]))


def _corridor_silhouette(model: AnatomyModel) -> list[np.ndarray]:
    """3D curves: two end-cap ellipses and the four extremal edges."""
    c = model.corridor
    center = vec(c.center)
    axis, major, minor = vec(c.axis), vec(c.major_dir), vec(c.minor_dir)
    u_far = float(np.dot(vec(model.far_cortex_plane.point) - center, axis))
    lo, hi = -c.half_length, u_far

    t = np.linspace(0.0, 2.0 * math.pi, _SILHOUETTE_SAMPLES + 1)
    ring = (
        np.outer(c.semi_axis_long * np.cos(t), major)
        + np.outer(c.semi_axis_short * np.sin(t), minor)
    )
    curves = [center + lo * axis + ring, center + hi * axis + ring]

    s = np.linspace(lo, hi, _SILHOUETTE_SAMPLES)
    for offset in (
        c.semi_axis_long * major,
        -c.semi_axis_long * major,
        c.semi_axis_short * minor,
        -c.semi_axis_short * minor,
    ):
        curves.append(center + np.outer(s, axis) + offset)
    return curves


def _landmark_cross(model: AnatomyModel) -> list[np.ndarray]:
    mark = vec(model.skin_landmark())
    t1, t2 = model.skin_basis()
    return [
        np.vstack([mark - _CROSS_HALF * t1, mark + _CROSS_HALF * t1]),
        np.vstack([mark - _CROSS_HALF * t2, mark + _CROSS_HALF * t2]),
    ]


def render_radiograph(
    view: ViewSpec,
    model: AnatomyModel,
    pose,
    seq: int,
    taken_at: float = 0.0,
) -> Radiograph:
    """Render the wire and corridor silhouette for one view.

    `pose` is a session WirePose. The wire projects to a segment from the
    entry point to the tip, degenerating to a single point at depth 0 or
    when the wire is collinear with the center ray.
    """
    entry = vec(pose.entry)
    tip = entry + pose.depth * vec(pose.direction)
    if pose.depth > 0.0:
        wire = project_points(view, np.vstack([entry, tip]))
        if np.max(np.abs(wire[1] - wire[0])) <= 1e-9:
            wire = wire[:1]  # wire collinear with the center ray
    else:
        wire = project_points(view, entry)

    polylines: list[np.ndarray] = []
    for curve in _corridor_silhouette(model) + _landmark_cross(model):
        polylines.append(project_points(view, curve))

    radius = view.detector_diameter / 2.0
    all_pts = np.vstack([wire] + polylines)
    clipped = bool(np.any(np.hypot(all_pts[:, 0], all_pts[:, 1]) > radius))

    to_tuples = lambda arr: tuple((float(x), float(y)) for x, y in arr)
    return Radiograph(
        view_name=view.name,
        seq=seq,
        wire_2d=to_tuples(wire),
        silhouette=tuple(to_tuples(p) for p in polylines),
        clipped=clipped,
        taken_at=taken_at,
    )


# --- serialization ---------------------------------------------------------------
#
# Coordinates are written with fixed 6-decimal formatting so documents are
# bit-stable across runs; reparsing and re-serializing is idempotent.

def _fmt(x: float) -> str:
    v = round(float(x), 6)
    if v == 0.0:
        v = 0.0  # normalize -0.0
    return f"{v:.6f}"


def _fmt_points(points) -> str:
    return "[" + ",".join(f"[{_fmt(x)},{_fmt(y)}]" for x, y in points) + "]"


def radiograph_to_text(r: Radiograph) -> str:
    parts = [
        f'"clipped":{"true" if r.clipped else "false"}',
        f'"seq":{r.seq}',
        '"silhouette":[' + ",".join(_fmt_points(p) for p in r.silhouette) + "]",
        f'"view":"{r.view_name.value}"',
        '"wire_2d":' + _fmt_points(r.wire_2d),
    ]
    return "{" + ",".join(parts) + "}\n"


def radiograph_to_doc(r: Radiograph) -> dict:
    """The same content as the text form, as a plain dict (values rounded)."""
    return json.loads(radiograph_to_text(r))


def doc_to_radiograph(doc: dict) -> Radiograph:
    return Radiograph(
        view_name=ViewName(doc["view"]),
        seq=int(doc["seq"]),
        wire_2d=tuple((float(x), float(y)) for x, y in doc["wire_2d"]),
        silhouette=tuple(
            tuple((float(x), float(y)) for x, y in poly) for poly in doc["silhouette"]
        ),
        clipped=bool(doc["clipped"]),
    )


def text_to_radiograph(text: str) -> Radiograph:
    return doc_to_radiograph(json.loads(text))
