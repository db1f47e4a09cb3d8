"""Parametric model of the posterior pelvis around the iliosacral corridor.

The bone is modelled as one truncated elliptic cylinder: the intra-osseous
safe corridor. Its cross-section defaults to semi-axes 11.0 x 5.5 mm (the
narrow alar section). The short axis of the ellipse is aligned with the
danger direction, so an exiting wire leaves either antero-cranially or
postero-caudally.

Frame convention (defaults): +x lateral-to-medial along the corridor axis,
+y anterior, +z cranial. The model is fully configurable; queries work in
the corridor's local frame and are therefore rigid-invariant.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import MissingField, NonUnitVector, ValidationError, VersionMismatch
from .errors import NotAnExitPoint
from .geometry import (
    GEOM_TOL,
    Vec3,
    as_tuple,
    capped_cylinder_signed_distance,
    ellipse_signed_distance,
    ellipse_signed_distance_bounds,
    normalize,
    plane_tangent_basis,
    vec,
)

FORMAT_VERSION = 1

# Direction vectors in config documents may carry rounding from text
# formatting; anything within this tolerance of unit length is accepted
# and renormalized, anything beyond it is rejected as not a direction.
_COARSE_UNIT_TOL = 1e-3

DEFAULT_SEMI_AXIS_LONG = 11.0
DEFAULT_SEMI_AXIS_SHORT = 5.5
DEFAULT_HALF_LENGTH = 35.0
DEFAULT_SKIN_OFFSET = 20.0
DEFAULT_WIRE_RADIUS_ALLOWANCE = 1.25


class ExitDirection(enum.Enum):
    ANTERO_CRANIAL = "antero_cranial"
    POSTERO_CAUDAL = "postero_caudal"


@dataclass(frozen=True)
class Plane:
    """Oriented plane given by a point on it and a unit normal."""

    point: Vec3
    normal: Vec3

    def signed_distance(self, p) -> float:
        return float(np.dot(vec(p) - vec(self.point), vec(self.normal)))

    def project(self, p) -> np.ndarray:
        q = vec(p)
        n = vec(self.normal)
        return q - np.dot(q - vec(self.point), n) * n


@dataclass(frozen=True)
class CorridorSpec:
    """Elliptic-cylinder safe corridor in the sacral wing.

    `major_dir` is the direction of the ellipse long axis within the
    cross-section plane; the short axis is axis x major_dir.
    """

    center: Vec3 = (0.0, 0.0, 0.0)
    axis: Vec3 = (1.0, 0.0, 0.0)
    half_length: float = DEFAULT_HALF_LENGTH
    semi_axis_long: float = DEFAULT_SEMI_AXIS_LONG
    semi_axis_short: float = DEFAULT_SEMI_AXIS_SHORT
    major_dir: Vec3 = (0.0, math.sqrt(0.5), -math.sqrt(0.5))

    @property
    def minor_dir(self) -> Vec3:
        return as_tuple(np.cross(vec(self.axis), vec(self.major_dir)))


@dataclass(frozen=True)
class AnatomyModel:
    corridor: CorridorSpec
    skin_plane: Plane
    antero_cranial_dir: Vec3
    postero_caudal_dir: Vec3
    sufficiency_plane: Plane
    far_cortex_plane: Plane
    wire_radius_allowance: float = DEFAULT_WIRE_RADIUS_ALLOWANCE

    @property
    def skin_inward_normal(self) -> Vec3:
        return as_tuple(-vec(self.skin_plane.normal))

    def skin_landmark(self) -> Vec3:
        """Entry landmark: the corridor center projected onto the skin."""
        return as_tuple(self.skin_plane.project(self.corridor.center))

    def skin_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Tangent basis used for 2D translations of the entry point."""
        return plane_tangent_basis(self.skin_inward_normal)

    def to_config(self) -> dict:
        """Resolved configuration dict; load_anatomy round-trips it exactly."""
        c = self.corridor
        return {
            "format_version": FORMAT_VERSION,
            "corridor": {
                "center": list(c.center),
                "axis": list(c.axis),
                "half_length": c.half_length,
                "semi_axis_long": c.semi_axis_long,
                "semi_axis_short": c.semi_axis_short,
                "major_dir": list(c.major_dir),
            },
            "skin_plane": {
                "point": list(self.skin_plane.point),
                "normal": list(self.skin_plane.normal),
            },
            "antero_cranial_dir": list(self.antero_cranial_dir),
            "postero_caudal_dir": list(self.postero_caudal_dir),
            "sufficiency_plane": {
                "point": list(self.sufficiency_plane.point),
                "normal": list(self.sufficiency_plane.normal),
            },
            "far_cortex_plane": {
                "point": list(self.far_cortex_plane.point),
                "normal": list(self.far_cortex_plane.normal),
            },
            "wire_radius_allowance": self.wire_radius_allowance,
        }


# --- configuration loading -----------------------------------------------------

def _unit_or_raise(raw, what: str) -> np.ndarray:
    v = vec(raw)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"{what} must be a finite 3-vector")
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > _COARSE_UNIT_TOL:
        raise NonUnitVector(f"{what} has norm {n:.6g}, expected 1")
    return v / n


def _point_or_raise(raw, what: str) -> np.ndarray:
    v = vec(raw)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"{what} must be a finite 3-point")
    return v


def _plane_from(raw: dict, what: str) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(raw, dict) or set(raw) - {"point", "normal"}:
        raise ValidationError(f"{what} must be {{point, normal}}")
    if "point" not in raw or "normal" not in raw:
        raise MissingField(f"{what} needs both point and normal")
    return _point_or_raise(raw["point"], f"{what}.point"), _unit_or_raise(
        raw["normal"], f"{what}.normal"
    )


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"unknown field(s) in {where}: {sorted(unknown)}")


def load_anatomy(config_document) -> AnatomyModel:
    """Build a validated AnatomyModel from a config document.

    Accepts a JSON string or an already-parsed dict. Every field except
    `format_version` has a default; the defaults reproduce the narrow-section
    corridor dimensions (semi-axes 11.0 and 5.5 mm).
    """
    if isinstance(config_document, (str, bytes)):
        try:
            doc = json.loads(config_document)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"anatomy config is not valid JSON: {exc}") from exc
    else:
        doc = config_document
    if not isinstance(doc, dict):
        raise ValidationError("anatomy config must be a JSON object")

    _reject_unknown(
        doc,
        {
            "format_version",
            "corridor",
            "skin_plane",
            "antero_cranial_dir",
            "postero_caudal_dir",
            "sufficiency_plane",
            "far_cortex_plane",
            "wire_radius_allowance",
        },
        "anatomy config",
    )

    if "format_version" not in doc:
        raise MissingField("anatomy config requires format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionMismatch(
            f"unsupported anatomy format_version {doc['format_version']!r}"
        )

    cor = doc.get("corridor", {})
    if not isinstance(cor, dict):
        raise ValidationError("corridor must be an object")
    _reject_unknown(
        cor,
        {"center", "axis", "half_length", "semi_axis_long", "semi_axis_short", "major_dir"},
        "corridor",
    )
    center = _point_or_raise(cor.get("center", (0.0, 0.0, 0.0)), "corridor.center")
    axis = _unit_or_raise(cor.get("axis", (1.0, 0.0, 0.0)), "corridor.axis")
    half_length = float(cor.get("half_length", DEFAULT_HALF_LENGTH))
    semi_long = float(cor.get("semi_axis_long", DEFAULT_SEMI_AXIS_LONG))
    semi_short = float(cor.get("semi_axis_short", DEFAULT_SEMI_AXIS_SHORT))

    if not (0.0 < semi_short <= semi_long):
        raise ValidationError(
            f"need 0 < semi_axis_short <= semi_axis_long, got ({semi_short}, {semi_long})"
        )
    if not half_length > semi_long:
        raise ValidationError(
            f"half_length {half_length} must exceed semi_axis_long {semi_long}"
        )

    default_major = np.array([0.0, math.sqrt(0.5), -math.sqrt(0.5)])
    major = _unit_or_raise(cor.get("major_dir", default_major), "corridor.major_dir")
    if abs(float(np.dot(axis, major))) > _COARSE_UNIT_TOL:
        raise ValidationError("corridor.major_dir must be perpendicular to axis")
    major = normalize(major - np.dot(major, axis) * axis)

    if "skin_plane" in doc:
        skin_point, skin_normal = _plane_from(doc["skin_plane"], "skin_plane")
    else:
        skin_point = center - (half_length + DEFAULT_SKIN_OFFSET) * axis
        skin_normal = -axis
    if float(np.dot(skin_normal, axis)) >= 0.0:
        raise ValidationError("skin_plane.normal must point laterally (away from bone)")

    if "antero_cranial_dir" in doc:
        ac = _unit_or_raise(doc["antero_cranial_dir"], "antero_cranial_dir")
        if abs(float(np.dot(ac, axis))) > _COARSE_UNIT_TOL:
            raise ValidationError("antero_cranial_dir must be perpendicular to axis")
        ac = normalize(ac - np.dot(ac, axis) * axis)
    else:
        ac = normalize(np.cross(axis, major))  # short-axis direction
    pc = (
        _unit_or_raise(doc["postero_caudal_dir"], "postero_caudal_dir")
        if "postero_caudal_dir" in doc
        else -ac
    )

    if "sufficiency_plane" in doc:
        suff_point, suff_normal = _plane_from(doc["sufficiency_plane"], "sufficiency_plane")
    else:
        suff_point, suff_normal = center.copy(), axis.copy()

    if "far_cortex_plane" in doc:
        far_point, far_normal = _plane_from(doc["far_cortex_plane"], "far_cortex_plane")
    else:
        far_point, far_normal = center + half_length * axis, axis.copy()
    # The far cortex truncates the bone solid; an oblique cap would break
    # the exact cylinder SDF, so its normal must be parallel to the axis.
    if abs(abs(float(np.dot(far_normal, axis))) - 1.0) > GEOM_TOL:
        raise ValidationError("far_cortex_plane.normal must be parallel to corridor.axis")
    far_normal = axis.copy()  # oriented medially: "beyond" means along +axis

    allowance = float(doc.get("wire_radius_allowance", DEFAULT_WIRE_RADIUS_ALLOWANCE))
    if allowance < 0.0:
        raise ValidationError("wire_radius_allowance must be >= 0")

    u_skin = float(np.dot(skin_point - center, axis))
    u_suff = float(np.dot(suff_point - center, axis))
    u_far = float(np.dot(far_point - center, axis))
    if not u_skin < -half_length:
        raise ValidationError("skin_plane must lie lateral of the corridor entry cap")
    if not (u_skin < u_suff < u_far):
        raise ValidationError(
            "sufficiency_plane must lie strictly between skin and far cortex"
        )
    if not (-half_length < u_far <= half_length + GEOM_TOL):
        raise ValidationError("far_cortex_plane must intersect the corridor")

    return AnatomyModel(
        corridor=CorridorSpec(
            center=as_tuple(center),
            axis=as_tuple(axis),
            half_length=half_length,
            semi_axis_long=semi_long,
            semi_axis_short=semi_short,
            major_dir=as_tuple(major),
        ),
        skin_plane=Plane(as_tuple(skin_point), as_tuple(skin_normal)),
        antero_cranial_dir=as_tuple(ac),
        postero_caudal_dir=as_tuple(pc),
        sufficiency_plane=Plane(as_tuple(suff_point), as_tuple(suff_normal)),
        far_cortex_plane=Plane(as_tuple(far_point), as_tuple(far_normal)),
        wire_radius_allowance=allowance,
    )


def default_anatomy() -> AnatomyModel:
    return load_anatomy({"format_version": FORMAT_VERSION})


# --- geometric queries -----------------------------------------------------------

def _local_frame(model: AnatomyModel) -> tuple[np.ndarray, np.ndarray, float, float]:
    """(origin, rows [major, minor, axis], slab_lo, slab_hi) of the bone solid."""
    c = model.corridor
    origin = vec(c.center)
    rows = np.vstack([vec(c.major_dir), vec(c.minor_dir), vec(c.axis)])
    u_far = float(np.dot(vec(model.far_cortex_plane.point) - origin, vec(c.axis)))
    return origin, rows, -c.half_length, u_far


def bone_signed_distance_many(
    model: AnatomyModel, points: np.ndarray, ignore_far_cap: bool = False
) -> np.ndarray:
    """Exact signed distance (mm, negative inside) for an (N, 3) array.

    The solid is the corridor's elliptic cylinder truncated by the entry
    cap and the far-cortex plane. With `ignore_far_cap` the cylinder is
    left open medially (used to tell a far-cortex breach from a side-wall
    exit).
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    origin, rows, lo, hi = _local_frame(model)
    local = (pts - origin) @ rows.T
    a, b, u = local[:, 0], local[:, 1], local[:, 2]
    radial = ellipse_signed_distance(
        a, b, model.corridor.semi_axis_long, model.corridor.semi_axis_short
    )
    if ignore_far_cap:
        axial = lo - u
    else:
        mid, halfw = 0.5 * (lo + hi), 0.5 * (hi - lo)
        axial = np.abs(u - mid) - halfw
    d = capped_cylinder_signed_distance(radial, axial)
    return d[0] if single else d


def bone_signed_distance(model: AnatomyModel, p) -> float:
    """Signed distance from one point to the bone surface (negative inside)."""
    return float(bone_signed_distance_many(model, vec(p)))


def bone_inside_eroded(model: AnatomyModel, points: np.ndarray, erosion: float) -> np.ndarray:
    """Mask of points with signed distance <= -erosion.

    Same predicate as thresholding bone_signed_distance_many, but the
    exact ellipse distance is only computed inside the narrow band the
    cheap gauge bounds cannot decide; bulk queries (wire sampling) are
    dominated by far-from-boundary points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    origin, rows, lo, hi = _local_frame(model)
    local = (pts - origin) @ rows.T
    a, b, u = local[:, 0], local[:, 1], local[:, 2]
    big, small = model.corridor.semi_axis_long, model.corridor.semi_axis_short
    mid, halfw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    axial = np.abs(u - mid) - halfw
    r_lower, r_upper = ellipse_signed_distance_bounds(a, b, big, small)
    d_lower = capped_cylinder_signed_distance(r_lower, axial)
    d_upper = capped_cylinder_signed_distance(r_upper, axial)
    inside = d_upper <= -erosion
    band = ~inside & (d_lower <= -erosion)
    if np.any(band):
        radial = ellipse_signed_distance(a[band], b[band], big, small)
        d = capped_cylinder_signed_distance(radial, axial[band])
        inside[band] = d <= -erosion
    return inside


def classify_exit_direction(model: AnatomyModel, p) -> ExitDirection:
    """Label an extra-osseous point by its side of the corridor center.

    Antero-cranial iff the projection on antero_cranial_dir is >= 0 (exact
    zero ties to antero-cranial). Points interior to the wire-allowance
    eroded corridor are not exit points.
    """
    if bone_signed_distance(model, p) <= -model.wire_radius_allowance:
        raise NotAnExitPoint(f"point {as_tuple(p)} is intra-osseous")
    return exit_side(model, p)


def exit_side(model: AnatomyModel, p) -> ExitDirection:
    """Side of the corridor center by antero-cranial projection sign.

    Plain rounded arithmetic (no FMA dot) so symmetric points land on an
    exact zero and take the documented antero-cranial tie-break.
    """
    r = vec(p) - vec(model.corridor.center)
    n = model.antero_cranial_dir
    proj = float(r[0]) * n[0] + float(r[1]) * n[1] + float(r[2]) * n[2]
    return ExitDirection.ANTERO_CRANIAL if proj >= 0.0 else ExitDirection.POSTERO_CAUDAL


def project_to_skin(model: AnatomyModel, p) -> Vec3:
    """Foot of the perpendicular from p onto the skin plane."""
    return as_tuple(model.skin_plane.project(p))
