"""Interactive simulator for percutaneous iliosacral guide-wire insertion
under simulated fluoroscopy, with trainee cohort analysis."""

from .anatomy import (
    AnatomyModel,
    CorridorSpec,
    ExitDirection,
    bone_signed_distance,
    classify_exit_direction,
    default_anatomy,
    load_anatomy,
    project_to_skin,
)
from .assess import (
    AttemptRecord,
    SessionMetrics,
    TrajectoryAssessment,
    WireLabel,
    assess_final,
    classify_wire,
    iatrogenic_level,
    lesson_for,
    session_metrics,
)
from .cohort import (
    ExperienceBucket,
    Group,
    OperatorProfile,
    QuestionnaireResponse,
    Skill,
    assign_groups,
    cohort_report,
    score_questionnaire,
    skill_from_experience,
)
from .fluoro import (
    Radiograph,
    ViewName,
    ViewSpec,
    project_point,
    render_radiograph,
    standard_views,
)
from .session import (
    Command,
    Phase,
    SessionEvent,
    SessionState,
    WirePose,
    apply_command,
    initial_state,
    replay,
    visible_images,
)
from .stats import ChiSquareResult, chi_square, chi_square_sf

__version__ = "0.1.0"
