"""Exception hierarchy shared by all simulator modules."""


class SimulatorError(Exception):
    """Base class for every error raised by this package."""


# --- configuration / validation -------------------------------------------

class MissingField(SimulatorError):
    """A required field is absent from a configuration document."""


class ValidationError(SimulatorError):
    """A field value violates a model invariant."""


class NonUnitVector(ValidationError):
    """A vector that must have unit length does not."""


class InvalidAngle(ValidationError):
    """A view tilt angle outside the open interval (0, 90) degrees."""


# --- geometry / projection --------------------------------------------------

class BehindSource(SimulatorError):
    """A 3D point lies behind (or at) the X-ray source plane."""


class NotAnExitPoint(SimulatorError):
    """Exit-direction classification requested for an intra-osseous point."""


# --- session state machine ---------------------------------------------------

class IllegalInPhase(SimulatorError):
    """Command not permitted in the session's current phase."""


class CursorOutOfRange(SimulatorError):
    """PREVIOUS at the oldest image or FOLLOWING at the newest."""


class InvalidCommand(SimulatorError):
    """Malformed command payload (non-unit direction, non-positive advance)."""


class ScriptError(SimulatorError):
    """A scripted command failed during replay.

    Carries the zero-based index of the offending command and the
    underlying error.
    """

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"command {index}: {cause}")
        self.index = index
        self.cause = cause


class NotConfirmed(SimulatorError):
    """Metrics requested for a session that was never confirmed."""


# --- cohort analysis ----------------------------------------------------------

class EmptyCategory(SimulatorError):
    """Questionnaire has no items in a scored category."""


class DegenerateTable(SimulatorError):
    """Contingency table with a zero row or column marginal."""


class MissingMetrics(SimulatorError):
    """A grouped operator has no session metrics."""


# --- persistence ---------------------------------------------------------------

class NotFound(SimulatorError):
    """No stored document under the requested id."""


class VersionMismatch(SimulatorError):
    """Stored document has an unsupported format_version."""


class CorruptDocument(SimulatorError):
    """Stored document cannot be parsed or fails structural checks."""
