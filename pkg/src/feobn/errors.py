"""Exception types shared across the toolkit.

Every error carries enough context to name the offending element, so CLI
and service layers can surface structured diagnostics without re-parsing
message strings.
"""


class FeobnError(Exception):
    """Base class for all toolkit errors."""

    code = "error"

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self)}


# --- network construction -------------------------------------------------

class DuplicateName(FeobnError):
    code = "duplicate-name"


class DanglingEdge(FeobnError):
    code = "dangling-edge"


class CycleDetected(FeobnError):
    code = "cycle-detected"


class MalformedCpt(FeobnError):
    code = "malformed-cpt"


# --- roles / scenarios ----------------------------------------------------

class RoleOverlap(FeobnError):
    code = "role-overlap"


class ControlIsSensitive(FeobnError):
    code = "control-is-sensitive"


class TargetMissing(FeobnError):
    code = "target-missing"


class UnknownFreeEntry(FeobnError):
    code = "unknown-free-entry"


# --- inference --------------------------------------------------------------

class IncompleteAssignment(FeobnError):
    code = "incomplete-assignment"


class ZeroEvidenceProbability(FeobnError):
    code = "zero-evidence-probability"


# --- learning ---------------------------------------------------------------

class MissingColumn(FeobnError):
    code = "missing-column"


class UnparseableValue(FeobnError):
    code = "unparseable-value"


class NonNumericColumn(FeobnError):
    code = "non-numeric-column"


class StateMismatch(FeobnError):
    code = "state-mismatch"


class EmptyDataset(FeobnError):
    code = "empty-dataset"


# --- solver -----------------------------------------------------------------

class OverfullRow(FeobnError):
    code = "overfull-row"


class InfeasibleConstraints(FeobnError):
    code = "infeasible-constraints"

    def __init__(self, message, conflicts=None):
        super().__init__(message)
        self.conflicts = list(conflicts or [])

    def payload(self) -> dict:
        out = super().payload()
        out["conflicts"] = self.conflicts
        return out


class ValidationFailed(FeobnError):
    code = "validation-failed"
