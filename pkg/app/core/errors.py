# app/core/errors.py
"""
Exception hierarchy for the toolkit.

Two branches matter to callers: ``InputError`` covers anything wrong with a case
file or a requested mutation (the CLI exits with code 2), ``ComputationError``
covers numerical failures on otherwise valid input (exit code 1).

None of these derive from ``ValueError`` so that raising them inside a pydantic
validator propagates the typed error instead of being folded into a
``ValidationError``.
"""


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code: int = 1

    def __init__(self, message: str, *, context: str | None = None):
        self.message = message
        self.context = context
        super().__init__(f"{context}: {message}" if context else message)

    def to_dict(self) -> dict:
        payload = {"error": type(self).__name__, "message": self.message}
        if self.context:
            payload["context"] = self.context
        return payload


class InputError(ToolkitError):
    exit_code = 2


class CaseParseError(InputError):
    """Case file unreadable, malformed, or with mistyped fields."""


class CaseReferenceError(InputError):
    """A branch, machine or device refers to a bus that does not exist."""


class CaseInvariantError(InputError):
    """Structurally valid case that breaks a physical or topological invariant."""


class DuplicateIdError(InputError):
    pass


class UnknownBranchError(InputError):
    pass


class InvalidParameterError(InputError):
    """Bad argument to an analysis call (alpha <= 0, r out of range, ...)."""


class ComputationError(ToolkitError):
    exit_code = 1


class SingularNetworkError(ComputationError):
    """Eliminated block of a susceptance matrix is singular."""


class EigenSolverError(ComputationError):
    pass


class ClusteringError(ComputationError):
    pass


class InertiaComputationError(ComputationError):
    pass


class PartitionError(ComputationError):
    pass


class SimulationDivergedError(ComputationError):
    pass
