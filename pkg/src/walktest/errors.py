"""Exception hierarchy shared by all modules.

Every error raised by the library derives from WalktestError so the CLI can
map domain failures to exit code 1 with a JSON diagnostic.
"""

from __future__ import annotations


class WalktestError(Exception):
    """Base class for all library errors."""

    kind = "error"

    def to_json(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class InvalidParameterError(WalktestError, ValueError):
    """A caller-supplied parameter is out of range or inconsistent."""

    kind = "invalid-parameter"


class DegenerateGraphError(WalktestError):
    """Graph violates a structural precondition (isolated vertex, empty, ...)."""

    kind = "degenerate-graph"


class NonMixingGraphError(WalktestError):
    """Walk on this graph has no unique limit (bipartite or disconnected)."""

    kind = "non-mixing-graph"


class SizeExceededError(WalktestError):
    """Input exceeds a hard size cap; carries partial progress where useful."""

    kind = "size-exceeded"

    def __init__(self, message: str, **progress):
        super().__init__(message)
        self.progress = dict(progress)

    def to_json(self) -> dict:
        doc = super().to_json()
        if self.progress:
            doc["progress"] = {k: v for k, v in self.progress.items()}
        return doc


class GenerationFailureError(WalktestError):
    """A randomized generator exhausted its retry budget."""

    kind = "generation-failure"


class NumericFailureError(WalktestError):
    """An iterative numeric routine failed to converge."""

    kind = "numeric-failure"


class InfeasibleError(WalktestError):
    """No parameter value satisfies the requested constraints."""

    kind = "infeasible"
