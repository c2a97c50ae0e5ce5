"""Exception hierarchy shared by all amdd modules."""

from __future__ import annotations


class AmddError(Exception):
    """Base class for every error raised by this package."""


class ParseError(AmddError):
    """A syntax error tied to a position in some input text.

    ``line`` and ``column`` are 1-based and point inside the offending token.
    """

    def __init__(self, message: str, line: int, column: int, origin: str = "<inline>"):
        self.message = message
        self.line = line
        self.column = column
        self.origin = origin
        super().__init__(f"{origin}:{line}:{column}: {message}")


class ModelError(AmddError):
    """A model is structurally invalid for the requested operation."""


class BindingError(AmddError):
    """Constraints could not be resolved against a model.

    ``issues`` holds ``(constraint_name, message)`` pairs.
    """

    def __init__(self, issues: list[tuple[str, str]]):
        self.issues = list(issues)
        lines = "; ".join(f"{name}: {msg}" for name, msg in self.issues)
        super().__init__(f"{len(self.issues)} binding error(s): {lines}")


class OntologyError(AmddError):
    """Invalid ontology content (duplicate names, dangling references)."""


class GenerationError(AmddError):
    """Prompt assembly or code generation failed."""


class TransportError(GenerationError):
    """The LLM endpoint could not be reached within the retry budget."""


class ExtractionError(GenerationError):
    """An LLM response contained no usable code fences.

    The raw response text is kept on ``raw`` so callers can persist it.
    """

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)


class GraphError(AmddError):
    """Invalid control-flow graph input (empty graph, dangling edges)."""
