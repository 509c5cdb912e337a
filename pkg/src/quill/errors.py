"""Exception hierarchy for the quill pipeline.

Every domain failure raises a QuillError subclass. The CLI maps QuillError
to exit code 1 with a single machine-parseable diagnostic line; anything
else is a bug and escapes as a traceback.
"""

from __future__ import annotations


class QuillError(Exception):
    """Base class for all expected pipeline failures."""

    code = "error"

    def detail(self) -> str:
        return str(self)


class JavaParseError(QuillError):
    """Syntax failure while parsing Java source; carries line/col."""

    code = "parse-error"

    def __init__(self, message: str, line: int, col: int, path: str | None = None):
        super().__init__(f"{path or '<source>'}:{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.path = path


class UnsupportedConstruct(QuillError):
    """Source uses a construct outside the pinned grammar subset."""

    code = "unsupported-construct"


class CapExceeded(QuillError):
    """A graph exceeds the node cap after pruning."""

    code = "cap-exceeded"


class ShapeMismatch(QuillError):
    """Tensor operands have incompatible shapes."""

    code = "shape-mismatch"


class NonFiniteValue(QuillError):
    """A forward op produced NaN or Inf."""

    code = "non-finite-value"


class NonFiniteGradient(QuillError):
    """A backward op produced NaN or Inf."""

    code = "non-finite-gradient"


class EmptySplit(QuillError):
    """A corpus split has no labeled nodes to train or evaluate on."""

    code = "empty-split"


class MissingBaseline(QuillError):
    """An ablation run has no baseline measurement to compare against."""

    code = "missing-baseline"


class DegenerateFeatures(QuillError):
    """Clustering input collapses to identical feature vectors."""

    code = "degenerate-features"


class MissingModel(QuillError):
    """Prediction was asked to run without a usable checkpoint."""

    code = "missing-model"


class CheckpointMismatch(QuillError):
    """Checkpoint feature layout or prune digest disagrees with the graphs."""

    code = "checkpoint-mismatch"


class NonTermination(QuillError):
    """Post-processing failed to reach a fixpoint within the sweep budget."""

    code = "non-termination"


class StaleAnchor(QuillError):
    """A decided signature no longer resolves in the current sources."""

    code = "stale-anchor"


class IllegalPosition(QuillError):
    """An edit targets a position where the annotation cannot legally sit."""

    code = "illegal-position"


class HashMismatch(QuillError):
    """A file changed between planning and applying edits."""

    code = "hash-mismatch"


class CheckerFailed(QuillError):
    """The external checker exited nonzero without parseable output."""

    code = "checker-failed"


class MissingChecker(QuillError):
    """No checker command is configured or the binary is absent."""

    code = "missing-checker"


class SignatureMismatch(QuillError):
    """Predicted and truth signatures use incomparable canonical forms."""

    code = "signature-mismatch"


class BadArtifact(QuillError):
    """An artifact file is malformed or has an unknown format version."""

    code = "bad-artifact"
