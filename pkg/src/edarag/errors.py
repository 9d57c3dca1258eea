"""Exception taxonomy shared across the toolkit.

Data-shaped failures derive from :class:`DataError`; failures of the external
model service derive from :class:`GatewayError`. The CLI maps the two families
to distinct exit codes.
"""


class EdaRagError(Exception):
    """Base class for all toolkit errors."""


class DataError(EdaRagError):
    """Invalid or inconsistent data supplied by the caller or read from disk."""


# --- corpus ---------------------------------------------------------------

class EmptyDocument(DataError):
    """Raised when a document normalizes to empty text."""


class MalformedRecord(DataError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"malformed record at line {line_no}" + (f": {reason}" if reason else ""))


class UnsupportedSchema(DataError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"unsupported schema version {found!r} (expected {expected!r})")


class DuplicateChunkId(DataError):
    def __init__(self, chunk_id: str):
        self.chunk_id = chunk_id
        super().__init__(f"duplicate chunk id {chunk_id!r}")


# --- retrieval ------------------------------------------------------------

class EmptyCorpus(DataError):
    """Raised when an index is built over zero chunks."""


class DimensionMismatch(DataError):
    """Raised when an embedding vector does not match the index dimension."""


class RerankerFailure(EdaRagError):
    """External reranker raised or returned unusable scores."""


# --- model gateway ---------------------------------------------------------

class GatewayError(EdaRagError):
    """Base class for model-service failures."""


class GatewayFailure(GatewayError):
    """A gateway call failed after its retry budget.

    ``kind`` is the classification of the last underlying failure
    (``timeout`` or ``protocol``), or ``exhausted_retries`` when the cause
    was not classifiable. ``attempts`` counts all attempts made.
    """

    def __init__(self, kind: str, attempts: int = 1, detail: str = ""):
        self.kind = kind
        self.attempts = attempts
        super().__init__(f"gateway failure ({kind}) after {attempts} attempt(s)" + (f": {detail}" if detail else ""))


class ReplayMiss(GatewayError):
    """A replay-mode request had no matching transcript entry."""


# --- scenario construction --------------------------------------------------

class EmptyRetrieval(DataError):
    """No chunk scored positively for the query."""


class InsufficientIrrelevantPool(DataError):
    def __init__(self, available: int, requested: int):
        self.available = available
        self.requested = requested
        super().__init__(f"irrelevant pool has {available} chunks, {requested} requested")


class EmptyRelevantSet(DataError):
    """Subsampling was asked for a partial view of an empty context set."""


class NoSourcesSelected(DataError):
    """A pretraining mix was requested with no positive origin weight."""


# --- augmentation -----------------------------------------------------------

class NoEligibleTerm(DataError):
    """No sentence in the chunk contains a maskable term."""


class InsufficientDistractors(DataError):
    def __init__(self, available: int):
        self.available = available
        super().__init__(f"only {available} distractor candidates available, 3 required")


class EmptyRewrite(DataError):
    """The backend returned an empty rewrite."""


# --- evaluation -------------------------------------------------------------

class DuplicateItemId(DataError):
    def __init__(self, item_id: str):
        self.item_id = item_id
        super().__init__(f"duplicate benchmark item id {item_id!r}")


class ConditionSetMismatch(DataError):
    """Two conditions of a delta metric cover different item sets."""


class UnparseableVerdict(GatewayError):
    """The judge model produced no CORRECT/INCORRECT token after a retry."""
