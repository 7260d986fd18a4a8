"""Exception hierarchy shared across the engine."""


class OkraError(Exception):
    """Base class for all engine errors."""


class CorpusError(OkraError):
    """Corpus file unreadable, malformed, or internally inconsistent."""


class MalformedRecordError(CorpusError):
    def __init__(self, line_number: int, reason: str) -> None:
        super().__init__(f"malformed record at line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class DuplicateDocIdError(CorpusError):
    def __init__(self, doc_id: str) -> None:
        super().__init__(f"duplicate doc_id: {doc_id!r}")
        self.doc_id = doc_id


class RetrievalError(OkraError):
    """Retrieval failure, typically a failing embedding provider."""


class AnalysisError(OkraError):
    """The analyzer backend failed at the transport level."""


class AnalysisParseError(OkraError):
    """The analyzer output could not be parsed into a full verdict."""


class GatewayError(OkraError):
    """Base class for chat-gateway failures."""


class GatewayStatusError(GatewayError):
    """The backend returned a non-retryable HTTP status."""

    def __init__(self, status: int, detail: str = "") -> None:
        super().__init__(f"gateway returned status {status}: {detail}")
        self.status = status


class GatewayRetryExhaustedError(GatewayError):
    """Transient failures persisted through all retries."""


class GatewayResponseShapeError(GatewayError):
    """The backend response did not match the expected wire shape."""


class BudgetExceededError(OkraError):
    """The weighted-token budget was exhausted mid-query."""

    def __init__(self, spent: int, budget: int, partial_trace: list) -> None:
        super().__init__(f"weighted token budget exceeded: {spent} > {budget}")
        self.spent = spent
        self.budget = budget
        self.partial_trace = partial_trace
