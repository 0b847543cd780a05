"""Exception types shared across the toolkit."""


class FactDialError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(FactDialError):
    pass


class MalformedRecord(CorpusError):
    """A corpus/snapshot line violates the documented schema."""

    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"malformed record at line {line_no}: {reason}")


class DuplicateId(CorpusError):
    def __init__(self, dialogue_id: str):
        self.dialogue_id = dialogue_id
        super().__init__(f"duplicate dialogue id: {dialogue_id}")


class GatewayError(FactDialError):
    pass


class GatewayTimeout(GatewayError):
    pass


class HttpStatusError(GatewayError):
    """Non-success HTTP status, raised after retries are exhausted."""

    def __init__(self, code: int, detail: str = ""):
        self.code = code
        super().__init__(f"HTTP {code}: {detail}" if detail else f"HTTP {code}")


class MalformedResponse(GatewayError):
    """Backend replied with a body that does not match the wire schema."""


class Unsupported(GatewayError):
    """Backend lacks the requested capability (e.g. token logprobs)."""


class MissingPlaceholder(FactDialError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unfilled placeholder: {{{name}}}")


class EmptyPool(FactDialError):
    """A scorer was handed an empty candidate pool."""


class ScorerBackend(FactDialError):
    """Gateway failure surfaced by a scorer."""


class EmptyGraph(FactDialError):
    pass


class TooLarge(FactDialError):
    """Exhaustive search refused: instance exceeds the exactness bound."""


class EmptyVerdicts(FactDialError):
    pass


class NoDefinedScores(FactDialError):
    """Every response in the batch had an undefined fact score."""


class FatalConfig(FactDialError):
    """Unusable configuration detected at startup (bad path, dead gateway)."""
