"""Exception hierarchy shared across the package."""


class RagRouteError(Exception):
    """Base class for all package errors."""


# --- rule engine ---

class ParseError(RagRouteError):
    def __init__(self, reason, line=None):
        self.reason = reason
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{reason}{where}")


class DuplicateRuleId(ParseError):
    pass


class InvalidPriority(ParseError):
    pass


class EmptyQuery(RagRouteError):
    pass


class JudgeUnavailable(RagRouteError):
    pass


class JudgeError(RagRouteError):
    pass


# --- meta-cache ---

class ProviderError(RagRouteError):
    pass


class DimensionMismatch(RagRouteError):
    pass


class NormalizationError(RagRouteError):
    pass


class SnapshotError(RagRouteError):
    pass


# --- router / evolution ---

class EmptyBatch(RagRouteError):
    pass


class ExpertClientError(RagRouteError):
    pass


class InvalidProposedRules(RagRouteError):
    pass


class DegenerateReport(RagRouteError):
    pass


# --- retrieval ---

class DuplicateDocId(RagRouteError):
    pass


class HeaderlessTable(RagRouteError):
    pass


class UnsafeStatement(RagRouteError):
    pass


class UnknownColumn(RagRouteError):
    pass


class ExecutionError(RagRouteError):
    pass


class NoTableFound(RagRouteError):
    pass


# --- qa pipeline ---

class TemplateMissing(RagRouteError):
    pass


class ClientError(RagRouteError):
    pass


class MissingFixture(RagRouteError):
    pass


# --- harness ---

class SchemaError(RagRouteError):
    pass


class ConfigError(RagRouteError):
    pass


class MissingAnswer(RagRouteError):
    def __init__(self, query_id, path):
        self.query_id = query_id
        self.path = path
        super().__init__(f"no answer for query {query_id!r} on path {path}")
