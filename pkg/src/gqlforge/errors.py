"""Exception hierarchy shared by every gqlforge module."""

from __future__ import annotations


class GqlForgeError(Exception):
    """Base class for all errors raised by gqlforge."""


# --- file loading -----------------------------------------------------------


class ParseError(GqlForgeError):
    """A schema, graph or dataset file is not well-formed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(GqlForgeError):
    pass


class ConformanceError(GqlForgeError):
    """A node or edge violates its declared type."""

    def __init__(self, item_id: str, rule: str):
        self.item_id = item_id
        self.rule = rule
        super().__init__(f"{item_id}: {rule}")


class EmptyTypeError(GqlForgeError):
    pass


class InvariantError(GqlForgeError):
    def __init__(self, dialogue_id: str, message: str):
        self.dialogue_id = dialogue_id
        super().__init__(f"dialogue {dialogue_id!r}: {message}")


# --- query engine -----------------------------------------------------------


class QueryError(GqlForgeError):
    """Anything that makes a query unusable: syntax, binding, semantics, types."""


class GqlSyntaxError(QueryError):
    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.offset = offset
        self.expected = expected
        text = f"syntax error at offset {offset}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class UnsupportedStatement(GqlSyntaxError):
    pass


class UnboundVariableError(QueryError):
    pass


class SemanticError(QueryError):
    pass


class GqlTypeError(QueryError, TypeError):
    pass


# --- generators -------------------------------------------------------------


class MissingSlotError(GqlForgeError):
    def __init__(self, slot: str):
        self.slot = slot
        super().__init__(slot)


class UnrenderableError(GqlForgeError):
    pass


class TransportError(GqlForgeError):
    pass


class MalformedResponseError(GqlForgeError):
    pass


# --- forge ------------------------------------------------------------------


class UnboundPlaceholder(GqlForgeError):
    def __init__(self, token: str, detail: str = ""):
        self.token = token
        super().__init__(f"{token}: {detail}" if detail else token)


class NoApplicablePattern(GqlForgeError):
    pass


class DialogueAbandoned(GqlForgeError):
    def __init__(self, round_number: int, reasons: list[str]):
        self.round_number = round_number
        self.reasons = reasons
        super().__init__(f"round {round_number} exhausted its retry budget: {reasons}")


# --- evaluation / inference -------------------------------------------------


class GoldParseError(GqlForgeError):
    pass


class GoldExecutionError(GqlForgeError):
    pass


class AlignmentError(GqlForgeError):
    pass


class ReformulationError(GqlForgeError):
    pass


class InferenceError(GqlForgeError):
    pass
