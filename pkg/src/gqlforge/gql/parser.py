"""Recursive-descent parser producing :class:`QueryAst`."""

from __future__ import annotations

from ..errors import GqlSyntaxError, SemanticError, UnboundVariableError, UnsupportedStatement
from .ast import (
    AGGREGATES,
    Aggregate,
    BoolOp,
    Comparison,
    EdgePattern,
    Expr,
    Literal,
    NodePattern,
    Not,
    PathPattern,
    Placeholder,
    Property,
    QueryAst,
    ReturnItem,
    SortKey,
    Variable,
    referenced_vars,
    walk,
)
from .lexer import KEYWORDS, Token, byte_offset, tokenize, unescape

UNSUPPORTED = ("GO", "FETCH", "LOOKUP", "YIELD", "WITH", "GROUP")
_OP_ALIASES = {"!=": "<>", "==": "="}
_CMP_TOKENS = ("=", "<>", "<", "<=", ">", ">=", "!=", "==")


def parse(text: str) -> QueryAst:
    """Parse a query string; keywords are case-insensitive."""
    ast = _Parser(text).query()
    check_bindings(ast)
    return ast


def check_bindings(ast: QueryAst) -> None:
    node_vars = {n.var for n in ast.node_patterns() if n.var}
    edge_list = [e.var for e in ast.edge_patterns() if e.var]
    edge_vars = set(edge_list)
    if len(edge_list) != len(edge_vars):
        raise SemanticError("an edge variable may be bound only once")
    clash = node_vars & edge_vars
    if clash:
        raise SemanticError(f"variable {sorted(clash)[0]!r} bound to both a node and an edge")
    bound = node_vars | edge_vars
    for expr in ast.expressions():
        for name in referenced_vars(expr):
            if name not in bound:
                raise UnboundVariableError(f"variable {name!r} is not bound in MATCH")
    if ast.where is not None and any(isinstance(s, Aggregate) for s in walk(ast.where)):
        raise SemanticError("aggregate functions are not allowed in WHERE")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, ahead: int = 1) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, expected: str | None = None, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return GqlSyntaxError(f"{message}, found {found}", byte_offset(self.text, tok.offset), expected)

    def expect_punct(self, symbol: str, message: str) -> Token:
        if not self.tok.is_punct(symbol):
            raise self.error(message, f"'{symbol}'")
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        if not self.tok.is_kw(word):
            raise self.error(f"expected {word}", word)
        return self.advance()

    def identifier(self, what: str) -> str:
        tok = self.tok
        if tok.kind != "word" or tok.text.upper() in KEYWORDS:
            raise self.error(f"expected {what}", what)
        return self.advance().text

    def name(self, what: str) -> str:
        # Labels, edge types and property names may reuse keywords.
        if self.tok.kind != "word":
            raise self.error(f"expected {what}", what)
        return self.advance().text

    def check_unsupported(self):
        if self.tok.is_kw(*UNSUPPORTED):
            word = self.tok.text.upper()
            raise UnsupportedStatement(
                f"{word} statements are recognised but not executable",
                byte_offset(self.text, self.tok.offset),
            )

    # -- grammar -------------------------------------------------------------

    def query(self) -> QueryAst:
        if self.tok.kind == "eof":
            raise self.error("empty query", "MATCH")
        self.check_unsupported()
        paths: list[PathPattern] = []
        self.expect_kw("MATCH")
        paths.append(self.path())
        while True:
            if self.tok.is_punct(","):
                self.advance()
                paths.append(self.path())
            elif self.tok.is_kw("MATCH"):
                self.advance()
                paths.append(self.path())
            else:
                break
        where = None
        if self.tok.is_kw("WHERE"):
            self.advance()
            where = self.expression()
        self.check_unsupported()
        if not self.tok.is_kw("RETURN"):
            raise self.error("expected RETURN", "RETURN")
        self.advance()
        distinct = False
        if self.tok.is_kw("DISTINCT"):
            self.advance()
            distinct = True
        returns = [ReturnItem(self.expression())]
        while self.tok.is_punct(","):
            self.advance()
            returns.append(ReturnItem(self.expression()))
        self.check_unsupported()
        order_by: list[SortKey] = []
        if self.tok.is_kw("ORDER"):
            self.advance()
            self.expect_kw("BY")
            order_by.append(self.sort_key())
            while self.tok.is_punct(","):
                self.advance()
                order_by.append(self.sort_key())
        limit = None
        if self.tok.is_kw("LIMIT"):
            self.advance()
            tok = self.tok
            if tok.kind != "number" or not tok.text.isdigit():
                raise self.error("LIMIT takes a non-negative integer", "integer")
            self.advance()
            limit = int(tok.text)
        if self.tok.is_punct(";"):
            self.advance()
        self.check_unsupported()
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input", "end of query")
        return QueryAst(tuple(paths), tuple(returns), where, distinct, tuple(order_by), limit)

    def sort_key(self) -> SortKey:
        expr = self.expression()
        descending = False
        if self.tok.is_kw("DESC"):
            self.advance()
            descending = True
        elif self.tok.is_kw("ASC"):
            self.advance()
        return SortKey(expr, descending)

    def path(self) -> PathPattern:
        nodes = [self.node()]
        edges = []
        while self.tok.is_punct("-") or (self.tok.is_punct("<") and self.peek().is_punct("-")):
            edges.append(self.edge())
            nodes.append(self.node())
        return PathPattern(tuple(nodes), tuple(edges))

    def node(self) -> NodePattern:
        self.expect_punct("(", "expected node pattern")
        var = label = None
        if self.tok.kind == "word":
            var = self.identifier("variable")
        if self.tok.is_punct(":"):
            self.advance()
            label = self.name("node label")
        props: tuple = ()
        if self.tok.is_punct("{"):
            props = self.property_map()
        self.expect_punct(")", "unclosed node pattern")
        return NodePattern(var, label, props)

    def property_map(self) -> tuple:
        self.expect_punct("{", "expected property map")
        entries: dict[str, object] = {}
        if not self.tok.is_punct("}"):
            while True:
                key_tok = self.tok
                key = self.name("property name")
                self.expect_punct(":", "expected ':' in property map")
                if key in entries:
                    raise self.error(f"duplicate key {key!r} in property map", tok=key_tok)
                entries[key] = self.map_value()
                if self.tok.is_punct(","):
                    self.advance()
                    continue
                break
        self.expect_punct("}", "unclosed property map")
        return tuple(entries.items())

    def map_value(self):
        value = self.atom()
        if not isinstance(value, (Literal, Placeholder)):
            raise self.error("property map values must be literals", "literal")
        return value

    def edge(self) -> EdgePattern:
        if self.tok.is_punct("<"):
            self.advance()
            self.expect_punct("-", "expected '<-'")
            direction = "left"
        else:
            self.expect_punct("-", "expected edge pattern")
            direction = "right"
        self.expect_punct("[", "expected '[' opening an edge pattern")
        var = etype = None
        if self.tok.kind == "word":
            var = self.identifier("variable")
        if self.tok.is_punct(":"):
            self.advance()
            etype = self.name("edge type")
        self.expect_punct("]", "unclosed edge pattern")
        self.expect_punct("-", "expected '-' after edge pattern")
        if direction == "right":
            self.expect_punct(">", "expected '->' (undirected edges are not supported)")
        elif self.tok.is_punct(">"):
            raise self.error("an edge cannot point both ways")
        return EdgePattern(var, etype, direction)

    # -- expressions: OR < XOR < AND < NOT < comparison < atom ----------------

    def expression(self) -> Expr:
        left = self.xor_expr()
        while self.tok.is_kw("OR"):
            self.advance()
            left = BoolOp("OR", left, self.xor_expr())
        return left

    def xor_expr(self) -> Expr:
        left = self.and_expr()
        while self.tok.is_kw("XOR"):
            self.advance()
            left = BoolOp("XOR", left, self.and_expr())
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.tok.is_kw("AND"):
            self.advance()
            left = BoolOp("AND", left, self.not_expr())
        return left

    def not_expr(self) -> Expr:
        if self.tok.is_kw("NOT"):
            self.advance()
            return Not(self.not_expr())
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.atom()
        if self.tok.kind == "op" and self.tok.text in _CMP_TOKENS:
            op = self.advance().text
            op = _OP_ALIASES.get(op, op)
            right = self.atom()
            if self.tok.kind == "op" and self.tok.text in _CMP_TOKENS:
                raise self.error("comparisons cannot be chained")
            return Comparison(op, left, right)
        return left

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "string":
            self.advance()
            return Literal(unescape(tok.text[1:-1]))
        if tok.kind == "number":
            self.advance()
            return _number(tok.text)
        if tok.is_punct("-") and self.peek().kind == "number":
            self.advance()
            lit = _number(self.advance().text)
            return Literal(-lit.value, lit.kind)
        if tok.is_punct("["):
            return self.placeholder()
        if tok.is_punct("("):
            self.advance()
            inner = self.expression()
            self.expect_punct(")", "unclosed parenthesis")
            return inner
        if tok.is_kw("TRUE", "FALSE"):
            self.advance()
            return Literal(tok.text.upper() == "TRUE")
        if tok.kind == "word" and tok.text.upper() in AGGREGATES and self.peek().is_punct("("):
            return self.aggregate()
        if tok.kind == "word":
            var = self.identifier("expression")
            if self.tok.is_punct("."):
                self.advance()
                return Property(var, self.name("property name"))
            return Variable(var)
        raise self.error("expected an expression", "expression")

    def placeholder(self) -> Placeholder:
        self.expect_punct("[", "expected placeholder")
        tok = self.tok
        if tok.kind != "word" or len(tok.text) != 1:
            raise self.error("expected placeholder letter", "placeholder")
        self.advance()
        self.expect_punct("]", "unclosed placeholder")
        return Placeholder(f"[{tok.text.lower()}]")

    def aggregate(self) -> Aggregate:
        func = self.advance().text.upper()
        self.expect_punct("(", "expected '('")
        distinct = False
        if self.tok.is_kw("DISTINCT"):
            self.advance()
            distinct = True
        if self.tok.is_punct("*"):
            if func != "COUNT" or distinct:
                raise self.error("'*' is only valid in COUNT(*)")
            self.advance()
            arg = None
        else:
            arg = self.expression()
            if any(isinstance(s, Aggregate) for s in walk(arg)):
                raise self.error("aggregate functions cannot be nested")
        self.expect_punct(")", "unclosed aggregate call")
        return Aggregate(func, arg, distinct)


def _number(text: str) -> Literal:
    if any(c in text for c in ".eE"):
        return Literal(float(text))
    return Literal(int(text))
