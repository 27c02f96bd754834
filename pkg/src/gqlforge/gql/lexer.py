"""Tokenizer for the MATCH-form graph query dialect."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import GqlSyntaxError

# Words with a fixed meaning somewhere in the dialect. Identifiers may still use
# them after '.' (property names) or as map keys.
KEYWORDS = frozenset(
    """
    MATCH WHERE RETURN ORDER BY LIMIT ASC DESC DISTINCT
    AND OR NOT XOR TRUE FALSE
    COUNT SUM AVG MAX MIN COLLECT
    GO FETCH LOOKUP YIELD WITH GROUP VERTEX EDGE OVER REVERSELY BIDIRECT
    """.split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<op><>|<=|>=|!=|==)
  | (?P<punct>[()\[\]{}:,.*<>=\-;])
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'", '"': '"'}


@dataclass(frozen=True)
class Token:
    kind: str  # word | number | string | op | eof
    text: str
    offset: int

    @property
    def upper(self) -> str:
        return self.text.upper() if self.kind == "word" else self.text

    def is_kw(self, *words: str) -> bool:
        return self.kind == "word" and self.text.upper() in words

    def is_punct(self, *symbols: str) -> bool:
        return self.kind == "op" and self.text in symbols


def unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def byte_offset(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


def tokenize(text: str, lenient: bool = False) -> list[Token]:
    """Split ``text`` into tokens, ending with an ``eof`` token.

    Punctuation and operators share kind ``op``. With ``lenient`` unknown
    characters are skipped instead of raising.
    """
    tokens: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if lenient:
                pos += 1
                continue
            if text[pos] in "'\"":
                raise GqlSyntaxError("unterminated string literal", byte_offset(text, pos))
            raise GqlSyntaxError(f"unexpected character {text[pos]!r}", byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "punct":
                kind = "op"
            tokens.append(Token(kind, value, pos))
        pos = m.end()
    tokens.append(Token("eof", "", n))
    return tokens
