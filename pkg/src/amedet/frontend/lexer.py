"""Tokenizer for the Solidity-like function subset."""

from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset(
    {
        "function", "returns", "return", "if", "else", "for", "while", "do",
        "break", "continue", "require", "assert", "revert", "throw", "emit",
        "contract", "library", "interface", "mapping", "modifier", "event",
        "struct", "enum", "using", "pragma", "import", "constructor",
        "public", "private", "internal", "external", "payable", "view",
        "pure", "constant", "memory", "storage", "calldata", "true", "false",
        "delete", "new", "is", "assembly", "unchecked", "fallback", "receive",
        "override", "virtual", "immutable", "indexed", "anonymous", "try",
        "catch", "var",
    }
)

# Longest operators first so the alternation prefers them.
_PUNCT = sorted(
    [
        ">>>=", "<<=", ">>=", "**", "++", "--", "+=", "-=", "*=", "/=", "%=",
        "|=", "&=", "^=", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "=>",
        "(", ")", "{", "}", "[", "]", ";", ",", "+", "-", "*", "/", "%", "<",
        ">", "=", "!", "~", "&", "|", "^", "?", ":",
    ],
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    "|".join(
        [
            r"(?P<ws>[ \t\r\f\v]+)",
            r"(?P<nl>\n)",
            r"(?P<line_comment>//[^\n]*)",
            r"(?P<block_comment>/\*.*?\*/)",
            r"(?P<open_comment>/\*)",
            r"(?P<number>0[xX][0-9a-fA-F_]+|\d[\d_]*(?:\.\d+)?(?:[eE][+-]?\d+)?)",
            r"(?P<string>\"(?:[^\"\\\n]|\\.)*\"|'(?:[^'\\\n]|\\.)*')",
            r"(?P<open_string>[\"'])",
            r"(?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)",
            r"(?P<dot>\.)",
            "(?P<punct>" + "|".join(re.escape(p) for p in _PUNCT) + ")",
        ]
    ),
    re.DOTALL,
)


class LexError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at {line}:{column}")
        self.line = line
        self.column = column


class UnterminatedString(LexError):
    pass


class IllegalCharacter(LexError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # identifier | keyword | literal | punctuation | member-dot
    value: str
    line: int
    column: int

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.value!r}, {self.line}:{self.column})"


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, dropping whitespace and comments.

    Lines and columns are 1-based.
    """
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        column = pos - line_start + 1
        if m is None:
            raise IllegalCharacter(f"illegal character {source[pos]!r}", line, column)
        group = m.lastgroup
        text = m.group()
        if group == "open_string":
            raise UnterminatedString("unterminated string literal", line, column)
        if group == "open_comment":
            raise LexError("unterminated block comment", line, column)
        if group == "ident":
            kind = "keyword" if text in KEYWORDS else "identifier"
            tokens.append(Token(kind, text, line, column))
        elif group in ("number", "string"):
            tokens.append(Token("literal", text, line, column))
        elif group == "dot":
            tokens.append(Token("member-dot", text, line, column))
        elif group == "punct":
            tokens.append(Token("punctuation", text, line, column))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    return tokens
