"""Source frontend: tokenizer, parser, symbol resolution."""

from .ir import FunctionIR, flatten
from .lexer import IllegalCharacter, LexError, Token, UnterminatedString, tokenize
from .parser import (
    ContractIndex,
    MalformedHeader,
    ParseError,
    SourceUnit,
    UnbalancedBraces,
    parse_function,
    parse_source,
)
from .printer import format_function
from .serialize import ir_to_dict
from .symbols import SymbolTable, resolve_symbols

__all__ = [
    "ContractIndex",
    "FunctionIR",
    "IllegalCharacter",
    "LexError",
    "MalformedHeader",
    "ParseError",
    "SourceUnit",
    "SymbolTable",
    "Token",
    "UnbalancedBraces",
    "UnterminatedString",
    "flatten",
    "format_function",
    "ir_to_dict",
    "parse_function",
    "parse_source",
    "resolve_symbols",
    "tokenize",
]
