"""Recursive-descent parser for the supported function subset.

Statements the parser does not understand become :class:`Opaque` nodes, so
a real-world file parses partially instead of failing as a whole. Only a
broken header or unbalanced braces abort a function, and even then only
that one function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ir import (
    CALL_VALUE,
    PLAIN,
    SELF_CALL,
    TRANSFER_LIKE,
    Assign,
    Assignment,
    Binary,
    Call,
    CallExpr,
    Expr,
    FunctionIR,
    If,
    Index,
    Literal,
    Loop,
    Member,
    Name,
    Opaque,
    Require,
    Return,
    Revert,
    Ternary,
    Throw,
    Tuple,
    Unary,
    callee_path,
    flatten,
)
from .lexer import Token, tokenize


class ParseError(ValueError):
    def __init__(self, message: str, token: Optional[Token] = None):
        where = f" at {token.line}:{token.column}" if token is not None else " at end of input"
        super().__init__(message + where)
        self.token = token


class UnbalancedBraces(ParseError):
    pass


class MalformedHeader(ParseError):
    pass


class _Backtrack(Exception):
    """Internal: the current construct does not match; rewind."""


ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=", ">>>="}
BINARY_PRECEDENCE = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]
ETHER_UNITS = {
    "wei", "gwei", "szabo", "finney", "ether",
    "seconds", "minutes", "hours", "days", "weeks", "years",
}
DATA_LOCATIONS = {"memory", "storage", "calldata"}
VISIBILITY = {"public", "private", "internal", "external", "constant", "immutable", "override"}


def classify_call(path: str, function_name: str, transfer_like=frozenset()) -> str:
    """Call kind from the callee path and the enclosing function name."""
    if path == "call.value" or path.endswith(".call.value"):
        return CALL_VALUE
    bare = path[5:] if path.startswith("this.") else path
    if bare == function_name:
        return SELF_CALL
    if "." not in bare and bare in transfer_like:
        return TRANSFER_LIKE
    return PLAIN


@dataclass
class ContractIndex:
    """Contract-level context shared by all functions of one contract."""

    name: Optional[str] = None
    state_vars: dict = field(default_factory=dict)  # name -> declared type text
    functions: list = field(default_factory=list)
    transfer_like: frozenset = frozenset()


@dataclass
class FunctionError:
    name: str
    contract: Optional[str]
    error: str
    line: int


@dataclass
class SourceUnit:
    functions: list = field(default_factory=list)  # FunctionIR, file order
    contracts: list = field(default_factory=list)  # ContractIndex
    errors: list = field(default_factory=list)  # FunctionError

    def index_for(self, ir: FunctionIR) -> ContractIndex:
        for c in self.contracts:
            if c.name == ir.contract:
                return c
        return ContractIndex()

    def find(self, name: str) -> FunctionIR:
        contract = None
        if "." in name:
            contract, name = name.split(".", 1)
        for f in self.functions:
            if f.name == name and (contract is None or f.contract == contract):
                return f
        raise KeyError(name)


class _Parser:
    def __init__(self, tokens, function_name="", transfer_like=frozenset()):
        self.toks = tokens
        self.pos = 0
        self.function_name = function_name
        self.transfer_like = transfer_like

    # -- token helpers -----------------------------------------------------

    def peek(self, offset=0) -> Optional[Token]:
        i = self.pos + offset
        return self.toks[i] if i < len(self.toks) else None

    def at(self, value, offset=0) -> bool:
        t = self.peek(offset)
        return t is not None and t.value == value and t.kind != "literal"

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            raise _Backtrack()
        self.pos += 1
        return t

    def expect(self, value) -> Token:
        t = self.peek()
        if t is None or t.value != value or t.kind == "literal":
            raise _Backtrack()
        self.pos += 1
        return t

    def ident(self) -> str:
        t = self.peek()
        if t is None or t.kind != "identifier":
            raise _Backtrack()
        self.pos += 1
        return t.value

    def skip_balanced(self, open_="{", close="}") -> None:
        depth = 0
        while True:
            t = self.peek()
            if t is None:
                raise UnbalancedBraces(f"missing {close!r}", self.toks[-1] if self.toks else None)
            self.pos += 1
            if t.kind == "punctuation":
                if t.value == open_:
                    depth += 1
                elif t.value == close:
                    depth -= 1
                    if depth == 0:
                        return

    # -- types -------------------------------------------------------------

    def parse_type(self) -> str:
        t = self.peek()
        if t is None:
            raise _Backtrack()
        if t.value == "mapping":
            self.next()
            self.expect("(")
            key = self.parse_type()
            self.expect("=>")
            value = self.parse_type()
            self.expect(")")
            text = f"mapping({key} => {value})"
        elif t.kind == "identifier" or t.value in ("var", "payable"):
            text = self.next().value
            while self.at(".") and self.peek(1) is not None and self.peek(1).kind == "identifier":
                self.next()
                text += "." + self.next().value
            if text == "address" and self.at("payable"):
                self.next()
                text += " payable"
        else:
            raise _Backtrack()
        while self.at("["):
            self.next()
            size = ""
            while not self.at("]"):
                size += self.next().value
            self.expect("]")
            text += f"[{size}]"
        return text

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_assignment()

    def parse_assignment(self) -> Expr:
        left = self.parse_ternary()
        t = self.peek()
        if t is not None and t.kind == "punctuation" and t.value in ASSIGN_OPS:
            self.next()
            right = self.parse_assignment()
            return Assign(op=t.value, target=left, value=right)
        return left

    def parse_ternary(self) -> Expr:
        cond = self.parse_binary(0)
        if self.at("?"):
            self.next()
            a = self.parse_assignment()
            self.expect(":")
            b = self.parse_assignment()
            return Ternary(cond=cond, then=a, orelse=b)
        return cond

    def parse_binary(self, level: int) -> Expr:
        if level == len(BINARY_PRECEDENCE):
            return self.parse_power()
        left = self.parse_binary(level + 1)
        ops = BINARY_PRECEDENCE[level]
        while True:
            t = self.peek()
            if t is not None and t.kind == "punctuation" and t.value in ops:
                self.next()
                right = self.parse_binary(level + 1)
                left = Binary(op=t.value, left=left, right=right)
            else:
                return left

    def parse_power(self) -> Expr:
        base = self.parse_unary()
        if self.at("**"):
            self.next()
            return Binary(op="**", left=base, right=self.parse_power())
        return base

    def parse_unary(self) -> Expr:
        t = self.peek()
        if t is not None and t.kind in ("punctuation", "keyword") and t.value in (
            "!", "-", "~", "++", "--", "delete", "+",
        ):
            self.next()
            return Unary(op=t.value, operand=self.parse_unary(), prefix=True)
        if t is not None and t.value == "new" and t.kind == "keyword":
            self.next()
            type_text = self.parse_type()
            return self.parse_postfix(Unary(op="new", operand=Name(name=type_text), prefix=True))
        return self.parse_postfix(self.parse_primary())

    def parse_postfix(self, expr: Expr) -> Expr:
        while True:
            t = self.peek()
            if t is None:
                return expr
            if t.kind == "member-dot":
                self.next()
                nt = self.next()
                if nt.kind not in ("identifier", "keyword"):
                    raise _Backtrack()
                expr = Member(obj=expr, name=nt.value)
            elif t.value == "[" and t.kind == "punctuation":
                self.next()
                if self.at("]"):
                    self.next()
                    expr = Index(base=expr, index=None)
                else:
                    idx = self.parse_expr()
                    self.expect("]")
                    expr = Index(base=expr, index=idx)
            elif t.value == "(" and t.kind == "punctuation":
                self.next()
                args = self.parse_args(")")
                expr = self.make_call(expr, args)
            elif (
                t.value == "{"
                and t.kind == "punctuation"
                and self.peek(1) is not None
                and self.peek(1).kind in ("identifier", "keyword")
                and self.at(":", 2)
            ):
                expr = self.parse_call_options(expr)
            elif t.value in ("++", "--") and t.kind == "punctuation":
                self.next()
                expr = Unary(op=t.value, operand=expr, prefix=False)
            else:
                return expr

    def parse_call_options(self, expr: Expr) -> Expr:
        # x.call{value: v, gas: g}(...) is normalized to x.call.value(v)(...)
        self.expect("{")
        options = {}
        while not self.at("}"):
            key = self.next().value
            self.expect(":")
            options[key] = self.parse_expr()
            if self.at(","):
                self.next()
        self.expect("}")
        if "value" in options:
            return self.make_call(Member(obj=expr, name="value"), (options["value"],))
        return expr

    def make_call(self, callee: Expr, args) -> CallExpr:
        kind = classify_call(callee_path(callee), self.function_name, self.transfer_like)
        return CallExpr(callee=callee, args=tuple(args), kind=kind)

    def parse_args(self, close: str) -> list:
        args = []
        if self.at(close):
            self.next()
            return args
        while True:
            args.append(self.parse_expr())
            if self.at(","):
                self.next()
                continue
            self.expect(close)
            return args

    def parse_primary(self) -> Expr:
        t = self.next()
        if t.kind == "literal":
            if t.value[0] in "\"'":
                return Literal(value=t.value, kind="string")
            value = t.value
            nt = self.peek()
            if nt is not None and nt.kind == "identifier" and nt.value in ETHER_UNITS:
                self.next()
                value = f"{value} {nt.value}"
            return Literal(value=value, kind="number")
        if t.kind == "keyword" and t.value in ("true", "false"):
            return Literal(value=t.value, kind="bool")
        if t.kind == "identifier":
            return Name(name=t.value)
        if t.kind == "keyword" and t.value in ("payable", "address"):
            return Name(name=t.value)
        if t.value == "(" and t.kind == "punctuation":
            items: list = []
            while True:
                if self.at(","):
                    items.append(None)
                    self.next()
                    continue
                if self.at(")"):
                    self.next()
                    if len(items) == 0:
                        return Tuple(items=())
                    items.append(None)
                    return Tuple(items=tuple(items))
                items.append(self.parse_expr())
                if self.at(","):
                    self.next()
                    if self.at(")"):
                        self.next()
                        items.append(None)
                        return Tuple(items=tuple(items))
                    continue
                self.expect(")")
                if len(items) == 1:
                    return items[0]
                return Tuple(items=tuple(items))
        if t.value == "[" and t.kind == "punctuation":
            return Tuple(items=tuple(self.parse_args("]")))
        raise _Backtrack()

    # -- statements --------------------------------------------------------

    def span_from(self, start: int) -> tuple:
        a = self.toks[start]
        b = self.toks[max(start, self.pos - 1)]
        return (a.line, a.column, b.line, b.column + len(b.value))

    def parse_block(self) -> tuple:
        """Parse ``{ ... }`` and return its statements."""
        self.expect("{")
        out: list = []
        while True:
            t = self.peek()
            if t is None:
                raise UnbalancedBraces("missing '}'", self.toks[-1] if self.toks else None)
            if t.value == "}" and t.kind == "punctuation":
                self.next()
                return tuple(out)
            out.extend(self.parse_statement())

    def parse_body(self) -> tuple:
        """A block or a single statement (e.g. ``if (c) x = 1;``)."""
        if self.at("{"):
            return self.parse_block()
        return tuple(self.parse_statement())

    def parse_statement(self) -> list:
        start = self.pos
        try:
            return self._statement(start)
        except _Backtrack:
            self.pos = start
            return [self.recover(start)]

    def recover(self, start: int) -> Opaque:
        """Skip one unparseable statement: up to ';' or a balanced block."""
        depth = 0
        while True:
            t = self.peek()
            if t is None:
                if depth:
                    raise UnbalancedBraces("missing '}'", self.toks[-1] if self.toks else None)
                break
            if t.kind == "punctuation":
                if t.value in "({[":
                    depth += 1
                elif t.value in ")]":
                    depth -= 1
                elif t.value == "}":
                    if depth <= 0:
                        break  # end of the enclosing block; not ours
                    depth -= 1
                    if depth == 0:
                        self.next()
                        if self.at(";"):
                            self.next()
                        break
                elif t.value == ";" and depth <= 0:
                    self.next()
                    break
            self.next()
        toks = self.toks[start:self.pos]
        if not toks:
            # a stray '}' at statement position is handled by parse_block
            raise UnbalancedBraces("unexpected '}'", self.peek())
        names = frozenset(
            tok.value for tok in toks if tok.kind == "identifier"
        )
        return Opaque(
            text=" ".join(tok.value for tok in toks),
            names=names,
            span=self.span_from(start),
        )

    def _statement(self, start: int) -> list:
        t = self.peek()
        if t is None:
            raise _Backtrack()
        v = t.value
        if t.kind == "punctuation" and v == "{":
            return list(self.parse_block())
        if t.kind == "punctuation" and v == ";":
            self.next()
            return []
        if t.kind == "keyword":
            if v == "unchecked" and self.at("{", 1):
                self.next()
                return list(self.parse_block())
            if v == "if":
                self.next()
                self.expect("(")
                cond = self.parse_expr()
                self.expect(")")
                then = self.parse_body()
                orelse = None
                if self.at("else"):
                    self.next()
                    orelse = self.parse_body()
                return [If(cond=cond, then=then, orelse=orelse, span=self.span_from(start))]
            if v == "while":
                self.next()
                self.expect("(")
                cond = self.parse_expr()
                self.expect(")")
                body = self.parse_body()
                return [Loop(kind="while", cond=cond, body=body, span=self.span_from(start))]
            if v == "do":
                self.next()
                body = self.parse_body()
                self.expect("while")
                self.expect("(")
                cond = self.parse_expr()
                self.expect(")")
                self.expect(";")
                return [
                    Loop(kind="while", cond=cond, body=body, do_while=True, span=self.span_from(start))
                ]
            if v == "for":
                return [self.parse_for(start)]
            if v == "return":
                self.next()
                expr = None if self.at(";") else self.parse_expr()
                self.expect(";")
                return [Return(expr=expr, span=self.span_from(start))]
            if v == "throw":
                self.next()
                self.expect(";")
                return [Throw(span=self.span_from(start))]
            if v == "revert":
                self.next()
                args: list = []
                if self.peek() is not None and self.peek().kind == "identifier":
                    self.next()  # custom error name
                if self.at("("):
                    self.next()
                    args = self.parse_args(")")
                self.expect(";")
                return [Revert(args=tuple(args), span=self.span_from(start))]
            if v in ("require", "assert"):
                self.next()
                self.expect("(")
                args = self.parse_args(")")
                self.expect(";")
                if not args:
                    raise _Backtrack()
                message = args[1] if len(args) > 1 else None
                return [Require(cond=args[0], kind=v, message=message, span=self.span_from(start))]
            if v == "emit":
                self.next()
                expr = self.parse_postfix(Name(name=self.ident()))
                self.expect(";")
                if not isinstance(expr, CallExpr):
                    raise _Backtrack()
                return [Call(expr=expr, span=self.span_from(start))]
            if v in ("break", "continue"):
                self.next()
                self.expect(";")
                return [Opaque(text=v, span=self.span_from(start))]
        decl = self.try_declaration(start)
        if decl is not None:
            self.expect(";")
            return [self.with_span(decl, start)]
        stmt = self.expression_statement()
        self.expect(";")
        return [self.with_span(stmt, start)]

    def with_span(self, stmt, start):
        return type(stmt)(**{**_fields(stmt), "span": self.span_from(start)})

    def try_declaration(self, start: int):
        """``T [loc] x [= e]`` or ``(T a, , T b) = e``; None when not a declaration."""
        save = self.pos
        try:
            if self.at("("):
                return self.tuple_declaration()
            if self.at("var") and self.at("(", 1):
                self.next()
                return self.tuple_declaration(untyped=True)
            type_text = self.parse_type()
            while self.peek() is not None and self.peek().value in DATA_LOCATIONS:
                self.next()
            name = self.ident()
            if self.at("="):
                self.next()
                rhs = self.parse_expr()
            elif self.at(";"):
                rhs = None
            else:
                raise _Backtrack()
            return Assignment(lhs=Name(name=name), op="=", rhs=rhs, decl_type=type_text)
        except _Backtrack:
            self.pos = save
            return None

    def tuple_declaration(self, untyped=False):
        self.expect("(")
        items: list = []
        types: list = []
        while True:
            if self.at(","):
                self.next()
                items.append(None)
                continue
            if self.at(")"):
                self.next()
                break
            if untyped:
                items.append(Name(name=self.ident()))
                types.append("var")
            else:
                type_text = self.parse_type()
                while self.peek() is not None and self.peek().value in DATA_LOCATIONS:
                    self.next()
                items.append(Name(name=self.ident()))
                types.append(type_text)
            if self.at(","):
                self.next()
                if self.at(")"):
                    items.append(None)
                continue
        self.expect("=")
        rhs = self.parse_expr()
        return Assignment(lhs=Tuple(items=tuple(items)), op="=", rhs=rhs, decl_type=",".join(types))

    def expression_statement(self):
        expr = self.parse_expr()
        if isinstance(expr, Assign):
            return Assignment(lhs=expr.target, op=expr.op, rhs=expr.value)
        if isinstance(expr, Unary) and expr.op in ("++", "--", "delete"):
            return Assignment(lhs=expr.operand, op=expr.op, rhs=None)
        if isinstance(expr, CallExpr):
            return Call(expr=expr)
        return Opaque(text="expr", parsed=(expr,))

    def parse_for(self, start: int) -> Loop:
        self.expect("for")
        self.expect("(")
        init = None
        if not self.at(";"):
            init_start = self.pos
            init = self.try_declaration(init_start)
            if init is None:
                init = self.expression_statement()
            init = self.with_span(init, init_start)
        self.expect(";")
        cond = None if self.at(";") else self.parse_expr()
        self.expect(";")
        updates = []
        while not self.at(")"):
            u_start = self.pos
            updates.append(self.with_span(self.expression_statement(), u_start))
            if self.at(","):
                self.next()
        self.expect(")")
        body = self.parse_body()
        return Loop(
            kind="for", cond=cond, init=init, updates=tuple(updates), body=body,
            span=self.span_from(start),
        )


def _fields(stmt) -> dict:
    from dataclasses import fields

    return {f.name: getattr(stmt, f.name) for f in fields(stmt) if f.init}


# -- headers and contract-level scanning ----------------------------------------


def _function_header(p: _Parser):
    """Parse from ``function``/``constructor``/... up to the body; return header parts."""
    first = p.next()
    if first.value == "function":
        t = p.peek()
        if t is not None and t.kind in ("identifier", "keyword") and t.value not in ("(",):
            if t.kind == "keyword" and t.value not in ("fallback", "receive"):
                raise MalformedHeader("bad function name", t)
            name = p.next().value
        else:
            name = "fallback"
    else:
        name = first.value  # constructor | fallback | receive
    if not p.at("("):
        raise MalformedHeader("expected '(' after function name", p.peek())
    params = _param_list(p)
    modifiers: list = []
    returns: tuple = ()
    while True:
        t = p.peek()
        if t is None:
            raise MalformedHeader("function header ends unexpectedly", None)
        if t.value in ("{", ";") and t.kind == "punctuation":
            break
        if t.value == "returns":
            p.next()
            returns = _param_list(p)
            continue
        if t.kind in ("identifier", "keyword"):
            modifiers.append(p.next().value)
            if p.at("("):
                try:
                    p.skip_balanced("(", ")")
                except UnbalancedBraces:
                    raise MalformedHeader("unbalanced modifier arguments", t)
            continue
        raise MalformedHeader(f"unexpected {t.value!r} in function header", t)
    return name, params, tuple(modifiers), returns


def _param_list(p: _Parser) -> tuple:
    start_tok = p.peek()
    try:
        p.expect("(")
        out = []
        if p.at(")"):
            p.next()
            return ()
        while True:
            type_text = p.parse_type()
            while p.peek() is not None and p.peek().value in DATA_LOCATIONS | {"indexed", "payable"}:
                p.next()
            name = ""
            if p.peek() is not None and p.peek().kind == "identifier":
                name = p.next().value
            out.append((name, type_text))
            if p.at(","):
                p.next()
                continue
            p.expect(")")
            return tuple(out)
    except _Backtrack:
        raise MalformedHeader("malformed parameter list", start_tok)


def parse_function(
    tokens,
    *,
    contract: Optional[str] = None,
    state_vars: Optional[dict] = None,
    transfer_like=frozenset(),
) -> FunctionIR:
    """Parse one function starting at its ``function`` keyword.

    ``tokens`` may be a token list or source text.
    """
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    ir, _ = _parse_function_at(list(tokens), 0, contract, state_vars or {}, frozenset(transfer_like))
    return ir


def _parse_function_at(tokens, pos, contract, state_vars, transfer_like):
    p = _Parser(tokens)
    p.pos = pos
    if p.peek() is None or p.peek().value not in ("function", "constructor", "fallback", "receive"):
        raise MalformedHeader("expected 'function'", p.peek())
    start_tok = p.peek()
    name, params, modifiers, returns = _function_header(p)
    p.function_name = name
    p.transfer_like = transfer_like
    has_body = not p.at(";")
    if has_body:
        statements = p.parse_block()
    else:
        p.next()
        statements = ()
    end_tok = tokens[p.pos - 1]
    ir = FunctionIR(
        name=name,
        params=params,
        statements=statements,
        modifiers=modifiers,
        returns=returns,
        contract=contract,
        state_vars=dict(state_vars),
        span=(start_tok.line, start_tok.column, end_tok.line, end_tok.column + 1),
    )
    return ir, has_body


def _state_var(p: _Parser):
    """Try ``T [visibility...] name [= e];`` at contract level."""
    save = p.pos
    try:
        type_text = p.parse_type()
        while p.peek() is not None and p.peek().value in VISIBILITY:
            p.next()
        name = p.ident()
        if p.at("="):
            p.next()
            p.parse_expr()
        p.expect(";")
        return name, type_text
    except _Backtrack:
        p.pos = save
        return None


def _skip_item(p: _Parser) -> None:
    """Skip one contract-level item (event, struct, modifier, ...)."""
    depth = 0
    while True:
        t = p.peek()
        if t is None:
            return
        p.next()
        if t.kind != "punctuation":
            continue
        if t.value in "([":
            depth += 1
        elif t.value in ")]":
            depth -= 1
        elif t.value == "{":
            p.pos -= 1
            p.skip_balanced()
            if depth <= 0:
                return
        elif t.value == ";" and depth <= 0:
            return


def _scan_contract_items(p: _Parser, end_pred):
    """Collect state variables and function start positions until ``end_pred``."""
    state_vars: dict = {}
    starts: list = []
    while not end_pred():
        t = p.peek()
        if t is None:
            break
        if t.value == "function" or (
            t.value in ("constructor", "fallback", "receive") and p.at("(", 1)
        ):
            starts.append(p.pos)
            # skip header and body to find the next item
            hp = _Parser(p.toks)
            hp.pos = p.pos
            try:
                _function_header(hp)
                if hp.at(";"):
                    hp.next()
                else:
                    hp.skip_balanced()
                p.pos = hp.pos
            except UnbalancedBraces:
                p.pos = len(p.toks)
            except (MalformedHeader, _Backtrack):
                p.next()
                _skip_item(p)
            continue
        if t.kind == "keyword" and t.value in (
            "event", "struct", "enum", "modifier", "using", "pragma", "import",
        ):
            _skip_item(p)
            continue
        sv = _state_var(p)
        if sv is not None:
            state_vars[sv[0]] = sv[1]
            continue
        _skip_item(p)
    return state_vars, starts


def _function_name_at(tokens, pos) -> str:
    t = tokens[pos]
    if t.value != "function":
        return t.value
    nt = tokens[pos + 1] if pos + 1 < len(tokens) else None
    if nt is not None and nt.kind in ("identifier", "keyword") and nt.value != "(":
        return nt.value
    return "fallback"


def parse_source(source: str) -> SourceUnit:
    """Parse a whole file: contracts, their state variables, and all functions.

    Bare top-level functions and declarations (outside any contract) are
    accepted and grouped into an anonymous contract.
    """
    tokens = tokenize(source)
    unit = SourceUnit()
    p = _Parser(tokens)
    groups = []  # (contract name, state vars, function starts)
    top_vars: dict = {}
    top_starts: list = []
    def contract_start():
        t = p.peek()
        return (
            t is not None
            and t.kind == "keyword"
            and t.value in ("contract", "library", "interface")
            and p.peek(1) is not None
            and p.peek(1).kind == "identifier"
        )

    while p.peek() is not None:
        if contract_start():
            p.next()
            cname = p.next().value
            while p.peek() is not None and not p.at("{"):
                p.next()
            if p.peek() is None:
                break
            p.next()
            state_vars, starts = _scan_contract_items(p, lambda: p.at("}") or p.peek() is None)
            if p.at("}"):
                p.next()
            groups.append((cname, state_vars, starts))
            continue
        before = p.pos
        sv, st = _scan_contract_items(p, lambda: p.peek() is None or contract_start())
        top_vars.update(sv)
        top_starts.extend(st)
        if p.pos == before:
            p.next()
    if top_starts or top_vars:
        groups.insert(0, (None, top_vars, top_starts))

    for cname, state_vars, starts in groups:
        names = [_function_name_at(tokens, s) for s in starts]
        parsed = _parse_group(tokens, starts, cname, state_vars, frozenset(), unit)
        transfer_like = frozenset(
            ir.name
            for ir in parsed.values()
            if any(c.kind == CALL_VALUE for fs in flatten(ir.statements) for c in fs.stmt.calls())
        )
        if transfer_like:
            parsed = _parse_group(tokens, starts, cname, state_vars, transfer_like, None)
        unit.contracts.append(
            ContractIndex(name=cname, state_vars=state_vars, functions=names, transfer_like=transfer_like)
        )
        for s in starts:
            if s in parsed:
                unit.functions.append(parsed[s])
    return unit


def _parse_group(tokens, starts, cname, state_vars, transfer_like, unit):
    out = {}
    for s in starts:
        try:
            ir, has_body = _parse_function_at(tokens, s, cname, state_vars, transfer_like)
            if has_body:
                out[s] = ir
        except (ParseError, _Backtrack) as exc:
            if unit is not None:
                unit.errors.append(
                    FunctionError(
                        name=_function_name_at(tokens, s),
                        contract=cname,
                        error=f"{type(exc).__name__}: {exc}",
                        line=tokens[s].line,
                    )
                )
    return out


def contract_index(unit: SourceUnit, ir: FunctionIR) -> ContractIndex:
    return unit.index_for(ir)


__all__ = [
    "ContractIndex",
    "FunctionError",
    "MalformedHeader",
    "ParseError",
    "SourceUnit",
    "UnbalancedBraces",
    "classify_call",
    "contract_index",
    "parse_function",
    "parse_source",
    "PLAIN",
    "SELF_CALL",
]
