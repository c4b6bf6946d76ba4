"""Identifier classification and the balance lexicon."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .ir import (
    Assign,
    Assignment,
    Binary,
    CallExpr,
    FunctionIR,
    If,
    Require,
    Unary,
    flatten,
    target_idents,
    walk_expr,
)

PARAM = "param"
LOCAL = "local"
STATE = "state"
EXTERNAL = "external"

_ADDRESS_TO_UINT = re.compile(r"^mapping\(address(?: payable)? => u?int\d*\)$")


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str
    type: Optional[str] = None
    balance_like: bool = False


class SymbolTable(dict):
    """name -> :class:`Symbol` for every identifier the function reads or writes."""

    def kind(self, name: str) -> str:
        sym = self.get(name)
        return sym.kind if sym is not None else EXTERNAL

    def is_state(self, name: str) -> bool:
        return self.kind(name) == STATE

    def balance_names(self) -> set[str]:
        return {n for n, s in self.items() if s.balance_like}

    def is_balance_ref(self, ident: str) -> bool:
        """True when ``ident`` (a name or dotted path) refers to a user balance."""
        root, _, rest = ident.partition(".")
        sym = self.get(root)
        if sym is not None and sym.balance_like:
            return True
        return any("balance" in part.lower() for part in rest.split(".") if part)


def lexicon_match(name: str) -> bool:
    return "balance" in name.lower()


def subtraction_targets(stmt) -> set[str]:
    """Variables written by subtraction in ``stmt`` (``-=``, ``--``, ``x = y - z``, ``.sub()``)."""
    out: set[str] = set()
    if isinstance(stmt, Assignment):
        if stmt.op in ("-=", "--") or (stmt.op == "=" and _is_subtraction(stmt.rhs)):
            out |= target_idents(stmt.lhs)
    for e in stmt.exprs():
        for node in walk_expr(e):
            if isinstance(node, Assign) and (
                node.op == "-=" or (node.op == "=" and _is_subtraction(node.value))
            ):
                out |= target_idents(node.target)
            elif isinstance(node, Unary) and node.op == "--":
                out |= target_idents(node.operand)
    return out


def _is_subtraction(expr) -> bool:
    if isinstance(expr, Binary):
        return expr.op == "-"
    if isinstance(expr, CallExpr):
        path = expr.path
        return path == "sub" or path.endswith(".sub")
    return False


def resolve_symbols(ir: FunctionIR, contract_state_vars: Optional[dict] = None) -> SymbolTable:
    """Classify each identifier as param, local, state or external.

    ``contract_state_vars`` defaults to the state variables recorded on
    ``ir`` when it was parsed inside a contract.
    """
    state_vars = ir.state_vars if contract_state_vars is None else dict(contract_state_vars)
    if not isinstance(state_vars, dict):
        state_vars = {name: None for name in state_vars}
    params = {name: t for name, t in ir.params if name}
    locals_ = ir.locals()

    seen: set[str] = set(params) | set(locals_)
    for fs in flatten(ir.statements):
        seen |= set(fs.stmt.reads)
        seen |= fs.stmt.writes()

    flat = flatten(ir.statements)
    cond_reads = set()
    subtracted = set()
    for fs in flat:
        st = fs.stmt
        if isinstance(st, Require) or isinstance(st, If):
            cond_reads |= set(st.cond.reads)
        subtracted |= subtraction_targets(st)

    table = SymbolTable()
    for name in sorted(seen):
        if name in params:
            kind, type_ = PARAM, params[name]
        elif name in locals_:
            kind, type_ = LOCAL, locals_[name]
        elif name in state_vars:
            kind, type_ = STATE, state_vars[name]
        else:
            kind, type_ = EXTERNAL, None
        balance_like = lexicon_match(name)
        if (
            not balance_like
            and kind == STATE
            and type_ is not None
            and _ADDRESS_TO_UINT.match(type_)
            and name in cond_reads
            and name in subtracted
        ):
            balance_like = True
        table[name] = Symbol(name, kind, type_, balance_like)
    return table


def declared_names(ir: FunctionIR) -> set[str]:
    return {n for n, _ in ir.params if n} | set(ir.locals())


__all__ = [
    "EXTERNAL",
    "LOCAL",
    "PARAM",
    "STATE",
    "Symbol",
    "SymbolTable",
    "declared_names",
    "lexicon_match",
    "resolve_symbols",
    "subtraction_targets",
]
