"""Local expert patterns for reentrancy, timestamp dependence and infinite loops.

Each extractor returns three boolean flags recording whether a pattern is
present in the function. Flags are judgment-free: ``loopCondition`` set
means "the exit condition looks unreachable", and deciding whether that
makes the function risky is left to the model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .frontend.ir import (
    BLOCK_NUMBER_PATHS,
    CALL_VALUE,
    SELF_CALL,
    TIMESTAMP_PATHS,
    TRANSFER_LIKE,
    Assign,
    Assignment,
    CallExpr,
    FlatStmt,
    FunctionIR,
    If,
    Literal,
    Loop,
    Require,
    Return,
    Revert,
    Throw,
    expr_writes,
    flatten,
    iter_calls,
    target_idents,
    walk_expr,
)
from .frontend.parser import ContractIndex
from .frontend.symbols import STATE, SymbolTable, resolve_symbols, subtraction_targets


class Vulnerability(str, enum.Enum):
    REENTRANCY = "reentrancy"
    TIMESTAMP = "timestamp"
    LOOP = "loop"

    @classmethod
    def parse(cls, value) -> "Vulnerability":
        if isinstance(value, cls):
            return value
        aliases = {"infinite-loop": "loop", "infiniteloop": "loop", "timestamp-dependence": "timestamp"}
        v = str(value).lower()
        return cls(aliases.get(v, v))


PATTERN_NAMES = {
    Vulnerability.REENTRANCY: ("enoughBalance", "callValueInvocation", "balanceDeduction"),
    Vulnerability.TIMESTAMP: ("timestampInvocation", "timestampAssign", "timestampContaminate"),
    Vulnerability.LOOP: ("loopStatement", "loopCondition", "selfInvocation"),
}

TIMESTAMP_SEEDS = frozenset(TIMESTAMP_PATHS | BLOCK_NUMBER_PATHS)
MONEY_TRANSFER_SUFFIXES = (".transfer", ".send")
DESTRUCT_CALLS = frozenset({"selfdestruct", "suicide"})


def encode_patterns(flags) -> np.ndarray:
    """One row per pattern: one-hot identity (3 slots) + presence digit."""
    out = np.zeros((3, 4))
    for i, flag in enumerate(flags):
        out[i, i] = 1.0
        out[i, 3] = 1.0 if flag else 0.0
    return out


@dataclass(frozen=True)
class PatternVector:
    vulnerability: Vulnerability
    flags: tuple

    @property
    def names(self) -> tuple:
        return PATTERN_NAMES[self.vulnerability]

    @property
    def encodings(self) -> np.ndarray:
        return encode_patterns(self.flags)

    def to_dict(self) -> dict:
        return {
            "vulnerability": self.vulnerability.value,
            "names": list(self.names),
            "flags": [int(f) for f in self.flags],
            "encodings": self.encodings.astype(int).tolist(),
        }


@dataclass
class TaintState:
    seed: frozenset
    tainted: set = field(default_factory=set)
    sink_hit: bool = False
    # tainted identifiers read by a condition guarding a critical operation
    sink_reads: set = field(default_factory=set)


# -- shared helpers ------------------------------------------------------------


def _transfer_kind(call: CallExpr, index: Optional[ContractIndex]) -> bool:
    if call.kind in (CALL_VALUE, TRANSFER_LIKE):
        return True
    if index is not None:
        path = call.path
        bare = path[5:] if path.startswith("this.") else path
        return "." not in bare and bare in index.transfer_like
    return False


def _symbols(ir: FunctionIR, index: Optional[ContractIndex]) -> SymbolTable:
    state_vars = index.state_vars if index is not None and index.state_vars else None
    return resolve_symbols(ir, state_vars)


def _condition(fs: FlatStmt):
    st = fs.stmt
    if isinstance(st, (Require, If)):
        return st.cond
    return None


# -- reentrancy ----------------------------------------------------------------


def extract_reentrancy(
    ir: FunctionIR,
    contract_index: Optional[ContractIndex] = None,
    symbols: Optional[SymbolTable] = None,
) -> PatternVector:
    symbols = symbols if symbols is not None else _symbols(ir, contract_index)
    flat = flatten(ir.statements)
    transfer_at = [
        fs.index for fs in flat for c in fs.stmt.calls() if _transfer_kind(c, contract_index)
    ]
    first = min(transfer_at) if transfer_at else None

    enough_balance = False
    for fs in flat:
        cond = _condition(fs)
        if cond is None or (first is not None and fs.index >= first):
            continue
        if any(symbols.is_balance_ref(name) for name in cond.reads):
            enough_balance = True
            break

    deduction = False
    if first is not None:
        for fs in flat:
            if fs.index > first and any(
                symbols.is_balance_ref(n) for n in subtraction_targets(fs.stmt)
            ):
                deduction = True
                break

    return PatternVector(Vulnerability.REENTRANCY, (enough_balance, first is not None, deduction))


# -- timestamp dependence ---------------------------------------------------------


def _is_money_transfer(call: CallExpr, index: Optional[ContractIndex]) -> bool:
    if _transfer_kind(call, index):
        return True
    path = call.path
    return path.endswith(MONEY_TRANSFER_SUFFIXES) or path in DESTRUCT_CALLS


def critical_operations(
    ir: FunctionIR, symbols: SymbolTable, tainted, index: Optional[ContractIndex] = None
) -> list[int]:
    """Flat indices of money transfers, state writes and returns of tainted values."""
    out = []
    for fs in flatten(ir.statements):
        st = fs.stmt
        critical = any(_is_money_transfer(c, index) for c in st.calls())
        if not critical:
            critical = any(symbols.kind(n) == STATE for n in st.writes())
        if not critical and isinstance(st, Return) and st.expr is not None:
            critical = bool(st.expr.reads & tainted)
        if critical:
            out.append(fs.index)
    return out


def _exits(block) -> bool:
    for st in block:
        if isinstance(st, (Revert, Throw, Return)):
            return True
        if isinstance(st, Require) and isinstance(st.cond, Literal) and st.cond.value == "false":
            return True
    return False


def guard_conditions(ir: FunctionIR, target: int) -> list:
    """Conditions that decide whether the statement at flat index ``target`` runs.

    Enclosing ``if``/loop conditions, every earlier ``require``/``assert``,
    and earlier ``if`` statements that leave the function from a branch.
    """
    flat = flatten(ir.statements)
    fs_target = flat[target]
    conds = []
    for anc, role in fs_target.ancestors:
        if isinstance(anc, If) and role in ("then", "else"):
            conds.append(anc.cond)
        elif isinstance(anc, Loop) and role in ("body", "update") and anc.cond is not None:
            conds.append(anc.cond)
    for fs in flat[:target]:
        st = fs.stmt
        if isinstance(st, Require):
            conds.append(st.cond)
        elif isinstance(st, If) and (
            _exits(st.then) or (st.orelse is not None and _exits(st.orelse))
        ):
            if not any(a is st for a, _ in fs_target.ancestors):
                conds.append(st.cond)
    return conds


def taint_propagate(
    ir: FunctionIR,
    seeds=TIMESTAMP_SEEDS,
    symbols: Optional[SymbolTable] = None,
    contract_index: Optional[ContractIndex] = None,
) -> TaintState:
    """Flow- and path-insensitive taint fixed point from ``seeds``.

    A target becomes tainted when its assigned value reads a tainted
    identifier; a call with a tainted argument taints its synthetic return
    ``<return:callee>``. Iterates over all statements until nothing changes.
    """
    symbols = symbols if symbols is not None else _symbols(ir, contract_index)
    seed = frozenset(seeds)
    tainted = set(seed)
    flat = flatten(ir.statements)
    changed = True
    while changed:
        changed = False
        for fs in flat:
            new = _taint_step(fs.stmt, tainted)
            if not new <= tainted:
                tainted |= new
                changed = True

    state = TaintState(seed=seed, tainted=tainted)
    for k in critical_operations(ir, symbols, tainted, contract_index):
        for cond in guard_conditions(ir, k):
            hit = cond.reads & tainted
            if hit:
                state.sink_hit = True
                state.sink_reads |= hit
    return state


def _taint_step(st, tainted: set) -> set:
    new: set = set()
    if isinstance(st, Assignment) and st.rhs is not None and st.rhs.reads & tainted:
        new |= target_idents(st.lhs)
    for e in st.exprs():
        for node in walk_expr(e):
            if isinstance(node, Assign) and node.value is not None and node.value.reads & tainted:
                new |= target_idents(node.target)
        for call in iter_calls(e):
            if any(a.reads & tainted for a in call.args):
                new.add(f"<return:{call.path}>")
    return new


def extract_timestamp(
    ir: FunctionIR,
    contract_index: Optional[ContractIndex] = None,
    symbols: Optional[SymbolTable] = None,
) -> PatternVector:
    symbols = symbols if symbols is not None else _symbols(ir, contract_index)
    flat = flatten(ir.statements)
    invocation = any(fs.stmt.reads & TIMESTAMP_PATHS for fs in flat)
    assigned = False
    for fs in flat:
        st = fs.stmt
        if isinstance(st, Assignment) and st.rhs is not None and st.rhs.reads & TIMESTAMP_SEEDS:
            assigned = True
        for e in st.exprs():
            for node in walk_expr(e):
                if isinstance(node, Assign) and node.value is not None and (
                    node.value.reads & TIMESTAMP_SEEDS
                ):
                    assigned = True
            for call in iter_calls(e):
                if any(a.reads & TIMESTAMP_SEEDS for a in call.args):
                    assigned = True
        if assigned:
            break
    taint = taint_propagate(ir, TIMESTAMP_SEEDS, symbols, contract_index)
    return PatternVector(Vulnerability.TIMESTAMP, (invocation, assigned, taint.sink_hit))


# -- infinite loop -----------------------------------------------------------------


def _constant_true(cond) -> bool:
    return cond is None or (isinstance(cond, Literal) and cond.value == "true")


def loop_exit_unreachable(loop: Loop) -> bool:
    """True when no statement of the loop writes a variable its condition reads."""
    if _constant_true(loop.cond):
        return True
    written: set = set(expr_writes(loop.cond))
    for u in loop.updates:
        written |= u.writes()
    for fs in flatten(loop.body):
        written |= fs.stmt.writes()
    return not (set(loop.cond.reads) & written)


def extract_infinite_loop(ir: FunctionIR, contract_index: Optional[ContractIndex] = None) -> PatternVector:
    flat = flatten(ir.statements)
    loops = [fs.stmt for fs in flat if isinstance(fs.stmt, Loop)]
    self_invocation = any(
        c.kind == SELF_CALL and not fs.in_if for fs in flat for c in fs.stmt.calls()
    )
    return PatternVector(
        Vulnerability.LOOP,
        (bool(loops), any(loop_exit_unreachable(lp) for lp in loops), self_invocation),
    )


def extract_patterns(
    ir: FunctionIR, vulnerability, contract_index: Optional[ContractIndex] = None
) -> PatternVector:
    vuln = Vulnerability.parse(vulnerability)
    if vuln is Vulnerability.REENTRANCY:
        return extract_reentrancy(ir, contract_index)
    if vuln is Vulnerability.TIMESTAMP:
        return extract_timestamp(ir, contract_index)
    return extract_infinite_loop(ir, contract_index)
