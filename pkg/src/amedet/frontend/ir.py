"""Statement-level IR for one contract function.

Expressions are immutable trees; every node caches ``reads``, the set of
identifiers it reads (plain names plus dotted member paths such as
``block.timestamp``). Spans never take part in equality so two IRs that
differ only in layout compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

Span = tuple[int, int, int, int]  # start line, start col, end line, end col

GLOBAL_ROOTS = frozenset({"msg", "tx", "block", "this", "abi", "super"})
TIMESTAMP_PATHS = frozenset({"block.timestamp", "now"})
BLOCK_NUMBER_PATHS = frozenset({"block.number"})

CALL_VALUE = "callValue"
TRANSFER_LIKE = "transferLike"
SELF_CALL = "selfCall"
PLAIN = "plain"


def _frozen_set(obj, name, value):
    object.__setattr__(obj, name, value)


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    reads: frozenset = field(init=False, compare=False, repr=False, default=frozenset())

    def children(self) -> tuple["Expr", ...]:
        return ()

    def own_identifier(self) -> Optional[str]:
        return None

    def __post_init__(self):
        r = set()
        for child in self.children():
            r |= child.reads
        own = self.own_identifier()
        if own is not None:
            r.add(own)
        _frozen_set(self, "reads", frozenset(r))


@dataclass(frozen=True)
class Name(Expr):
    name: str = ""

    def own_identifier(self):
        return self.name


@dataclass(frozen=True)
class Literal(Expr):
    value: str = ""
    kind: str = "number"  # number | string | bool


@dataclass(frozen=True)
class Binary(Expr):
    op: str = ""
    left: Expr = None
    right: Expr = None

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Unary(Expr):
    op: str = ""
    operand: Expr = None
    prefix: bool = True

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Member(Expr):
    obj: Expr = None
    name: str = ""

    def children(self):
        return (self.obj,)

    def own_identifier(self):
        return access_path(self)


@dataclass(frozen=True)
class Index(Expr):
    base: Expr = None
    index: Optional[Expr] = None

    def children(self):
        return (self.base,) if self.index is None else (self.base, self.index)


@dataclass(frozen=True)
class CallExpr(Expr):
    callee: Expr = None
    args: tuple = ()
    kind: str = PLAIN

    def children(self):
        return (self.callee,) + tuple(self.args)

    @property
    def path(self) -> str:
        return callee_path(self.callee)


@dataclass(frozen=True)
class Assign(Expr):
    """Assignment used as an expression, e.g. a ``for`` update or ``i++`` operand."""

    op: str = "="
    target: Expr = None
    value: Optional[Expr] = None

    def children(self):
        return (self.target,) if self.value is None else (self.target, self.value)


@dataclass(frozen=True)
class Ternary(Expr):
    cond: Expr = None
    then: Expr = None
    orelse: Expr = None

    def children(self):
        return (self.cond, self.then, self.orelse)


@dataclass(frozen=True)
class Tuple(Expr):
    items: tuple = ()

    def children(self):
        return tuple(i for i in self.items if i is not None)


def pure_path(expr: Expr) -> Optional[str]:
    """Dotted path for ``a.b.c`` chains of names, else None."""
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, Member):
        base = pure_path(expr.obj)
        return None if base is None else f"{base}.{expr.name}"
    return None


def access_path(expr: Expr) -> Optional[str]:
    """Like :func:`pure_path` but looks through indexing: ``a[i].b`` -> ``a.b``."""
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, Member):
        base = access_path(expr.obj)
        return None if base is None else f"{base}.{expr.name}"
    if isinstance(expr, Index):
        return access_path(expr.base)
    return None


def target_idents(expr: Expr) -> set[str]:
    """Root variables of an assignment target plus its member path, if any."""
    out = root_names(expr)
    if isinstance(expr, Tuple):
        for item in expr.items:
            if item is not None:
                out |= target_idents(item)
        return out
    path = access_path(expr)
    if path is not None:
        out.add(path)
    return out


def callee_path(expr: Expr) -> str:
    """Path of a callee with call arguments and indices dropped."""
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, Member):
        return f"{callee_path(expr.obj)}.{expr.name}"
    if isinstance(expr, CallExpr):
        return callee_path(expr.callee)
    if isinstance(expr, Index):
        return callee_path(expr.base)
    return "?"


def root_names(expr: Expr) -> set[str]:
    """Variables written when ``expr`` is an assignment target."""
    if isinstance(expr, Name):
        return {expr.name}
    if isinstance(expr, (Member,)):
        return root_names(expr.obj)
    if isinstance(expr, Index):
        return root_names(expr.base)
    if isinstance(expr, Tuple):
        out = set()
        for item in expr.items:
            if item is not None:
                out |= root_names(item)
        return out
    return set()


def walk_expr(expr: Expr) -> Iterator[Expr]:
    yield expr
    for child in expr.children():
        yield from walk_expr(child)


def iter_calls(expr: Expr) -> Iterator[CallExpr]:
    """Call nodes inside ``expr``.

    ``x.call.value(v)()`` is one invocation: a call whose callee is itself a
    call only completes the inner one and is not reported separately.
    """
    for node in walk_expr(expr):
        if isinstance(node, CallExpr) and not isinstance(node.callee, CallExpr):
            yield node


def expr_writes(expr: Expr) -> set[str]:
    out: set[str] = set()
    for node in walk_expr(expr):
        if isinstance(node, Assign):
            out |= root_names(node.target)
        elif isinstance(node, Unary) and node.op in ("++", "--", "delete"):
            out |= root_names(node.operand)
    return out


# -- statements --------------------------------------------------------------


@dataclass(frozen=True)
class Statement:
    span: Span = field(default=(0, 0, 0, 0), compare=False, repr=False, kw_only=True)

    def exprs(self) -> tuple[Expr, ...]:
        """Expressions evaluated by this statement itself (not nested blocks)."""
        return ()

    def blocks(self) -> tuple[tuple[str, tuple], ...]:
        return ()

    @property
    def reads(self) -> frozenset:
        r: frozenset = frozenset()
        for e in self.exprs():
            r |= e.reads
        return r

    def calls(self) -> list[CallExpr]:
        return [c for e in self.exprs() for c in iter_calls(e)]

    def writes(self) -> set[str]:
        out: set[str] = set()
        for e in self.exprs():
            out |= expr_writes(e)
        return out


@dataclass(frozen=True)
class Assignment(Statement):
    lhs: Expr = None
    op: str = "="  # = += -= *= ... ++ -- delete
    rhs: Optional[Expr] = None
    decl_type: Optional[str] = None

    def exprs(self):
        return (self.lhs,) if self.rhs is None else (self.lhs, self.rhs)

    @property
    def reads(self):
        # A plain store does not read its target; index/member sub-expressions do.
        r = _target_subreads(self.lhs)
        if self.rhs is not None:
            r |= self.rhs.reads
        if self.op not in ("=", "delete"):
            r |= self.lhs.reads
        return r

    def writes(self):
        out = set()
        if self.rhs is not None or self.op != "=":
            out |= root_names(self.lhs)
        if self.rhs is not None:
            out |= expr_writes(self.rhs)
        return out


def _target_subreads(target: Expr) -> frozenset:
    if isinstance(target, Index):
        r = _target_subreads(target.base)
        return r | target.index.reads if target.index is not None else r
    if isinstance(target, Member):
        return _target_subreads(target.obj)
    if isinstance(target, Tuple):
        r: frozenset = frozenset()
        for item in target.items:
            if item is not None:
                r |= _target_subreads(item)
        return r
    return frozenset()


@dataclass(frozen=True)
class Call(Statement):
    expr: CallExpr = None

    def exprs(self):
        return (self.expr,)

    @property
    def callee(self) -> str:
        return self.expr.path

    @property
    def args(self) -> tuple:
        return self.expr.args

    @property
    def kind(self) -> str:
        return self.expr.kind


@dataclass(frozen=True)
class Require(Statement):
    cond: Expr = None
    kind: str = "require"  # require | assert
    message: Optional[Expr] = None

    def exprs(self):
        return (self.cond,) if self.message is None else (self.cond, self.message)


@dataclass(frozen=True)
class If(Statement):
    cond: Expr = None
    then: tuple = ()
    orelse: Optional[tuple] = None

    def exprs(self):
        return (self.cond,)

    def blocks(self):
        out = [("then", self.then)]
        if self.orelse is not None:
            out.append(("else", self.orelse))
        return tuple(out)


@dataclass(frozen=True)
class Loop(Statement):
    kind: str = "for"  # for | while
    cond: Optional[Expr] = None
    init: Optional[Statement] = None
    updates: tuple = ()
    body: tuple = ()
    do_while: bool = False

    def exprs(self):
        return () if self.cond is None else (self.cond,)

    def blocks(self):
        return (("body", self.body),)


@dataclass(frozen=True)
class Return(Statement):
    expr: Optional[Expr] = None

    def exprs(self):
        return () if self.expr is None else (self.expr,)


@dataclass(frozen=True)
class Revert(Statement):
    args: tuple = ()

    def exprs(self):
        return tuple(self.args)


@dataclass(frozen=True)
class Throw(Statement):
    pass


@dataclass(frozen=True)
class Opaque(Statement):
    """Statement outside the supported subset; its expressions are kept when parseable."""

    text: str = ""
    parsed: tuple = ()
    names: frozenset = frozenset()

    def exprs(self):
        return tuple(self.parsed)

    @property
    def reads(self):
        r = frozenset(self.names)
        for e in self.parsed:
            r |= e.reads
        return r


StatementT = Union[Assignment, Call, Require, If, Loop, Return, Revert, Throw, Opaque]


@dataclass(frozen=True)
class FunctionIR:
    name: str
    params: tuple  # ((name, type), ...)
    statements: tuple
    modifiers: tuple = ()
    returns: tuple = ()
    contract: Optional[str] = field(default=None, compare=False)
    state_vars: dict = field(default_factory=dict, compare=False, repr=False)
    span: Span = field(default=(0, 0, 0, 0), compare=False, repr=False)

    def locals(self) -> dict[str, str]:
        out = {}
        for fs in flatten(self.statements):
            st = fs.stmt
            if isinstance(st, Assignment) and st.decl_type is not None:
                for n in root_names(st.lhs):
                    out.setdefault(n, st.decl_type)
        return out


@dataclass(frozen=True)
class FlatStmt:
    """A statement with its execution-order index and enclosing constructs."""

    index: int
    stmt: Statement
    ancestors: tuple  # ((Statement, role), ...), outermost first
    role: str = "stmt"  # stmt | loop-init | loop-update

    @property
    def in_loop(self) -> bool:
        return any(isinstance(a, Loop) and role != "init" for a, role in self.ancestors)

    @property
    def in_if(self) -> bool:
        return any(isinstance(a, If) for a, _ in self.ancestors)


def flatten(statements, ancestors=()) -> list[FlatStmt]:
    """Pre-order, execution-order listing of every statement.

    Loops expand as init, header, body, updates.
    """
    out: list[FlatStmt] = []

    def visit(stmts, anc):
        for st in stmts:
            if isinstance(st, Loop):
                if st.init is not None:
                    out.append(FlatStmt(len(out), st.init, anc + ((st, "init"),), "loop-init"))
                out.append(FlatStmt(len(out), st, anc))
                visit(st.body, anc + ((st, "body"),))
                for u in st.updates:
                    out.append(FlatStmt(len(out), u, anc + ((st, "update"),), "loop-update"))
            else:
                out.append(FlatStmt(len(out), st, anc))
                for role, block in st.blocks():
                    visit(block, anc + ((st, role),))

    visit(statements, tuple(ancestors))
    return out


def function_calls(ir: FunctionIR) -> list[tuple[int, CallExpr]]:
    return [(fs.index, c) for fs in flatten(ir.statements) for c in fs.stmt.calls()]
