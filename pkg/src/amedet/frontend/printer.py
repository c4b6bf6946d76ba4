"""Source rendering of IR; re-parsing the output yields an equal IR."""

from __future__ import annotations

from .ir import (
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
)


def format_expr(e: Expr) -> str:
    # Fully parenthesized so precedence never changes the tree on re-parse.
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, Binary):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Unary):
        if e.op == "new":
            return f"new {format_expr(e.operand)}"
        if not e.prefix:
            return f"({format_expr(e.operand)}{e.op})"
        sep = " " if e.op == "delete" else ""
        return f"({e.op}{sep}{format_expr(e.operand)})"
    if isinstance(e, Member):
        return f"{format_expr(e.obj)}.{e.name}"
    if isinstance(e, Index):
        inner = "" if e.index is None else format_expr(e.index)
        return f"{format_expr(e.base)}[{inner}]"
    if isinstance(e, CallExpr):
        callee = format_expr(e.callee)
        return f"{callee}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Assign):
        if e.value is None:
            return format_expr(e.target)
        return f"({format_expr(e.target)} {e.op} {format_expr(e.value)})"
    if isinstance(e, Ternary):
        return f"({format_expr(e.cond)} ? {format_expr(e.then)} : {format_expr(e.orelse)})"
    if isinstance(e, Tuple):
        items = ["" if i is None else format_expr(i) for i in e.items]
        if len(items) == 1:
            return f"[{items[0]}]"  # one-element tuples only arise from array literals
        return f"({', '.join(items)})"
    raise TypeError(f"cannot format {type(e).__name__}")


def _simple(st) -> str:
    """A statement without its trailing semicolon (for ``for`` headers)."""
    if isinstance(st, Assignment):
        if st.decl_type is not None:
            if isinstance(st.lhs, Tuple):
                types = st.decl_type.split(",")
                parts = []
                it = iter(types)
                for item in st.lhs.items:
                    parts.append("" if item is None else f"{next(it)} {item.name}")
                lhs = f"({', '.join(parts)})"
            else:
                lhs = f"{st.decl_type} {format_expr(st.lhs)}"
            return lhs if st.rhs is None else f"{lhs} = {format_expr(st.rhs)}"
        if st.op in ("++", "--"):
            return f"{format_expr(st.lhs)}{st.op}"
        if st.op == "delete":
            return f"delete {format_expr(st.lhs)}"
        return f"{format_expr(st.lhs)} {st.op} {format_expr(st.rhs)}"
    if isinstance(st, Call):
        return format_expr(st.expr)
    if isinstance(st, Opaque) and st.parsed:
        return format_expr(st.parsed[0])
    raise TypeError(f"cannot format {type(st).__name__} inline")


def format_block(stmts, indent: int) -> list[str]:
    lines: list[str] = []
    for st in stmts:
        lines.extend(format_statement(st, indent))
    return lines


def format_statement(st, indent: int = 1) -> list[str]:
    pad = "    " * indent
    if isinstance(st, (Assignment, Call)):
        return [f"{pad}{_simple(st)};"]
    if isinstance(st, Require):
        args = format_expr(st.cond)
        if st.message is not None:
            args += f", {format_expr(st.message)}"
        return [f"{pad}{st.kind}({args});"]
    if isinstance(st, If):
        lines = [f"{pad}if ({format_expr(st.cond)}) {{"]
        lines += format_block(st.then, indent + 1)
        if st.orelse is not None:
            lines.append(f"{pad}}} else {{")
            lines += format_block(st.orelse, indent + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(st, Loop):
        if st.do_while:
            lines = [f"{pad}do {{"]
            lines += format_block(st.body, indent + 1)
            lines.append(f"{pad}}} while ({format_expr(st.cond)});")
            return lines
        if st.kind == "while":
            head = f"while ({format_expr(st.cond)})"
        else:
            init = "" if st.init is None else _simple(st.init)
            cond = "" if st.cond is None else format_expr(st.cond)
            updates = ", ".join(_simple(u) for u in st.updates)
            head = f"for ({init}; {cond}; {updates})"
        lines = [f"{pad}{head} {{"]
        lines += format_block(st.body, indent + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(st, Return):
        return [f"{pad}return;" if st.expr is None else f"{pad}return {format_expr(st.expr)};"]
    if isinstance(st, Revert):
        return [f"{pad}revert({', '.join(format_expr(a) for a in st.args)});"]
    if isinstance(st, Throw):
        return [f"{pad}throw;"]
    if isinstance(st, Opaque):
        if st.parsed:
            return [f"{pad}{format_expr(st.parsed[0])};"]
        text = st.text
        if not text.endswith(";") and not text.endswith("}"):
            text += ";"
        return [f"{pad}{text}"]
    raise TypeError(f"cannot format {type(st).__name__}")


def format_function(ir: FunctionIR) -> str:
    params = ", ".join(f"{t} {n}".strip() for n, t in ir.params)
    head = f"function {ir.name}({params})"
    if ir.modifiers:
        head += " " + " ".join(ir.modifiers)
    if ir.returns:
        head += " returns (" + ", ".join(f"{t} {n}".strip() for n, t in ir.returns) + ")"
    lines = [head + " {"]
    lines += format_block(ir.statements, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"
