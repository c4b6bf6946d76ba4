"""JSON form of :class:`FunctionIR` (the ``--emit-ir`` dump).

Every node becomes an object whose ``node`` key names its class; the
remaining keys are the dataclass fields. Expressions also carry their
sorted ``reads`` set and statements their ``span`` as
``[start_line, start_col, end_line, end_col]``.
"""

from __future__ import annotations

import dataclasses

from .ir import Expr, FunctionIR, Statement


def _node(obj):
    if isinstance(obj, (Expr, Statement)):
        out = {"node": type(obj).__name__}
        for f in dataclasses.fields(obj):
            if f.name in ("reads", "span"):
                continue
            out[f.name] = _node(getattr(obj, f.name))
        if isinstance(obj, Expr):
            out["reads"] = sorted(obj.reads)
        else:
            out["span"] = list(obj.span)
        return out
    if isinstance(obj, (tuple, list)):
        return [_node(x) for x in obj]
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def ir_to_dict(ir: FunctionIR) -> dict:
    return {
        "name": ir.name,
        "contract": ir.contract,
        "params": [{"name": n, "type": t} for n, t in ir.params],
        "returns": [{"name": n, "type": t} for n, t in ir.returns],
        "modifiers": list(ir.modifiers),
        "span": list(ir.span),
        "statements": _node(ir.statements),
    }
