"""Independent reference computations used as test oracles."""

import numpy as np

from amedet.graph import CORE
from amedet import nn


def all_pairs_hops(graph):
    """Floyd-Warshall hop distances over edges taken as undirected."""
    ids = [n.id for n in graph.nodes]
    pos = {i: k for k, i in enumerate(ids)}
    inf = float("inf")
    d = np.full((len(ids), len(ids)), inf)
    np.fill_diagonal(d, 0)
    for e in graph.edges:
        a, b = pos[e.start], pos[e.end]
        if a != b:
            d[a, b] = d[b, a] = 1
    for k in range(len(ids)):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return {(i, j): d[pos[i], pos[j]] for i in ids for j in ids}


def brute_nearest_core(graph):
    """Nearest core by brute force, same tie rule as the library convention.

    Ties: smallest temporal index over edges that enter the core from a node
    one hop closer to the source, then smallest core id. Unreachable nodes go to
    the smallest core id.
    """
    dist = all_pairs_hops(graph)
    cores = sorted(n.id for n in graph.nodes if n.kind == CORE)
    out = {}
    for n in graph.nodes:
        if n.kind == CORE:
            out[n.id] = n.id
            continue
        finite = [c for c in cores if dist[(n.id, c)] < float("inf")]
        if not finite:
            out[n.id] = cores[0]
            continue
        best = min(dist[(n.id, c)] for c in finite)
        tied = [c for c in finite if dist[(n.id, c)] == best]

        def last_hop(c):
            ts = []
            for e in graph.edges:
                for a, b in ((e.start, e.end), (e.end, e.start)):
                    if b == c and a != c and dist[(n.id, a)] == best - 1:
                        ts.append(e.t)
            return min(ts)

        out[n.id] = min(tied, key=lambda c: (last_hop(c), c))
    return out


def numeric_grad(f, x, eps=1e-5):
    """Central differences of scalar ``f()`` w.r.t. the array ``x`` (mutated in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + eps
        hi = f()
        x[idx] = old - eps
        lo = f()
        x[idx] = old
        g[idx] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b):
    """Elementwise relative error with an absolute floor for near-zero gradients."""
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)


def gradcheck(build_loss, params, eps=1e-5):
    """Max relative error between backprop and finite differences.

    ``build_loss`` maps a list of leaf tensors to a scalar tensor; ``params``
    are numpy arrays that become those leaves.
    """
    leaves = [nn.Tensor(p, requires_grad=True) for p in params]
    loss = build_loss(leaves)
    nn.backward(loss)
    worst = 0.0
    for leaf, p in zip(leaves, params):
        arr = p.copy()

        def f():
            return float(build_loss([nn.Tensor(arr if q is p else q) for q in params]).data)

        num = numeric_grad(f, arr, eps)
        ana = leaf.grad if leaf.grad is not None else np.zeros_like(arr)
        worst = max(worst, float(rel_err(ana, num).max(initial=0.0)))
    return worst
