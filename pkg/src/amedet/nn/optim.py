"""Named parameter storage and the Adam update."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .tensor import Tensor


class ParameterStore:
    """Ordered name -> parameter map with Adam moment buffers."""

    def __init__(self):
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def n_values(self) -> int:
        return int(np.sum([p.data.size for p in self.params.values()]))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load(self, values: dict) -> None:
        for k, arr in values.items():
            p = self.params[k]
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"parameter {k!r}: shape {arr.shape} != {p.data.shape}")
            p.data = arr.copy()


def optimizer_step(store: ParameterStore, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> None:
    """One bias-corrected Adam step over every parameter with a gradient; grads are zeroed."""
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in store.params.items():
        g = p.grad
        if g is None:
            continue
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad = None
