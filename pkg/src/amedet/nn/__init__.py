from .checkpoint import LoadError
from .optim import ParameterStore, optimizer_step
from .tensor import (
    NotScalarLoss,
    ShapeMismatch,
    Tensor,
    add,
    backward,
    bce_with_logits,
    concat,
    gather,
    inner_product,
    matmul,
    mean,
    mul,
    relu,
    scatter_add,
    segment_sum,
    sigmoid,
    softmax,
    sub,
    tanh,
)

__all__ = [
    "LoadError",
    "NotScalarLoss",
    "ParameterStore",
    "ShapeMismatch",
    "Tensor",
    "add",
    "backward",
    "bce_with_logits",
    "concat",
    "gather",
    "inner_product",
    "matmul",
    "mean",
    "mul",
    "optimizer_step",
    "relu",
    "scatter_add",
    "segment_sum",
    "sigmoid",
    "softmax",
    "sub",
    "tanh",
]
