from .tensor import Tensor, gradients
from .ops import (
    add,
    sub,
    mul,
    scale,
    sum_all,
    reshape,
    flatten,
    conv1d,
    dense,
    relu,
    softmax,
    concat,
    stop_gradient,
    one_hot,
    cross_entropy_loss,
)
from .optim import SGD, Optimizer, sgd_step
from .gradcheck import grad_check

__all__ = [
    "Tensor",
    "gradients",
    "add",
    "sub",
    "mul",
    "scale",
    "sum_all",
    "reshape",
    "flatten",
    "conv1d",
    "dense",
    "relu",
    "softmax",
    "concat",
    "stop_gradient",
    "one_hot",
    "cross_entropy_loss",
    "SGD",
    "Optimizer",
    "sgd_step",
    "grad_check",
]
