from typing import Mapping, Optional, Protocol

import numpy as np

from ..errors import NonFiniteGradientError

Params = Mapping[str, np.ndarray]


def check_finite(grads: Params):
    for pid in sorted(grads):
        if not np.all(np.isfinite(grads[pid])):
            raise NonFiniteGradientError(pid)


def sgd_step(
    params: Params,
    grads: Params,
    lr: float,
    momentum: float = 0.0,
    velocity: Optional[Params] = None,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Momentum SGD on the ids in `grads`: v = momentum * v + g, p = p - lr * v.

    Returns new (params, velocity), the inputs are left untouched.
    Parameters without a gradient are carried over as they are.
    """
    check_finite(grads)
    new_params = dict(params)
    new_velocity = dict(velocity or {})
    for pid in sorted(grads):
        g = grads[pid]
        if pid not in params:
            raise KeyError(f"Gradient for unknown parameter {pid}")
        v_prev = new_velocity.get(pid)
        v = g if v_prev is None or momentum == 0 else momentum * v_prev + g
        new_velocity[pid] = v
        new_params[pid] = params[pid] - lr * v
    return new_params, new_velocity


class Optimizer(Protocol):
    def step(self, params: Params, grads: Params) -> dict[str, np.ndarray]: ...


class SGD:
    def __init__(self, lr: float, momentum: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: Params, grads: Params) -> dict[str, np.ndarray]:
        new_params, self.velocity = sgd_step(
            params, grads, self.lr, self.momentum, self.velocity
        )
        return new_params
