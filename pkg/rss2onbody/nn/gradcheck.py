from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor, gradients

GRAD_CHECK_STEP = 1e-5


def grad_check(
    fn: Callable[[Sequence[Tensor]], Tensor],
    point: Sequence[np.ndarray],
    h: float = GRAD_CHECK_STEP,
    samples_per_input: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Max relative error between the analytic gradient of the scalar `fn` and central differences.

    Per input the error is max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf, 1e-8),
    taken over all entries or over `samples_per_input` random ones.
    """
    rng = np.random.default_rng(seed)
    base = [np.array(p, dtype=np.float64) for p in point]
    leaves = [Tensor(p, requires_grad=True) for p in base]
    analytic = gradients(fn(leaves), leaves)

    def value_at(i: int, flat_index: int, delta: float) -> float:
        moved = [b.copy() for b in base]
        moved[i].reshape(-1)[flat_index] += delta
        return fn([Tensor(m) for m in moved]).item()

    worst = 0.0
    for i, b in enumerate(base):
        size = b.size
        if size == 0:
            continue
        if samples_per_input is not None and samples_per_input < size:
            entries = rng.choice(size, samples_per_input, replace=False)
        else:
            entries = np.arange(size)
        a = analytic[i].reshape(-1)[entries]
        numeric = np.array(
            [(value_at(i, int(e), h) - value_at(i, int(e), -h)) / (2 * h) for e in entries]
        )
        denom = max(float(np.abs(a).max()), float(np.abs(numeric).max()), 1e-8)
        worst = max(worst, float(np.abs(a - numeric).max()) / denom)
    return worst
