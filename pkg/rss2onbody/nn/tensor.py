from typing import Callable, Optional, Sequence, Union

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A node of the computation graph. Data is float64 and never mutated by ops"""

    clamped: int = 0
    """Rows clamped by cross_entropy_loss"""

    def __init__(
        self,
        data: Union[np.ndarray, float, Sequence[float]],
        requires_grad: bool = False,
        *,
        op: str = "leaf",
        parents: Sequence["Tensor"] = (),
        backward: Optional[BackwardFn] = None,
        name: Optional[str] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.op = op
        self.parents = tuple(parents)
        self._backward = backward
        self.name = name
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        return float(self.data)

    def grad_or_zero(self) -> np.ndarray:
        return self.grad if self.grad is not None else np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, seed_grad: Optional[np.ndarray] = None):
        """Accumulates d self / d leaf into `.grad` of every reachable leaf"""
        for leaf, g in _backprop(self, seed_grad).items():
            leaf.grad = g if leaf.grad is None else leaf.grad + g

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Tensor({self.op}{label}, shape={self.shape}, requires_grad={self.requires_grad})"


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return order


def _backprop(
    root: Tensor, seed_grad: Optional[np.ndarray] = None
) -> dict[Tensor, np.ndarray]:
    if not root.requires_grad:
        return {}
    if seed_grad is None:
        if root.data.size != 1:
            raise ValueError("backward without a seed gradient needs a scalar")
        seed_grad = np.ones_like(root.data)
    grads: dict[int, np.ndarray] = {id(root): seed_grad}
    leaves: dict[Tensor, np.ndarray] = {}
    for node in reversed(_topological_order(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            leaves[node] = g
            continue
        assert node._backward is not None
        for parent, pg in zip(node.parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    return leaves


def gradients(root: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
    """d root / d t for every t in wrt, exact zeros where t is unreachable. Does not touch `.grad`"""
    found = _backprop(root)
    return [found[t] if t in found else np.zeros_like(t.data) for t in wrt]
