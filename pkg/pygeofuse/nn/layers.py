# pygeofuse/nn/layers.py

from typing import Dict, Iterator, Tuple

import numpy as np

from ..errors import DataError
from .tensor import Parameter, Tensor, layer_norm, matmul


class Module:
    """
    Container of Parameters and sub-modules.

    Parameters are discovered from public attributes (Parameters, Modules and
    lists of Modules) in definition order. A module or parameter shared by
    several owners is visited once, under the first name that reaches it.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        yield from self._walk(prefix, set())

    def _walk(self, prefix: str, seen: set) -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            if attr.startswith("_"):
                continue
            name = f"{prefix}{attr}"
            items = enumerate(value) if isinstance(value, (list, tuple)) else [(None, value)]
            for position, item in items:
                item_name = name if position is None else f"{name}.{position}"
                if id(item) in seen:
                    continue
                if isinstance(item, Parameter):
                    seen.add(id(item))
                    yield item_name, item
                elif isinstance(item, Module):
                    seen.add(id(item))
                    yield from item._walk(item_name + ".", seen)

    def parameters(self) -> Dict[str, Parameter]:
        return dict(self.named_parameters())

    def assign_names(self) -> None:
        """Rename every reachable Parameter to its dotted path."""
        for name, param in self.named_parameters():
            param.name = name

    def trainable_parameters(self) -> Dict[str, Parameter]:
        return {name: p for name, p in self.named_parameters() if not p.frozen}

    def zero_grad(self) -> None:
        for _, param in self.named_parameters():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise DataError(f"State mismatch: missing {missing}, unexpected {unexpected}")
        for name, param in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise DataError(
                    f"Tensor {name} has shape {value.shape} in the state but {param.shape} in the model"
                )
            param.data[...] = value


class Linear(Module):
    """x @ W + b with W of shape (in, out), initialized uniform(-1/sqrt(in), 1/sqrt(in))."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Parameter("weight", rng.uniform(-bound, bound, size=(in_features, out_features)))
        self.bias = Parameter("bias", rng.uniform(-bound, bound, size=(out_features,)))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5):
        self.gamma = Parameter("gamma", np.ones(width))
        self.beta = Parameter("beta", np.zeros(width))
        self._eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self._eps)
