# pygeofuse/training/optimizer.py

from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigurationError, ContractError
from ..nn.tensor import Parameter, Tensor

GradientMap = Mapping[str, Union[Tensor, np.ndarray]]

# Decay points as fractions of the full schedule (120 and 180 of 210 epochs)
MILESTONE_RATIOS = (120 / 210, 180 / 210)
DEFAULT_FACTORS = (0.1, 0.1)


def sgd_step(
    params: Mapping[str, Parameter],
    grads: GradientMap,
    lr: float,
    momentum: float = 0.9,
    weight_decay: float = 5e-4,
    velocity: Optional[Dict[str, np.ndarray]] = None,
) -> Dict[str, np.ndarray]:
    """
    One classical-momentum SGD update, in place.

    v <- momentum * v + (grad + weight_decay * theta); theta <- theta - lr * v.
    Frozen Parameters are skipped. Returns the updated velocity map.
    """
    velocity = {} if velocity is None else velocity
    for name, param in params.items():
        if param.frozen:
            continue
        if name not in grads:
            raise ContractError(f"No gradient for parameter {name}")
        grad = grads[name]
        grad = grad.data if isinstance(grad, Tensor) else np.asarray(grad, dtype=np.float64)
        if grad.shape != param.shape:
            raise ContractError(f"Gradient of {name} has shape {grad.shape}; parameter has {param.shape}")
        update = grad + weight_decay * param.data
        if name in velocity:
            update = momentum * velocity[name] + update
        velocity[name] = update
        param.data -= lr * update
    return velocity


class SGD:
    """Classical momentum SGD with L2 weight decay over a fixed parameter map."""

    def __init__(self, params: Mapping[str, Parameter], momentum: float = 0.9, weight_decay: float = 5e-4):
        if not 0.0 <= momentum < 1.0:
            raise ConfigurationError(f"momentum is {momentum} but must be in [0, 1)")
        if weight_decay < 0:
            raise ConfigurationError(f"weight_decay is {weight_decay} but must be >= 0")
        self.params = dict(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: Dict[str, np.ndarray] = {}

    def step(self, grads: GradientMap, lr: float) -> None:
        sgd_step(self.params, grads, lr, self.momentum, self.weight_decay, self.velocity)


class MultiStepSchedule:
    """
    Learning rate that is multiplied by `factors[i]` from epoch `milestones[i]` on;
    factors accumulate.
    """

    def __init__(self, base_lr: float, milestones: Sequence[int], factors: Sequence[float] = DEFAULT_FACTORS):
        milestones, factors = tuple(int(m) for m in milestones), tuple(float(f) for f in factors)
        if base_lr < 0:
            raise ConfigurationError(f"lr is {base_lr} but must be >= 0")
        if len(milestones) != len(factors):
            raise ConfigurationError(f"{len(milestones)} milestones but {len(factors)} factors")
        if any(b <= a for a, b in zip(milestones, milestones[1:])):
            raise ConfigurationError(f"milestones {list(milestones)} must be strictly increasing")
        if any(not 0.0 < f <= 1.0 for f in factors):
            raise ConfigurationError(f"factors {list(factors)} must lie in (0, 1]")
        self.base_lr = base_lr
        self.milestones = milestones
        self.factors = factors

    def lr_at(self, epoch: int) -> float:
        lr = self.base_lr
        for milestone, factor in zip(self.milestones, self.factors):
            if epoch >= milestone:
                lr *= factor
        return lr


def scaled_milestones(epochs: int, ratios: Tuple[float, ...] = MILESTONE_RATIOS) -> Tuple[int, ...]:
    """Milestones at the same fractions of `epochs` (30 -> (17, 26))."""
    if epochs < 1:
        raise ConfigurationError(f"epochs is {epochs} but must be >= 1")
    out = []
    for ratio in ratios:
        milestone = max(1, int(round(epochs * ratio)))
        if not out or milestone > out[-1]:
            out.append(milestone)
    return tuple(out)
