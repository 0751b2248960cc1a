"""
Parameter containers for models built on `Tensor`.

`Module` discovers parameters by walking instance attributes: `Parameter` attributes,
nested `Module` attributes, and lists or tuples of either. Names are dotted paths
(`blocks.0.weight`), which is also the key layout of `state_dict()` and of checkpoints.
"""

from typing import Dict, Iterator, Tuple

import numpy as np

from bendr.app.core.exceptions import ShapeError
from bendr.app.core.tensor.tensor import Tensor


class Parameter(Tensor):
    """ A leaf tensor that is trained by default. """

    def __init__(self, data, requires_grad: bool = True, name: str = None):
        super().__init__(data, requires_grad=requires_grad, name=name)


class Module:
    """
    Base class for models.

    Subclasses assign `Parameter` and `Module` attributes in `__init__` and implement `forward`.
    """

    training: bool = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError("forward must be implemented by subclasses.")

    def _children(self) -> Iterator[Tuple[str, object]]:
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        """ Yield `(dotted_name, parameter)` pairs in definition order. """
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            else:
                yield from value.named_parameters(prefix=f"{full}.")

    def parameters(self) -> Iterator[Parameter]:
        for _, p in self.named_parameters():
            yield p

    def trainable_parameters(self) -> Iterator[Parameter]:
        for p in self.parameters():
            if p.requires_grad:
                yield p

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        """ Reset every gradient buffer to zeros, so unused parameters read exactly 0. """
        for p in self.parameters():
            p.zero_grad()

    def freeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = False
        return self

    def unfreeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = True
        return self

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        """
        Copy values into the parameters of this module.

        Args:
            state (Dict[str, np.ndarray]): Mapping from dotted parameter name to values.
            strict (bool): Require the key sets to match exactly.

        Raises:
            ShapeError: On missing/unexpected keys (strict mode) or shape mismatches.
        """
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise ShapeError(f"state_dict mismatch: missing={missing}, unexpected={unexpected}")
        for name, values in state.items():
            if name not in own:
                continue
            values = np.asarray(values, dtype=np.float64)
            if values.shape != own[name].shape:
                raise ShapeError(f"Parameter '{name}' expects shape {own[name].shape}, got {values.shape}")
            own[name].data = values.copy()

    def num_parameters(self, trainable_only: bool = False) -> int:
        params = self.trainable_parameters() if trainable_only else self.parameters()
        return int(sum(p.size for p in params))


def uniform_fan_in(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator) -> Parameter:
    """ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization. """
    bound = 1.0 / np.sqrt(fan_in)
    return Parameter(rng.uniform(-bound, bound, size=shape))


def xavier_uniform(shape: Tuple[int, int], rng: np.random.Generator, gain: float = 1.0) -> Parameter:
    """ Glorot uniform initialization for an `out x in` matrix. """
    fan_out, fan_in = shape
    bound = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return Parameter(rng.uniform(-bound, bound, size=shape))
