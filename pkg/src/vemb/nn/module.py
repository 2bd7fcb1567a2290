from __future__ import annotations

import numpy as np
from scipy.stats import truncnorm

from .tensor import Parameter


class Module:
    """Container that discovers parameters from its attributes.

    Parameter names are dotted attribute paths (``blocks.3.w_real``), unique
    within a model and used as checkpoint keys.
    """

    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def modules(self):
        yield self
        for value in vars(self).values():
            items = value if isinstance(value, (list, tuple)) else [value]
            for item in items:
                if isinstance(item, Module):
                    yield from item.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def state_dict(self) -> dict:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise KeyError(f"state mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.shape}")
            p.data = arr.astype(p.dtype).copy()


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator, dtype=np.float64) -> Parameter:
    bound = np.sqrt(6.0 / fan_in)
    return Parameter(rng.uniform(-bound, bound, size=shape).astype(dtype))


def trunc_normal(shape, rng: np.random.Generator, std: float = 0.02, dtype=np.float64) -> Parameter:
    values = truncnorm.rvs(-2.0, 2.0, scale=std, size=shape, random_state=rng)
    return Parameter(np.asarray(values, dtype=dtype))


def zeros(shape, dtype=np.float64) -> Parameter:
    return Parameter(np.zeros(shape, dtype=dtype))


def ones(shape, dtype=np.float64) -> Parameter:
    return Parameter(np.ones(shape, dtype=dtype))
