"""Named, seeded parameter containers."""
from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, ParameterError
from .tensor import Tensor


class ParamSet:
    """Ordered map from dotted parameter path to a gradient-tracked Tensor.

    Parameters are created lazily by layers through :meth:`get_or_init` and
    drawn uniformly from ``[-sqrt(1/fan_in), sqrt(1/fan_in)]``. Values depend
    only on ``rng_seed`` and on the order in which parameters are created.
    """

    def __init__(self, rng_seed=0):
        if rng_seed < 0:
            raise ParameterError(f"rng_seed must be unsigned, got {rng_seed}")
        self.rng_seed = int(rng_seed)
        self._rng = np.random.default_rng(self.rng_seed)
        self._params = {}

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def values(self):
        return list(self._params.values())

    def items(self):
        return list(self._params.items())

    def add(self, name, value):
        if name in self._params:
            raise ParameterError(f"parameter '{name}' already exists")
        tensor = Tensor(value, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def get_or_init(self, name, shape, fan_in=None, zero=False):
        shape = tuple(int(s) for s in shape)
        existing = self._params.get(name)
        if existing is not None:
            if existing.shape != shape:
                raise DimensionError(
                    f"parameter '{name}' has shape {existing.shape}, layer expects {shape}"
                )
            return existing
        if zero:
            return self.add(name, np.zeros(shape))
        fan_in = fan_in if fan_in is not None else shape[0]
        bound = math.sqrt(1.0 / fan_in)
        return self.add(name, self._rng.uniform(-bound, bound, size=shape))

    def set(self, name, value):
        """Replace a parameter's value, keeping its name and tracking flag."""
        old = self._params[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != old.shape:
            raise DimensionError(f"parameter '{name}' has shape {old.shape}, got {value.shape}")
        self._params[name] = Tensor(value, requires_grad=True, name=name)

    def subset(self, prefix):
        """Names of parameters whose path starts with ``prefix``."""
        return [n for n in self._params if n == prefix or n.startswith(prefix + ".")]

    def zero_grad(self):
        for p in self._params.values():
            p.grad = np.zeros(p.shape)

    def copy(self):
        other = ParamSet(self.rng_seed)
        for name, p in self._params.items():
            other.add(name, p.data)
        other._rng.bit_generator.state = self._rng.bit_generator.state
        return other

    def to_dict(self):
        return {
            name: {"shape": list(p.shape), "values": p.data.ravel().tolist()}
            for name, p in self._params.items()
        }

    @classmethod
    def from_dict(cls, payload, rng_seed=0):
        params = cls(rng_seed)
        for name, entry in payload.items():
            values = np.asarray(entry["values"], dtype=np.float64)
            params.add(name, values.reshape(entry["shape"]))
        return params
