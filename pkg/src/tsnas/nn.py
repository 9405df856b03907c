"""Tiny module system on top of the tensor core.

Modules auto-register parameter tensors and child modules on attribute
assignment, expose ``named_parameters`` for the optimizer/checkpoint
registries, and carry a train/eval flag that dropout consults.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .rng import Rng
from .tensor import Tensor


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def register(self, name, value):
        setattr(self, name, value)

    def named_parameters(self, prefix=""):
        out = []
        for name, p in self._params.items():
            if p.requires_grad:
                out.append((f"{prefix}{name}", p))
        for name, child in self._children.items():
            out.extend(child.named_parameters(prefix=f"{prefix}{name}."))
        return out

    def parameters(self):
        seen = set()
        out = []
        for _, p in self.named_parameters():
            if id(p) not in seen:
                seen.add(id(p))
                out.append(p)
        return out

    def set_training(self, flag: bool):
        object.__setattr__(self, "training", bool(flag))
        for child in self._children.values():
            child.set_training(flag)

    def train(self):
        self.set_training(True)

    def eval(self):
        self.set_training(False)


class ModuleList(Module):
    def __init__(self, mods=()):
        super().__init__()
        self._items = []
        for m in mods:
            self.append(m)

    def append(self, m):
        self._children[str(len(self._items))] = m
        self._items.append(m)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


class ModuleDict(Module):
    def __init__(self):
        super().__init__()
        self._items = {}

    def __setitem__(self, key, m):
        self._children[str(key)] = m
        self._items[key] = m

    def __getitem__(self, key):
        return self._items[key]

    def __contains__(self, key):
        return key in self._items

    def items(self):
        return self._items.items()

    def values(self):
        return self._items.values()

    def keys(self):
        return self._items.keys()


class Linear(Module):
    def __init__(self, d_in, d_out, rng: Rng, dtype=np.float32, bias=True):
        super().__init__()
        bound = 1.0 / np.sqrt(d_in)
        self.weight = Tensor(
            rng.uniform((d_in, d_out), -bound, bound, dtype=dtype), requires_grad=True
        )
        self.bias = (
            Tensor(rng.uniform((d_out,), -bound, bound, dtype=dtype), requires_grad=True)
            if bias
            else None
        )

    def __call__(self, x):
        y = T.matmul(x, self.weight)
        if self.bias is not None:
            y = T.add(y, self.bias)
        return y


class LayerNorm(Module):
    def __init__(self, dim, dtype=np.float32, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return T.layer_norm(x, self.gamma, self.beta, eps=self.eps)


class Dropout(Module):
    def __init__(self, p, rng: Rng):
        super().__init__()
        self.p = float(p)
        self.rng = rng

    def __call__(self, x):
        return T.dropout(x, self.p, self.training, self.rng)
