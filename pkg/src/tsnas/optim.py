"""Optimizers over named parameter lists: Adam and momentum SGD.

Both step over explicit parameter lists so the weight/architecture
partition stays auditable; grads are consumed (reset to None) by a step.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import ContractError, Tensor


def clip_grad_norm(params, max_norm):
    """Scale grads in place so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = math.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


class AdamState:
    """Per-parameter moment buffers plus the shared step counter."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {}
        self.v = {}


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.state = AdamState(lr, betas[0], betas[1], eps, weight_decay)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr=None):
        st = self.state
        st.step_count += 1
        lr = st.lr if lr is None else lr
        bc1 = 1.0 - st.beta1**st.step_count
        bc2 = 1.0 - st.beta2**st.step_count
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ContractError(f"Adam.step: parameter {i} has no grad")
            g = p.grad
            if st.weight_decay:
                g = g + st.weight_decay * p.data
            if i not in st.m:
                st.m[i] = np.zeros_like(p.data)
                st.v[i] = np.zeros_like(p.data)
            st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g
            st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * (g * g)
            mhat = st.m[i] / bc1
            vhat = st.v[i] / bc2
            p.data -= (lr * mhat / (np.sqrt(vhat) + st.eps)).astype(p.data.dtype)
            p.grad = None

    def state_dict(self):
        st = self.state
        out = {"step_count": st.step_count}
        for i in st.m:
            out[f"m{i}"] = st.m[i]
            out[f"v{i}"] = st.v[i]
        return out

    def load_state_dict(self, d):
        st = self.state
        st.step_count = int(d["step_count"])
        st.m = {}
        st.v = {}
        for key, val in d.items():
            if key.startswith("m") and key != "step_count":
                st.m[int(key[1:])] = val
            elif key.startswith("v"):
                st.v[int(key[1:])] = val


class SGDMomentum:
    def __init__(self, params, lr=0.025, momentum=0.9, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buf = {}

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ContractError(f"SGDMomentum.step: parameter {i} has no grad")
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            if self.momentum:
                if i not in self.buf:
                    self.buf[i] = np.zeros_like(p.data)
                self.buf[i] = self.momentum * self.buf[i] + g
                g = self.buf[i]
            p.data -= (lr * g).astype(p.data.dtype)
            p.grad = None

    def state_dict(self):
        return {f"b{i}": v for i, v in self.buf.items()}

    def load_state_dict(self, d):
        self.buf = {int(k[1:]): v for k, v in d.items()}


def cosine_lr(base_lr, epoch, total_epochs, min_lr=1e-4):
    if total_epochs <= 1:
        return base_lr
    t = epoch / (total_epochs - 1)
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * t))


def adam_step(params, opt: Adam):
    """Single bias-corrected Adam update over params; grads are consumed."""
    if list(params) != opt.params:
        opt.params = list(params)
    opt.step()
