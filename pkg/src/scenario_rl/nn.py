"""Small tanh perceptrons with hand-written backpropagation, and optimizers."""

from __future__ import annotations

import numpy as np


class MLP:
    """``in -> hidden -> ... -> out`` with tanh hidden units and a linear head.

    Weights are stored as ``(fan_in, fan_out)`` so a batch ``x`` of shape
    ``(B, in)`` maps to ``x @ W + b``.
    """

    def __init__(self, sizes, rng, out_scale=1.0, out_bias=None):
        self.sizes = tuple(int(s) for s in sizes)
        self.params = []
        for i, (fi, fo) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            scale = out_scale if i == len(self.sizes) - 2 else 1.0
            W = rng.standard_normal((fi, fo)) * (scale / np.sqrt(fi))
            b = np.zeros(fo)
            self.params += [W, b]
        if out_bias is not None:
            self.params[-1][:] = out_bias

    def forward(self, x):
        x = np.atleast_2d(x)
        acts = [x]
        h = x
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < n_layers - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, acts, dout):
        """Gradients of ``sum(dout * output)`` with respect to every parameter."""
        n_layers = len(self.params) // 2
        grads = [None] * len(self.params)
        d = dout
        for i in reversed(range(n_layers)):
            if i < n_layers - 1:
                d = d * (1.0 - acts[i + 1] ** 2)
            grads[2 * i] = acts[i].T @ d
            grads[2 * i + 1] = d.sum(axis=0)
            if i > 0:
                d = d @ self.params[2 * i].T
        return grads

    def get_flat(self):
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat):
        i = 0
        for p in self.params:
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size

    def to_list(self):
        return [p.tolist() for p in self.params]

    def load_list(self, values):
        for p, v in zip(self.params, values):
            p[...] = np.asarray(v)


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_by_global_norm(grads, max_norm):
    norm = global_norm(grads)
    if norm > max_norm:
        grads = [g * (max_norm / norm) for g in grads]
    return grads, norm


class Adam:
    """Adam with bias correction; one moment pair per parameter array.

    Per-coordinate steps are bounded by ``lr * (1 - beta1) / sqrt(1 - beta2)``.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step_bound(self):
        return self.lr * max(1.0, (1.0 - self.beta1) / np.sqrt(1.0 - self.beta2))

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self):
        return {"t": self.t, "m": [x.tolist() for x in self.m], "v": [x.tolist() for x in self.v]}

    def load_state_dict(self, d):
        self.t = d["t"]
        for dst, src in zip(self.m, d["m"]):
            dst[...] = np.asarray(src)
        for dst, src in zip(self.v, d["v"]):
            dst[...] = np.asarray(src)


class SGD:
    """Plain gradient descent; with clipped gradients each coordinate moves
    by at most ``lr * clip_norm``."""

    def __init__(self, params, lr):
        self.params = params
        self.lr = lr
        self.t = 0

    def step_bound(self, clip_norm=np.inf):
        return self.lr * clip_norm

    def step(self, grads):
        self.t += 1
        for p, g in zip(self.params, grads):
            p -= self.lr * g

    def state_dict(self):
        return {"t": self.t}

    def load_state_dict(self, d):
        self.t = d["t"]
