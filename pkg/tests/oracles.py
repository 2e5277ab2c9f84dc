"""Slow, obviously-correct reference implementations used as test oracles."""

import itertools

import numpy as np


def gae_direct(rewards, values, next_values, delta, lam):
    """``A_t = sum_l (delta lam)^l td_{t+l}`` by the O(T^2) double sum."""
    T = len(rewards)
    td = [rewards[t] + delta * next_values[t] - values[t] for t in range(T)]
    out = np.zeros(T)
    for t in range(T):
        out[t] = sum((delta * lam) ** (s - t) * td[s] for s in range(t, T))
    return out


def max_drawdown_pairs(returns):
    """Largest peak-to-later-trough loss over every ordered pair of dates."""
    W = [1.0]
    for r in returns:
        W.append(W[-1] * (1.0 + r))
    best = 0.0
    for i in range(len(W)):
        for j in range(i + 1, len(W)):
            best = max(best, 1.0 - W[j] / W[i])
    return best


def gmv_closed_form(sigma):
    ones = np.ones(len(sigma))
    x = np.linalg.solve(sigma, ones)
    return x / x.sum()


def project_grid_2(a, lo, hi, step=1e-5):
    """Two-asset projection by exhaustive search along the feasible segment."""
    w1 = np.arange(max(lo, 1.0 - hi), min(hi, 1.0 - lo) + step / 2, step)
    d = (w1 - a[0]) ** 2 + (1.0 - w1 - a[1]) ** 2
    i = int(np.argmin(d))
    return np.array([w1[i], 1.0 - w1[i]])


def central_difference(f, params, eps=1e-6):
    """Numerical gradient of scalar ``f()`` wrt every array in ``params`` (mutated in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            up = f()
            p[i] = old - eps
            down = f()
            p[i] = old
            g[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def relative_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / scale)


def w_permutation(x, y, order=1):
    """Exact W_p between equal-size uniform point clouds by enumerating matchings."""
    n = len(x)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        c = np.mean([np.linalg.norm(x[i] - y[j]) ** order for i, j in enumerate(perm)])
        best = min(best, c)
    return best ** (1.0 / order)
