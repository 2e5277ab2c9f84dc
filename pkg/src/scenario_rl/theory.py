"""
Finite laboratory for the hybrid vs scenario-consistent Bellman operators.

States are ``phi = (z, h)`` with ``z`` drawn from a finite set of
exogenous contexts and ``h`` a memory vector. The update map sends
``(z, a, x)`` to ``(next_z[z], G(z, a, x))``; because ``G`` does not read
the previous memory, the states reachable from any outcome atom (real,
scenario, or the scenario mean) form a finite set that is closed under
the update. That lets every operator, fixed point, Wasserstein distance
and Lipschitz constant be computed exactly by enumeration.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ._rng import substream

MAX_ATOMS = 200


class BoundViolation(AssertionError):
    """A theoretical bound failed; ``details`` carries the counterexample."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


@dataclass(frozen=True)
class EmpiricalDistribution:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        if len(w) != len(atoms) or len(w) == 0:
            raise ValueError("atoms and weights must be nonempty and aligned")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if len(w) > MAX_ATOMS:
            raise ValueError(f"supports are capped at {MAX_ATOMS} atoms")

    @property
    def mean(self):
        return self.weights @ self.atoms

    @property
    def variance(self):
        """``E ||X - E X||^2``."""
        d = self.atoms - self.mean
        return float(self.weights @ np.sum(d * d, axis=1))


def _sorted_coupling_1d(p, q, order):
    xp, wp = p.atoms[:, 0], p.weights
    xq, wq = q.atoms[:, 0], q.weights
    ip, iq = np.argsort(xp, kind="stable"), np.argsort(xq, kind="stable")
    xp, wp, xq, wq = xp[ip], wp[ip], xq[iq], wq[iq]
    cp, cq = np.cumsum(wp), np.cumsum(wq)
    cuts = np.union1d(cp, cq)
    cuts = cuts[cuts < 1.0 - 1e-15]
    levels = np.concatenate([[0.0], cuts, [1.0]])
    total = 0.0
    for lo, hi in zip(levels[:-1], levels[1:]):
        mid = 0.5 * (lo + hi)
        a = xp[min(np.searchsorted(cp, mid), len(xp) - 1)]
        b = xq[min(np.searchsorted(cq, mid), len(xq) - 1)]
        total += (hi - lo) * abs(a - b) ** order
    return total


def optimal_plan(p, q, order=1):
    """Optimal transport plan and cost ``sum gamma_ij ||x_i - y_j||^order``."""
    C = np.linalg.norm(p.atoms[:, None, :] - q.atoms[None, :, :], axis=-1) ** order
    m, n = C.shape
    rows = sparse.kron(sparse.eye(m), np.ones((1, n)))
    cols = sparse.kron(np.ones((1, m)), sparse.eye(n))
    A = sparse.vstack([rows, cols]).tocsr()
    b = np.concatenate([p.weights, q.weights])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = np.maximum(res.x.reshape(m, n), 0.0)
    return plan, float(np.sum(plan * C))


def wasserstein(p, q, order=1):
    """Exact ``W_order`` with Euclidean ground metric.

    One-dimensional supports use the sorted (quantile) coupling; otherwise
    the transport LP is solved exactly.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if p.atoms.shape[1] != q.atoms.shape[1]:
        raise ValueError("supports live in different dimensions")
    if p.atoms.shape[1] == 1:
        cost = _sorted_coupling_1d(p, q, order)
    else:
        cost = optimal_plan(p, q, order)[1]
    return float(max(cost, 0.0) ** (1.0 / order))


@dataclass
class FiniteOutcomeModel:
    """Finite model with tabulated transitions.

    ``next_real[z, a, j]``, ``next_scen[z, a, j]`` and ``next_mean[z, a]``
    are state indices reached from any state with context ``z`` after
    action ``a`` and, respectively, real atom ``j``, scenario atom ``j`` and
    the scenario mean. ``reward_x[z, a]`` and ``reward_h[z]`` define
    ``r(phi, a, x) = reward_x[z, a] . x + reward_h[z] . h``.
    """

    z_of: np.ndarray
    h: np.ndarray
    next_z: np.ndarray
    psi_of_z: np.ndarray
    real_law: list
    scen_law: list
    next_real: list
    next_scen: list
    next_mean: np.ndarray
    reward_x: np.ndarray
    reward_h: np.ndarray
    delta: float
    h_map: object = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    @property
    def n_states(self):
        return len(self.z_of)

    @property
    def n_z(self):
        return len(self.next_z)

    @property
    def n_actions(self):
        return self.reward_x.shape[1]

    def scen(self, z):
        return self.scen_law[self.psi_of_z[z]]

    def reward(self, i, a, x):
        z = self.z_of[i]
        return np.asarray(x) @ self.reward_x[z, a] + self.reward_h[z] @ self.h[i]

    def expected_scen_reward(self):
        """``E_R r(phi, a, R)`` for every state and action, shape ``(S, A)``."""
        if getattr(self, "_reward_cache", None) is not None:
            return self._reward_cache
        out = np.empty((self.n_states, self.n_actions))
        for i in range(self.n_states):
            z = self.z_of[i]
            mu = self.scen(z).mean
            for a in range(self.n_actions):
                out[i, a] = self.reward(i, a, mu)
        # reward is linear in the outcome, so the mean atom gives the expectation
        self._reward_cache = out
        return out


def _build_states(next_z, real_law, scen_law, psi_of_z, n_actions, h_map):
    """Enumerate the update-closed state set and its transition tables."""
    index = {}
    z_of, hs = [], []

    def state(z, h):
        key = (int(z), np.asarray(h, dtype=float).tobytes())
        if key not in index:
            index[key] = len(z_of)
            z_of.append(int(z))
            hs.append(np.asarray(h, dtype=float))
        return index[key]

    n_z = len(next_z)
    next_real, next_scen = [], []
    next_mean = np.empty((n_z, n_actions), dtype=int)
    for z in range(n_z):
        zn = next_z[z]
        sl = scen_law[psi_of_z[z]]
        nr = np.array([[state(zn, h_map(z, a, x)) for x in real_law[z].atoms] for a in range(n_actions)])
        ns = np.array([[state(zn, h_map(z, a, x)) for x in sl.atoms] for a in range(n_actions)])
        for a in range(n_actions):
            next_mean[z, a] = state(zn, h_map(z, a, sl.mean))
        next_real.append(nr)
        next_scen.append(ns)
    return np.array(z_of), np.array(hs), next_real, next_scen, next_mean


def make_model(next_z, psi_of_z, real_law, scen_law, h_map, reward_x, reward_h, delta):
    next_z = np.asarray(next_z, dtype=int)
    if sorted(next_z.tolist()) != list(range(len(next_z))):
        raise ValueError("next_z must be a permutation so every context is reachable")
    z_of, h, nr, ns, nm = _build_states(
        next_z, real_law, scen_law, np.asarray(psi_of_z), reward_x.shape[1], h_map
    )
    return FiniteOutcomeModel(
        z_of=z_of, h=h, next_z=next_z, psi_of_z=np.asarray(psi_of_z), real_law=list(real_law),
        scen_law=list(scen_law), next_real=nr, next_scen=ns, next_mean=nm,
        reward_x=np.asarray(reward_x, dtype=float), reward_h=np.asarray(reward_h, dtype=float),
        delta=float(delta), h_map=h_map,
    )


def random_model(seed, n_z=3, n_actions=3, dim_x=2, dim_h=2, n_atoms=(2, 5), delta=None):
    """A random finite model: tanh-affine memory map, random laws and rewards."""
    rng = substream(seed, "theory")
    n_psi = int(rng.integers(1, n_z + 1))
    psi_of_z = np.concatenate([np.arange(n_psi), rng.integers(0, n_psi, n_z - n_psi)])
    rng.shuffle(psi_of_z)
    next_z = rng.permutation(n_z)

    def law():
        k = int(rng.integers(n_atoms[0], n_atoms[1] + 1))
        return EmpiricalDistribution(rng.normal(0.0, 1.0, (k, dim_x)) + rng.normal(0.0, 0.5, dim_x),
                                     rng.dirichlet(np.ones(k)))

    real_law = [law() for _ in range(n_z)]
    scen_law = [law() for _ in range(n_psi)]
    M = rng.normal(0.0, 0.8, (n_z, n_actions, dim_h, dim_x))
    b = rng.normal(0.0, 0.3, (n_z, n_actions, dim_h))

    def h_map(z, a, x):
        return np.tanh(M[z, a] @ np.asarray(x, dtype=float) + b[z, a])

    reward_x = rng.normal(0.0, 1.0, (n_z, n_actions, dim_x))
    reward_h = rng.normal(0.0, 1.0, (n_z, dim_h))
    if delta is None:
        delta = float(rng.uniform(0.5, 0.95))
    return make_model(next_z, psi_of_z, real_law, scen_law, h_map, reward_x, reward_h, delta)


def random_policy(model, seed):
    rng = substream(seed, "theory-policy")
    return rng.dirichlet(np.ones(model.n_actions), size=model.n_z)


def apply_operator(model, V, policy, kind):
    """Exact ``T V`` for ``kind`` in ``{"hybrid", "scen"}``.

    Both operators score the action on the scenario law; the hybrid one
    bootstraps on the real law, the scenario-consistent one on the
    scenario law.
    """
    if kind not in ("hybrid", "scen"):
        raise ValueError("kind must be 'hybrid' or 'scen'")
    V = np.asarray(V, dtype=float)
    r = model.expected_scen_reward()
    cont = np.empty((model.n_z, model.n_actions))
    for z in range(model.n_z):
        if kind == "hybrid":
            w, nxt = model.real_law[z].weights, model.next_real[z]
        else:
            w, nxt = model.scen(z).weights, model.next_scen[z]
        cont[z] = V[nxt] @ w
    pol = policy[model.z_of]
    return np.sum(pol * (r + model.delta * cont[model.z_of]), axis=1)


def transition_matrix(model, policy, kind):
    """Row-stochastic ``P`` with ``T V = b + delta * P V``."""
    P = np.zeros((model.n_states, model.n_states))
    for i in range(model.n_states):
        z = model.z_of[i]
        if kind == "hybrid":
            w, nxt = model.real_law[z].weights, model.next_real[z]
        else:
            w, nxt = model.scen(z).weights, model.next_scen[z]
        for a in range(model.n_actions):
            np.add.at(P[i], nxt[a], policy[z, a] * w)
    return P


def fixed_point(model, policy, kind, tol=1e-10, max_iter=1_000_000):
    """Value iteration to sup-norm tolerance ``tol``.

    Returns ``(V, iterations, ratios)``; ``ratios`` are successive
    sup-norm step ratios, recorded while the step is large enough for the
    ratio to be meaningful in floating point.
    """
    V = np.zeros(model.n_states)
    prev = None
    ratios = []
    for it in range(1, max_iter + 1):
        V_new = apply_operator(model, V, policy, kind)
        step = float(np.max(np.abs(V_new - V)))
        scale = max(1.0, float(np.max(np.abs(V_new))))
        if prev is not None and prev > 1e-3 * scale:
            ratios.append(step / prev)
        V, prev = V_new, step
        if step < tol:
            return V, it, np.array(ratios)
    raise RuntimeError("value iteration did not converge; the model is malformed")


def lipschitz_h(model, V):
    """``max |V_i - V_j| / ||h_i - h_j||`` over distinct same-context states."""
    best = 0.0
    for z in range(model.n_z):
        idx = np.flatnonzero(model.z_of == z)
        if len(idx) < 2:
            continue
        H = model.h[idx]
        dh = np.linalg.norm(H[:, None] - H[None, :], axis=-1)
        dv = np.abs(V[idx][:, None] - V[idx][None, :])
        mask = dh > 0
        if mask.any():
            best = max(best, float(np.max(dv[mask] / dh[mask])))
    return best


def outcome_support(model, z):
    """Real atoms, scenario atoms and the scenario mean for context ``z``."""
    sl = model.scen(z)
    return np.vstack([model.real_law[z].atoms, sl.atoms, sl.mean[None, :]])


def lipschitz_update(model):
    """``max ||G(z,a,x) - G(z,a,y)|| / ||x - y||`` over each context's outcome support."""
    best = 0.0
    for z in range(model.n_z):
        X = outcome_support(model, z)
        dx = np.linalg.norm(X[:, None] - X[None, :], axis=-1)
        mask = dx > 0
        for a in range(model.n_actions):
            H = np.array([model.h_map(z, a, x) for x in X])
            dh = np.linalg.norm(H[:, None] - H[None, :], axis=-1)
            if mask.any():
                best = max(best, float(np.max(dh[mask] / dx[mask])))
    return best


def mismatch_w1(model):
    """``Delta_W``: the largest per-context ``W_1(real, scen)``."""
    return max(wasserstein(model.real_law[z], model.scen(z), 1) for z in range(model.n_z))


def model_constants(model):
    """Measured ``L_h``, ``Delta_W`` and the worst-context ``Delta_2``, ``sigma2_scen``.

    ``L_V`` depends on the value function and is reported by the callers.
    """
    d2 = max(optimal_plan(model.real_law[z], model.scen(z), 2)[1] for z in range(model.n_z))
    s2 = max(model.scen(z).variance for z in range(model.n_z))
    return {"L_h": lipschitz_update(model), "delta_w": mismatch_w1(model),
            "delta_2": float(d2), "sigma2_scen": float(s2)}


def lemma_delta(model, V, policy):
    """``delta * E_a[E_real f - E_scen f]`` per state, evaluated directly."""
    out = np.empty(model.n_states)
    for i in range(model.n_states):
        z = model.z_of[i]
        acc = 0.0
        for a in range(model.n_actions):
            real = sum(p * V[s] for p, s in zip(model.real_law[z].weights, model.next_real[z][a]))
            scen = sum(q * V[s] for q, s in zip(model.scen(z).weights, model.next_scen[z][a]))
            acc += policy[z, a] * (real - scen)
        out[i] = model.delta * acc
    return out


def check_lemma(model, V, policy):
    gap = apply_operator(model, V, policy, "hybrid") - apply_operator(model, V, policy, "scen")
    return float(np.max(np.abs(gap - lemma_delta(model, V, policy))))


def check_operator_gap(model, policy, V, L_V=None, L_h=None, tol=1e-9):
    """One-step deviation ``||T_hyb V - T_scen V||`` against ``delta L_V L_h Delta_W``."""
    L_V = lipschitz_h(model, V) if L_V is None else L_V
    L_h = lipschitz_update(model) if L_h is None else L_h
    dw = mismatch_w1(model)
    lhs = float(np.max(np.abs(
        apply_operator(model, V, policy, "hybrid") - apply_operator(model, V, policy, "scen")
    )))
    rhs = model.delta * L_V * L_h * dw
    report = {"lhs": lhs, "rhs": rhs, "L_V": L_V, "L_h": L_h, "delta_w": dw,
              "ratio": lhs / rhs if rhs > 0 else 0.0, "ok": lhs <= rhs + tol}
    if not report["ok"]:
        raise BoundViolation("one-step operator gap exceeds its bound", report)
    return report


def check_fixed_point_bias(model, policy, tol=1e-8):
    """``||V_hyb - V_scen||`` against ``delta / (1 - delta) L_V L_h Delta_W``."""
    V_h, it_h, ratios_h = fixed_point(model, policy, "hybrid")
    V_s, it_s, ratios_s = fixed_point(model, policy, "scen")
    L_V = lipschitz_h(model, V_s)
    L_h = lipschitz_update(model)
    dw = mismatch_w1(model)
    lhs = float(np.max(np.abs(V_h - V_s)))
    rhs = model.delta / (1.0 - model.delta) * L_V * L_h * dw
    ratios = np.concatenate([ratios_h, ratios_s])
    report = {
        "lhs": lhs, "rhs": rhs, "L_V": L_V, "L_h": L_h, "delta_w": dw,
        "iterations": [it_h, it_s],
        "max_step_ratio": float(ratios.max()) if ratios.size else 0.0,
        "ok": lhs <= rhs + tol,
    }
    if not report["ok"]:
        raise BoundViolation("fixed-point bias exceeds its bound", report)
    return report


def _targets(model, V, i, a, plan_real, z):
    """Coupled one-step targets for state ``i`` and action ``a``.

    ``plan_real[j, k]`` couples real atom ``j`` with scenario atom ``k``.
    Returns ``(y_real, y_cf, y_star)`` arrays of shape ``(n_real, n_scen)``.
    """
    sl = model.scen(z)
    r = np.array([model.reward(i, a, x) for x in sl.atoms])
    f_real = V[model.next_real[z][a]]
    f_scen = V[model.next_scen[z][a]]
    f_mean = V[model.next_mean[z, a]]
    d = model.delta
    y_star = np.broadcast_to(r + d * f_scen, plan_real.shape)
    y_real = r[None, :] + d * f_real[:, None]
    y_cf = np.broadcast_to(r + d * f_mean, plan_real.shape)
    return y_real, y_cf, y_star


def beta_star(A, B):
    if A < 0 or B < 0 or A + B == 0:
        raise ValueError("need A, B >= 0, not both zero")
    return A / (A + B)


def check_mixing_bound(model, policy, beta_grid=None, V=None, tol=1e-9, raise_on_violation=True):
    """Mean squared error of the mixed target against the bound, every ``(phi, a, beta)``.

    The real and scenario draws are paired by the optimal ``W_2`` coupling,
    under which ``Delta_2`` is exactly ``E ||r - R||^2``. The independent
    pairing is also evaluated and reported, but not checked.
    """
    beta_grid = np.linspace(0.0, 1.0, 11) if beta_grid is None else np.asarray(beta_grid)
    if V is None:
        V = fixed_point(model, policy, "scen")[0]
    L = lipschitz_h(model, V) * lipschitz_update(model)
    plans, A, B = {}, {}, {}
    for z in range(model.n_z):
        plan, cost2 = optimal_plan(model.real_law[z], model.scen(z), 2)
        plans[z], A[z], B[z] = plan, cost2, model.scen(z).variance
    violations = []
    worst_ratio = 0.0
    grid_mismatch = 0
    records = []
    for i in range(model.n_states):
        z = model.z_of[i]
        indep = np.outer(model.real_law[z].weights, model.scen(z).weights)
        for a in range(model.n_actions):
            y_r, y_c, y_s = _targets(model, V, i, a, plans[z], z)
            lhs = np.empty(len(beta_grid))
            lhs_ind = np.empty(len(beta_grid))
            rhs = 2.0 * model.delta ** 2 * L ** 2 * (
                (1.0 - beta_grid) ** 2 * A[z] + beta_grid ** 2 * B[z]
            )
            for b, beta in enumerate(beta_grid):
                err2 = ((1.0 - beta) * y_r + beta * y_c - y_s) ** 2
                lhs[b] = float(np.sum(plans[z] * err2))
                lhs_ind[b] = float(np.sum(indep * err2))
            bad = lhs > rhs + tol
            if bad.any():
                violations.append({"state": i, "action": a, "beta": beta_grid[bad].tolist(),
                                   "lhs": lhs[bad].tolist(), "rhs": rhs[bad].tolist()})
            pos = rhs > 0
            if pos.any():
                worst_ratio = max(worst_ratio, float(np.max(lhs[pos] / rhs[pos])))
            if A[z] + B[z] > 0:
                bs = beta_star(A[z], B[z])
                step = float(np.max(np.diff(beta_grid))) if len(beta_grid) > 1 else 0.0
                if abs(beta_grid[int(np.argmin(rhs))] - bs) > step + 1e-12:
                    grid_mismatch += 1
            records.append((lhs, lhs_ind, rhs))
    report = {
        "L": L,
        "n_checked": len(records) * len(beta_grid),
        "violations": violations,
        "max_ratio": worst_ratio,
        "argmin_mismatches": grid_mismatch,
        "independent_violations": int(sum(np.sum(li > r + tol) for _, li, r in records)),
        "ok": not violations and grid_mismatch == 0,
    }
    if raise_on_violation and not report["ok"]:
        raise BoundViolation("mixing bound violated", report)
    return report


def empirical_beta_curve(model, policy, beta_grid=None, V=None):
    """Bound and exact-MSE curves over ``beta`` for the pooled ``(A, B)``.

    ``A`` and ``B`` are averaged over states (weighting each context by how
    many states carry it); the bound's grid argmin is compared with
    ``beta_star(A, B)``.
    """
    beta_grid = np.linspace(0.0, 1.0, 11) if beta_grid is None else np.asarray(beta_grid)
    if V is None:
        V = fixed_point(model, policy, "scen")[0]
    L = lipschitz_h(model, V) * lipschitz_update(model)
    A_z, B_z, plans = [], [], []
    for z in range(model.n_z):
        plan, cost2 = optimal_plan(model.real_law[z], model.scen(z), 2)
        plans.append(plan)
        A_z.append(cost2)
        B_z.append(model.scen(z).variance)
    counts = np.bincount(model.z_of, minlength=model.n_z)
    A = float(np.average(A_z, weights=counts))
    B = float(np.average(B_z, weights=counts))
    rhs = 2.0 * model.delta ** 2 * L ** 2 * ((1.0 - beta_grid) ** 2 * A + beta_grid ** 2 * B)
    lhs = np.zeros(len(beta_grid))
    n = 0
    for i in range(model.n_states):
        z = model.z_of[i]
        for a in range(model.n_actions):
            y_r, y_c, y_s = _targets(model, V, i, a, plans[z], z)
            for b, beta in enumerate(beta_grid):
                lhs[b] += np.sum(plans[z] * ((1.0 - beta) * y_r + beta * y_c - y_s) ** 2)
            n += 1
    lhs /= n
    bs = beta_star(A, B)
    arg = float(beta_grid[int(np.argmin(rhs))])
    step = float(np.max(np.diff(beta_grid))) if len(beta_grid) > 1 else 0.0
    return {
        "beta": beta_grid.tolist(), "rhs": rhs.tolist(), "lhs": lhs.tolist(),
        "A": A, "B": B, "beta_star": bs, "rhs_argmin": arg,
        "lhs_argmin": float(beta_grid[int(np.argmin(lhs))]),
        "ok": abs(arg - bs) <= step + 1e-12,
    }


def tightness_model(c=1.0, delta=0.9):
    """One context, one action, real law at 1, scenario law at 0, ``h = x``.

    With ``V = c h`` the one-step gap equals its bound exactly.
    """
    real = [EmpiricalDistribution([[1.0]], [1.0])]
    scen = [EmpiricalDistribution([[0.0]], [1.0])]
    model = make_model([0], [0], real, scen, lambda z, a, x: np.asarray(x, dtype=float),
                       np.zeros((1, 1, 1)), np.zeros((1, 1)), delta)
    V = c * model.h[:, 0]
    return model, np.ones((1, 1)), V


def tightness_ratio(c=1.0, delta=0.9):
    model, policy, V = tightness_model(c, delta)
    rep = check_operator_gap(model, policy, V)
    return rep["lhs"] / rep["rhs"]


def contraction_ratio(model, policy, kind, rng, trials=5):
    """Largest ``||T V1 - T V2|| / ||V1 - V2||`` over random pairs."""
    worst = 0.0
    for _ in range(trials):
        V1 = rng.normal(0.0, 10.0, model.n_states)
        V2 = rng.normal(0.0, 10.0, model.n_states)
        num = np.max(np.abs(apply_operator(model, V1, policy, kind) - apply_operator(model, V2, policy, kind)))
        worst = max(worst, float(num / np.max(np.abs(V1 - V2))))
    return worst


def verify_suite(n_seeds=100, seed=0, beta_grid=None):
    """Run every check over ``n_seeds`` random models; returns a JSON-ready report."""
    beta_grid = np.linspace(0.0, 1.0, 11) if beta_grid is None else np.asarray(beta_grid)
    out = {"n_seeds": n_seeds, "seed": seed}
    timings = {}

    t0 = time.perf_counter()
    lemma_err = 0.0
    for s in range(n_seeds):
        model = random_model(seed * 100_003 + s)
        policy = random_policy(model, s)
        V = substream(s, "theory-V").normal(0.0, 1.0, model.n_states)
        lemma_err = max(lemma_err, check_lemma(model, V, policy))
    out["lemma"] = {"max_abs_error": lemma_err, "ok": lemma_err < 1e-12}
    timings["lemma"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    gap_viol, bias_viol, step_ratio, contraction = [], [], 0.0, 0.0
    gap_ratio = bias_ratio = 0.0
    constants = []
    for s in range(n_seeds):
        model = random_model(seed * 100_003 + s)
        policy = random_policy(model, s)
        rng = substream(s, "theory-V")
        V = rng.normal(0.0, 1.0, model.n_states)
        try:
            rep = check_operator_gap(model, policy, V)
            gap_ratio = max(gap_ratio, rep["ratio"])
        except BoundViolation as exc:
            gap_viol.append({"seed": s, **exc.details})
        try:
            rep = check_fixed_point_bias(model, policy)
            step_ratio = max(step_ratio, rep["max_step_ratio"] - model.delta)
            if rep["rhs"] > 0:
                bias_ratio = max(bias_ratio, rep["lhs"] / rep["rhs"])
        except BoundViolation as exc:
            rep = exc.details
            bias_viol.append({"seed": s, **rep})
        constants.append({"seed": s, **model_constants(model), "L_V": rep["L_V"]})
        for kind in ("hybrid", "scen"):
            contraction = max(contraction, contraction_ratio(model, policy, kind, rng) - model.delta)
    out["operator_gap"] = {"violations": gap_viol, "max_ratio": gap_ratio, "ok": not gap_viol}
    out["fixed_point_bias"] = {"violations": bias_viol, "max_ratio": bias_ratio, "ok": not bias_viol}
    out["contraction"] = {
        "max_step_ratio_minus_delta": step_ratio,
        "max_pair_ratio_minus_delta": contraction,
        "ok": step_ratio <= 1e-10 and contraction <= 1e-10,
    }
    out["constants"] = constants
    timings["bounds"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mix_viol, mismatch, mix_ratio, indep = [], 0, 0.0, 0
    curve_fail = 0
    for s in range(n_seeds):
        model = random_model(seed * 100_003 + s)
        policy = random_policy(model, s)
        V = fixed_point(model, policy, "scen")[0]
        rep = check_mixing_bound(model, policy, beta_grid, V=V, raise_on_violation=False)
        if rep["violations"]:
            mix_viol.append({"seed": s, "violations": rep["violations"][:5]})
        mismatch += rep["argmin_mismatches"]
        mix_ratio = max(mix_ratio, rep["max_ratio"])
        indep += rep["independent_violations"]
        curve_fail += not empirical_beta_curve(model, policy, beta_grid, V=V)["ok"]
    out["mixing_bound"] = {
        "violations": mix_viol, "max_ratio": mix_ratio,
        "independent_pairing_exceedances": indep, "ok": not mix_viol,
    }
    out["beta_star"] = {"argmin_mismatches": mismatch, "curve_failures": curve_fail,
                        "ok": mismatch == 0 and curve_fail == 0}
    timings["mixing"] = time.perf_counter() - t0

    out["tightness_ratio"] = tightness_ratio()
    out["timings"] = timings
    out["ok"] = all(out[k]["ok"] for k in
                    ("lemma", "operator_gap", "fixed_point_bias", "contraction", "mixing_bound", "beta_star"))
    return out


def permutation_w(p, q, order=1):
    """Brute-force optimum over permutation couplings of equal-size uniform laws."""
    n = len(p.weights)
    if len(q.weights) != n or not np.allclose(p.weights, 1.0 / n) or not np.allclose(q.weights, 1.0 / n):
        raise ValueError("permutation oracle needs equal-size uniform laws")
    C = np.linalg.norm(p.atoms[:, None] - q.atoms[None, :], axis=-1) ** order
    best = min(sum(C[i, s[i]] for i in range(n)) for s in itertools.permutations(range(n))) / n
    return best ** (1.0 / order)
