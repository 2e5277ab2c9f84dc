"""
PPO-Clip actor-critic trained over a logged tape with scenario-scored
rewards and a counterfactual-mixed critic bootstrap target.

Each iteration traverses the logged dates once. At day ``t`` the agent
acts, the executed weights are scored on ``S`` scenario draws, and two
continuations are formed from the same update map: the realized one (fed
the tape's return) and the counterfactual one (fed the scenario mean).
The critic regresses onto the mixture of the two one-step targets; GAE is
built from the same mixed TD residuals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ._rng import substream
from .env import EnvParams, PortfolioEnv, State, cost, reward
from .nn import MLP, SGD, Adam, clip_by_global_norm

logger = logging.getLogger(__name__)

LOG_STD_MIN, LOG_STD_MAX = -5.0, 1.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
REWARD_MODES = ("scenario", "realized", "bootstrap")


class ConfigError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    delta: float = 0.99
    beta_cf: float = 0.5
    S: int = 64
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch: int = 256
    lr_actor: float = 3e-4
    lr_critic: float = 1e-3
    iterations: int = 40
    seed: int = 0
    hidden: int = 64
    entropy_coef: float = 1e-3
    max_grad_norm: float = 0.5
    init_log_std: float = -3.0
    reward_scale: float = 100.0
    optimizer: str = "adam"
    reward_mode: str = "scenario"
    use_gate: bool = True
    risk_penalty: bool = True
    concentration_penalty: bool = True
    boot_window: int = 60

    def __post_init__(self):
        checks = [
            (0.0 < self.delta < 1.0, "delta must lie in (0, 1)"),
            (0.0 <= self.beta_cf <= 1.0, "beta_cf must lie in [0, 1]"),
            (self.S >= 1, "S must be >= 1"),
            (0.0 < self.clip_eps < 1.0, "clip_eps must lie in (0, 1)"),
            (0.0 <= self.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]"),
            (self.epochs >= 1 and self.minibatch >= 1, "epochs and minibatch must be >= 1"),
            (self.lr_actor > 0 and self.lr_critic > 0, "learning rates must be positive"),
            (self.iterations >= 1, "iterations must be >= 1"),
            (self.hidden >= 1, "hidden must be >= 1"),
            (self.max_grad_norm > 0, "max_grad_norm must be positive"),
            (LOG_STD_MIN <= self.init_log_std <= LOG_STD_MAX, "init_log_std outside [-5, 1]"),
            (self.optimizer in ("adam", "sgd"), "optimizer must be 'adam' or 'sgd'"),
            (self.reward_mode in REWARD_MODES, f"reward_mode must be one of {REWARD_MODES}"),
            (self.boot_window >= 2, "boot_window must be >= 2"),
            (self.reward_scale > 0, "reward_scale must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def env_params(self, base):
        """Environment parameters with this variant's penalties switched off."""
        p = base
        if not self.risk_penalty or self.reward_mode == "realized":
            p = replace(p, lambda_rho=0.0)
        if not self.concentration_penalty or self.reward_mode == "realized":
            p = replace(p, lambda_conc=0.0)
        return p

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown agent keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


class PolicyModel:
    """Diagonal Gaussian over raw actions with a state-independent log-std."""

    def __init__(self, n_in, n_assets, hidden=64, rng=None, init_log_std=-3.0):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = MLP((n_in, hidden, hidden, n_assets), rng, out_scale=0.01,
                       out_bias=np.full(n_assets, 1.0 / n_assets))
        self.log_std = np.full(n_assets, float(init_log_std))

    @property
    def params(self):
        return self.net.params + [self.log_std]

    def clamp(self):
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def mean(self, x):
        return self.net(x)

    def log_prob(self, x, a):
        mu = self.net(x)
        std = np.exp(self.log_std)
        z = (a - mu) / std
        return np.sum(-0.5 * z * z - self.log_std - HALF_LOG_2PI, axis=-1)

    def entropy(self):
        return float(np.sum(self.log_std + 0.5 + HALF_LOG_2PI))

    def to_dict(self):
        return {"net": self.net.to_list(), "log_std": self.log_std.tolist()}

    def load_dict(self, d):
        self.net.load_list(d["net"])
        self.log_std[...] = np.asarray(d["log_std"])


class CriticModel:
    def __init__(self, n_in, hidden=64, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = MLP((n_in, hidden, hidden, 1), rng, out_scale=0.01)

    @property
    def params(self):
        return self.net.params

    def value(self, x):
        return self.net(x)[..., 0]

    def to_dict(self):
        return {"net": self.net.to_list()}

    def load_dict(self, d):
        self.net.load_list(d["net"])


def act(policy, x, deterministic=False, rng=None):
    """Sample a raw action (or return the mean) and its Gaussian log-prob.

    The log-prob is of the pre-projection action; projection to executable
    weights belongs to the environment.
    """
    mu = policy.mean(np.atleast_2d(x))[0]
    if not np.all(np.isfinite(mu)):
        raise TrainingError("policy produced a non-finite mean action")
    std = np.exp(policy.log_std)
    if deterministic:
        a = mu.copy()
    else:
        a = mu + std * rng.standard_normal(mu.size)
    z = (a - mu) / std
    logp = float(np.sum(-0.5 * z * z - policy.log_std - HALF_LOG_2PI))
    return a, logp


def mixed_target(r, v_next, v_cf, delta, beta_cf):
    """``(1 - beta) (r + delta V_next) + beta (r + delta V_cf)``."""
    if not 0.0 <= beta_cf <= 1.0:
        raise ConfigError("beta_cf must lie in [0, 1]")
    r = np.asarray(r, dtype=float)
    y_r = r + delta * np.asarray(v_next, dtype=float)
    y_c = r + delta * np.asarray(v_cf, dtype=float)
    return (1.0 - beta_cf) * y_r + beta_cf * y_c


def gae(rewards, values, delta, lam, next_values=None, normalize=False):
    """Generalized advantage estimates.

    With ``next_values`` omitted, ``values`` has length ``T + 1`` and its
    last entry is the terminal bootstrap. Otherwise ``values`` has length
    ``T`` and ``next_values[t]`` is the bootstrap used in the TD residual
    at ``t`` (e.g. the mixed tape/counterfactual value).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    T = len(rewards)
    if next_values is None:
        if len(values) != T + 1:
            raise ValueError("values must have length len(rewards) + 1")
        v, v_next = values[:-1], values[1:]
    else:
        next_values = np.asarray(next_values, dtype=float)
        if len(values) != T or len(next_values) != T:
            raise ValueError("values and next_values must match rewards in length")
        v, v_next = values, next_values
    td = rewards + delta * v_next - v
    adv = np.empty(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        acc = td[t] + delta * lam * acc
        adv[t] = acc
    if normalize:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv


def critic_loss_and_grads(critic, X, Y):
    v, acts = critic.net.forward(X)
    err = v[:, 0] - Y
    loss = float(np.mean(err ** 2))
    grads = critic.net.backward(acts, (2.0 * err / len(Y))[:, None])
    return loss, grads


def actor_loss_and_grads(policy, X, A, logp_old, adv, clip_eps, entropy_coef):
    """Clipped-surrogate loss (negated, for descent) with an entropy bonus."""
    mu, acts = policy.net.forward(X)
    std = np.exp(policy.log_std)
    z = (A - mu) / std
    logp = np.sum(-0.5 * z * z - policy.log_std - HALF_LOG_2PI, axis=1)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    surr = np.minimum(ratio * adv, clipped * adv)
    n = len(adv)
    loss = -float(np.mean(surr)) - entropy_coef * policy.entropy()
    # gradient flows only where the unclipped branch is the active minimum
    active = ratio * adv <= clipped * adv
    dlogp = np.where(active, -ratio * adv / n, 0.0)
    dmu = dlogp[:, None] * z / std
    dlog_std = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0) - entropy_coef
    grads = policy.net.backward(acts, dmu) + [dlog_std]
    stats = {
        "approx_kl": float(np.mean(logp_old - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
    }
    return loss, grads, stats


def state_features(phi, n_assets):
    """Network input: exogenous context plus scaled outcome memory."""
    return np.concatenate(
        [phi.z, [100.0 * phi.ewma], n_assets * phi.w_prev, [10.0 * phi.drawdown]]
    )


def exogenous_features(ctx):
    """Per-day exogenous context ``z``: descriptor, gate and trailing momentum."""
    tape = ctx.tape
    T, N = tape.n_days, tape.n_assets
    win = ctx.params.vol_window
    mom = np.zeros((T, N))
    rets = tape.returns
    for t in range(win, T):
        window = rets[t - win : t]
        mom[t] = window.mean(axis=0) / (window.std(axis=0) + 1e-8) * np.sqrt(win)
    Z = np.hstack([ctx.psi, ctx.g[:, None], mom])
    return np.nan_to_num(Z, nan=0.0, posinf=0.0, neginf=0.0)


@dataclass
class Trajectory:
    days: np.ndarray
    X: np.ndarray
    X_next: np.ndarray
    X_cf: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    weights: np.ndarray
    rewards: np.ndarray
    net_returns: np.ndarray
    scen_returns: np.ndarray
    v: np.ndarray | None = None
    v_next: np.ndarray | None = None
    v_cf: np.ndarray | None = None
    targets: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def __len__(self):
        return len(self.days)


class Agent:
    """Policy, critic and their optimizers for one run."""

    def __init__(self, n_in, n_assets, cfg):
        self.cfg = cfg
        self.n_in, self.n_assets = n_in, n_assets
        init_rng = substream(cfg.seed, "agent-init")
        self.policy = PolicyModel(n_in, n_assets, cfg.hidden, init_rng, cfg.init_log_std)
        self.critic = CriticModel(n_in, cfg.hidden, init_rng)
        opt = Adam if cfg.optimizer == "adam" else SGD
        self.actor_opt = opt(self.policy.params, cfg.lr_actor)
        self.critic_opt = opt(self.critic.params, cfg.lr_critic)
        self.rng = substream(cfg.seed, "agent")

    def to_dict(self):
        return {
            "config": self.cfg.to_dict(),
            "n_in": self.n_in,
            "n_assets": self.n_assets,
            "policy": self.policy.to_dict(),
            "critic": self.critic.to_dict(),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "rng_state": self.rng.bit_generator.state,
        }

    @classmethod
    def from_dict(cls, d):
        agent = cls(d["n_in"], d["n_assets"], TrainConfig.from_dict(d["config"]))
        agent.policy.load_dict(d["policy"])
        agent.critic.load_dict(d["critic"])
        agent.actor_opt.load_state_dict(d["actor_opt"])
        agent.critic_opt.load_state_dict(d["critic_opt"])
        agent.rng.bit_generator.state = d["rng_state"]
        return agent


def systematic_indices(n, S, rng):
    """Systematic resampling of ``n`` equally weighted atoms.

    Every atom is drawn ``S // n`` times and the remainder without
    replacement, so the sample mean is unbiased for the uniform mixture
    and exact when ``n`` divides ``S``.
    """
    reps = np.tile(np.arange(n), S // n)
    extra = rng.choice(n, S % n, replace=False) if S % n else np.empty(0, dtype=int)
    return np.concatenate([reps, extra])


def _scenario_draws(ctx, t, cfg, rng):
    if cfg.reward_mode == "scenario":
        atoms = ctx.atoms(t)
        return atoms[systematic_indices(len(atoms), cfg.S, rng)], (ctx.g[t] if cfg.use_gate else 1.0)
    window = ctx.tape.returns[t - cfg.boot_window : t]
    # whole rows: cross-asset co-movements are preserved
    return window[systematic_indices(len(window), cfg.S, rng)], 1.0


def rollout(agent, ctx, env, days, rng, deterministic=False):
    """Traverse ``days`` once, acting on the realized tape continuation."""
    cfg = agent.cfg
    params = env.params
    rets = ctx.tape.returns
    N = ctx.tape.n_assets
    T = len(days)
    phi = env.initial_state(int(days[0]), N)
    X = np.empty((T, agent.n_in))
    X_next = np.empty_like(X)
    X_cf = np.empty_like(X)
    A = np.empty((T, N))
    W = np.empty((T, N))
    logp = np.empty(T)
    rew = np.empty(T)
    net = np.empty(T)
    scen = np.empty(T)
    for i, t in enumerate(days):
        x = state_features(phi, N)
        a, lp = act(agent.policy, x, deterministic, rng)
        w = env.project(a, phi)
        r_real = rets[t]
        if cfg.reward_mode == "realized":
            r_t = float(w @ r_real) - cost(w, phi.w_prev, params.cost_rate)
            r_bar = r_real
        else:
            samples, g = _scenario_draws(ctx, t, cfg, rng)
            r_t = reward(samples, g, w, phi.w_prev, params).total
            r_bar = samples.mean(axis=0)
        phi_next = env.upd(phi, w, r_real)
        phi_cf = env.counterfactual_state(phi, w, r_bar)
        X[i], X_next[i], X_cf[i] = x, state_features(phi_next, N), state_features(phi_cf, N)
        A[i], W[i], logp[i], rew[i] = a, w, lp, cfg.reward_scale * r_t
        c = cost(w, phi.w_prev, params.cost_rate)
        net[i] = float(w @ r_real) - c
        scen[i] = float(w @ ctx.atoms(t).mean(axis=0)) - c
        phi = phi_next
    return Trajectory(np.asarray(days), X, X_next, X_cf, A, logp, W, rew, net, scen)


def evaluate_targets(agent, traj):
    """Attach critic values, mixed targets and raw GAE advantages."""
    cfg = agent.cfg
    beta = 0.0 if cfg.reward_mode == "realized" else cfg.beta_cf
    traj.v = agent.critic.value(traj.X)
    traj.v_next = agent.critic.value(traj.X_next)
    traj.v_cf = agent.critic.value(traj.X_cf)
    traj.targets = mixed_target(traj.rewards, traj.v_next, traj.v_cf, cfg.delta, beta)
    boot = (1.0 - beta) * traj.v_next + beta * traj.v_cf
    traj.advantages = gae(traj.rewards, traj.v, cfg.delta, cfg.gae_lambda, next_values=boot)
    return traj


def ppo_update(agent, traj, rng):
    """Critic regression onto the mixed targets, then PPO-Clip on the actor."""
    cfg = agent.cfg
    T = len(traj)
    adv = (traj.advantages - traj.advantages.mean()) / (traj.advantages.std() + 1e-8)
    Y = traj.targets
    stats = {"critic_loss": 0.0, "actor_loss": 0.0, "approx_kl": 0.0, "clip_frac": 0.0}
    n_batches = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(T)
        for start in range(0, T, cfg.minibatch):
            idx = perm[start : start + cfg.minibatch]
            c_loss, c_grads = critic_loss_and_grads(agent.critic, traj.X[idx], Y[idx])
            a_loss, a_grads, a_stats = actor_loss_and_grads(
                agent.policy, traj.X[idx], traj.actions[idx], traj.logp[idx], adv[idx],
                cfg.clip_eps, cfg.entropy_coef,
            )
            if not (math.isfinite(c_loss) and math.isfinite(a_loss)):
                raise TrainingError(
                    f"non-finite loss (critic={c_loss}, actor={a_loss}) at optimizer step "
                    f"{agent.critic_opt.t}"
                )
            c_grads, _ = clip_by_global_norm(c_grads, cfg.max_grad_norm)
            a_grads, _ = clip_by_global_norm(a_grads, cfg.max_grad_norm)
            agent.critic_opt.step(c_grads)
            agent.actor_opt.step(a_grads)
            agent.policy.clamp()
            stats["critic_loss"] += c_loss
            stats["actor_loss"] += a_loss
            stats["approx_kl"] += a_stats["approx_kl"]
            stats["clip_frac"] += a_stats["clip_frac"]
            n_batches += 1
    for key in stats:
        stats[key] /= n_batches
    for p in agent.policy.params + agent.critic.params:
        if not np.all(np.isfinite(p)):
            raise TrainingError("non-finite parameters after update")
    return stats


def training_days(ctx, start, stop, cfg):
    """Decision days in ``[start, stop)`` with SCR outputs and a realized return."""
    first = max(start, ctx.t0, cfg.boot_window if cfg.reward_mode == "bootstrap" else 0)
    last = min(stop, ctx.tape.n_days - 1)
    if last - first < 2:
        raise ConfigError("segment too short to train on")
    return np.arange(first, last)


@dataclass
class TrainResult:
    agent: Agent
    stats: list
    trajectory: Trajectory


def make_env(ctx, constraints=None, env_params=None, cfg=None):
    params = env_params or EnvParams()
    if cfg is not None:
        params = cfg.env_params(params)
    return PortfolioEnv(exogenous_features(ctx), constraints, params)


def train(ctx, days, cfg, constraints=None, env_params=None, agent=None, callback=None):
    """Actor-critic training over the logged ``days``.

    Per iteration: traverse the dates (act, project, score on scenarios,
    form realized and counterfactual continuations and the mixed target),
    then regress the critic, build GAE advantages and take PPO-Clip steps.
    Stats include the pre-update Bellman residual ``|V(phi_t) - Y_t|``.
    """
    env = make_env(ctx, constraints, env_params, cfg)
    env.constraints.check(ctx.tape.n_assets)
    N = ctx.tape.n_assets
    n_in = env.features.shape[1] + N + 2
    agent = agent or Agent(n_in, N, cfg)
    stats = []
    traj = None
    for it in range(cfg.iterations):
        traj = rollout(agent, ctx, env, days, agent.rng)
        evaluate_targets(agent, traj)
        resid = traj.v - traj.targets
        row = {
            "iteration": it,
            "resid_mean": float(np.mean(np.abs(resid))),
            "resid_rms": float(np.sqrt(np.mean(resid ** 2))),
            "mean_reward": float(np.mean(traj.rewards)) / cfg.reward_scale,
            "mean_net_return": float(np.mean(traj.net_returns)),
            "turnover": float(np.mean(np.abs(np.diff(traj.weights, axis=0)).sum(axis=1))),
        }
        row.update(ppo_update(agent, traj, agent.rng))
        row["entropy"] = agent.policy.entropy()
        stats.append(row)
        if callback is not None:
            callback(row)
        logger.debug("iteration %d: %s", it, row)
    return TrainResult(agent, stats, traj)


def deterministic_rollout(agent, ctx, days, constraints=None, env_params=None):
    """Actor-mean rollout used for backtesting."""
    env = make_env(ctx, constraints, env_params, agent.cfg)
    # scenario draws only feed the reported reward, never the actions
    rng = substream(agent.cfg.seed, "backtest")
    return rollout(agent, ctx, env, days, rng, deterministic=True)
