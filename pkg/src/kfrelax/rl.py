"""Policy-gradient machinery: RELAX / KF-RELAX for categorical policies plus tabular-MDP checks.

Actions are drawn by Gumbel-max on the log-probabilities, ``z = log pi + G(u)``,
and the conditional sample ``z_tilde`` is rebuilt from cached uniforms ``v``.
The surrogate sees the concatenation ``[observation, z]``.

For one trajectory the estimator is::

    sum_t  dlog pi(a_t|s_t) [Q_t - c(z~_t, s_t)] - dc(z~_t, s_t) + dc(z_t, s_t)

where derivatives w.r.t. the policy weights flow through the logits only.
All per-step quantities are assembled as a logit cotangent and pushed through
one batched policy backward pass.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import mlp as nn
from ._jit import USE_NUMBA, njit
from .envs import EpisodeDone, StepResult
from .estimators import GradEstimate, SurrogateBlock, variance_objective_grad
from .kfac import KfacLayerState, TrustRegion, clip_update
from .optim import AdamState, adam_step
from .samplers import (
    conditional_gumbel,
    conditional_gumbel_jacobian_diag,
    log_softmax,
)


# -- returns ----------------------------------------------------------------------


@njit
def _reward_to_go_loop(rewards, gamma):
    out = np.empty_like(rewards)
    acc = 0.0
    for k in range(rewards.shape[0] - 1, -1, -1):
        acc = rewards[k] + gamma * acc
        out[k] = acc
    return out


def _reward_to_go_numpy(rewards, gamma):
    return lfilter([1.0], [1.0, -gamma], rewards[::-1])[::-1].copy()


def reward_to_go(rewards, gamma):
    """Discounted suffix sums ``Q_t = sum_{k >= t} gamma^(k - t) r_k``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    rewards = np.ascontiguousarray(rewards, dtype=float)
    if rewards.size == 0:
        return rewards.copy()
    if USE_NUMBA:
        return _reward_to_go_loop(rewards, float(gamma))
    return _reward_to_go_numpy(rewards, float(gamma))


# -- policy and trajectories ---------------------------------------------------------


@dataclass
class Policy:
    net: nn.Mlp

    @classmethod
    def init(cls, obs_dim, n_actions, rng, hidden=(32,)):
        return cls(nn.Mlp.init([obs_dim, *hidden, n_actions], rng))

    @property
    def n_actions(self):
        return self.net.sizes[-1]

    def logits(self, obs):
        return self.net(obs)


def entropy_bonus(logits):
    """Entropy of ``softmax(logits)`` and its gradient w.r.t. the logits (row-wise)."""
    logp = log_softmax(logits)
    pi = np.exp(logp)
    h = -np.sum(pi * logp, axis=-1)
    grad = -pi * (logp + np.expand_dims(h, -1))
    return (float(h) if np.ndim(h) == 0 else h), grad


@dataclass
class Trajectory:
    observations: np.ndarray  # (T, obs_dim), state the action was taken in
    actions: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,)
    log_probs: np.ndarray  # (T,), log pi(a_t | s_t) at collection time
    u: np.ndarray  # (T, K) uniforms behind z
    v: np.ndarray  # (T, K) uniforms behind z_tilde
    z: np.ndarray = None
    z_tilde: np.ndarray = None

    def __len__(self):
        return len(self.actions)

    @property
    def total_return(self):
        return float(np.sum(self.rewards))


def rollout(env, policy, rng, max_steps=None):
    """Run one episode, caching every uniform so the gradient can be rebuilt exactly."""
    obs = env.reset(rng)
    k = policy.n_actions
    cap = max_steps or getattr(env, "max_steps", 0) or 10**6
    weights = policy.net.weights
    last = len(weights) - 1
    hidden_tanh = policy.net.hidden == "tanh"
    observations, actions, rewards, logps, us = [], [], [], [], []
    for _ in range(cap):
        h = obs
        for i, w in enumerate(weights):
            h = h @ w[:-1] + w[-1]
            if i != last and hidden_tanh:
                h = np.tanh(h)
        logp = h - h.max()
        logp = logp - np.log(np.exp(logp).sum())
        u = rng.uniform(k)
        a = int(np.argmax(logp - np.log(-np.log(u))))
        res = env.step(a)
        observations.append(obs)
        actions.append(a)
        rewards.append(res.reward)
        logps.append(logp[a])
        us.append(u)
        obs = res.observation
        if res.done:
            break
    n = len(actions)
    traj = Trajectory(np.array(observations), np.array(actions, dtype=np.int64),
                      np.array(rewards, dtype=float), np.array(logps), np.array(us),
                      rng.uniform((n, k)))
    logp_all = _collection_logp(policy, traj)
    traj.z = logp_all - np.log(-np.log(traj.u))
    traj.z_tilde = conditional_gumbel(logp_all, traj.actions, traj.v)
    return traj


def _collection_logp(policy, traj):
    return log_softmax(policy.net(traj.observations).reshape(len(traj), -1))


# -- the RL RELAX gradient ------------------------------------------------------------


@dataclass
class RlConfig:
    gamma: float = 0.99
    entropy_weight: float = 0.01
    lr_policy: float = 0.01
    lr_surrogate: float = 0.01
    damping: float = 1e-3
    trust_bound: float = 1e-3
    batch_size: int = 4
    estimator: str = "relax"  # relax | kf-relax
    kfac_decay: float = 0.95
    inverse_period: int = 20
    policy_hidden: tuple = (32,)
    surrogate_hidden: int = 10
    surrogate_layers: int = 3

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.entropy_weight < 0 or self.lr_policy <= 0 or self.lr_surrogate <= 0:
            raise ValueError("weights and learning rates must be non-negative / positive")
        if self.estimator not in ("relax", "kf-relax"):
            raise ValueError(f"unknown RL estimator {self.estimator!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class _Rows:
    obs: np.ndarray
    actions: np.ndarray
    q: np.ndarray
    u: np.ndarray
    v: np.ndarray
    episode: np.ndarray
    n_episodes: int


def _stack(trajs, gamma):
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    if len(trajs) == 0:
        raise ValueError("empty trajectory batch")
    for tr in trajs:
        if tr.u is None or tr.v is None:
            raise ValueError("trajectory is missing its cached uniforms")
    return _Rows(
        np.concatenate([tr.observations for tr in trajs]),
        np.concatenate([tr.actions for tr in trajs]),
        np.concatenate([reward_to_go(tr.rewards, gamma) for tr in trajs]),
        np.concatenate([tr.u for tr in trajs]),
        np.concatenate([tr.v for tr in trajs]),
        np.concatenate([np.full(len(tr), i) for i, tr in enumerate(trajs)]),
        len(trajs),
    )


def _logit_cotangents(rows, policy, surrogate, cfg):
    """Per-step logit cotangents of the RELAX term and of the entropy term."""
    logits, trace = nn.forward(policy.net, rows.obs)
    logits = trace.output
    logp = log_softmax(logits)
    pi = np.exp(logp)
    k = logits.shape[1]
    onehot = np.arange(k) == rows.actions[:, None]
    score = onehot - pi
    ctx = dict(trace=trace, pi=pi, score=score, onehot=onehot)
    if surrogate is None:
        w = score * rows.q[:, None]
    else:
        z = logp - np.log(-np.log(rows.u))
        zt = conditional_gumbel(logp, rows.actions, rows.v)
        dd = conditional_gumbel_jacobian_diag(logp, rows.actions, rows.v)
        x_z = np.concatenate([rows.obs, z], axis=1)
        x_zt = np.concatenate([rows.obs, zt], axis=1)
        c_z, tr_z = nn.forward(surrogate, x_z)
        c_zt, tr_zt = nn.forward(surrogate, x_zt)
        d = rows.obs.shape[1]
        gz = nn.input_gradient(surrogate, tr_z)[:, d:]
        gzt = nn.input_gradient(surrogate, tr_zt)[:, d:] * dd
        jz = gz - pi * gz.sum(axis=1, keepdims=True)
        jzt = gzt - pi * gzt.sum(axis=1, keepdims=True)
        w = score * (rows.q - np.atleast_1d(c_zt))[:, None] + jz - jzt
        ctx.update(z=z, z_tilde=zt, dd=dd, x_z=x_z, x_zt=x_zt, c_z=c_z, c_zt=c_zt)
    _, ent_grad = entropy_bonus(logits)
    return w, ent_grad, ctx


def _variance_blocks(rows, policy, g_relax, ctx):
    _, ldot = nn.forward_param_tangent(policy.net, rows.obs, g_relax)
    ldot = np.atleast_2d(ldot).reshape(len(rows.actions), -1)
    pi, dd = ctx["pi"], ctx["dd"]
    centered = ldot - np.sum(pi * ldot, axis=1, keepdims=True)
    s_dot = np.sum(ldot * ctx["score"], axis=1)
    zeros = np.zeros_like(rows.obs)
    n = rows.n_episodes
    return [
        SurrogateBlock(ctx["x_zt"], np.concatenate([zeros, dd * centered], axis=1), dy=-s_dot / n, dydot=-1.0 / n),
        SurrogateBlock(ctx["x_z"], np.concatenate([zeros, centered], axis=1), dy=0.0, dydot=1.0 / n),
    ]


def relax_rl_gradient(trajs, policy, surrogate, cfg):
    """Batch-mean RL RELAX gradient (ascent direction) plus the entropy bonus.

    ``g_theta`` holds one array per policy layer.  ``internals['relax']`` is the
    control-variate part alone; the surrogate variance objective is built on it.
    Pass ``surrogate=None`` for REINFORCE with reward-to-go.
    """
    rows = _stack(trajs, cfg.gamma)
    w, ent, ctx = _logit_cotangents(rows, policy, surrogate, cfg)
    n = rows.n_episodes
    g_relax = nn.backward(policy.net, ctx["trace"], w / n).grads
    g_ent = nn.backward(policy.net, ctx["trace"], ent / n).grads
    g = [gr + cfg.entropy_weight * ge for gr, ge in zip(g_relax, g_ent)]
    blocks = _variance_blocks(rows, policy, g_relax, ctx) if surrogate is not None else None
    internals = {"relax": g_relax, "entropy": g_ent, "cotangents": w, "n_episodes": n,
                 "z": ctx.get("z"), "z_tilde": ctx.get("z_tilde"), "q": rows.q}
    return GradEstimate(g, internals, blocks)


def reinforce_rl_gradient(trajs, policy, cfg):
    return relax_rl_gradient(trajs, policy, None, cfg)


def per_episode_gradients(trajs, policy, surrogate, cfg, include_entropy=False):
    """``(n_episodes, n_policy_params)`` matrix of single-trajectory estimates."""
    rows = _stack(trajs, cfg.gamma)
    w, ent, ctx = _logit_cotangents(rows, policy, surrogate, cfg)
    if include_entropy:
        w = w + cfg.entropy_weight * ent
    res = nn.backward(policy.net, ctx["trace"], w)
    out = []
    for a, g in res.pairs:
        per = np.zeros((rows.n_episodes, a.shape[1], g.shape[1]))
        np.add.at(per, rows.episode, a[:, :, None] * g[:, None, :])
        out.append(per.reshape(rows.n_episodes, -1))
    return np.concatenate(out, axis=1)


# -- KF-RELAX agent -------------------------------------------------------------------


def make_surrogate(obs_dim, n_actions, rng, cfg):
    sizes = [obs_dim + n_actions] + [cfg.surrogate_hidden] * (cfg.surrogate_layers - 1) + [1]
    return nn.Mlp.init(sizes, rng)


@dataclass
class Agent:
    policy: Policy
    surrogate: nn.Mlp
    cfg: RlConfig
    policy_opt: AdamState = field(default_factory=AdamState)
    surrogate_opt: AdamState = field(default_factory=AdamState)
    kfac: list = None
    trust: TrustRegion = None

    def __post_init__(self):
        if self.kfac is None and self.cfg.estimator == "kf-relax":
            self.kfac = [KfacLayerState.for_weight(w, decay=self.cfg.kfac_decay, damping=self.cfg.damping,
                                                   inverse_period=self.cfg.inverse_period)
                         for w in self.surrogate.weights]
        if self.trust is None:
            self.trust = TrustRegion(self.cfg.trust_bound if self.cfg.estimator == "kf-relax" else np.inf)

    @classmethod
    def create(cls, obs_dim, n_actions, rng, cfg):
        r_pol, r_sur = rng.spawn(2)
        policy = Policy.init(obs_dim, n_actions, r_pol, cfg.policy_hidden)
        return cls(policy, make_surrogate(obs_dim, n_actions, r_sur, cfg), cfg)


def natural_surrogate_step(surrogate, kfac_states, vgrad, lr, trust):
    """Apply ``W <- W - clip(lr * A^-1 grad S^-1)`` layer by layer."""
    new = []
    for st, w, g, (a, gr) in zip(kfac_states, surrogate.weights, vgrad.grads, vgrad.pairs):
        st.accumulate(a, gr)
        st.maybe_refresh()
        new.append(w - clip_update(lr * st.natural_step(g), trust))
    surrogate.weights = new
    return surrogate


def kf_relax_update(agent, trajs):
    """One policy + surrogate update from a batch; mutates ``agent`` and returns the estimate."""
    if len(trajs) == 0:
        raise ValueError("empty trajectory batch")
    cfg = agent.cfg
    est = relax_rl_gradient(trajs, agent.policy, agent.surrogate, cfg)
    vgrad = variance_objective_grad(est, agent.surrogate)
    if agent.kfac is not None:
        natural_surrogate_step(agent.surrogate, agent.kfac, vgrad, cfg.lr_surrogate, agent.trust)
    else:
        agent.surrogate_opt, agent.surrogate.weights = adam_step(
            agent.surrogate_opt, agent.surrogate.weights, vgrad.grads, cfg.lr_surrogate)
    agent.policy_opt, agent.policy.net.weights = adam_step(
        agent.policy_opt, agent.policy.net.weights, [-g for g in est.g_theta], cfg.lr_policy)
    return est


# -- tabular MDPs ---------------------------------------------------------------------


@dataclass
class TabularMdp:
    P: np.ndarray  # (S, A, S)
    r: np.ndarray  # (S, A)
    rho0: np.ndarray  # (S,)
    gamma: float
    theta: np.ndarray  # (S, A) softmax logits

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.rho0 = np.asarray(self.rho0, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if not np.allclose(self.P.sum(axis=2), 1.0) or not np.isclose(self.rho0.sum(), 1.0):
            raise ValueError("transition rows and the initial distribution must sum to 1")

    @classmethod
    def random(cls, rng, n_states=2, n_actions=2, gamma=0.9):
        P = rng.uniform((n_states, n_actions, n_states)) + 0.1
        rho0 = rng.uniform(n_states) + 0.1
        return cls(P / P.sum(axis=2, keepdims=True), rng.uniform((n_states, n_actions)),
                   rho0 / rho0.sum(), gamma, rng.normal((n_states, n_actions)))

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def n_actions(self):
        return self.P.shape[1]

    def policy(self, theta=None):
        return np.exp(log_softmax(self.theta if theta is None else theta))

    def scores(self, theta=None):
        """``psi[s, a]`` = gradient of ``log pi(a|s)`` w.r.t. the flattened logits."""
        pi = self.policy(theta)
        s_n, a_n = pi.shape
        psi = np.zeros((s_n, a_n, s_n * a_n))
        for s in range(s_n):
            for a in range(a_n):
                block = -pi[s].copy()
                block[a] += 1.0
                psi[s, a, s * a_n:(s + 1) * a_n] = block
        return psi

    def values(self, theta=None):
        pi = self.policy(theta)
        p_pi = np.einsum("sa,sat->st", pi, self.P)
        r_pi = np.sum(pi * self.r, axis=1)
        eye = np.eye(self.n_states)
        v = np.linalg.solve(eye - self.gamma * p_pi, r_pi)
        q = self.r + self.gamma * self.P @ v
        rho = np.linalg.solve((eye - self.gamma * p_pi).T, self.rho0)
        return v, q, rho

    def objective(self, theta=None):
        v, _, _ = self.values(theta)
        return float(self.rho0 @ v)

    def policy_gradient(self, theta=None):
        """``grad J`` from the policy gradient theorem, flattened like ``theta``."""
        _, q, rho = self.values(theta)
        pi = self.policy(theta)
        psi = self.scores(theta)
        return np.einsum("s,sa,sa,sak->k", rho, pi, q, psi)


@dataclass
class CompatibleCheck:
    residual: float
    w: np.ndarray
    fisher: np.ndarray
    grad: np.ndarray
    used_pinv: bool


def compatible_natgrad_check(mdp, w=None):
    """Relative residual ``|F w - grad J| / |grad J|`` for the compatible least-squares ``w``.

    Everything is computed exactly.  The softmax parameterization makes F
    singular, so the minimum-norm minimizer is used and ``used_pinv`` is set.
    """
    v, q, rho = mdp.values()
    pi = mdp.policy()
    psi = mdp.scores()
    adv = q - v[:, None]
    weight = (rho[:, None] * pi).reshape(-1)
    design = psi.reshape(-1, psi.shape[-1])
    fisher = design.T @ (weight[:, None] * design)
    grad = mdp.policy_gradient()
    used_pinv = False
    if w is None:
        sw = np.sqrt(weight)
        w, _, rank, _ = np.linalg.lstsq(sw[:, None] * design, sw * adv.reshape(-1), rcond=None)
        used_pinv = rank < design.shape[1]
    residual = np.linalg.norm(fisher @ w - grad) / np.linalg.norm(grad)
    return CompatibleCheck(float(residual), w, fisher, grad, used_pinv)


def policy_improvement_direction_check(mdp, alpha, w=None):
    """Max over (s, a) of the gap between the updated policy and its first-order prediction."""
    if w is None:
        w = compatible_natgrad_check(mdp).w
    pi = mdp.policy()
    new_pi = mdp.policy(mdp.theta + alpha * w.reshape(mdp.theta.shape))
    f = mdp.scores() @ w
    return float(np.max(np.abs(new_pi - pi * (1.0 + alpha * f))))


class TabularEnv:
    """Episodic wrapper over a :class:`TabularMdp` with one-hot observations."""

    name = "tabular"

    def __init__(self, mdp, horizon):
        self.mdp = mdp
        self.horizon = horizon
        self.max_steps = horizon
        self.n_actions = mdp.n_actions
        self.obs_dim = mdp.n_states
        self._rng = None
        self._s = None
        self._t = 0

    def _obs(self):
        o = np.zeros(self.obs_dim)
        o[self._s] = 1.0
        return o

    def _draw(self, probs):
        return min(int(np.searchsorted(np.cumsum(probs), self._rng.uniform())), len(probs) - 1)

    def reset(self, rng):
        self._rng = rng
        self._s = self._draw(self.mdp.rho0)
        self._t = 0
        return self._obs()

    def step(self, action):
        if self._t >= self.horizon:
            raise EpisodeDone("tabular episode already finished")
        reward = float(self.mdp.r[self._s, action])
        self._s = self._draw(self.mdp.P[self._s, action])
        self._t += 1
        return StepResult(self._obs(), reward, self._t >= self.horizon)


def finite_horizon_gradient(mdp, horizon, undiscounted_time=False):
    """Exact gradient of ``J_H = E[sum_{t<H} gamma^t r_t]`` w.r.t. the tabular logits.

    With ``undiscounted_time`` the ``gamma^t`` weight on each step's score term
    is dropped, which is the expectation of the reward-to-go estimator.
    """
    pi = mdp.policy()
    psi = mdp.scores()
    s_n = mdp.n_states
    # q[k] = Q with k steps to go
    q_to_go = [np.zeros_like(mdp.r)]
    v = np.zeros(s_n)
    for _ in range(horizon):
        q = mdp.r + mdp.gamma * mdp.P @ v
        v = np.sum(pi * q, axis=1)
        q_to_go.append(q)
    d = mdp.rho0.copy()
    p_pi = np.einsum("sa,sat->st", pi, mdp.P)
    grad = np.zeros(psi.shape[-1])
    for t in range(horizon):
        weight = 1.0 if undiscounted_time else mdp.gamma**t
        grad += weight * np.einsum("s,sa,sa,sak->k", d, pi, q_to_go[horizon - t], psi)
        d = d @ p_pi
    return grad


def finite_horizon_objective(mdp, horizon, theta=None):
    pi = mdp.policy(theta)
    v = np.zeros(mdp.n_states)
    for _ in range(horizon):
        v = np.sum(pi * (mdp.r + mdp.gamma * mdp.P @ v), axis=1)
    return float(mdp.rho0 @ v)


def tabular_policy(mdp):
    """Linear policy on one-hot states whose logits equal ``mdp.theta`` (zero bias)."""
    w = np.vstack([mdp.theta, np.zeros((1, mdp.n_actions))])
    return Policy(nn.Mlp([w], "tanh"))


def logit_grad_to_policy_weights(grad_logits, mdp):
    """Chain a flattened tabular-logit gradient to the one-hot linear policy's weights."""
    g = grad_logits.reshape(mdp.theta.shape)
    return np.vstack([g, g.sum(axis=0, keepdims=True)]).reshape(-1)
