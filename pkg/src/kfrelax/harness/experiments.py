"""Experiment runners behind the CLI subcommands."""
import json
import math
import time
from pathlib import Path

import numpy as np

from .. import estimators as est
from .. import rl
from ..envs import make_env
from ..kfac import TrustRegion, kfac_states_for
from ..mlp import Mlp
from ..optim import AdamState, adam_step, sgd_step
from ..rl import natural_surrogate_step
from ..samplers import Rng
from .records import RunRecord

LEMMA2_ALPHAS = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
LEMMA1_TOL = 1e-6


def measure_variance(draw, m):
    """Mean and summed per-coordinate unbiased variance of ``m`` fresh estimates.

    ``draw(m)`` must return an array of shape ``(m,)`` or ``(m, d)``.
    """
    if m < 2:
        raise ValueError("need at least two samples")
    g = np.asarray(draw(m), dtype=float)
    if g.shape[0] != m:
        raise ValueError(f"draw returned {g.shape[0]} estimates, expected {m}")
    g = g.reshape(m, -1)
    mean = g.mean(axis=0)
    var = float(np.sum(g.var(axis=0, ddof=1)))
    return (float(mean[0]) if mean.size == 1 else mean), var


def _log10(var):
    return math.log10(max(var, 1e-300))


def _output_path(cfg, seed, stem):
    return Path(cfg.out) / f"{stem}_seed{seed}.csv"


# -- toy problem ----------------------------------------------------------------------


def toy_variance_draw(theta, t, estimator, surrogate, rng):
    def draw(m):
        u = rng.uniform(m)
        if estimator == "reinforce":
            return est.reinforce_toy_from_uniforms(theta, t, u)
        return est.relax_toy_from_uniforms(theta, t, surrogate, u, rng.uniform(m))[0]
    return draw


class _SurrogateTrainer:
    """Adam (RELAX/LAX) or clipped KFAC natural steps (KF-RELAX/KF-LAX) on the surrogate."""

    def __init__(self, surrogate, cfg, natural):
        self.surrogate = surrogate
        self.cfg = cfg
        self.natural = natural
        self.opt = AdamState()
        self.kfac = kfac_states_for(surrogate, decay=cfg.kfac_decay, damping=cfg.damping,
                                    inverse_period=cfg.inverse_period) if natural else None
        self.trust = TrustRegion(cfg.trust_bound)

    def step(self, estimate):
        vgrad = est.variance_objective_grad(estimate, self.surrogate)
        if self.natural:
            natural_surrogate_step(self.surrogate, self.kfac, vgrad, self.cfg.lr_surrogate, self.trust)
        else:
            self.opt, self.surrogate.weights = adam_step(self.opt, self.surrogate.weights, vgrad.grads,
                                                         self.cfg.lr_surrogate)


def _surrogate_sizes(cfg, d_in=1):
    return [d_in] + [cfg.surrogate_hidden] * (cfg.surrogate_layers - 1) + [1]


class _ThetaStepper:
    def __init__(self, cfg):
        self.cfg = cfg
        self.opt = AdamState()

    def __call__(self, theta, g):
        if self.cfg.theta_optimizer == "adam":
            self.opt, theta = adam_step(self.opt, theta, g, self.cfg.lr_theta)
            return float(theta)
        return float(sgd_step(theta, g, self.cfg.lr_theta))


def run_toy_seed(cfg, seed, measure=True):
    """Optimize the Bernoulli toy objective for one seed; returns the RunRecord."""
    rng = Rng(seed)
    r_init, r_train, r_meas = rng.spawn(3)
    surrogate = Mlp.init(_surrogate_sizes(cfg), r_init)
    trainer = None
    if cfg.estimator != "reinforce":
        trainer = _SurrogateTrainer(surrogate, cfg, natural=cfg.estimator == "kf-relax")
    step_theta = _ThetaStepper(cfg)
    rec = RunRecord(cfg.estimator, seed, meta={"config": cfg.as_dict(), "loss": "exact expected loss"})
    theta, t = float(cfg.theta0), cfg.t
    start = time.perf_counter()
    for step in range(cfg.steps + 1):
        if step % cfg.log_period == 0 or step == cfg.steps:
            rec.add(step, "expected_loss", est.expected_toy_loss(theta, t))
            rec.add(step, "theta", theta)
        if measure and (step % cfg.variance_period == 0 or step == cfg.steps):
            draw = toy_variance_draw(theta, t, cfg.estimator, surrogate, r_meas.fork())
            _, var = measure_variance(draw, cfg.variance_samples)
            rec.add(step, "log10_variance", _log10(var))
        if step == cfg.steps:
            break
        if cfg.estimator == "reinforce":
            g = est.reinforce_toy(theta, t, r_train).g_theta
        else:
            e = est.relax_toy_estimate(theta, t, surrogate, r_train)
            trainer.step(e)
            g = e.g_theta
        theta = step_theta(theta, g)
    rec.meta["wall_clock_seconds"] = time.perf_counter() - start
    rec.meta["final_theta"] = theta
    rec.final = {"theta": theta, "surrogate": surrogate}
    return rec


def run_toy(cfg, write=True):
    records = []
    for seed in cfg.seeds:
        rec = run_toy_seed(cfg, seed)
        if write:
            rec.write(_output_path(cfg, seed, f"toy_{cfg.estimator}_t{cfg.t:g}"))
        records.append(rec)
    return records


# -- continuous LAX demo ---------------------------------------------------------------


def demo_expected_loss(theta, t):
    return (theta - t) ** 2 + 1.0


def run_lax_seed(cfg, seed):
    rng = Rng(seed)
    r_init, r_train, r_meas = rng.spawn(3)
    surrogate = Mlp.init(_surrogate_sizes(cfg), r_init)
    f = est.demo_f(cfg.t)
    trainer = None
    if cfg.estimator != "reinforce":
        trainer = _SurrogateTrainer(surrogate, cfg, natural=cfg.estimator == "kf-lax")
    step_theta = _ThetaStepper(cfg)
    rec = RunRecord(cfg.estimator, seed, meta={"config": cfg.as_dict(), "loss": "exact expected loss"})
    theta = float(cfg.theta0)
    zero = lambda x: (np.zeros_like(x), np.zeros_like(x))  # noqa: E731
    start = time.perf_counter()
    for step in range(cfg.steps + 1):
        if step % cfg.log_period == 0 or step == cfg.steps:
            rec.add(step, "expected_loss", demo_expected_loss(theta, cfg.t))
            rec.add(step, "theta", theta)
        if step % cfg.variance_period == 0 or step == cfg.steps:
            r = r_meas.fork()
            c = zero if cfg.estimator == "reinforce" else surrogate
            _, var = measure_variance(lambda m: est.lax_from_noise(theta, f, c, r.normal(m))[0],
                                      cfg.variance_samples)
            rec.add(step, "log10_variance", _log10(var))
        if step == cfg.steps:
            break
        if cfg.estimator == "reinforce":
            g = est.lax_estimate(theta, f, zero, r_train).g_theta
        else:
            e = est.lax_estimate(theta, f, surrogate, r_train)
            trainer.step(e)
            g = e.g_theta
        theta = step_theta(theta, g)
    rec.meta["wall_clock_seconds"] = time.perf_counter() - start
    return rec


def run_lax_demo(cfg, write=True):
    records = []
    for seed in cfg.seeds:
        rec = run_lax_seed(cfg, seed)
        if write:
            rec.write(_output_path(cfg, seed, f"lax_{cfg.estimator}_t{cfg.t:g}"))
        records.append(rec)
    return records


# -- reinforcement learning -----------------------------------------------------------


def rl_config(cfg):
    return rl.RlConfig(
        gamma=cfg.gamma, entropy_weight=cfg.entropy_weight, lr_policy=cfg.lr_policy,
        lr_surrogate=cfg.lr_surrogate, damping=cfg.damping, trust_bound=cfg.trust_bound,
        batch_size=cfg.batch_size, estimator=cfg.estimator, kfac_decay=cfg.kfac_decay,
        inverse_period=cfg.inverse_period, policy_hidden=(cfg.policy_hidden,),
        surrogate_hidden=cfg.surrogate_hidden, surrogate_layers=cfg.surrogate_layers,
    )


def rl_variance(env, agent, rng, m):
    """Variance of single-trajectory RELAX estimates at frozen policy and surrogate."""
    def draw(n):
        trajs = [rl.rollout(env, agent.policy, rng) for _ in range(n)]
        return rl.per_episode_gradients(trajs, agent.policy, agent.surrogate, agent.cfg)
    return measure_variance(draw, m)[1]


def run_rl_seed(cfg, seed, measure=True, stop_at=None):
    """Train one agent; with ``stop_at`` the run ends once the 100-episode mean reaches it."""
    rcfg = rl_config(cfg)
    env = make_env(cfg.env)
    rng = Rng(seed)
    r_agent, r_roll, r_meas = rng.spawn(3)
    agent = rl.Agent.create(env.obs_dim, env.n_actions, r_agent, rcfg)
    meas_env = make_env(cfg.env)
    rec = RunRecord(cfg.estimator, seed, meta={"config": cfg.as_dict()})
    returns, frames, updates = [], 0, 0
    start = time.perf_counter()
    while len(returns) < cfg.episodes:
        if measure and updates % cfg.rl_variance_period == 0:
            var = rl_variance(meas_env, agent, r_meas.fork(), cfg.rl_variance_samples)
            rec.add(len(returns), "log10_variance", _log10(var))
        n = min(cfg.batch_size, cfg.episodes - len(returns))
        batch = [rl.rollout(env, agent.policy, r_roll) for _ in range(n)]
        for traj in batch:
            returns.append(traj.total_return)
            frames += len(traj)
            ep = len(returns)
            rec.add(ep, "episode_return", traj.total_return)
            rec.add(ep, "running_mean_100", float(np.mean(returns[-100:])))
            rec.add(ep, "frames", frames)
        rl.kf_relax_update(agent, batch)
        updates += 1
        if stop_at is not None and len(returns) >= 100 and np.mean(returns[-100:]) >= stop_at:
            break
    rec.meta["wall_clock_seconds"] = time.perf_counter() - start
    rec.meta["frames"] = frames
    rec.final = {"agent": agent, "returns": returns}
    return rec


def run_rl(cfg, write=True):
    records = []
    for seed in cfg.seeds:
        rec = run_rl_seed(cfg, seed)
        if write:
            rec.write(_output_path(cfg, seed, f"rl_{cfg.env}_{cfg.estimator}"))
        records.append(rec)
    return records


# -- lemma checks ----------------------------------------------------------------------


def lemma2_ratios(mdp, w, alphas=LEMMA2_ALPHAS):
    return [rl.policy_improvement_direction_check(mdp, a, w) / a**2 for a in alphas]


def run_lemma_checks(cfg, write=True):
    """Exact checks of the compatible-approximation lemmas on random tabular MDPs."""
    report = {"seed": cfg.seeds[0], "mdps": [], "passed": True}
    rng = Rng(cfg.seeds[0])
    for i, r in enumerate(rng.spawn(cfg.n_mdps)):
        mdp = rl.TabularMdp.random(r, cfg.n_states, cfg.n_actions, cfg.mdp_gamma)
        chk = rl.compatible_natgrad_check(mdp)
        ratios = lemma2_ratios(mdp, chk.w)
        ratios = [float(r) for r in ratios]
        ratio_ok = bool(max(ratios) <= 2.0 * min(ratios) and min(ratios) > 0)
        lemma1_ok = bool(chk.residual <= LEMMA1_TOL)
        ok = lemma1_ok and ratio_ok
        report["mdps"].append({
            "index": i, "lemma1_residual": float(chk.residual), "used_pinv": bool(chk.used_pinv),
            "lemma2_error_over_alpha_sq": ratios, "lemma1_pass": lemma1_ok,
            "lemma2_pass": ratio_ok,
        })
        report["passed"] = report["passed"] and ok
    if write:
        path = Path(cfg.out) / f"lemmas_seed{cfg.seeds[0]}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        report["path"] = str(path)
    return report
