"""Single-sample gradient estimators for the Bernoulli toy problem and the LAX demo.

The toy problem minimizes ``E_{b ~ Bernoulli(sigmoid(theta))}[(b - t)^2]``.  The
``*_from_uniforms`` functions are vectorized over a batch of uniforms and are
what the Monte-Carlo checks use; the rng-taking wrappers draw one sample.

A :class:`GradEstimate` keeps the surrogate evaluation points of the sample so
that the gradient of ``g_theta**2`` with respect to the surrogate weights can be
formed afterwards (:func:`variance_objective_grad`).
"""
from dataclasses import dataclass, field

import numpy as np

from . import mlp as nn
from .samplers import (
    conditional_logistic,
    conditional_logistic_dtheta,
    heaviside,
    logistic_reparam,
    sigmoid,
)


@dataclass
class SurrogateBlock:
    """One batch of surrogate evaluations entering ``d g / d phi``.

    The block contributes ``dy * c(X) + dydot * (dc/dX . Xdot)`` to the scalar
    whose weight gradient is wanted.
    """

    x: np.ndarray
    xdot: np.ndarray
    dy: object = 0.0
    dydot: object = 0.0


@dataclass
class GradEstimate:
    g_theta: object
    internals: dict = field(default_factory=dict)
    blocks: list = None  # weighted so that grad(g^2) = 2 * sum(block grads)


def surrogate_block_grads(surrogate, blocks, scale=1.0):
    """Weight gradient of ``scale * sum(block contributions)`` plus KFAC row pairs."""
    grads = [np.zeros_like(w) for w in surrogate.weights]
    acts = [[] for _ in surrogate.weights]
    outs = [[] for _ in surrogate.weights]
    for blk in blocks:
        _, _, tr, ttr = nn.forward_tangent(surrogate, np.atleast_2d(blk.x), np.atleast_2d(blk.xdot))
        res = nn.backward_over_tangent(surrogate, tr, ttr, dydot=blk.dydot, dy=blk.dy)
        for i, (g, (a, gr)) in enumerate(zip(res.grads, res.pairs)):
            grads[i] += scale * g
            acts[i].append(a)
            outs[i].append(scale * gr)
    pairs = [(np.concatenate(a), np.concatenate(g)) for a, g in zip(acts, outs)]
    return nn.BackwardResult(grads, [], pairs)


def variance_objective_grad(estimate, surrogate):
    """Exact gradient of the single-sample ``g_theta**2`` (sum of squares for vectors)."""
    if estimate.blocks is None:
        raise ValueError("estimate carries no surrogate internals")
    return surrogate_block_grads(surrogate, estimate.blocks, scale=2.0)


# -- toy problem ---------------------------------------------------------------


def toy_f(b, t):
    return (np.asarray(b, dtype=float) - t) ** 2


def expected_toy_loss(theta, t):
    p = sigmoid(theta)
    return p * (1.0 - t) ** 2 + (1.0 - p) * t**2


def true_toy_grad(theta, t):
    p = sigmoid(theta)
    return p * (1.0 - p) * (1.0 - 2.0 * t)


def _score(b, p):
    return np.where(np.asarray(b) == 1, 1.0 - p, -p)


def reinforce_toy_from_uniforms(theta, t, u):
    b = heaviside(logistic_reparam(theta, u))
    return toy_f(b, t) * _score(b, sigmoid(theta))


def reinforce_toy(theta, t, rng):
    u = rng.uniform()
    b = heaviside(logistic_reparam(theta, u))
    g = float(reinforce_toy_from_uniforms(theta, t, u))
    return GradEstimate(g, {"u": u, "b": b})


def _surrogate_value_and_tangent(surrogate, x, xdot):
    c, cdot, _, _ = nn.forward_tangent(surrogate, np.reshape(x, (-1, 1)), np.reshape(xdot, (-1, 1)))
    return np.atleast_1d(c), np.atleast_1d(cdot)


def relax_toy_from_uniforms(theta, t, surrogate, u, v):
    """Vectorized RELAX estimates; returns ``(g, details)`` with 1-D arrays."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    p = sigmoid(theta)
    z = np.atleast_1d(logistic_reparam(theta, u))
    b = np.atleast_1d(heaviside(z))
    zt = np.atleast_1d(conditional_logistic(theta, b, v))
    dzt = np.atleast_1d(conditional_logistic_dtheta(theta, b, v))
    dz = np.ones_like(z)
    score = _score(b, p)
    f = toy_f(b, t)
    c_z, cdot_z = _surrogate_value_and_tangent(surrogate, z, dz)
    c_zt, cdot_zt = _surrogate_value_and_tangent(surrogate, zt, dzt)
    g = (f - c_zt) * score + cdot_z - cdot_zt
    details = dict(u=u, v=v, z=z, b=b, z_tilde=zt, dz=dz, dz_tilde=dzt,
                   score=score, f=f, c_z=c_z, c_z_tilde=c_zt)
    return g, details


def relax_toy_estimate(theta, t, surrogate, rng):
    u = rng.uniform()
    v = rng.uniform()
    g, d = relax_toy_from_uniforms(theta, t, surrogate, u, v)
    g = float(g[0])
    # grad(g^2) = 2 g [ -score * dc(zt) + d(cdot_z) - d(cdot_zt) ]
    blocks = [
        SurrogateBlock(d["z_tilde"][:, None], d["dz_tilde"][:, None], dy=-d["score"] * g, dydot=-g),
        SurrogateBlock(d["z"][:, None], d["dz"][:, None], dy=0.0, dydot=g),
    ]
    internals = {k: (val[0] if isinstance(val, np.ndarray) else val) for k, val in d.items()}
    return GradEstimate(g, internals, blocks)


# -- continuous LAX demo -------------------------------------------------------


def demo_f(t):
    """``f(x) = (x - t)^2`` with true gradient ``2 (theta - t)`` for ``x ~ N(theta, 1)``."""
    def f(x):
        return (np.asarray(x, dtype=float) - t) ** 2
    return f


def _eval_surrogate(surrogate, x):
    """``(c(x), dc/dx)`` for an Mlp or for a callable returning that pair."""
    if isinstance(surrogate, nn.Mlp):
        c, cdot, _, _ = nn.forward_tangent(surrogate, np.reshape(x, (-1, 1)), np.ones((np.size(x), 1)))
        return np.atleast_1d(c), np.atleast_1d(cdot)
    c, dc = surrogate(x)
    return np.atleast_1d(np.asarray(c, dtype=float)), np.atleast_1d(np.asarray(dc, dtype=float))


def lax_from_noise(theta, f, surrogate, eps):
    """Vectorized LAX with ``x = theta + eps``, ``eps ~ N(0, 1)``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    x = theta + eps
    score = x - theta
    c, dc = _eval_surrogate(surrogate, x)
    return (np.atleast_1d(f(x)) - c) * score + dc, x, score


def lax_estimate(theta, f, surrogate, rng=None, eps=None):
    if eps is None:
        eps = rng.normal()
    g, x, score = lax_from_noise(theta, f, surrogate, eps)
    g = float(g[0])
    blocks = None
    if isinstance(surrogate, nn.Mlp):
        one = np.ones((1, 1))
        blocks = [SurrogateBlock(x[:, None], one, dy=-score * g, dydot=g)]
    return GradEstimate(g, {"eps": float(np.ravel(eps)[0]), "x": float(x[0]), "score": float(score[0])}, blocks)


def reparam_estimate(theta, f_grad, eps):
    return f_grad(theta + np.asarray(eps, dtype=float))


def score_function_gaussian(theta, f, eps):
    eps = np.asarray(eps, dtype=float)
    return f(theta + eps) * eps
