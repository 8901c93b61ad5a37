"""Seeded randomness and the relaxed / conditional-relaxed samplers.

Bernoulli variables use the logistic reparameterization ``z = theta + logit(u)``
with hard sample ``b = H(z)``; the conditional sample ``z_tilde ~ p(z | b)`` is
the inverse CDF of the truncated logistic.  Categorical variables use
Gumbel-max with the top-down conditional Gumbel construction.

All sampling functions are vectorized: scalar or array inputs broadcast.
"""
import numpy as np


class Rng:
    """Seeded random stream.

    Backed by numpy's PCG64 bit generator seeded through ``SeedSequence``;
    child streams come from ``SeedSequence.spawn`` so forking never advances
    the parent's state.  Uniforms are drawn on the open interval (0, 1):
    exact zeros are rejected and redrawn.
    """

    def __init__(self, seed=0, _seq=None):
        self.seed = int(seed)
        self._seq = _seq if _seq is not None else np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def uniform(self, size=None):
        u = self._gen.random(size)
        if size is None:
            while u == 0.0:
                u = self._gen.random()
            return u
        zero = u == 0.0
        while np.any(zero):
            u[zero] = self._gen.random(int(zero.sum()))
            zero = u == 0.0
        return u

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def spawn(self, n):
        return [Rng(self.seed, s) for s in self._seq.spawn(n)]

    def fork(self):
        return self.spawn(1)[0]

    def state(self):
        return self._gen.bit_generator.state


def _check_open_unit(u, name):
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)) or not np.all(np.isfinite(u)):
        raise ValueError(f"{name} must lie strictly inside (0, 1)")
    return u


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def logistic_reparam(theta, u):
    u = _check_open_unit(u, "u")
    return _scalar(theta + np.log(u) - np.log1p(-u))


def heaviside(z):
    return _scalar(np.where(np.asarray(z) >= 0.0, 1, 0))


def conditional_logistic(theta, b, v):
    """Sample ``z ~ Logistic(theta, 1)`` conditioned on ``H(z) = b``."""
    v = _check_open_unit(v, "v")
    theta = np.asarray(theta, dtype=float)
    b = np.asarray(b)
    p = sigmoid(theta)
    # u restricted to the interval that maps to b, then z = theta + logit(u)
    u_one = 1.0 - p * (1.0 - v)
    u_zero = v * (1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_one = theta + np.log(u_one) - np.log(p * (1.0 - v))
        z_zero = theta + np.log(u_zero) - np.log1p(-u_zero)
    return _scalar(np.where(b == 1, z_one, z_zero))


def conditional_logistic_dtheta(theta, b, v):
    """Derivative of :func:`conditional_logistic` in ``theta`` at fixed ``(b, v)``."""
    v = np.asarray(v, dtype=float)
    p = sigmoid(np.asarray(theta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        d_one = 1.0 - (1.0 - p) / (1.0 - p * (1.0 - v))
        d_zero = 1.0 - p / (1.0 - v * (1.0 - p))
    return _scalar(np.where(np.asarray(b) == 1, d_one, d_zero))


def log_softmax(logits):
    logits = np.asarray(logits, dtype=float)
    m = np.max(logits, axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def gumbel_reparam(logits, u):
    """Gumbel-max: ``z_k = logits_k - log(-log u_k)``, ``a = argmax z``.

    Works on a single vector or on rows of a matrix.  ``argmax`` breaks ties
    toward the lowest index.  For :func:`conditional_gumbel` to be the exact
    conditional, pass normalized logits (log-probabilities).
    """
    logits = np.asarray(logits, dtype=float)
    u = _check_open_unit(u, "u")
    if u.shape != logits.shape:
        raise ValueError("logits and u shapes differ")
    z = logits - np.log(-np.log(u))
    a = np.argmax(z, axis=-1)
    return z, (int(a) if np.ndim(a) == 0 else a)


def _conditional_terms(logits, a, v):
    logits = np.asarray(logits, dtype=float)
    v = _check_open_unit(v, "v")
    if v.shape != logits.shape:
        raise ValueError("logits and v shapes differ")
    a = np.asarray(a)
    k = logits.shape[-1]
    if np.any((a < 0) | (a >= k)):
        raise ValueError("action index out of range")
    pi = softmax(logits)
    e = -np.log(v)
    onehot = np.arange(k) == a[..., None]
    e_a = np.sum(np.where(onehot, e, 0.0), axis=-1, keepdims=True)
    ratio = e / pi  # "exponential clock" of each loser
    return onehot, e, e_a, ratio, pi


def conditional_gumbel(logits, a, v):
    """Sample the Gumbel-perturbed log-probabilities conditioned on ``argmax = a``."""
    onehot, e, e_a, ratio, _ = _conditional_terms(logits, a, v)
    z_top = -np.log(e)
    z_rest = -np.log(ratio + e_a)
    return np.where(onehot, z_top, z_rest)


def conditional_gumbel_jacobian_diag(logits, a, v):
    """Per-coordinate ``d z_tilde_k / d log pi_k`` at fixed uniforms (0 at ``a``).

    ``z_tilde`` depends on the logits only through ``log pi``, so the full
    Jacobian w.r.t. the logits is ``diag(d) @ (I - 1 pi^T)``.
    """
    onehot, e, e_a, ratio, _ = _conditional_terms(logits, a, v)
    return np.where(onehot, 0.0, ratio / (ratio + e_a))
