"""SGD and bias-corrected Adam over lists of numpy arrays (or single arrays/floats)."""
from dataclasses import dataclass, field

import numpy as np

LR_GRID = (0.03, 0.01, 1e-3, 1e-4)


def _as_list(x):
    if isinstance(x, (list, tuple)):
        return [np.asarray(p, dtype=float) for p in x], True
    return [np.asarray(x, dtype=float)], False


def _pack(params, was_list):
    if was_list:
        return params
    p = params[0]
    return float(p) if p.ndim == 0 else p


def _check(params, grads):
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")


def sgd_step(params, grads, lr):
    if lr <= 0:
        raise ValueError("lr must be positive")
    ps, was_list = _as_list(params)
    gs, _ = _as_list(grads)
    _check(ps, gs)
    return _pack([p - lr * g for p, g in zip(ps, gs)], was_list)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list = field(default=None)
    v: list = field(default=None)
    step_count: int = 0

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


def adam_step(state, params, grads, lr):
    """One Adam step; mutates ``state`` and returns ``(state, new_params)``."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    ps, was_list = _as_list(params)
    gs, _ = _as_list(grads)
    _check(ps, gs)
    if state.m is None:
        state.m = [np.zeros_like(p) for p in ps]
        state.v = [np.zeros_like(p) for p in ps]
    state.step_count += 1
    b1, b2, k = state.beta1, state.beta2, state.step_count
    c1, c2 = 1.0 - b1**k, 1.0 - b2**k
    out = []
    for i, (p, g) in enumerate(zip(ps, gs)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return state, _pack(out, was_list)
