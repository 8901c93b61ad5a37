"""Kronecker-factored curvature state for one dense layer.

Weights are stored ``(d_in + 1, d_out)``.  The vec convention is row-major
flattening of that matrix (equivalently column stacking of the transposed
``d_out x (d_in + 1)`` matrix used in ``s = W a``), under which
``vec(A^-1 G S^-1) = (A (x) S)^-1 vec(G)``.
"""
from dataclasses import dataclass

import numpy as np

from .linalg import invert_spd

DAMPING_GRID = (0.1, 0.01, 1e-3, 5e-4)
TRUST_GRID = (1e-3, 1e-4, 1e-5, 1e-6)


def vec(g):
    return np.asarray(g, dtype=float).reshape(-1)


def unvec(v, shape):
    return np.asarray(v, dtype=float).reshape(shape)


class StaleInverseError(RuntimeError):
    pass


@dataclass
class TrustRegion:
    max_update_norm: float = np.inf

    def __post_init__(self):
        if not self.max_update_norm > 0:
            raise ValueError("trust-region bound must be positive")


def clip_update(delta, tr):
    """Rescale ``delta`` so its Frobenius norm does not exceed the bound."""
    delta = np.asarray(delta, dtype=float)
    norm = np.linalg.norm(delta)
    if norm <= tr.max_update_norm:
        return delta
    return delta * (tr.max_update_norm / norm)


@dataclass
class KfacLayerState:
    d_in: int  # including the bias coordinate
    d_out: int
    decay: float = 0.95
    damping: float = 1e-3
    inverse_period: int = 20
    frozen: bool = False  # factors fixed; accumulate is a no-op
    A: np.ndarray = None
    S: np.ndarray = None
    A_inv: np.ndarray = None
    S_inv: np.ndarray = None
    step_count: int = 0

    def __post_init__(self):
        if not 0.0 <= self.decay < 1.0:
            raise ValueError("decay must lie in [0, 1)")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if self.inverse_period < 1:
            raise ValueError("inverse_period must be >= 1")

    @classmethod
    def for_weight(cls, w, **kw):
        return cls(w.shape[0], w.shape[1], **kw)

    @classmethod
    def identity(cls, d_in, d_out):
        """Factors and inverses pinned to the identity (plain gradient metric)."""
        st = cls(d_in, d_out, damping=0.0, frozen=True)
        st.A, st.S = np.eye(d_in), np.eye(d_out)
        st.A_inv, st.S_inv = np.eye(d_in), np.eye(d_out)
        return st

    def accumulate(self, a, g):
        """EMA update of ``A`` and ``S`` from rows of activations ``a`` and gradients ``g``.

        A batch of rows contributes its mean outer product as one sample.
        """
        a = np.atleast_2d(np.asarray(a, dtype=float))
        g = np.atleast_2d(np.asarray(g, dtype=float))
        if a.shape[1] != self.d_in or g.shape[1] != self.d_out:
            raise ValueError(f"expected widths ({self.d_in}, {self.d_out}), got ({a.shape[1]}, {g.shape[1]})")
        if a.shape[0] != g.shape[0]:
            raise ValueError("a and g must have the same number of rows")
        self.step_count += 1
        if self.frozen:
            return self
        aa = a.T @ a / a.shape[0]
        gg = g.T @ g / g.shape[0]
        if self.A is None:
            self.A, self.S = aa, gg
        else:
            r = self.decay
            self.A = r * self.A + (1.0 - r) * aa
            self.S = r * self.S + (1.0 - r) * gg
        return self

    def refresh_inverses(self):
        if self.A is None:
            raise StaleInverseError("no statistics accumulated yet")
        self.A_inv = invert_spd(0.5 * (self.A + self.A.T), self.damping)
        self.S_inv = invert_spd(0.5 * (self.S + self.S.T), self.damping)
        return self

    def maybe_refresh(self):
        """Re-invert on the first call and then every ``inverse_period`` accumulations."""
        if self.frozen:
            return self
        if self.A_inv is None or self.step_count % self.inverse_period == 0:
            self.refresh_inverses()
        return self

    def natural_step(self, grad):
        if self.A_inv is None or self.S_inv is None:
            raise StaleInverseError("inverses were never computed")
        grad = np.asarray(grad, dtype=float)
        if grad.shape != (self.d_in, self.d_out):
            raise ValueError(f"gradient shape {grad.shape} != {(self.d_in, self.d_out)}")
        return self.A_inv @ grad @ self.S_inv


def kfac_states_for(net, **kw):
    return [KfacLayerState.for_weight(w, **kw) for w in net.weights]
