"""Fixed-architecture MLP with hand-written reverse, tangent and double-backprop passes.

Every layer stores a single weight matrix of shape ``(d_in + 1, d_out)`` whose
last row is the bias, so a layer computes ``s = [a, 1] @ W``.  All passes are
batch-first: a 1-D input is treated as a batch of one row and outputs are
squeezed back.

Besides plain gradients, the passes return the per-layer ``(activation,
pre-activation gradient)`` row pairs whose outer products sum to each weight
gradient.  Those pairs are what the KFAC statistics are built from.
"""
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "identity")


def _act(name, s):
    if name == "tanh":
        t = np.tanh(s)
        return t, 1.0 - t * t, -2.0 * t * (1.0 - t * t)
    one = np.ones_like(s)
    return s, one, np.zeros_like(s)


def _with_bias(h, value=1.0):
    return np.concatenate([h, np.full((h.shape[0], 1), value)], axis=1)


@dataclass
class Mlp:
    weights: list
    hidden: str = "tanh"

    def __post_init__(self):
        if self.hidden not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.hidden!r}")
        self.weights = [np.array(w, dtype=float) for w in self.weights]
        for i, w in enumerate(self.weights):
            if w.ndim != 2 or w.shape[0] < 2:
                raise ValueError(f"layer {i}: bad weight shape {w.shape}")
        for i in range(1, len(self.weights)):
            if self.weights[i].shape[0] != self.weights[i - 1].shape[1] + 1:
                raise ValueError(f"layer {i} does not chain with layer {i - 1}")

    @classmethod
    def init(cls, sizes, rng, hidden="tanh", scale=1.0):
        """Uniform init in +-scale/sqrt(fan_in); biases included in the draw."""
        weights = []
        for d_in, d_out in zip(sizes[:-1], sizes[1:]):
            bound = scale / np.sqrt(d_in)
            weights.append(bound * (2.0 * rng.uniform((d_in + 1, d_out)) - 1.0))
        return cls(weights, hidden)

    @classmethod
    def zeros(cls, sizes, hidden="tanh", output_bias=0.0):
        weights = [np.zeros((i + 1, o)) for i, o in zip(sizes[:-1], sizes[1:])]
        weights[-1][-1, :] = output_bias
        return cls(weights, hidden)

    @property
    def sizes(self):
        return [self.weights[0].shape[0] - 1] + [w.shape[1] for w in self.weights]

    @property
    def n_params(self):
        return sum(w.size for w in self.weights)

    def copy(self):
        return Mlp([w.copy() for w in self.weights], self.hidden)

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class ForwardTrace:
    inputs: list  # a_l with the bias column appended, (n, d_in + 1)
    pre: list  # s_l, (n, d_out)
    output: np.ndarray  # (n, d_out)
    squeeze: bool = False


@dataclass
class TangentTrace:
    inputs: list  # tangent of a_l, bias column is 0
    pre: list  # tangent of s_l
    output: np.ndarray


@dataclass
class BackwardResult:
    grads: list  # per-layer gradient, same shape as the weights
    pre_grads: list = field(default_factory=list)  # g_l rows, (n, d_out)
    pairs: list = field(default_factory=list)  # per layer: (act_rows, grad_rows)


def _squeeze_out(y, squeeze):
    if y.shape[1] == 1:
        y = y[:, 0]
    if squeeze:
        y = y[0]
        if np.ndim(y) == 0:
            y = float(y)
    return y


def _cotangent(dy, n, d_out):
    dy = np.asarray(dy, dtype=float)
    if dy.ndim == 0:
        return np.full((n, d_out), float(dy))
    if d_out == 1 and dy.shape == (n,):
        return dy[:, None]
    if dy.shape == (d_out,) and n == 1:
        return dy[None, :]
    return np.broadcast_to(dy, (n, d_out)).astype(float)


def _rows(x, width):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != width:
        raise ValueError(f"input width {x2.shape[1]} != expected {width}")
    return x2, squeeze


def forward(mlp, x):
    """Return ``(y, trace)``.  ``y`` is a float for a single row and scalar output."""
    h, squeeze = _rows(x, mlp.sizes[0])
    inputs, pre = [], []
    last = len(mlp.weights) - 1
    for i, w in enumerate(mlp.weights):
        a = _with_bias(h)
        s = a @ w
        inputs.append(a)
        pre.append(s)
        h = s if i == last else _act(mlp.hidden, s)[0]
    trace = ForwardTrace(inputs, pre, h, squeeze)
    return _squeeze_out(h, squeeze), trace


def backward(mlp, trace, dy=1.0):
    """Reverse pass for ``sum(dy * y)``; returns weight and pre-activation gradients."""
    n = trace.output.shape[0]
    g = _cotangent(dy, n, trace.output.shape[1])
    grads = [None] * len(mlp.weights)
    pre_grads = [None] * len(mlp.weights)
    for i in range(len(mlp.weights) - 1, -1, -1):
        pre_grads[i] = g
        grads[i] = trace.inputs[i].T @ g
        if i > 0:
            dh = g @ mlp.weights[i][:-1].T
            g = dh * _act(mlp.hidden, trace.pre[i - 1])[1]
    pairs = [(a, gl) for a, gl in zip(trace.inputs, pre_grads)]
    return BackwardResult(grads, pre_grads, pairs)


def input_gradient(mlp, trace, dy=1.0):
    """``d(sum dy * y)/dx`` for each input row."""
    res = backward(mlp, trace, dy)
    dx = res.pre_grads[0] @ mlp.weights[0][:-1].T
    return dx[0] if trace.squeeze else dx


def forward_tangent(mlp, x, xdot):
    """Forward pass plus the directional derivative of the output along ``xdot``."""
    h, squeeze = _rows(x, mlp.sizes[0])
    hdot, _ = _rows(xdot, mlp.sizes[0])
    if hdot.shape != h.shape:
        raise ValueError("x and xdot shapes differ")
    inputs, pre, t_inputs, t_pre = [], [], [], []
    last = len(mlp.weights) - 1
    for i, w in enumerate(mlp.weights):
        a = _with_bias(h)
        adot = _with_bias(hdot, 0.0)
        s = a @ w
        sdot = adot @ w
        inputs.append(a)
        pre.append(s)
        t_inputs.append(adot)
        t_pre.append(sdot)
        if i == last:
            h, hdot = s, sdot
        else:
            val, d1, _ = _act(mlp.hidden, s)
            h, hdot = val, d1 * sdot
    trace = ForwardTrace(inputs, pre, h, squeeze)
    ttrace = TangentTrace(t_inputs, t_pre, hdot)
    return _squeeze_out(h, squeeze), _squeeze_out(hdot, squeeze), trace, ttrace


def backward_over_tangent(mlp, trace, ttrace, dydot=1.0, dy=0.0):
    """Weight gradients of ``sum(dydot * ydot + dy * y)`` (double backprop).

    The reverse pass runs over the tangent program, so second derivatives of
    the hidden activation enter through the tangent pre-activations.
    """
    n, d_out = trace.output.shape
    gs = _cotangent(dy, n, d_out)  # adjoint of s_l
    gt = _cotangent(dydot, n, d_out)  # adjoint of sdot_l
    grads = [None] * len(mlp.weights)
    pairs = [None] * len(mlp.weights)
    for i in range(len(mlp.weights) - 1, -1, -1):
        a, adot = trace.inputs[i], ttrace.inputs[i]
        grads[i] = a.T @ gs + adot.T @ gt
        pairs[i] = (np.concatenate([a, adot]), np.concatenate([gs, gt]))
        if i > 0:
            w = mlp.weights[i][:-1]
            dh = gs @ w.T
            dhdot = gt @ w.T
            _, d1, d2 = _act(mlp.hidden, trace.pre[i - 1])
            gs = dh * d1 + dhdot * d2 * ttrace.pre[i - 1]
            gt = dhdot * d1
    return BackwardResult(grads, [], pairs)


def forward_param_tangent(mlp, x, dweights):
    """Directional derivative of the outputs along a weight-space direction."""
    h, squeeze = _rows(x, mlp.sizes[0])
    hdot = np.zeros_like(h)
    last = len(mlp.weights) - 1
    for i, (w, dw) in enumerate(zip(mlp.weights, dweights)):
        a = _with_bias(h)
        s = a @ w
        sdot = _with_bias(hdot, 0.0) @ w + a @ dw
        if i == last:
            h, hdot = s, sdot
        else:
            val, d1, _ = _act(mlp.hidden, s)
            h, hdot = val, d1 * sdot
    return _squeeze_out(h, squeeze), _squeeze_out(hdot, squeeze)


def flatten(arrays):
    return np.concatenate([np.ravel(a) for a in arrays])


def unflatten(vec, like):
    out, k = [], 0
    for a in like:
        out.append(np.asarray(vec[k:k + a.size]).reshape(a.shape))
        k += a.size
    return out
