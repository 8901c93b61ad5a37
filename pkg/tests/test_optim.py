import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfrelax.optim import LR_GRID, AdamState, adam_step, sgd_step
from kfrelax.samplers import Rng


def test_lr_grid():
    assert LR_GRID == (0.03, 0.01, 1e-3, 1e-4)


def test_sgd_examples():
    assert sgd_step(1.0, 0.5, 0.1) == pytest.approx(0.95, abs=1e-15)
    w = np.array([1.0, -2.0])
    assert np.array_equal(sgd_step(w, np.zeros(2), 0.1), w)
    p = 0.0
    for _ in range(2):
        p = sgd_step(p, 1.0, 0.1)
    assert p == pytest.approx(-0.2, abs=1e-15)


def test_sgd_lists_and_errors():
    out = sgd_step([np.ones(2), np.ones((2, 2))], [np.ones(2), np.zeros((2, 2))], 0.5)
    assert np.array_equal(out[0], [0.5, 0.5]) and np.array_equal(out[1], np.ones((2, 2)))
    with pytest.raises(ValueError):
        sgd_step(np.ones(2), np.ones(3), 0.1)
    with pytest.raises(ValueError):
        sgd_step(1.0, 1.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-4, 1.0), st.floats(0.1, 10.0))
def test_sgd_linear(seed, lr, k):
    gen = Rng(seed)
    p, g = gen.normal(4), gen.normal(4)
    d1 = sgd_step(p, g, lr) - p
    assert np.allclose(sgd_step(p, g, k * lr) - p, k * d1, atol=1e-12)
    assert np.allclose(sgd_step(p, k * g, lr) - p, k * d1, atol=1e-12)


def test_adam_first_step_is_sign():
    st_ = AdamState(eps=0.0)
    g = np.array([3.0, -0.01, 1e4])
    _, p = adam_step(st_, np.zeros(3), g, 0.01)
    assert np.allclose(p, -0.01 * np.sign(g), atol=1e-15)


def test_adam_zero_gradient_never_moves():
    st_ = AdamState()
    p = np.array([1.0, 2.0])
    for _ in range(10):
        st_, p = adam_step(st_, p, np.zeros(2), 0.1)
    assert np.array_equal(p, [1.0, 2.0])


def test_adam_two_steps():
    st_ = AdamState()
    p = 0.0
    for _ in range(2):
        st_, p = adam_step(st_, p, 1.0, 0.01)
    assert abs(p + 0.02) <= 1e-6
    assert st_.step_count == 2


def test_adam_validation():
    with pytest.raises(ValueError):
        AdamState(beta1=1.0)
    with pytest.raises(ValueError):
        adam_step(AdamState(), np.ones(2), np.ones(3), 0.1)
    with pytest.raises(ValueError):
        adam_step(AdamState(), 1.0, 1.0, -0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-6), st.sampled_from(LR_GRID), st.integers(1, 30))
def test_adam_step_at_most_lr_for_stationary_gradient(g, lr, n):
    st_ = AdamState()
    p = 0.0
    for _ in range(n):
        st_, q = adam_step(st_, p, g, lr)
        assert abs(q - p) <= lr * (1 + 1e-9)
        p = q


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(LR_GRID))
def test_adam_step_within_worst_case_bound(seed, lr):
    # arbitrary gradient sequences: |m_hat| / sqrt(v_hat) <= (1 - b1) / sqrt(1 - b2)
    gen = Rng(seed)
    st_ = AdamState()
    bound = lr * max(1.0, (1 - st_.beta1) / np.sqrt(1 - st_.beta2)) * (1 + 1e-9)
    p = gen.normal(5)
    for _ in range(20):
        g = gen.normal(5) * 10 ** gen.normal(5)
        st_, q = adam_step(st_, p, g, lr)
        assert np.all(np.abs(q - p) <= bound)
        assert all(np.all(v >= 0) for v in st_.v)
        p = q
