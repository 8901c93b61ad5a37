import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kfrelax.samplers import (
    Rng,
    conditional_gumbel,
    conditional_gumbel_jacobian_diag,
    conditional_logistic,
    conditional_logistic_dtheta,
    gumbel_reparam,
    heaviside,
    log_softmax,
    logistic_reparam,
    sigmoid,
    softmax,
)

open_unit = st.floats(1e-9, 1 - 1e-9)


def test_logistic_reparam_examples():
    assert logistic_reparam(0.0, 0.5) == 0.0
    assert logistic_reparam(1.0, 0.5) == 1.0
    assert logistic_reparam(0.0, 0.9) == pytest.approx(math.log(9.0), abs=1e-12)
    assert abs(logistic_reparam(0.0, 0.9) - 2.19722) < 1e-5


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, np.nan])
def test_logistic_reparam_rejects_degenerate(u):
    with pytest.raises(ValueError):
        logistic_reparam(0.0, u)


def test_heaviside_examples():
    assert heaviside(0.0) == 1
    assert heaviside(-0.1) == 0
    assert heaviside(5.0) == 1


def test_conditional_logistic_examples():
    assert conditional_logistic(0.0, 1, 0.5) == pytest.approx(math.log(3.0), abs=1e-12)
    assert conditional_logistic(0.0, 0, 0.5) == pytest.approx(-math.log(3.0), abs=1e-12)
    with pytest.raises(ValueError):
        conditional_logistic(0.0, 1, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-8, 8), st.sampled_from([0, 1]), open_unit)
def test_conditional_logistic_respects_bit(theta, b, v):
    assert heaviside(conditional_logistic(theta, b, v)) == b


def test_conditional_logistic_matches_written_formulas():
    gen = Rng(0)
    for theta in (-1.3, 0.0, 0.7, 2.0):
        p = sigmoid(theta)
        v = gen.uniform()
        one = theta + math.log((1 - p) + v * p) - math.log(p * (1 - v))
        zero = theta + math.log(v * (1 - p)) - math.log(1 - v * (1 - p))
        assert conditional_logistic(theta, 1, v) == pytest.approx(one, abs=1e-12)
        assert conditional_logistic(theta, 0, v) == pytest.approx(zero, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-4, 4), st.sampled_from([0, 1]), st.floats(0.01, 0.99))
def test_conditional_logistic_dtheta_matches_fd(theta, b, v):
    h = 1e-6
    fd = (conditional_logistic(theta + h, b, v) - conditional_logistic(theta - h, b, v)) / (2 * h)
    assert conditional_logistic_dtheta(theta, b, v) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("theta", [-1.0, 0.0, 2.0])
def test_bernoulli_marginal_consistency_ks(theta):
    n = 10**5
    gen = Rng(17)
    b = heaviside(logistic_reparam(theta, gen.uniform(n)))
    zt = conditional_logistic(theta, b, gen.uniform(n))
    direct = logistic_reparam(theta, gen.uniform(n))
    assert stats.ks_2samp(zt, direct).pvalue > 0.01


@pytest.mark.parametrize("theta", [-1.0, 0.5])
def test_bernoulli_probability(theta):
    n = 10**6
    b = heaviside(logistic_reparam(theta, Rng(3).uniform(n)))
    p = sigmoid(theta)
    assert abs(b.mean() - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_gumbel_reparam_examples():
    z, a = gumbel_reparam(np.zeros(2), np.array([math.exp(-1), math.exp(-math.e)]))
    assert np.allclose(z, [0.0, -1.0], atol=1e-12) and a == 0
    assert gumbel_reparam(np.array([3.0]), np.array([0.2]))[1] == 0
    with pytest.raises(ValueError):
        gumbel_reparam(np.zeros(2), np.array([0.5, 1.0]))


def test_gumbel_shift_invariance():
    gen = Rng(5)
    logits, u = gen.normal(4), gen.uniform(4)
    z, a = gumbel_reparam(logits, u)
    z2, a2 = gumbel_reparam(logits + 3.5, u)
    assert a == a2 and np.allclose(z2, z + 3.5, atol=1e-12)


def test_gumbel_ties_lowest_index():
    _, a = gumbel_reparam(np.zeros(3), np.full(3, 0.5))
    assert a == 0


def test_conditional_gumbel_examples():
    e1 = math.exp(-1)
    zt = conditional_gumbel(np.zeros(2), 0, np.array([e1, e1]))
    assert zt[0] == pytest.approx(0.0, abs=1e-15)
    assert zt[1] == pytest.approx(-math.log(3.0), abs=1e-12)
    with pytest.raises(ValueError):
        conditional_gumbel(np.zeros(2), 2, np.array([0.5, 0.5]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=5), st.data())
def test_conditional_gumbel_argmax_is_action(logits, data):
    logits = np.array(logits)
    k = len(logits)
    a = data.draw(st.integers(0, k - 1))
    v = np.array(data.draw(st.lists(open_unit, min_size=k, max_size=k)))
    assert int(np.argmax(conditional_gumbel(logits, a, v))) == a


def test_conditional_gumbel_jacobian_matches_fd():
    gen = Rng(8)
    logits = gen.normal(3)
    v = gen.uniform(3)
    a = 1
    d = conditional_gumbel_jacobian_diag(logits, a, v)
    pi = softmax(logits)
    jac = d[:, None] * (np.eye(3) - pi[None, :])
    h = 1e-6
    fd = np.stack([(conditional_gumbel(logits + h * e, a, v) - conditional_gumbel(logits - h * e, a, v)) / (2 * h)
                   for e in np.eye(3)], axis=1)
    assert np.allclose(jac, fd, atol=1e-7)
    assert d[a] == 0.0


def test_categorical_marginal_consistency_ks():
    n = 10**5
    gen = Rng(23)
    logp = log_softmax(np.array([0.3, -0.5, 1.1]))
    logits = np.broadcast_to(logp, (n, 3))
    _, a = gumbel_reparam(logits, gen.uniform((n, 3)))
    zt = conditional_gumbel(logits, a, gen.uniform((n, 3)))
    direct, _ = gumbel_reparam(logits, gen.uniform((n, 3)))
    for k in range(3):
        assert stats.ks_2samp(zt[:, k], direct[:, k]).pvalue > 0.01


def test_softmax_rows_sum_to_one():
    p = softmax(Rng(2).normal((5, 4)) * 30)
    assert np.allclose(p.sum(axis=1), 1.0) and np.all(p > 0)


def test_rng_determinism_and_forking():
    a, b = Rng(42), Rng(42)
    assert np.array_equal(a.uniform(100), b.uniform(100))
    before = a.state()
    child = a.fork()
    assert a.state() == before
    assert not np.array_equal(child.uniform(10), a.uniform(10))
    s1, s2 = Rng(42).spawn(2)
    t1, t2 = Rng(42).spawn(2)
    assert np.array_equal(s1.normal(10), t1.normal(10))
    assert np.array_equal(s2.uniform(10), t2.uniform(10))


def test_rng_open_interval():
    u = Rng(0).uniform(10**5)
    assert np.all((u > 0) & (u < 1))
    assert isinstance(Rng(0).uniform(), float)
