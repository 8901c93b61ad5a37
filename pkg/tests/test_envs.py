import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfrelax import envs
from kfrelax._jit import python_impl
from kfrelax.envs import (
    AcrobotState,
    CartPoleState,
    EpisodeDone,
    acrobot_derivs,
    acrobot_energy,
    acrobot_reset,
    acrobot_rk4,
    acrobot_step,
    cartpole_reset,
    cartpole_step,
    make_env,
)
from kfrelax.samplers import Rng


def test_cartpole_reset_range_and_determinism():
    s = cartpole_reset(Rng(0))
    assert all(abs(v) <= 0.05 for v in (s.x, s.x_dot, s.theta, s.theta_dot))
    assert cartpole_reset(Rng(5)) == cartpole_reset(Rng(5))


def test_cartpole_reset_means():
    gen = Rng(1)
    xs = np.array([cartpole_reset(gen).observation() for _ in range(10**4)])
    se = 0.1 / math.sqrt(12) / math.sqrt(len(xs))
    assert np.all(np.abs(xs.mean(axis=0)) <= 3 * se)


def test_cartpole_one_step_from_rest():
    new, res = cartpole_step(CartPoleState(0.0, 0.0, 0.0, 0.0), 1)
    assert np.allclose([new.x, new.x_dot, new.theta, new.theta_dot], [0.0, 0.19512, 0.0, -0.29268], atol=1e-5)
    assert res.reward == 1.0 and not res.done


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=4, max_size=4), st.sampled_from([0, 1]))
def test_cartpole_mirror_symmetry(state, action):
    s = CartPoleState(*state)
    m = CartPoleState(*[-v for v in state])
    a, _ = cartpole_step(s, action)
    b, _ = cartpole_step(m, 1 - action)
    assert np.allclose(a.observation(), -b.observation(), atol=1e-15)


def test_cartpole_termination():
    _, res = cartpole_step(CartPoleState(2.5, 0.0, 0.0, 0.0), 0)
    assert res.done and res.reward == 1.0
    _, res = cartpole_step(CartPoleState(0.0, 0.0, 0.25, 0.0), 0)
    assert res.done
    with pytest.raises(EpisodeDone):
        cartpole_step(CartPoleState(0.0, 0.0, 0.0, 0.0, done=True), 0)
    with pytest.raises(ValueError):
        cartpole_step(CartPoleState(0.0, 0.0, 0.0, 0.0), 2)


def test_cartpole_step_cap_and_return_bound():
    env = make_env("cartpole")
    env.reset(Rng(0))
    env.state = CartPoleState(0.0, 0.0, 0.0, 0.0, steps=199)
    assert env.step(0).done
    gen = Rng(3)
    for _ in range(50):
        env.reset(gen)
        total, done = 0.0, False
        while not done:
            res = env.step(int(gen.uniform() < 0.5))
            total += res.reward
            done = res.done
        assert total <= 200


def test_acrobot_rest_is_fixed_point():
    new, res = acrobot_step(AcrobotState(0.0, 0.0, 0.0, 0.0), 1)
    assert (new.theta1, new.theta2, new.dtheta1, new.dtheta2) == (0.0, 0.0, 0.0, 0.0)
    assert res.reward == -1.0 and not res.done


def _euler_oracle(state, torque, dt, n=1000):
    y = np.array(state, dtype=float)
    h = dt / n
    for _ in range(n):
        y = y + h * np.array(acrobot_derivs(*y, torque))
    return y


@pytest.mark.xfail(strict=True, reason="one 0.2 s RK4 step carries ~1e-4..5e-4 truncation error on these "
                   "dynamics, so the 1e-4 per-component bound against fine Euler is not attainable")
def test_acrobot_rk4_matches_fine_euler_within_1e_4():
    gen = Rng(0)
    start = 0.5 * gen.normal(4)
    for torque in (-1.0, 0.0, 1.0):
        rk = np.array(acrobot_rk4(*start, torque, 0.2))
        assert np.max(np.abs(rk - _euler_oracle(start, torque, 0.2))) <= 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_acrobot_rk4_close_to_fine_euler(seed):
    gen = Rng(seed)
    start = 0.5 * gen.normal(4)
    for torque in (-1.0, 0.0, 1.0):
        rk = np.array(acrobot_rk4(*start, torque, 0.2))
        assert np.max(np.abs(rk - _euler_oracle(start, torque, 0.2))) <= 1e-3


def test_acrobot_rk4_is_fourth_order():
    start = 0.5 * Rng(0).normal(4)
    ref = tuple(start)
    for _ in range(64):
        ref = acrobot_rk4(*ref, 1.0, 0.2 / 64)

    def err(n):
        y = tuple(start)
        for _ in range(n):
            y = acrobot_rk4(*y, 1.0, 0.2 / n)
        return np.max(np.abs(np.array(y) - np.array(ref)))

    for n in (1, 2, 4):
        assert 12.0 <= err(n) / err(2 * n) <= 20.0


def test_acrobot_energy_conserved_without_torque():
    gen = Rng(4)
    for _ in range(3):
        y = tuple(0.1 * gen.normal(4))
        e0 = acrobot_energy(*y)
        scale = abs(e0 - acrobot_energy(0.0, 0.0, 0.0, 0.0))  # energy above the rest state
        for _ in range(50):
            y = acrobot_rk4(*y, 0.0, 0.2)
        # drift relative to the total mechanical energy and to the oscillation energy
        assert abs(acrobot_energy(*y) - e0) <= 0.01 * abs(e0)
        assert abs(acrobot_energy(*y) - e0) <= 0.01 * scale


def test_acrobot_velocity_clamps():
    s = AcrobotState(0.3, -0.2, 100.0, -100.0)
    new, _ = acrobot_step(s, 2)
    assert abs(new.dtheta1) <= 4 * math.pi and abs(new.dtheta2) <= 9 * math.pi
    gen = Rng(5)
    env = make_env("acrobot")
    env.reset(gen)
    for _ in range(300):
        res = env.step(int(gen.uniform() * 3))
        st_ = env.state
        assert abs(st_.dtheta1) <= 4 * math.pi and abs(st_.dtheta2) <= 9 * math.pi
        assert -math.pi <= st_.theta1 <= math.pi and -math.pi <= st_.theta2 <= math.pi
        if res.done:
            break


def test_acrobot_termination_and_reward():
    # both links pointing up: -cos(t1) - cos(t1 + t2) = 2 > 1
    new, res = acrobot_step(AcrobotState(math.pi, 0.0, 0.0, 0.0), 1)
    assert res.done and res.reward == 0.0
    with pytest.raises(EpisodeDone):
        acrobot_step(new, 1)
    with pytest.raises(ValueError):
        acrobot_step(AcrobotState(0.0, 0.0, 0.0, 0.0), 3)


def test_acrobot_observation_layout():
    s = AcrobotState(0.3, -1.1, 0.5, 2.0)
    assert np.allclose(s.observation(), [math.cos(0.3), math.sin(0.3), math.cos(-1.1), math.sin(-1.1), 0.5, 2.0])


def test_acrobot_reset_and_return_bound():
    s = acrobot_reset(Rng(0))
    assert all(abs(v) <= 0.1 for v in (s.theta1, s.theta2, s.dtheta1, s.dtheta2))
    env = make_env("acrobot")
    env.reset(Rng(1))
    total, done, steps = 0.0, False, 0
    while not done:
        res = env.step(1)
        total += res.reward
        done = res.done
        steps += 1
    assert steps <= 500 and total >= -500


@pytest.mark.parametrize("name", ["cartpole", "acrobot"])
def test_determinism(name):
    actions = [int(a) for a in (Rng(9).uniform(100) * (2 if name == "cartpole" else 3))]

    def run():
        env = make_env(name)
        obs = [env.reset(Rng(42))]
        for a in actions:
            res = env.step(a)
            obs.append(res.observation)
            if res.done:
                break
        return np.array(obs)

    assert np.array_equal(run(), run())


def test_make_env_unknown():
    with pytest.raises(ValueError):
        make_env("lunarlander")


def test_env_requires_reset():
    with pytest.raises(RuntimeError):
        make_env("cartpole").step(0)


def test_jit_and_python_kernels_agree():
    gen = Rng(11)
    for _ in range(20):
        y = tuple(float(v) for v in 0.1 * gen.normal(4))
        assert envs.cartpole_kernel(*y, 1) == python_impl(envs.cartpole_kernel)(*y, 1)
        a = envs.acrobot_kernel(*y, 1.0)
        b = python_impl(envs.acrobot_kernel)(*y, 1.0)
        assert np.allclose(a[:4], b[:4], rtol=0, atol=1e-12) and a[4] == b[4]
