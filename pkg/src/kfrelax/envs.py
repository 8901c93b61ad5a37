"""CartPole and Acrobot with the classic-control constants and termination rules.

CartPole follows the 200-step v0 variant with explicit Euler integration.
Acrobot uses the "book" dynamics integrated by one RK4 step of 0.2 s.  The
per-step dynamics are scalar kernels compiled with numba when available.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit

# CartPole
GRAVITY = 9.8
MASSCART = 1.0
MASSPOLE = 0.1
TOTAL_MASS = MASSCART + MASSPOLE
HALF_LENGTH = 0.5
POLEMASS_LENGTH = MASSPOLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
THETA_LIMIT = 12 * 2 * math.pi / 360
X_LIMIT = 2.4
CARTPOLE_MAX_STEPS = 200

# Acrobot
ACRO_DT = 0.2
LINK_LENGTH_1 = 1.0
LINK_MASS_1 = 1.0
LINK_MASS_2 = 1.0
LINK_COM_1 = 0.5
LINK_COM_2 = 0.5
LINK_MOI = 1.0
MAX_VEL_1 = 4 * math.pi
MAX_VEL_2 = 9 * math.pi
TORQUES = (-1.0, 0.0, 1.0)
ACROBOT_MAX_STEPS = 500


class EpisodeDone(RuntimeError):
    """Raised when stepping an environment whose episode already ended."""


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool


@njit
def cartpole_kernel(x, x_dot, theta, theta_dot, action):
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    costheta = math.cos(theta)
    sintheta = math.sin(theta)
    temp = (force + POLEMASS_LENGTH * theta_dot * theta_dot * sintheta) / TOTAL_MASS
    thetaacc = (GRAVITY * sintheta - costheta * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - MASSPOLE * costheta * costheta / TOTAL_MASS)
    )
    xacc = temp - POLEMASS_LENGTH * thetaacc * costheta / TOTAL_MASS
    x = x + TAU * x_dot
    x_dot = x_dot + TAU * xacc
    theta = theta + TAU * theta_dot
    theta_dot = theta_dot + TAU * thetaacc
    failed = x < -X_LIMIT or x > X_LIMIT or theta < -THETA_LIMIT or theta > THETA_LIMIT
    return x, x_dot, theta, theta_dot, failed


@njit
def acrobot_derivs(theta1, theta2, dtheta1, dtheta2, torque):
    m1, m2 = LINK_MASS_1, LINK_MASS_2
    l1 = LINK_LENGTH_1
    lc1, lc2 = LINK_COM_1, LINK_COM_2
    i1, i2 = LINK_MOI, LINK_MOI
    g = GRAVITY
    d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
    d2 = m2 * (lc2 * lc2 + l1 * lc2 * math.cos(theta2)) + i2
    # cos(q - pi/2) written as sin(q) so the hanging rest state is an exact fixed point
    phi2 = m2 * lc2 * g * math.sin(theta1 + theta2)
    phi1 = (
        -m2 * l1 * lc2 * dtheta2 * dtheta2 * math.sin(theta2)
        - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
        + (m1 * lc1 + m2 * l1) * g * math.sin(theta1)
        + phi2
    )
    ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * math.sin(theta2) - phi2) / (
        m2 * lc2 * lc2 + i2 - d2 * d2 / d1
    )
    ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
    return dtheta1, dtheta2, ddtheta1, ddtheta2


@njit
def acrobot_rk4(theta1, theta2, dtheta1, dtheta2, torque, dt):
    """One classical RK4 step of the acrobot ODE (no wrapping or clamping)."""
    k1 = acrobot_derivs(theta1, theta2, dtheta1, dtheta2, torque)
    h = 0.5 * dt
    k2 = acrobot_derivs(theta1 + h * k1[0], theta2 + h * k1[1], dtheta1 + h * k1[2], dtheta2 + h * k1[3], torque)
    k3 = acrobot_derivs(theta1 + h * k2[0], theta2 + h * k2[1], dtheta1 + h * k2[2], dtheta2 + h * k2[3], torque)
    k4 = acrobot_derivs(theta1 + dt * k3[0], theta2 + dt * k3[1], dtheta1 + dt * k3[2], dtheta2 + dt * k3[3], torque)
    c = dt / 6.0
    return (
        theta1 + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        theta2 + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        dtheta1 + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
        dtheta2 + c * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
    )


@njit
def _wrap(x, lo, hi):
    span = hi - lo
    while x > hi:
        x -= span
    while x < lo:
        x += span
    return x


@njit
def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


@njit
def acrobot_kernel(theta1, theta2, dtheta1, dtheta2, torque):
    t1, t2, d1, d2 = acrobot_rk4(theta1, theta2, dtheta1, dtheta2, torque, ACRO_DT)
    t1 = _wrap(t1, -math.pi, math.pi)
    t2 = _wrap(t2, -math.pi, math.pi)
    d1 = _clamp(d1, -MAX_VEL_1, MAX_VEL_1)
    d2 = _clamp(d2, -MAX_VEL_2, MAX_VEL_2)
    terminal = -math.cos(t1) - math.cos(t2 + t1) > 1.0
    return t1, t2, d1, d2, terminal


def acrobot_energy(theta1, theta2, dtheta1, dtheta2):
    """Total mechanical energy (kinetic + gravitational), zero potential at the pivot."""
    m1, m2, l1, lc1, lc2, i1, i2 = (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1,
                                    LINK_COM_1, LINK_COM_2, LINK_MOI, LINK_MOI)
    c2 = math.cos(theta2)
    d11 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + i1 + i2
    d12 = m2 * (lc2**2 + l1 * lc2 * c2) + i2
    d22 = m2 * lc2**2 + i2
    kinetic = 0.5 * d11 * dtheta1**2 + d12 * dtheta1 * dtheta2 + 0.5 * d22 * dtheta2**2
    potential = -(m1 * lc1 + m2 * l1) * GRAVITY * math.cos(theta1) - m2 * lc2 * GRAVITY * math.cos(theta1 + theta2)
    return kinetic + potential


# -- functional state API -------------------------------------------------------


@dataclass(frozen=True)
class CartPoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    steps: int = 0
    done: bool = False

    def observation(self):
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])


@dataclass(frozen=True)
class AcrobotState:
    theta1: float
    theta2: float
    dtheta1: float
    dtheta2: float
    steps: int = 0
    done: bool = False

    def observation(self):
        return np.array([
            math.cos(self.theta1), math.sin(self.theta1),
            math.cos(self.theta2), math.sin(self.theta2),
            self.dtheta1, self.dtheta2,
        ])


def cartpole_reset(rng):
    x, x_dot, th, th_dot = (float(v) for v in 0.1 * rng.uniform(4) - 0.05)
    return CartPoleState(x, x_dot, th, th_dot)


def cartpole_step(state, action):
    if state.done:
        raise EpisodeDone("cartpole episode already finished")
    if action not in (0, 1):
        raise ValueError(f"invalid cartpole action {action!r}")
    x, x_dot, th, th_dot, failed = cartpole_kernel(state.x, state.x_dot, state.theta, state.theta_dot, int(action))
    steps = state.steps + 1
    done = bool(failed) or steps >= CARTPOLE_MAX_STEPS
    new = CartPoleState(x, x_dot, th, th_dot, steps, done)
    return new, StepResult(new.observation(), 1.0, done)


def acrobot_reset(rng):
    t1, t2, d1, d2 = (float(v) for v in 0.2 * rng.uniform(4) - 0.1)
    return AcrobotState(t1, t2, d1, d2)


def acrobot_step(state, action):
    if state.done:
        raise EpisodeDone("acrobot episode already finished")
    if action not in (0, 1, 2):
        raise ValueError(f"invalid acrobot action {action!r}")
    t1, t2, d1, d2, terminal = acrobot_kernel(state.theta1, state.theta2, state.dtheta1, state.dtheta2,
                                              TORQUES[int(action)])
    steps = state.steps + 1
    done = bool(terminal) or steps >= ACROBOT_MAX_STEPS
    new = AcrobotState(t1, t2, d1, d2, steps, done)
    return new, StepResult(new.observation(), 0.0 if terminal else -1.0, done)


# -- stateful wrappers used by rollouts -----------------------------------------


class Env:
    """Mutable wrapper around a functional reset/step pair."""

    name = "env"
    n_actions = 0
    obs_dim = 0
    max_steps = 0
    _reset = None
    _step = None

    def __init__(self):
        self.state = None

    def reset(self, rng):
        self.state = type(self)._reset(rng)
        return self.state.observation()

    def step(self, action):
        if self.state is None:
            raise RuntimeError("reset() must be called first")
        self.state, res = type(self)._step(self.state, action)
        return res


class CartPole(Env):
    name = "cartpole"
    n_actions = 2
    obs_dim = 4
    max_steps = CARTPOLE_MAX_STEPS
    _reset = staticmethod(cartpole_reset)
    _step = staticmethod(cartpole_step)


class Acrobot(Env):
    name = "acrobot"
    n_actions = 3
    obs_dim = 6
    max_steps = ACROBOT_MAX_STEPS
    _reset = staticmethod(acrobot_reset)
    _step = staticmethod(acrobot_step)


ENVIRONMENTS = {"cartpole": CartPole, "acrobot": Acrobot}


def make_env(name):
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
