"""Inverted pendulum, kept upright at theta=0 by a bounded torque.

Dynamics and limits follow the classic swing-up benchmark: semi-implicit
Euler on theta_dd = (3g/(2l)) sin(theta) + 3/(m l^2) u, with angle wrapping
and angular-velocity clamping.
"""

import numpy as np

from ..accel import njit
from .base import Env, positive_dt

G = 10.0
M = 1.0
L = 1.0
DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0
TWO_PI = 2.0 * np.pi


@njit(cache=True)
def wrap_angle(x):
    """Wrap into (-pi, pi]."""
    w = (x + np.pi) % TWO_PI - np.pi
    if w == -np.pi:
        w = np.pi
    return w


@njit(cache=True)
def pendulum_step_batch(states, actions, dt, out):
    for i in range(states.shape[0]):
        th = states[i, 0]
        thdot = states[i, 1]
        u = actions[i, 0]
        if u > MAX_TORQUE:
            u = MAX_TORQUE
        elif u < -MAX_TORQUE:
            u = -MAX_TORQUE
        acc = (3.0 * G / (2.0 * L)) * np.sin(th) + (3.0 / (M * L * L)) * u
        thdot = thdot + dt * acc
        if thdot > MAX_SPEED:
            thdot = MAX_SPEED
        elif thdot < -MAX_SPEED:
            thdot = -MAX_SPEED
        out[i, 0] = wrap_angle(th + dt * thdot)
        out[i, 1] = thdot


def pendulum_step(s, a, dt=DT):
    out = np.empty((1, 2))
    pendulum_step_batch(np.asarray(s, dtype=np.float64).reshape(1, 2),
                        np.asarray(a, dtype=np.float64).reshape(1, 1), dt, out)
    return out[0]


def pendulum_reward(s, a):
    th = wrap_angle(float(s[0]))
    return -(th * th + 0.1 * s[1] * s[1] + 0.001 * a[0] * a[0])


class PendulumEnv(Env):
    name = "pendulum"
    state_dim = 2
    action_dim = 1
    horizon = 200

    def __init__(self, dt=DT):
        super().__init__()
        self.dt = positive_dt(dt)
        self.domain = np.array([[-np.pi, np.pi], [-MAX_SPEED, MAX_SPEED]])
        self.action_bounds = np.array([[-MAX_TORQUE, MAX_TORQUE]])
        self.equilibrium = np.zeros(2)
        self.equilibrium_action = np.zeros(1)
        self.init_region = np.array([[-np.pi, np.pi], [-1.0, 1.0]])

    def dynamics_step_batch(self, states, actions, aux=None):
        states = np.ascontiguousarray(states, dtype=np.float64)
        actions = np.ascontiguousarray(actions, dtype=np.float64)
        out = np.empty_like(states)
        pendulum_step_batch(states, actions, self.dt, out)
        return out

    def reward(self, s, a):
        return pendulum_reward(s, a)
