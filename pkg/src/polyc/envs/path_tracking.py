"""Automobile path tracking with a kinematic bicycle in error coordinates.

State is (d_e, theta_e, v, v_target): lateral offset from the path, heading
error, speed, and the speed setpoint (constant within an episode). The path
enters only through its curvature at the vehicle's arc-length position, so
the episodic simulator carries the arc position internally while the pure
certification dynamics freeze curvature to a constant (default 0).
"""

import numpy as np

from ..accel import njit
from .base import Env, positive_dt

WHEELBASE = 2.5
DT = 0.02
MAX_ACCEL = 2.0
MAX_STEER = 0.6
SINGULARITY_TOL = 1e-3


class Path:
    """Piecewise-constant curvature path: list of (arc_length, curvature).

    Curvature beyond the listed segments repeats the final segment.
    """

    def __init__(self, segments):
        if not segments:
            raise ValueError("path needs at least one segment")
        self.segments = [(float(l), float(k)) for l, k in segments]
        if any(l <= 0 for l, _ in self.segments):
            raise ValueError("segment lengths must be positive")

    def curvature(self, s):
        pos = 0.0
        for length, kappa in self.segments:
            pos += length
            if s < pos:
                return kappa
        return self.segments[-1][1]

    @property
    def total_length(self):
        return sum(l for l, _ in self.segments)


def straight_then_arc():
    """Default training path: 20 m straight, then a 0.05 1/m curve."""
    return Path([(20.0, 0.0), (30.0, 0.05)])


def weaving_path():
    """Held-out path: alternating arcs, roughly sinusoidal."""
    segs = [(10.0, 0.0)]
    for i in range(6):
        segs.append((15.0, 0.06 if i % 2 == 0 else -0.06))
    return Path(segs)


@njit(cache=True)
def path_tracking_step_batch(states, actions, kappas, dt, out):
    for i in range(states.shape[0]):
        d_e = states[i, 0]
        th_e = states[i, 1]
        v = states[i, 2]
        accel = actions[i, 0]
        steer = actions[i, 1]
        if accel > MAX_ACCEL:
            accel = MAX_ACCEL
        elif accel < -MAX_ACCEL:
            accel = -MAX_ACCEL
        if steer > MAX_STEER:
            steer = MAX_STEER
        elif steer < -MAX_STEER:
            steer = -MAX_STEER
        kappa = kappas[i]
        denom = 1.0 - kappa * d_e
        out[i, 0] = d_e + dt * v * np.sin(th_e)
        out[i, 1] = th_e + dt * ((v / WHEELBASE) * np.tan(steer)
                                 - kappa * v * np.cos(th_e) / denom)
        out[i, 2] = v + dt * accel
        out[i, 3] = states[i, 3]


def path_tracking_step(s, a, kappa=0.0, dt=DT):
    out = np.empty((1, 4))
    path_tracking_step_batch(np.asarray(s, dtype=np.float64).reshape(1, 4),
                             np.asarray(a, dtype=np.float64).reshape(1, 2),
                             np.full(1, float(kappa)), dt, out)
    return out[0]


def path_tracking_reward(s, a):
    d_e, th_e, v, v_t = s
    return -(d_e * d_e + 0.5 * th_e * th_e + 0.1 * (v - v_t) ** 2
             + 0.01 * (a[0] * a[0] + a[1] * a[1]))


class PathTrackingEnv(Env):
    name = "path_tracking"
    state_dim = 4
    action_dim = 2
    horizon = 500

    def __init__(self, path=None, v_target=5.0, cert_curvature=0.0, dt=DT):
        super().__init__()
        self.dt = positive_dt(dt)
        self.path = straight_then_arc() if path is None else path
        self.v_target = float(v_target)
        # Curvature used by the pure certification dynamics.
        self.cert_curvature = float(cert_curvature)
        vt = self.v_target
        self.domain = np.array([[-2.0, 2.0], [-1.2, 1.2],
                                [vt - 2.0, vt + 2.0], [vt, vt]])
        self.action_bounds = np.array([[-MAX_ACCEL, MAX_ACCEL],
                                       [-MAX_STEER, MAX_STEER]])
        self.equilibrium = np.array([0.0, 0.0, vt, vt])
        self.equilibrium_action = np.zeros(2)
        self.init_region = np.array([[-1.0, 1.0], [-0.5, 0.5],
                                     [vt - 1.0, vt + 1.0], [vt - 1.0, vt + 1.0]])
        self._arc_pos = 0.0

    def dynamics_step_batch(self, states, actions, aux=None):
        states = np.ascontiguousarray(states, dtype=np.float64)
        actions = np.ascontiguousarray(actions, dtype=np.float64)
        out = np.empty_like(states)
        if aux is None:
            kappas = np.full(states.shape[0], self.cert_curvature)
        else:
            kappas = np.ascontiguousarray(aux, dtype=np.float64)
        path_tracking_step_batch(states, actions, kappas, self.dt, out)
        return out

    @property
    def step_aux(self):
        return self.path.curvature(self._arc_pos)

    def reward(self, s, a):
        return path_tracking_reward(s, a)

    def terminated(self, s):
        kappa = self.path.curvature(self._arc_pos)
        return abs(1.0 - kappa * s[0]) < SINGULARITY_TOL

    def reset(self, rng, init_region=None):
        s = super().reset(rng, init_region)
        self._arc_pos = 0.0
        return s

    def step(self, a):
        if self._state is None:
            raise RuntimeError("step before reset")
        a = self.clamp_action(np.asarray(a, dtype=np.float64))
        kappa = self.path.curvature(self._arc_pos)
        d_e, th_e, v = self._state[0], self._state[1], self._state[2]
        denom = 1.0 - kappa * d_e
        if abs(denom) < SINGULARITY_TOL:
            return self._state.copy(), float(self.reward(self._state, a)), True
        r = self.reward(self._state, a)
        out = np.empty((1, 4))
        path_tracking_step_batch(self._state.reshape(1, 4), a.reshape(1, 2),
                                 np.full(1, kappa), self.dt, out)
        s_next = out[0]
        if not np.all(np.isfinite(s_next)):
            raise FloatingPointError(f"{self.name}: non-finite state {s_next}")
        self._arc_pos += self.dt * v * np.cos(th_e) / denom
        self._state = s_next
        self._t += 1
        done = abs(1.0 - self.path.curvature(self._arc_pos) * s_next[0]) < SINGULARITY_TOL
        return s_next.copy(), float(r), bool(done)
