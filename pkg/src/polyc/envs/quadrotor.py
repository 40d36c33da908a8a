"""6-DOF quadrotor tracking a constant-velocity horizontal reference line.

State (12): position error (ex, ey, ez) and velocity error (evx, evy, evz)
relative to the moving reference, Euler angles (phi, theta, psi), and body
rates (p, q, r). Because the reference has zero acceleration, the error
dynamics are the standard Newton-Euler hover dynamics and the regulation
target is the origin with all rotors at hover speed.

Rotor layout ('+' configuration): rotor 1 on +x, 2 on +y, 3 on -x, 4 on -y;
rotors 1/3 spin opposite to 2/4. Thrust F_i = k_f Omega_i^2, yaw drag
torque k_m Omega_i^2.
"""

import numpy as np

from ..accel import njit
from .base import Env, positive_dt

MASS = 0.5
ARM = 0.17
K_F = 3e-6
K_M = 1.1e-7
IXX = 3.2e-3
IYY = 3.2e-3
IZZ = 5.5e-3
GRAV = 9.81
DT = 0.01
OMEGA_MAX = 1000.0
HOVER_OMEGA = np.sqrt(MASS * GRAV / (4.0 * K_F))
GIMBAL_LIMIT = np.pi / 2 - 0.05


def rotor_forces_torques(omega):
    """Total thrust and body torques for rotor speeds (Omega_1..Omega_4)."""
    f = K_F * np.asarray(omega, dtype=np.float64) ** 2
    thrust = float(np.sum(f))
    tau_x = ARM * (f[1] - f[3])
    tau_y = ARM * (f[2] - f[0])
    tau_z = K_M * (omega[0] ** 2 - omega[1] ** 2 + omega[2] ** 2 - omega[3] ** 2)
    return thrust, float(tau_x), float(tau_y), float(tau_z)


@njit(cache=True)
def _quad_deriv(s, thrust, tau_x, tau_y, tau_z, out):
    phi, theta, psi = s[6], s[7], s[8]
    p, q, r = s[9], s[10], s[11]
    cphi, sphi = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cpsi, spsi = np.cos(psi), np.sin(psi)
    out[0] = s[3]
    out[1] = s[4]
    out[2] = s[5]
    acc = thrust / MASS
    out[3] = acc * (cpsi * sth * cphi + spsi * sphi)
    out[4] = acc * (spsi * sth * cphi - cpsi * sphi)
    out[5] = acc * (cth * cphi) - GRAV
    tth = sth / cth
    out[6] = p + sphi * tth * q + cphi * tth * r
    out[7] = cphi * q - sphi * r
    out[8] = (sphi * q + cphi * r) / cth
    out[9] = ((IYY - IZZ) * q * r + tau_x) / IXX
    out[10] = ((IZZ - IXX) * p * r + tau_y) / IYY
    out[11] = ((IXX - IYY) * p * q + tau_z) / IZZ


@njit(cache=True)
def quadrotor_step_batch(states, actions, dt, out):
    n = states.shape[1]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    stage = np.empty(n)
    for i in range(states.shape[0]):
        thrust = 0.0
        tau_z = 0.0
        f = np.empty(4)
        for j in range(4):
            w = actions[i, j]
            if w < 0.0:
                w = 0.0
            elif w > OMEGA_MAX:
                w = OMEGA_MAX
            f[j] = K_F * w * w
            thrust += f[j]
            tau_z += K_M * w * w * (1.0 if j % 2 == 0 else -1.0)
        tau_x = ARM * (f[1] - f[3])
        tau_y = ARM * (f[2] - f[0])
        s = states[i]
        _quad_deriv(s, thrust, tau_x, tau_y, tau_z, k1)
        for j in range(n):
            stage[j] = s[j] + 0.5 * dt * k1[j]
        _quad_deriv(stage, thrust, tau_x, tau_y, tau_z, k2)
        for j in range(n):
            stage[j] = s[j] + 0.5 * dt * k2[j]
        _quad_deriv(stage, thrust, tau_x, tau_y, tau_z, k3)
        for j in range(n):
            stage[j] = s[j] + dt * k3[j]
        _quad_deriv(stage, thrust, tau_x, tau_y, tau_z, k4)
        for j in range(n):
            out[i, j] = s[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


def quadrotor_step(s, a, dt=DT):
    out = np.empty((1, 12))
    quadrotor_step_batch(np.asarray(s, dtype=np.float64).reshape(1, 12),
                         np.asarray(a, dtype=np.float64).reshape(1, 4), dt, out)
    return out[0]


def quadrotor_reward(s, a):
    pos = s[0:3]
    vel = s[3:6]
    rates = s[9:12]
    return -(pos @ pos + 0.1 * (vel @ vel) + 0.25 * (s[6] ** 2 + s[7] ** 2)
             + 0.01 * (rates @ rates))


class QuadrotorEnv(Env):
    name = "quadrotor"
    state_dim = 12
    action_dim = 4
    horizon = 500

    def __init__(self, reference_speed=0.5, dt=DT):
        super().__init__()
        self.dt = positive_dt(dt)
        # Reference speed never enters the error dynamics (the line has zero
        # acceleration); kept for reconstructing absolute trajectories.
        self.reference_speed = float(reference_speed)
        self.domain = np.array(
            [[-1.0, 1.0]] * 3 + [[-1.0, 1.0]] * 3
            + [[-0.5, 0.5]] * 3 + [[-2.0, 2.0]] * 3)
        self.action_bounds = np.array([[0.0, OMEGA_MAX]] * 4)
        self.equilibrium = np.zeros(12)
        self.equilibrium_action = np.full(4, HOVER_OMEGA)
        self.init_region = np.array(
            [[-0.5, 0.5]] * 3 + [[0.0, 0.0]] * 3
            + [[-0.1, 0.1]] * 3 + [[0.0, 0.0]] * 3)

    def dynamics_step_batch(self, states, actions, aux=None):
        states = np.ascontiguousarray(states, dtype=np.float64)
        actions = np.ascontiguousarray(actions, dtype=np.float64)
        out = np.empty_like(states)
        quadrotor_step_batch(states, actions, self.dt, out)
        return out

    def reward(self, s, a):
        return quadrotor_reward(s, a)

    def terminated(self, s):
        return abs(s[7]) >= GIMBAL_LIMIT
