"""Common interface for the built-in controlled dynamical systems.

Each environment is a small simulator exposing both a gym-style episodic API
(reset/step with rewards and termination guards) and pure batched dynamics
(`dynamics_step_batch`) that the certification engine drives directly.
States are chosen so the regulation target is the origin of the (possibly
shifted) coordinate system and the closed-loop dynamics are time-invariant.
"""

from dataclasses import dataclass

import numpy as np


def positive_dt(dt):
    dt = float(dt)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return dt


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    dt: float
    done: bool


class Env:
    """Base class; subclasses fill in the physics.

    Attributes set by subclasses:
      state_dim, action_dim, dt, horizon, domain (n,2), action_bounds (m,2),
      equilibrium (n,), equilibrium_action (m,), init_region (n,2).
    """

    name = "env"

    def __init__(self):
        self._state = None
        self._t = 0

    # -- pure dynamics -----------------------------------------------------

    def dynamics_step_batch(self, states, actions, aux=None):
        """Advance a batch of states one dt under given actions.

        Pure and time-invariant: this is the map the certifier samples.
        Actions are clamped to bounds inside. `aux` carries per-sample
        exogenous inputs where an environment has them (path curvature);
        None means the environment's certification default.
        """
        raise NotImplementedError

    def dynamics_step(self, s, a, aux=None):
        s = np.asarray(s, dtype=np.float64).reshape(1, -1)
        a = np.asarray(a, dtype=np.float64).reshape(1, -1)
        if aux is not None:
            aux = np.asarray(aux, dtype=np.float64).reshape(1)
        return self.dynamics_step_batch(s, a, aux)[0]

    @property
    def step_aux(self):
        """Exogenous input the next step() call will use, if any."""
        return None

    def reward(self, s, a):
        raise NotImplementedError

    def terminated(self, s):
        """Guard check; True ends the episode (a true failure state)."""
        return False

    def clamp_action(self, a):
        return np.clip(a, self.action_bounds[:, 0], self.action_bounds[:, 1])

    # -- episodic API -------------------------------------------------------

    def reset(self, rng, init_region=None):
        box = self.init_region if init_region is None else np.asarray(init_region, dtype=np.float64)
        if box.shape != (self.state_dim, 2):
            raise ValueError("init_region must have shape (state_dim, 2)")
        self._state = rng.uniform(box[:, 0], box[:, 1])
        self._t = 0
        return self._state.copy()

    def step(self, a):
        if self._state is None:
            raise RuntimeError("step before reset")
        a = self.clamp_action(np.asarray(a, dtype=np.float64))
        r = self.reward(self._state, a)
        s_next = self.dynamics_step(self._state, a)
        if not np.all(np.isfinite(s_next)):
            raise FloatingPointError(f"{self.name}: non-finite state {s_next}")
        self._state = s_next
        self._t += 1
        return s_next.copy(), float(r), bool(self.terminated(s_next))

    @property
    def state(self):
        return None if self._state is None else self._state.copy()

    @property
    def episode_steps(self):
        return self._t


class ActionScaledEnv:
    """View of an Env whose action space is [-1, 1]^m.

    Policies always act in this normalized space; the adapter maps affinely
    onto the physical bounds, so one policy architecture and one exploration
    std work across environments with wildly different actuator scales
    (pendulum torque vs rotor speeds).
    """

    def __init__(self, env):
        self.base = env
        self._lo = env.action_bounds[:, 0].copy()
        self._hi = env.action_bounds[:, 1].copy()
        self.action_bounds = np.array([[-1.0, 1.0]] * env.action_dim)
        self.equilibrium_action = self.unmap_action(env.equilibrium_action)

    def __getattr__(self, name):
        return getattr(self.base, name)

    def map_action(self, a):
        a = np.clip(a, -1.0, 1.0)
        return self._lo + 0.5 * (a + 1.0) * (self._hi - self._lo)

    def unmap_action(self, a):
        return 2.0 * (a - self._lo) / (self._hi - self._lo) - 1.0

    def dynamics_step_batch(self, states, actions, aux=None):
        return self.base.dynamics_step_batch(states, self.map_action(actions), aux)

    def dynamics_step(self, s, a, aux=None):
        return self.base.dynamics_step(s, self.map_action(a), aux)

    def reward(self, s, a):
        return self.base.reward(s, self.map_action(a))

    def step(self, a):
        return self.base.step(self.map_action(a))

    def reset(self, rng, init_region=None):
        return self.base.reset(rng, init_region)
