"""Self-learned Lyapunov critic: sampled Lie derivatives, the empirical
Lyapunov risk, and its gradient-descent training step.

The risk over a batch of consecutive state pairs is

    mean_i[ max(tau*|s_i| - V(s_i), 0) + max(0, (V(s_i') - V(s_i))/dt) ]
    + V(origin)^2

with margin tau = 0 by default, which reduces the first hinge to
max(-V(s_i), 0): V should be nonnegative, decrease along trajectories, and
vanish at the equilibrium. V is a generic network; nothing architecturally
forces positive definiteness, the validator checks it after the fact.
"""

from dataclasses import dataclass

import numpy as np

from .nn import MlpNetwork


@dataclass
class RiskBatch:
    states: np.ndarray       # (N, n)
    next_states: np.ndarray  # (N, n) successors at spacing dt
    dt: float

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        self.next_states = np.atleast_2d(np.asarray(self.next_states, dtype=np.float64))
        if self.states.shape != self.next_states.shape:
            raise ValueError("states and next_states shapes differ")
        if self.states.shape[0] == 0:
            raise ValueError("empty risk batch")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


class LyapunovCritic:
    """A scalar network V with a designated equilibrium point."""

    def __init__(self, net, origin):
        if net.output_dim != 1:
            raise ValueError("critic network must have a single output")
        self.net = net
        self.origin = np.asarray(origin, dtype=np.float64)

    def value(self, s):
        return float(self.net.forward(np.asarray(s, dtype=np.float64))[0])

    def value_batch(self, states):
        return self.net.forward(states)[:, 0]

    def copy(self):
        return LyapunovCritic(self.net.copy(), self.origin.copy())

    def to_dict(self):
        return {"net": self.net.to_dict(), "origin": self.origin.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(MlpNetwork.from_dict(d["net"]), d["origin"])


def sampled_lie_derivative(critic, s, s_next, dt):
    """(V(s') - V(s)) / dt, the finite-difference Lie derivative estimate.

    Accepts single states or (N, n) batches; works with any object exposing
    value/value_batch (learned critics and analytic quadratics alike).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    s = np.asarray(s, dtype=np.float64)
    if s.ndim == 1:
        return (critic.value(s_next) - critic.value(s)) / dt
    return (critic.value_batch(s_next) - critic.value_batch(s)) / dt


def lyapunov_risk(critic, batch, tau=0.0):
    """Empirical Lyapunov risk of the critic over a batch; always >= 0."""
    vs = critic.value_batch(batch.states)
    vn = critic.value_batch(batch.next_states)
    lie = (vn - vs) / batch.dt
    margin = tau * np.linalg.norm(batch.states, axis=1) - vs
    v0 = critic.value(critic.origin)
    return float(np.mean(np.maximum(margin, 0.0) + np.maximum(lie, 0.0)) + v0 * v0)


def risk_gradient(critic, batch, tau=0.0):
    """Risk and its gradient w.r.t. the critic network parameters.

    One batched backward pass: rows for V(s_i) carry the hinge indicators,
    rows for V(s_i') the Lie hinge, and a final row the 2 V(origin) term.
    """
    n = batch.states.shape[0]
    xs = np.vstack([batch.states, batch.next_states, critic.origin[None, :]])
    vals = critic.net.forward(xs)[:, 0]
    vs, vn, v0 = vals[:n], vals[n:2 * n], vals[2 * n]
    lie = (vn - vs) / batch.dt
    margin = tau * np.linalg.norm(batch.states, axis=1) - vs
    risk = float(np.mean(np.maximum(margin, 0.0) + np.maximum(lie, 0.0)) + v0 * v0)

    lie_on = (lie > 0.0).astype(np.float64)
    margin_on = (margin > 0.0).astype(np.float64)
    upstream = np.empty(2 * n + 1)
    upstream[:n] = (-margin_on - lie_on / batch.dt) / n
    upstream[n:2 * n] = (lie_on / batch.dt) / n
    upstream[2 * n] = 2.0 * v0
    grad, _ = critic.net.backward(xs, upstream[:, None])
    return risk, grad


def critic_train_step(critic, buffer, policy, env, opt, rng,
                      batch_size=256, minibatches=20,
                      lie_resample="mean-action", tau=0.0):
    """Minibatch SGD on the Lyapunov risk; returns the post-update risk.

    lie_resample selects the successor states used in the Lie estimate:
    'stored' takes the buffer's recorded s', 'mean-action' re-steps each s
    with the current policy's mean action so the estimate reflects the
    policy being evaluated rather than the one that collected the data.
    A non-finite risk or gradient aborts the update and restores the
    parameters from before the failing minibatch.
    """
    if lie_resample not in ("stored", "mean-action"):
        raise ValueError(f"unknown lie_resample mode {lie_resample!r}")
    states = np.asarray(buffer.states, dtype=np.float64)
    if lie_resample == "mean-action":
        aux = getattr(buffer, "aux", None)
        next_states = env.dynamics_step_batch(states, policy.mean(states), aux)
    else:
        next_states = np.asarray(buffer.next_states, dtype=np.float64)
    total = states.shape[0]
    for _ in range(minibatches):
        idx = rng.choice(total, size=min(batch_size, total), replace=False)
        mb = RiskBatch(states[idx], next_states[idx], env.dt)
        snapshot = critic.net.params.copy()
        risk, grad = risk_gradient(critic, mb, tau=tau)
        if not (np.isfinite(risk) and np.all(np.isfinite(grad))):
            critic.net.params[:] = snapshot
            break
        try:
            opt.step(critic.net.params, grad)
        except FloatingPointError:
            critic.net.params[:] = snapshot
            break
    return lyapunov_risk(critic, RiskBatch(states, next_states, env.dt), tau=tau)
