"""Policy optimization with a Lyapunov-blended advantage.

The training loop is clipped-surrogate policy gradient (PPO-style) where the
usual GAE advantage is convex-combined with a stability term derived from the
learned Lyapunov critic: adv_L = (1 - beta) * adv + beta * min(0, -lie).
Transitions whose sampled Lie derivative is negative (value decreasing along
the flow) contribute no penalty, so with beta < 1 the blend never flips the
sign of a purely-positive advantage; it only discounts updates that would
reinforce destabilizing actions.
"""

from dataclasses import dataclass

import numpy as np

from .critic import LyapunovCritic, critic_train_step
from .envs.base import ActionScaledEnv
from .nn import LOG_2PI, GaussianPolicy, MlpNetwork, Optimizer


@dataclass
class PolycConfig:
    gamma: float = 0.99
    lambda_gae: float = 0.95
    beta: float = 0.5
    clip_eps: float = 0.2
    entropy_coef: float = 0.0
    policy_lr: float = 3e-4
    value_lr: float = 1e-3
    critic_lr: float = 1e-3
    epochs_per_iter: int = 10
    minibatch_size: int = 64
    steps_per_iter: int = 2048
    total_iters: int = 100
    critic_minibatches: int = 20
    critic_batch_size: int = 256
    lie_resample: str = "mean-action"
    tau: float = 0.0
    beta_lagrange: bool = False
    alpha_beta: float = 0.01
    normalize_advantages: bool = True
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    log_std_init: float = -0.5
    checkpoint_interval: int = 50

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.lambda_gae <= 1.0:
            raise ValueError("lambda_gae must be in [0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.entropy_coef < 0:
            raise ValueError("entropy_coef must be nonnegative")
        for name in ("policy_lr", "value_lr", "critic_lr", "alpha_beta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("epochs_per_iter", "minibatch_size", "steps_per_iter",
                     "critic_minibatches", "critic_batch_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.total_iters < 0:
            raise ValueError("total_iters must be nonnegative")
        if self.lie_resample not in ("stored", "mean-action"):
            raise ValueError("lie_resample must be 'stored' or 'mean-action'")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        self.hidden = tuple(int(h) for h in self.hidden)

    def to_dict(self):
        d = dict(self.__dict__)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class TrajectoryBuffer:
    """On-policy rollout storage; episodes occupy contiguous index ranges.

    `episode_ends` holds exclusive end indices, so episode e spans
    [ends[e-1], ends[e]). `dones[t]` is True only for guard terminations;
    an episode cut by the horizon or the step budget bootstraps its tail
    with the value function instead.
    """

    def __init__(self, states, actions, rewards, next_states, log_probs,
                 dones, episode_ends, dt, aux=None):
        self.states = np.asarray(states, dtype=np.float64)
        self.actions = np.asarray(actions, dtype=np.float64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.next_states = np.asarray(next_states, dtype=np.float64)
        self.log_probs = np.asarray(log_probs, dtype=np.float64)
        self.dones = np.asarray(dones, dtype=bool)
        self.episode_ends = np.asarray(episode_ends, dtype=np.int64)
        self.dt = float(dt)
        self.aux = None if aux is None else np.asarray(aux, dtype=np.float64)
        self.values = None
        self.advantages = None
        self.returns = None
        n = len(self.states)
        if not (len(self.actions) == len(self.rewards) == len(self.next_states)
                == len(self.log_probs) == len(self.dones) == n):
            raise ValueError("buffer field lengths disagree")
        if len(self.episode_ends) == 0 or self.episode_ends[-1] != n:
            raise ValueError("episode_ends must cover the whole buffer")

    def __len__(self):
        return len(self.states)

    @property
    def num_episodes(self):
        return len(self.episode_ends)

    def episode_slices(self):
        start = 0
        for end in self.episode_ends:
            yield start, int(end)
            start = int(end)

    def episode_returns(self):
        return np.array([self.rewards[a:b].sum() for a, b in self.episode_slices()])


def collect_rollouts(env, policy, steps, rng, init_region=None):
    """Run the stochastic policy for exactly `steps` transitions.

    Episodes end on a guard termination, on the environment horizon, or on
    the step budget, whichever comes first; the last episode is cut
    mid-flight if needed so every buffer has identical length.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    states, actions, rewards, next_states = [], [], [], []
    log_probs, dones, ends, aux = [], [], [], []
    has_aux = False
    s = env.reset(rng, init_region)
    for t in range(steps):
        a = policy.sample_action(s, rng)
        log_probs.append(policy.log_prob(s, a))
        step_aux = env.step_aux
        if step_aux is not None:
            has_aux = True
            aux.append(float(step_aux))
        s_next, r, done = env.step(a)
        states.append(s)
        actions.append(a)
        rewards.append(r)
        next_states.append(s_next)
        dones.append(done)
        if done or env.episode_steps >= env.horizon or t == steps - 1:
            ends.append(t + 1)
            if t < steps - 1:
                s = env.reset(rng, init_region)
        else:
            s = s_next
    return TrajectoryBuffer(states, actions, rewards, next_states, log_probs,
                            dones, ends, env.dt, aux if has_aux else None)


def compute_advantages(buffer, value_net, gamma, lambda_gae):
    """GAE over the buffer; fills values, advantages and return targets.

    Episode tails that were cut (not guard-terminated) bootstrap with
    V(s_next) of the final transition; true terminations use zero.
    """
    values = value_net.forward(buffer.states)[:, 0]
    advantages = np.zeros(len(buffer))
    for start, end in buffer.episode_slices():
        if buffer.dones[end - 1]:
            tail = 0.0
        else:
            tail = float(value_net.forward(buffer.next_states[end - 1])[0])
        gae = 0.0
        next_value = tail
        for t in range(end - 1, start - 1, -1):
            nonterminal = 0.0 if buffer.dones[t] else 1.0
            delta = buffer.rewards[t] + gamma * next_value * nonterminal - values[t]
            gae = delta + gamma * lambda_gae * nonterminal * gae
            advantages[t] = gae
            next_value = values[t]
    buffer.values = values
    buffer.advantages = advantages
    buffer.returns = advantages + values
    return advantages, buffer.returns


def blended_advantage(advantages, lies, beta):
    """Convex blend of task advantage and the Lyapunov decrease bonus."""
    advantages = np.asarray(advantages, dtype=np.float64)
    lies = np.asarray(lies, dtype=np.float64)
    return (1.0 - beta) * advantages + beta * np.minimum(0.0, -lies)


def ppo_clip_objective(ratios, advantages, clip_eps):
    """Per-sample clipped surrogate min(r*A, clip(r)*A)."""
    ratios = np.asarray(ratios, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps)
    return np.minimum(ratios * advantages, clipped * advantages)


def beta_lagrange_update(beta, mean_lie, alpha_beta):
    """Dual ascent on the blend weight: raise beta while lie > 0 on average."""
    return float(np.clip(beta - alpha_beta * mean_lie, 0.0, 1.0))


def _resampled_lie(critic, env, states, next_states, mu, dt, aux, mode):
    if mode == "mean-action":
        stepped = env.dynamics_step_batch(states, mu, aux)
    else:
        stepped = next_states
    return (critic.value_batch(stepped) - critic.value_batch(states)) / dt


def _policy_epochs(policy, buffer, critic, env, config, opt, rng, beta, adv):
    stats = {"ratio": [], "clip_frac": [], "lie": [], "surrogate": []}
    indices = np.arange(len(buffer))
    for _ in range(config.epochs_per_iter):
        rng.shuffle(indices)
        for k in range(0, len(indices), config.minibatch_size):
            idx = indices[k:k + config.minibatch_size]
            s_mb = buffer.states[idx]
            a_mb = buffer.actions[idx]
            mu = policy.mean_net.forward(s_mb)
            sigma = policy.std()
            sigma2 = sigma * sigma
            z = (a_mb - mu) / sigma
            logp_new = np.sum(-0.5 * z * z - policy.log_std - 0.5 * LOG_2PI, axis=1)
            ratio = np.exp(logp_new - buffer.log_probs[idx])
            aux_mb = None if buffer.aux is None else buffer.aux[idx]
            lie = _resampled_lie(critic, env, s_mb, buffer.next_states[idx],
                                 mu, buffer.dt, aux_mb, config.lie_resample)
            adv_l = blended_advantage(adv[idx], lie, beta)
            unclipped = ratio * adv_l
            clipped = np.clip(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps) * adv_l
            surrogate = float(np.mean(np.minimum(unclipped, clipped)))
            if not np.isfinite(surrogate):
                raise FloatingPointError("non-finite surrogate objective")
            # Gradient flows through the ratio only, and only where the
            # unclipped branch attains the min.
            take = unclipped <= clipped
            weight = np.where(take, ratio * adv_l, 0.0) / len(idx)
            upstream = weight[:, None] * (a_mb - mu) / sigma2
            g_mean, _ = policy.mean_net.backward(s_mb, upstream)
            g_log_std = np.sum(weight[:, None] * (z * z - 1.0), axis=0)
            g_log_std += config.entropy_coef
            grad = np.concatenate([g_mean, g_log_std])
            flat = policy.get_flat()
            opt.step(flat, -grad)
            policy.set_flat(flat)
            stats["ratio"].append(float(np.mean(ratio)))
            stats["clip_frac"].append(float(np.mean(np.abs(ratio - 1.0) > config.clip_eps)))
            stats["lie"].append(float(np.mean(lie)))
            stats["surrogate"].append(surrogate)
    return {
        "mean_ratio": float(np.mean(stats["ratio"])),
        "clip_frac": float(np.mean(stats["clip_frac"])),
        "mean_lie": float(np.mean(stats["lie"])),
        "surrogate": float(np.mean(stats["surrogate"])),
    }


def policy_update(policy, buffer, critic, env, config, opt, rng, beta):
    """Epochs of clipped-surrogate ascent on the blended advantage.

    On a non-finite objective or gradient the pre-update parameters and
    optimizer state are restored, the learning rate is halved, and the whole
    update is retried once; a second failure aborts.
    """
    adv = buffer.advantages.copy()
    if config.normalize_advantages:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    start_params = policy.get_flat()
    start_opt = opt.get_state()
    start_rng = rng.bit_generator.state
    try:
        return _policy_epochs(policy, buffer, critic, env, config, opt, rng, beta, adv)
    except FloatingPointError:
        policy.set_flat(start_params)
        opt.set_state(start_opt)
        rng.bit_generator.state = start_rng
        opt.learning_rate = 0.5 * opt.learning_rate
    try:
        return _policy_epochs(policy, buffer, critic, env, config, opt, rng, beta, adv)
    except FloatingPointError as exc:
        policy.set_flat(start_params)
        raise RuntimeError(
            "policy update diverged twice; lower the learning rate") from exc


def _value_epochs(value_net, buffer, config, opt, rng):
    indices = np.arange(len(buffer))
    for _ in range(config.epochs_per_iter):
        rng.shuffle(indices)
        for k in range(0, len(indices), config.minibatch_size):
            idx = indices[k:k + config.minibatch_size]
            s_mb = buffer.states[idx]
            pred = value_net.forward(s_mb)[:, 0]
            err = pred - buffer.returns[idx]
            upstream = (2.0 * err / len(idx))[:, None]
            grad, _ = value_net.backward(s_mb, upstream)
            opt.step(value_net.params, grad)
    final = value_net.forward(buffer.states)[:, 0]
    loss = float(np.mean((final - buffer.returns) ** 2))
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite value loss")
    return loss


def value_update(value_net, buffer, config, opt, rng):
    """Minibatch MSE regression of V(s) to the return targets."""
    start_params = value_net.params.copy()
    start_opt = opt.get_state()
    start_rng = rng.bit_generator.state
    try:
        return _value_epochs(value_net, buffer, config, opt, rng)
    except FloatingPointError:
        value_net.params[:] = start_params
        opt.set_state(start_opt)
        rng.bit_generator.state = start_rng
        opt.learning_rate = 0.5 * opt.learning_rate
    try:
        return _value_epochs(value_net, buffer, config, opt, rng)
    except FloatingPointError as exc:
        value_net.params[:] = start_params
        raise RuntimeError(
            "value update diverged twice; lower the learning rate") from exc


@dataclass
class TrainResult:
    policy: GaussianPolicy
    value_net: MlpNetwork
    critic: LyapunovCritic
    metrics: list
    config: PolycConfig
    env_name: str
    seed: int
    beta_final: float


METRIC_FIELDS = ("iter", "mean_return", "lyapunov_risk", "mean_lie",
                 "clip_frac", "beta", "entropy")


def build_networks(env, config, rng):
    """Policy/value/critic networks sized for the environment.

    The policy's output-layer bias starts at the normalized equilibrium
    action so the initial mean keeps the system near its fixed point
    (essential for the quadrotor, harmless elsewhere).
    """
    n, m = env.state_dim, env.action_dim
    mean_net = MlpNetwork([n, *config.hidden, m], config.activation, rng)
    w_last, b_last = mean_net.layer(len(config.hidden))
    b_last[:] = np.clip(env.equilibrium_action, -1.0, 1.0)
    policy = GaussianPolicy(mean_net, config.log_std_init)
    value_net = MlpNetwork([n, *config.hidden, 1], config.activation, rng)
    critic_net = MlpNetwork([n, *config.hidden, 1], config.activation, rng)
    critic = LyapunovCritic(critic_net, env.equilibrium)
    return policy, value_net, critic


def polyc_train(env, config, seed, checkpoint_fn=None, log_fn=None):
    """Full training loop; returns networks plus one metrics row per iteration.

    `checkpoint_fn(iteration, result)` fires every `checkpoint_interval`
    iterations and once more after the final one. The raw environment is
    wrapped so the policy acts in [-1, 1]^m.
    """
    if not isinstance(env, ActionScaledEnv):
        env = ActionScaledEnv(env)
    rng = np.random.default_rng(seed)
    policy, value_net, critic = build_networks(env, config, rng)
    policy_opt = Optimizer("adam", config.policy_lr, policy.num_params)
    value_opt = Optimizer("adam", config.value_lr, value_net.num_params)
    critic_opt = Optimizer("adam", config.critic_lr, critic.net.num_params)
    beta = config.beta
    metrics = []
    result = TrainResult(policy, value_net, critic, metrics, config,
                         env.name, seed, beta)
    for it in range(config.total_iters):
        buffer = collect_rollouts(env, policy, config.steps_per_iter, rng)
        risk = critic_train_step(critic, buffer, policy, env, critic_opt, rng,
                                 batch_size=config.critic_batch_size,
                                 minibatches=config.critic_minibatches,
                                 lie_resample=config.lie_resample,
                                 tau=config.tau)
        compute_advantages(buffer, value_net, config.gamma, config.lambda_gae)
        diag = policy_update(policy, buffer, critic, env, config, policy_opt,
                             rng, beta)
        value_update(value_net, buffer, config, value_opt, rng)
        if config.beta_lagrange:
            beta = beta_lagrange_update(beta, diag["mean_lie"], config.alpha_beta)
        row = {
            "iter": it,
            "mean_return": float(np.mean(buffer.episode_returns())),
            "lyapunov_risk": risk,
            "mean_lie": diag["mean_lie"],
            "clip_frac": diag["clip_frac"],
            "beta": beta,
            "entropy": policy.entropy(),
        }
        metrics.append(row)
        result.beta_final = beta
        if log_fn is not None:
            log_fn(row)
        if checkpoint_fn is not None and (it + 1) % config.checkpoint_interval == 0:
            checkpoint_fn(it, result)
    if checkpoint_fn is not None and config.total_iters % config.checkpoint_interval != 0:
        checkpoint_fn(config.total_iters - 1, result)
    return result


def run_episode(env, policy, rng, init_region=None, max_steps=None,
                deterministic=True):
    """One evaluation episode; returns arrays of states, actions, rewards.

    `states` has one more row than `actions` (it includes the final state).
    Deterministic mode plays the mean action.
    """
    if max_steps is None:
        max_steps = env.horizon
    s = env.reset(rng, init_region)
    states, actions, rewards = [s], [], []
    done = False
    for _ in range(max_steps):
        a = policy.mean(s) if deterministic else policy.sample_action(s, rng)
        s, r, done = env.step(a)
        states.append(s)
        actions.append(np.asarray(a, dtype=np.float64).reshape(-1))
        rewards.append(r)
        if done:
            break
    return {
        "states": np.asarray(states),
        "actions": np.asarray(actions),
        "rewards": np.asarray(rewards),
        "done": done,
    }
