"""Dense networks with analytic gradients, a Gaussian policy head, and
first-order optimizers.

Three instances of MlpNetwork cover everything the trainer needs: the policy
mean network, the reward value network, and the Lyapunov critic. Parameters
live in one flat float64 vector per network (see kernels.py for the layout).
"""

import numpy as np

from . import kernels

_ACT_IDS = {"tanh": 0, "relu": 1}

LOG_2PI = float(np.log(2.0 * np.pi))


def _as_batch(x, dim, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ValueError(f"{name} has length {x.shape[0]}, expected {dim}")
        return np.ascontiguousarray(x.reshape(1, dim)), True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise ValueError(f"{name} has width {x.shape[1]}, expected {dim}")
        return np.ascontiguousarray(x), False
    raise ValueError(f"{name} must be 1-D or 2-D")


class MlpNetwork:
    """Feed-forward net, tanh or relu hidden layers, linear output.

    Hidden weights start uniform in +-sqrt(6/(fan_in+fan_out)), biases at
    zero, so tanh units begin well inside their linear range.
    """

    def __init__(self, layer_widths, activation="tanh", rng=None):
        widths = [int(w) for w in layer_widths]
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError("layer_widths needs at least two positive entries")
        if activation not in _ACT_IDS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_widths = widths
        self.activation = activation
        self._widths = np.asarray(widths, dtype=np.int64)
        self._act_id = _ACT_IDS[activation]
        self.params = np.zeros(kernels.param_count(widths), dtype=np.float64)
        if rng is not None:
            self.init_params(rng)

    @property
    def input_dim(self):
        return self.layer_widths[0]

    @property
    def output_dim(self):
        return self.layer_widths[-1]

    @property
    def num_params(self):
        return self.params.shape[0]

    def init_params(self, rng):
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        off = 0
        for l in range(len(self.layer_widths) - 1):
            nin, nout = self.layer_widths[l], self.layer_widths[l + 1]
            bound = np.sqrt(6.0 / (nin + nout))
            self.params[off:off + nin * nout] = rng.uniform(-bound, bound, nin * nout)
            off += nin * nout
            self.params[off:off + nout] = 0.0
            off += nout

    def layer(self, l):
        """Return (W, b) views for layer l; W has shape (n_in, n_out)."""
        off = 0
        for k in range(l):
            off += self.layer_widths[k] * self.layer_widths[k + 1] + self.layer_widths[k + 1]
        nin, nout = self.layer_widths[l], self.layer_widths[l + 1]
        W = self.params[off:off + nin * nout].reshape(nin, nout)
        b = self.params[off + nin * nout:off + nin * nout + nout]
        return W, b

    def forward(self, x):
        xb, single = _as_batch(x, self.input_dim, "x")
        out = kernels.mlp_forward(self.params, self._widths, xb, self._act_id)
        return out[0] if single else out

    def backward(self, x, upstream):
        """Gradients of sum_i upstream_i . output_i w.r.t. params and x."""
        xb, single = _as_batch(x, self.input_dim, "x")
        ub, usingle = _as_batch(upstream, self.output_dim, "upstream")
        if single != usingle or xb.shape[0] != ub.shape[0]:
            raise ValueError("x and upstream batch sizes differ")
        gp, gx = kernels.mlp_backward(self.params, self._widths, xb, ub, self._act_id)
        return (gp, gx[0]) if single else (gp, gx)

    def copy(self):
        net = MlpNetwork(self.layer_widths, self.activation)
        net.params = self.params.copy()
        return net

    def to_dict(self):
        weights, biases = [], []
        for l in range(len(self.layer_widths) - 1):
            W, b = self.layer(l)
            weights.append(W.tolist())
            biases.append(b.tolist())
        return {
            "layer_widths": list(self.layer_widths),
            "activation": self.activation,
            "weights": weights,
            "biases": biases,
        }

    @classmethod
    def from_dict(cls, d):
        net = cls(d["layer_widths"], d["activation"])
        off = 0
        for l in range(len(net.layer_widths) - 1):
            nin, nout = net.layer_widths[l], net.layer_widths[l + 1]
            W = np.asarray(d["weights"][l], dtype=np.float64)
            b = np.asarray(d["biases"][l], dtype=np.float64)
            if W.shape != (nin, nout) or b.shape != (nout,):
                raise ValueError(f"layer {l} shape mismatch in serialized network")
            net.params[off:off + nin * nout] = W.ravel()
            off += nin * nout
            net.params[off:off + nout] = b
            off += nout
        return net


class GaussianPolicy:
    """Diagonal Gaussian over actions; state-independent log stds."""

    def __init__(self, mean_net, log_std_init=-0.5):
        self.mean_net = mean_net
        self.log_std = np.full(mean_net.output_dim, float(log_std_init))

    @property
    def action_dim(self):
        return self.mean_net.output_dim

    def mean(self, s):
        return self.mean_net.forward(s)

    def std(self):
        return np.exp(self.log_std)

    def sample_action(self, s, rng):
        mu = self.mean_net.forward(np.asarray(s, dtype=np.float64))
        return mu + self.std() * rng.standard_normal(self.action_dim)

    def log_prob(self, s, a):
        """Log density of a under the policy at s; batched or single."""
        mu = self.mean_net.forward(s)
        a = np.asarray(a, dtype=np.float64)
        if mu.shape != a.shape:
            raise ValueError("state and action batch shapes disagree")
        z = (a - mu) / self.std()
        return np.sum(-0.5 * z * z - self.log_std - 0.5 * LOG_2PI, axis=-1)

    def entropy(self):
        """Differential entropy, identical at every state."""
        return float(np.sum(self.log_std) + 0.5 * self.action_dim * (1.0 + LOG_2PI))

    # Flat view over (mean_net params, log_std), so one optimizer instance
    # can drive the whole policy.
    @property
    def num_params(self):
        return self.mean_net.num_params + self.action_dim

    def get_flat(self):
        return np.concatenate([self.mean_net.params, self.log_std])

    def set_flat(self, flat):
        n = self.mean_net.num_params
        self.mean_net.params[:] = flat[:n]
        self.log_std[:] = flat[n:]

    def copy(self):
        p = GaussianPolicy(self.mean_net.copy())
        p.log_std = self.log_std.copy()
        return p

    def to_dict(self):
        d = self.mean_net.to_dict()
        d["log_std"] = self.log_std.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        policy = cls(MlpNetwork.from_dict(d))
        policy.log_std = np.asarray(d["log_std"], dtype=np.float64)
        return policy


class Optimizer:
    """SGD or Adam over one flat parameter vector, updated in place."""

    def __init__(self, kind, learning_rate, num_params):
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {kind!r}")
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.kind = kind
        self.learning_rate = float(learning_rate)
        self.step_count = 0
        if kind == "adam":
            self.m = np.zeros(num_params, dtype=np.float64)
            self.v = np.zeros(num_params, dtype=np.float64)

    def step(self, params, grads):
        grads = np.asarray(grads, dtype=np.float64)
        if grads.shape != params.shape:
            raise ValueError("gradient shape does not match parameters")
        if not np.all(np.isfinite(grads)):
            raise FloatingPointError("non-finite gradient in optimizer step")
        self.step_count += 1
        if self.kind == "sgd":
            params -= self.learning_rate * grads
        else:
            kernels.adam_step(params, grads, self.m, self.v, self.step_count,
                              self.learning_rate, 0.9, 0.999, 1e-8)
        if not np.all(np.isfinite(params)):
            raise FloatingPointError("optimizer step produced non-finite parameters")
        return params

    def get_state(self):
        state = {"step_count": self.step_count, "learning_rate": self.learning_rate}
        if self.kind == "adam":
            state["m"] = self.m.copy()
            state["v"] = self.v.copy()
        return state

    def set_state(self, state):
        self.step_count = state["step_count"]
        self.learning_rate = state["learning_rate"]
        if self.kind == "adam":
            self.m[:] = state["m"]
            self.v[:] = state["v"]
