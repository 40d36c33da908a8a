"""Core MLP math over flat parameter vectors.

Parameters for an MLP with layer sizes ``widths = [n0, n1, ..., nL]`` live in
a single 1-D float64 array, layer by layer: W1 (row-major, shape n0 x n1),
b1, W2, b2, ... This layout keeps the kernels numba-friendly and makes
optimizer updates and serialization trivial.

Activation ids: 0 = tanh, 1 = relu. The output layer is always linear.
"""

import numpy as np

from .accel import njit


def param_count(widths):
    n = 0
    for l in range(len(widths) - 1):
        n += widths[l] * widths[l + 1] + widths[l + 1]
    return n


@njit(cache=True)
def mlp_forward(params, widths, x, act_id):
    """Batched forward pass. x has shape (B, n0); returns (B, nL)."""
    L = widths.shape[0] - 1
    h = x
    off = 0
    for l in range(L):
        nin = widths[l]
        nout = widths[l + 1]
        W = params[off:off + nin * nout].reshape(nin, nout)
        off += nin * nout
        b = params[off:off + nout]
        off += nout
        z = np.dot(h, W) + b
        if l < L - 1:
            if act_id == 0:
                z = np.tanh(z)
            else:
                z = np.maximum(z, 0.0)
        h = z
    return h


@njit(cache=True)
def mlp_backward(params, widths, x, gout, act_id):
    """Backprop a batch of upstream gradients through the network.

    gout has shape (B, nL): the gradient of the scalar loss with respect to
    each network output. Returns (gparams, gx) where gparams matches the
    flat parameter layout and gx is the gradient with respect to x.
    """
    B = x.shape[0]
    L = widths.shape[0] - 1
    total = 0
    for l in range(L + 1):
        total += widths[l]
    acts = np.empty((B, total))
    acts[:, 0:widths[0]] = x
    aoff = widths[0]
    off = 0
    h = x
    for l in range(L):
        nin = widths[l]
        nout = widths[l + 1]
        W = params[off:off + nin * nout].reshape(nin, nout)
        off += nin * nout
        b = params[off:off + nout]
        off += nout
        z = np.dot(h, W) + b
        if l < L - 1:
            if act_id == 0:
                z = np.tanh(z)
            else:
                z = np.maximum(z, 0.0)
        acts[:, aoff:aoff + nout] = z
        aoff += nout
        h = z

    gparams = np.zeros_like(params)
    g = gout.copy()
    for l in range(L - 1, -1, -1):
        nin = widths[l]
        nout = widths[l + 1]
        poff = 0
        hoff = 0
        for k in range(l):
            poff += widths[k] * widths[k + 1] + widths[k + 1]
            hoff += widths[k]
        h_in = np.ascontiguousarray(acts[:, hoff:hoff + nin])
        h_out = acts[:, hoff + nin:hoff + nin + nout]
        if l < L - 1:
            if act_id == 0:
                g = g * (1.0 - h_out * h_out)
            else:
                g = np.where(h_out > 0.0, g, 0.0)
        W = params[poff:poff + nin * nout].reshape(nin, nout)
        gW = np.dot(np.ascontiguousarray(h_in.T), g)
        gparams[poff:poff + nin * nout] = gW.ravel()
        for j in range(nout):
            s = 0.0
            for i in range(B):
                s += g[i, j]
            gparams[poff + nin * nout + j] = s
        g = np.dot(g, np.ascontiguousarray(W.T))
    return gparams, g


@njit(cache=True)
def adam_step(params, grad, m, v, t, lr, beta1, beta2, eps):
    """One Adam update, in place on params and the moment buffers."""
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i in range(params.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
        params[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)
