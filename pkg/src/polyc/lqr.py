"""Linear-quadratic comparison candidate: numerical linearization at the
equilibrium, a Riccati solve, and the resulting quadratic Lyapunov function
V(x) = (x - x_eq)^T P (x - x_eq).

The Riccati equation is solved by Kleinman's iteration (repeated Lyapunov
solves), seeded with a stabilizing P from the Hamiltonian eigenvector
method so the iteration also works when the open-loop plant is unstable
(the pendulum). Pure numpy throughout.
"""

import numpy as np


class QuadraticLyapunov:
    """V(x) = (x - origin)^T P (x - origin); duck-types the learned critic."""

    def __init__(self, P, origin):
        self.P = np.asarray(P, dtype=np.float64)
        self.origin = np.asarray(origin, dtype=np.float64)
        if self.P.shape != (self.origin.size, self.origin.size):
            raise ValueError("P shape does not match origin dimension")

    def value(self, s):
        d = np.asarray(s, dtype=np.float64) - self.origin
        return float(d @ self.P @ d)

    def value_batch(self, states):
        d = np.asarray(states, dtype=np.float64) - self.origin
        return np.einsum("bi,ij,bj->b", d, self.P, d)

    def to_dict(self):
        return {"P": self.P.tolist(), "origin": self.origin.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["P"], d["origin"])


def linearize(env, h=1e-6):
    """Finite-difference (A, B) of the continuous dynamics at equilibrium.

    Central differences through the discrete step map, converted back to
    continuous time: A = (dStep/ds - I)/dt, B = (dStep/da)/dt.
    """
    n, m = env.state_dim, env.action_dim
    s0, a0 = env.equilibrium, env.equilibrium_action
    A = np.empty((n, n))
    for j in range(n):
        sp, sm = s0.copy(), s0.copy()
        sp[j] += h
        sm[j] -= h
        A[:, j] = (env.dynamics_step(sp, a0) - env.dynamics_step(sm, a0)) / (2 * h)
    A = (A - np.eye(n)) / env.dt
    B = np.empty((n, m))
    for j in range(m):
        ap, am = a0.copy(), a0.copy()
        ap[j] += h
        am[j] -= h
        B[:, j] = (env.dynamics_step(s0, ap) - env.dynamics_step(s0, am)) / (2 * h)
    B = B / env.dt
    return A, B


def solve_lyapunov(A, Q):
    """Solve A^T P + P A + Q = 0 for symmetric P (Kronecker form)."""
    n = A.shape[0]
    eye = np.eye(n)
    # column-major vec: vec(A^T P) = (I (x) A^T) vec(P), vec(P A) = (A^T (x) I) vec(P)
    lhs = np.kron(eye, A.T) + np.kron(A.T, eye)
    p = np.linalg.solve(lhs, -Q.flatten(order="F"))
    P = p.reshape(n, n, order="F")
    return 0.5 * (P + P.T)


def _hamiltonian_care(A, B, Q, R):
    """Stabilizing CARE solution via the Hamiltonian stable subspace."""
    n = A.shape[0]
    Rinv = np.linalg.inv(R)
    H = np.block([[A, -B @ Rinv @ B.T], [-Q, -A.T]])
    w, v = np.linalg.eig(H)
    stable = np.argsort(w.real)[:n]
    if np.any(w.real[stable] >= 0):
        raise np.linalg.LinAlgError("Hamiltonian has no stable invariant subspace")
    V = v[:, stable]
    P = V[n:, :] @ np.linalg.inv(V[:n, :])
    P = P.real
    return 0.5 * (P + P.T)


def solve_care(A, B, Q, R, tol=1e-12, max_iter=60):
    """Riccati solve: Hamiltonian seed refined by Kleinman iteration.

    Each Kleinman step solves one Lyapunov equation for the closed loop
    under the current gain; the iterates decrease monotonically to the
    stabilizing solution of A^T P + P A - P B R^-1 B^T P + Q = 0.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    Rinv = np.linalg.inv(R)
    P = _hamiltonian_care(A, B, Q, R)
    for _ in range(max_iter):
        K = Rinv @ B.T @ P
        P_new = solve_lyapunov(A - B @ K, Q + K.T @ R @ K)
        if np.max(np.abs(P_new - P)) < tol * max(1.0, np.max(np.abs(P))):
            P = P_new
            break
        P = P_new
    residual = A.T @ P + P @ A - P @ B @ Rinv @ B.T @ P + Q
    if np.max(np.abs(residual)) > 1e-6 * max(1.0, np.max(np.abs(Q))):
        raise np.linalg.LinAlgError("Riccati iteration did not converge")
    return P


def lqr_quadratic_candidate(env, state_cost=None, action_cost=None):
    """Linearize env at its equilibrium and return (V_quad, gain K).

    The returned V duck-types the learned critic for certification and
    landscape rendering; K maps state error to physical actions.
    """
    A, B = linearize(env)
    n, m = env.state_dim, env.action_dim
    Q = np.eye(n) if state_cost is None else np.asarray(state_cost, dtype=np.float64)
    R = 0.1 * np.eye(m) if action_cost is None else np.asarray(action_cost, dtype=np.float64)
    P = solve_care(A, B, Q, R)
    K = np.linalg.solve(R, B.T @ P)
    return QuadraticLyapunov(P, env.equilibrium), K
