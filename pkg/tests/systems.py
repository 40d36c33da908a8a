"""Analytic closed-loop fixtures with known Lie-derivative structure.

All fixtures pair V = |x|^2 (or an explicit quadratic form) with an Euler
step map, so the sampled Lie derivative has a closed form the tests can
check against exactly.
"""

import numpy as np

from polyc.validator import ClosedLoopSystem


def quadratic_value(states):
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    return np.sum(states * states, axis=1)


def linear_system(rate, dim, dt=1e-3):
    """x' = x + dt*rate*x with V = |x|^2; lie = (2*rate + dt*rate^2) * V."""

    def stepper(states):
        return states + dt * rate * states

    return ClosedLoopSystem(quadratic_value, stepper, dt, np.zeros(dim))


def linear_lie_coeff(rate, dt=1e-3):
    return 2.0 * rate + dt * rate * rate


def quadratic_form_system(A, P, dt=1e-3):
    """x' = x + dt*A@x with V = x^T P x."""
    A = np.asarray(A, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)

    def value_fn(states):
        states = np.atleast_2d(states)
        return np.einsum("bi,ij,bj->b", states, P, states)

    def stepper(states):
        return states + dt * states @ A.T

    return ClosedLoopSystem(value_fn, stepper, dt, np.zeros(A.shape[0]))


def bump_phi(states, center, radius):
    """Compactly supported bump: 1 at the center, 0 outside the ball."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    rho2 = np.sum((states - center) ** 2, axis=1) / radius ** 2
    out = np.zeros(len(states))
    inside = rho2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
    return out


def make_bump_system(k, center, radius, dim=2, dt=1e-3):
    """x' = x + dt*(k*phi(x) - 1)*x: a contraction except inside the bump.

    The sampled Lie derivative of V = |x|^2 is exactly
    V * (2u + dt*u^2) with u = k*phi(x) - 1. For k < 1 the lie is
    negative wherever V > 0, yet {lie >= -a*V} is the exact ball
    |x - center| <= bump_violation_radius(k, radius, a).
    """
    center = np.asarray(center, dtype=np.float64)

    def stepper(states):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        u = (k * bump_phi(states, center, radius) - 1.0)[:, None]
        return states + dt * u * states

    return ClosedLoopSystem(quadratic_value, stepper, dt, np.zeros(dim))


def bump_lie_coeff(states, k, center, radius, dt=1e-3):
    """Exact lie/V at each state for the bump system."""
    u = k * bump_phi(states, center, radius) - 1.0
    return 2.0 * u + dt * u * u


def bump_violation_radius(k, radius, a_const, dt=1e-3):
    """Radius of the violating ball {2u + dt*u^2 >= -a}, u = k*phi - 1.

    Solves the quadratic for the threshold u, then inverts phi. Requires
    the bump strong enough to violate at its center: k > 1 + u_star.
    """
    u_star = (np.sqrt(1.0 - dt * a_const) - 1.0) / dt
    phi_star = (1.0 + u_star) / k
    if not 0.0 < phi_star < 1.0:
        raise ValueError("bump never reaches the violation threshold")
    rho2 = 1.0 - 1.0 / (1.0 - np.log(phi_star))
    return radius * float(np.sqrt(rho2))
