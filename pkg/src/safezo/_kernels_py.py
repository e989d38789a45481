"""Pure-Python (numpy) implementation of the per-iteration kernels.

This module is the reference backend. ``safezo._core`` is a compiled
drop-in with the same function signatures; :mod:`safezo.kernels` picks
one at import time.
"""

import math

import numpy as np


def fd_gradients(center, probes, nu):
    """Forward-difference gradients of every measured function.

    Parameters
    ----------
    center : ndarray, shape (k,)
        Values of the k functions at the base point.
    probes : ndarray, shape (d, k)
        Values at ``x + nu * e_j`` for j = 1..d.
    nu : float
        Probe radius.

    Returns
    -------
    ndarray, shape (k, d)
    """
    if nu <= 0:
        raise ValueError("probe radius must be positive")
    center = np.asarray(center, dtype=float)
    probes = np.asarray(probes, dtype=float)
    return ((probes - center[None, :]) / nu).T.copy()


def barrier_value(f0, cons, eta):
    cons = np.asarray(cons, dtype=float)
    if np.any(cons >= 0):
        raise ValueError("barrier undefined: constraint value >= 0")
    return float(f0 - eta * np.sum(np.log(-cons)))


def barrier_direction(grads, cons, eta):
    """``G^0 + eta * sum_i G^i / (-v_i)`` for a (m+1, d) gradient stack."""
    grads = np.asarray(grads, dtype=float)
    cons = np.asarray(cons, dtype=float)
    if np.any(cons >= 0):
        raise ValueError("barrier undefined: constraint value >= 0")
    return grads[0] + eta * (grads[1:] / (-cons)[:, None]).sum(axis=0)


def local_smoothness(cons, eta, M, lip):
    cons = np.asarray(cons, dtype=float)
    if np.any(cons >= 0):
        raise ValueError("local smoothness undefined: constraint value >= 0")
    lip = np.broadcast_to(np.asarray(lip, dtype=float), cons.shape)
    s = -cons
    return float(M + np.sum(2.0 * eta * M / s + 4.0 * eta * lip**2 / s**2))


def effective_slack(cons, lip, L):
    """Smallest constraint margin, rescaled to the common constant ``L``.

    ``min_i(-v_i * L / L_i)``; equals ``min_i(-v_i)`` when every
    constraint shares the constant ``L``.
    """
    cons = np.asarray(cons, dtype=float)
    lip = np.broadcast_to(np.asarray(lip, dtype=float), cons.shape)
    return float(np.min(-cons * (L / lip)))


def probe_radius(eta, d, M, L, m, slack, factor=1.0):
    if slack <= 0:
        raise ValueError("slack must be positive to place safe probes")
    sd = math.sqrt(d)
    return min(eta / (sd * M), slack / (factor * max(L, m * sd * M)))


def step_size(slack, L, gnorm, L2):
    if slack <= 0 or L2 <= 0:
        raise ValueError("slack and local smoothness must be positive")
    if gnorm == 0.0:
        return 1.0 / L2
    return min(slack / (2.0 * L * gnorm), 1.0 / L2)


def barrier_step(x, center, probes, cons, nu, eta, M, L, lip):
    """One fused log-barrier update.

    ``cons`` are the constraint values the step should trust (exact values
    or upper confidence bounds). Returns ``(g, gnorm, L2, gamma, slack,
    x_next)``.
    """
    grads = fd_gradients(center, probes, nu)
    g = barrier_direction(grads, cons, eta)
    gnorm = float(math.sqrt(float(g @ g)))
    L2 = local_smoothness(cons, eta, M, lip)
    slack = effective_slack(cons, lip, L)
    gamma = step_size(slack, L, gnorm, L2)
    x_next = np.asarray(x, dtype=float) - gamma * g
    return g, gnorm, L2, gamma, slack, x_next
