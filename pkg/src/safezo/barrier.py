"""Log-barrier quantities: values, gradient assembly, local smoothness,
probe radius and safe step size.

All functions take constraint values already in ``f_i(x) <= 0`` form. In
the noisy setting pass the upper confidence bounds instead of the true
values; every formula is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .estimator import GradientEstimate

__all__ = [
    "BarrierState",
    "barrier_value",
    "barrier_gradient",
    "local_smoothness",
    "probe_radius",
    "step_size",
    "duals",
]


def _neg(values):
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if np.any(v >= 0):
        raise ValueError("constraint values must be strictly negative")
    return v


@dataclass
class BarrierState:
    eta: float
    values: np.ndarray
    slack: float
    lam: np.ndarray
    g: np.ndarray
    L2: float


def barrier_value(f0: float, cons, eta: float) -> float:
    """``f0 - eta * sum(log(-f_i))``."""
    return float(kernels.barrier_value(float(f0), _neg(cons), float(eta)))


def barrier_gradient(objective: GradientEstimate, constraints, cons, eta: float):
    """Combine gradient estimates into an estimate of ``grad B_eta``.

    ``objective`` and each entry of ``constraints`` may be a
    :class:`GradientEstimate` or a plain vector.
    """
    def vec(e):
        return np.asarray(e.g if isinstance(e, GradientEstimate) else e, dtype=float)

    G = np.vstack([vec(objective)] + [vec(c) for c in constraints])
    v = _neg(cons)
    if G.shape[0] != v.size + 1:
        raise ValueError("need one gradient estimate per constraint value")
    return kernels.barrier_direction(G, v, float(eta))


def local_smoothness(cons, eta: float, M: float, L) -> float:
    """Local smoothness of the barrier gradient around the current point.

    ``L`` may be a scalar or one Lipschitz constant per constraint.
    """
    v = _neg(cons)
    return float(kernels.local_smoothness(v, float(eta), float(M),
                                          np.broadcast_to(np.asarray(L, float), v.shape)))


def probe_radius(eta, d, M, L, m, slack, noisy: bool = False) -> float:
    """Finite-difference radius that controls bias and keeps probes feasible.

    With ``noisy=True`` the slack is taken from upper confidence bounds and
    the safety term is halved.
    """
    if slack <= 0:
        raise ValueError("slack exhausted: no safe probe radius")
    return float(kernels.probe_radius(float(eta), int(d), float(M), float(L), int(m),
                                      float(slack), 2.0 if noisy else 1.0))


def step_size(slack: float, L: float, gnorm: float, L2: float) -> float:
    """``min(slack / (2 L |g|), 1 / L2)``; ``1 / L2`` when ``g = 0``."""
    if gnorm < 0:
        raise ValueError("gradient norm must be nonnegative")
    return float(kernels.step_size(float(slack), float(L), float(gnorm), float(L2)))


def duals(cons, eta: float) -> np.ndarray:
    """Dual estimates ``eta / (-f_i)``."""
    return eta / -_neg(cons)
