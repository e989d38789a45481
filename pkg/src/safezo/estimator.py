"""Finite-difference gradient estimates and upper confidence bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .oracle import Oracle

__all__ = [
    "GradientEstimate",
    "ConfidenceBound",
    "batch_size",
    "ucb",
    "ucb_from_mean",
    "probe_points",
    "estimate_all",
    "grad_exact",
    "grad_noisy",
]


@dataclass
class GradientEstimate:
    """Estimated gradient with the radius, batch and deviation bound used.

    ``delta`` is ``None`` for exact-oracle estimates, whose bound holds
    deterministically.
    """

    g: np.ndarray
    nu: float
    n: int
    bound: float
    delta: Optional[float] = None
    center_mean: Optional[float] = None


@dataclass
class ConfidenceBound:
    upper: float
    half_width: float
    n: int
    delta: float

    @property
    def lower(self) -> float:
        return self.upper - self.half_width


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")


def batch_size(nu: float, sigma: float, delta: float, M: float) -> int:
    """Replicates per probe point that balance bias and noise.

    ``max(1, ceil(8 sigma^2 ln(1/delta) / (3 nu^4 M^2)))``.
    """
    _check_delta(delta)
    if nu <= 0 or M <= 0:
        raise ValueError("nu and M must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    raw = 8.0 * sigma**2 * math.log(1.0 / delta) / (3.0 * nu**4 * M**2)
    if not math.isfinite(raw):
        raise OverflowError("batch size is not finite")
    return max(1, math.ceil(raw))


def ucb_from_mean(mean: float, n: int, sigma: float, delta: float) -> ConfidenceBound:
    _check_delta(delta)
    if n < 1:
        raise ValueError("need at least one sample")
    r = sigma * math.sqrt(math.log(1.0 / delta)) / math.sqrt(n)
    return ConfidenceBound(upper=mean + r, half_width=2.0 * r, n=n, delta=delta)


def ucb(samples, sigma: float, delta: float) -> ConfidenceBound:
    """Upper confidence bound on a function value from repeated measurements."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("empty sample list")
    if samples.min() == samples.max():
        mean = float(samples[0])
    else:
        mean = math.fsum(samples) / samples.size
    return ucb_from_mean(mean, samples.size, sigma, delta)


def probe_points(x, nu: float) -> np.ndarray:
    """``[x, x + nu e_1, ..., x + nu e_d]`` as a ``(d + 1, d)`` array."""
    x = np.asarray(x, dtype=float)
    return np.vstack([x, x + nu * np.eye(x.size)])


def estimate_all(oracle: Oracle, x, nu: float, n: int = 1, t: int = 0):
    """Estimate gradients of every function from ``(d + 1) * n`` calls.

    Returns ``(grads, center)`` with ``grads`` of shape ``(m + 1, d)`` and
    ``center`` the per-function mean values at ``x``.
    """
    if nu <= 0:
        raise ValueError("probe radius must be positive")
    vals = oracle.sample(probe_points(x, nu), n=n, t=t)
    return kernels.fd_gradients(vals[0], vals[1:], nu), vals[0]


def grad_exact(oracle: Oracle, x, i: int, nu: float, t: int = 0) -> GradientEstimate:
    """Forward-difference estimate of ``grad f_i(x)`` from exact values."""
    if nu <= 0:
        raise ValueError("probe radius must be positive")
    if oracle.sigma > 0:
        raise ValueError("grad_exact requires an exact oracle")
    M = oracle.problem.M
    d = oracle.problem.d
    G, c = estimate_all(oracle, x, nu, 1, t)
    return GradientEstimate(G[i], nu, 1, math.sqrt(d) * nu * M / 2.0, None, float(c[i]))


def grad_noisy(oracle: Oracle, x, i: int, nu: float, n: int, delta: float = 0.01,
               t: int = 0) -> GradientEstimate:
    """Replicate-averaged forward-difference estimate of ``grad f_i(x)``.

    The attached bound ``sqrt(d) nu M`` holds with probability ``1 - delta``
    when ``n >= batch_size(nu, sigma, delta, M)``. ``center_mean`` is the
    mean of the ``n`` measurements at ``x``, reusable for :func:`ucb_from_mean`.
    """
    if nu <= 0:
        raise ValueError("probe radius must be positive")
    if n < 1:
        raise ValueError("replicate count must be >= 1")
    M = oracle.problem.M
    d = oracle.problem.d
    G, c = estimate_all(oracle, x, nu, n, t)
    return GradientEstimate(G[i], nu, int(n), math.sqrt(d) * nu * M, delta, float(c[i]))
