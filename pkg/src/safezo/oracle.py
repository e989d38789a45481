"""Zeroth-order oracles, noise models and the measurement ledger.

An oracle call queries one point and returns the values of all ``m + 1``
functions there (objective first, then the constraints). Every call is
recorded in a :class:`MeasurementLedger` so that the safety of a run can be
audited against ground truth afterwards. The oracle itself never refuses a
query; keeping queries feasible is the solver's job.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ProblemSpec",
    "NoiseModel",
    "GaussianNoise",
    "UniformNoise",
    "MeasurementLedger",
    "Oracle",
    "Violation",
    "audit_safety",
    "audit_points",
    "read_ledger_csv",
]


@dataclass
class ProblemSpec:
    """A smooth constrained problem ``min f0(x) s.t. f_i(x) <= 0``.

    Evaluators take arrays of shape ``(..., d)`` and return shape ``(...)``.

    Parameters
    ----------
    objective : callable
        The objective ``f0``.
    constraints : sequence of callable
        Constraint functions ``f_1..f_m`` in ``<= 0`` form.
    x0 : array_like
        Strictly feasible starting point.
    M : float
        Smoothness constant shared by all functions.
    L : float
        Lipschitz constant of the constraints.
    objective_grad, constraint_grads : callable, optional
        Analytic gradients, used for verification only.
    known_exactly : sequence of bool, optional
        Constraints whose measurements are never noised.
    constraint_lipschitz : sequence of float, optional
        Per-constraint Lipschitz constants (each ``<= L``). Defaults to ``L``.
    bounds : array_like, shape (d, 2), optional
        A box containing the feasible set, used by grid references and
        sampling checks.
    """

    objective: Callable
    constraints: Sequence[Callable]
    x0: np.ndarray
    M: float
    L: float
    objective_grad: Optional[Callable] = None
    constraint_grads: Optional[Sequence[Callable]] = None
    known_exactly: Optional[Sequence[bool]] = None
    constraint_lipschitz: Optional[Sequence[float]] = None
    bounds: Optional[np.ndarray] = None
    name: str = "custom"
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.constraints = list(self.constraints)
        if self.x0.ndim != 1 or self.x0.size < 1:
            raise ValueError("x0 must be a non-empty vector")
        if not self.constraints:
            raise ValueError("at least one constraint is required")
        if not (self.M > 0 and self.L > 0):
            raise ValueError("M and L must be positive")
        m = len(self.constraints)
        if self.known_exactly is None:
            self.known_exactly = [False] * m
        self.known_exactly = np.asarray(self.known_exactly, dtype=bool)
        if self.constraint_lipschitz is None:
            self.constraint_lipschitz = [self.L] * m
        self.constraint_lipschitz = np.asarray(self.constraint_lipschitz, dtype=float)
        if self.known_exactly.shape != (m,) or self.constraint_lipschitz.shape != (m,):
            raise ValueError("per-constraint settings must have length m")
        if np.any(self.constraint_lipschitz <= 0) or np.any(
            self.constraint_lipschitz > self.L
        ):
            raise ValueError("per-constraint Lipschitz constants must lie in (0, L]")
        if self.bounds is not None:
            self.bounds = np.asarray(self.bounds, dtype=float).reshape(self.d, 2)
        c0 = self.constraint_values(self.x0)
        if np.any(c0 >= 0):
            raise ValueError(f"x0 is not strictly feasible: constraint values {c0}")

    @property
    def d(self) -> int:
        return self.x0.size

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def has_gradients(self) -> bool:
        return self.objective_grad is not None and self.constraint_grads is not None

    @property
    def noisy_mask(self) -> np.ndarray:
        """Boolean mask over all ``m + 1`` functions: True where noise applies."""
        return np.concatenate([[True], ~self.known_exactly])

    def evaluate(self, X) -> np.ndarray:
        """Values of all functions; shape ``X.shape[:-1] + (m + 1,)``."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[:-1] + (self.m + 1,))
        out[..., 0] = self.objective(X)
        for i, c in enumerate(self.constraints, start=1):
            out[..., i] = c(X)
        return out

    def constraint_values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[:-1] + (self.m,))
        for i, c in enumerate(self.constraints):
            out[..., i] = c(X)
        return out

    def gradients(self, x) -> np.ndarray:
        """Analytic gradients of all functions at ``x``; shape ``(m + 1, d)``."""
        if not self.has_gradients:
            raise ValueError(f"problem {self.name!r} has no analytic gradients")
        x = np.asarray(x, dtype=float)
        rows = [self.objective_grad(x)] + [g(x) for g in self.constraint_grads]
        return np.asarray(rows, dtype=float).reshape(self.m + 1, self.d)

    def barrier(self, x, eta) -> float:
        v = self.evaluate(x)
        if np.any(v[1:] >= 0):
            return math.inf
        return float(v[0] - eta * np.sum(np.log(-v[1:])))

    def barrier_grad(self, x, eta) -> np.ndarray:
        """Analytic ``grad B_eta(x)``."""
        G = self.gradients(x)
        c = self.constraint_values(x)
        return G[0] + eta * (G[1:] / (-c)[:, None]).sum(axis=0)


class NoiseModel:
    """Additive zero-mean noise of sub-Gaussian parameter ``sigma``.

    Subclasses implement :meth:`draw`. :meth:`draw_mean` returns the mean of
    ``n`` independent draws per entry; subclasses for which that mean has a
    closed-form law override it and set ``exact_mean = True``.
    """

    exact_mean = False

    def __init__(self, sigma: float, seed: int = 0):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.sigma = float(sigma)
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def draw(self, size) -> np.ndarray:
        raise NotImplementedError

    def draw_mean(self, n: int, size) -> np.ndarray:
        size = tuple(np.atleast_1d(size))
        acc = np.zeros(size)
        left = n
        chunk = max(1, 2**20 // max(1, int(np.prod(size))))
        while left > 0:
            b = min(chunk, left)
            acc += self.draw((b,) + size).sum(axis=0)
            left -= b
        return acc / n


class GaussianNoise(NoiseModel):
    """``N(0, sigma^2)`` noise, the canonical ``sigma``-sub-Gaussian law."""

    exact_mean = True

    def draw(self, size):
        if self.sigma == 0:
            return np.zeros(size)
        return self.rng.normal(0.0, self.sigma, size)

    def draw_mean(self, n, size):
        if self.sigma == 0:
            return np.zeros(size)
        return self.rng.normal(0.0, self.sigma / math.sqrt(n), size)


class UniformNoise(NoiseModel):
    """Uniform noise on ``[-sigma, sigma]`` (bounded, hence sigma-sub-Gaussian)."""

    def draw(self, size):
        if self.sigma == 0:
            return np.zeros(size)
        return self.rng.uniform(-self.sigma, self.sigma, size)


class MeasurementLedger:
    """Append-only record of oracle calls.

    Each row stores one query point, the (replicate-averaged) values of all
    functions there, the iteration tag ``t``, the first replicate tag ``l``
    and the number ``n`` of oracle calls the row stands for. ``count`` is the
    total number of oracle calls.
    """

    def __init__(self, d: int, k: int):
        self.d = d
        self.k = k
        self._cap = 256
        self._rows = 0
        self._count = 0
        self._x = np.empty((self._cap, d))
        self._v = np.empty((self._cap, k))
        self._t = np.empty(self._cap, dtype=np.int64)
        self._l = np.empty(self._cap, dtype=np.int64)
        self._n = np.empty(self._cap, dtype=np.int64)

    def _grow(self, need):
        cap = self._cap
        while cap < need:
            cap *= 2
        if cap == self._cap:
            return
        for name in ("_x", "_v", "_t", "_l", "_n"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._rows] = old[: self._rows]
            setattr(self, name, new)
        self._cap = cap

    def append(self, points, values, t: int, l=0, n=1):
        if np.ndim(points) != 2:
            points = np.atleast_2d(points)
            values = np.atleast_2d(values)
        r = points.shape[0]
        if self._rows + r > self._cap:
            self._grow(self._rows + r)
        s = slice(self._rows, self._rows + r)
        self._x[s] = points
        self._v[s] = values
        self._t[s] = t
        self._l[s] = l
        self._n[s] = n
        self._rows += r
        if np.ndim(n) == 0:
            self._count += int(n) * r
        else:
            self._count += sum(int(v) for v in n)

    def __len__(self):
        return self._rows

    @property
    def count(self) -> int:
        """Total oracle calls recorded (``N``)."""
        return self._count

    @property
    def points(self):
        return self._x[: self._rows]

    @property
    def values(self):
        return self._v[: self._rows]

    @property
    def t(self):
        return self._t[: self._rows]

    @property
    def l(self):
        return self._l[: self._rows]

    @property
    def n(self):
        return self._n[: self._rows]

    def extend(self, other: "MeasurementLedger"):
        self._grow(self._rows + len(other))
        s = slice(self._rows, self._rows + len(other))
        self._x[s] = other.points
        self._v[s] = other.values
        self._t[s] = other.t
        self._l[s] = other.l
        self._n[s] = other.n
        self._rows += len(other)
        self._count += other.count

    def to_csv(self, path, problem: Optional[ProblemSpec] = None):
        """Write one row per (call, function index).

        Columns: ``t,l,i,x_1..x_d,value,safe,n``. ``safe`` is the ground-truth
        feasibility of the point when ``problem`` is given, blank otherwise.
        """
        if problem is not None and len(self):
            safe = np.all(problem.constraint_values(self.points) <= 0, axis=1)
        else:
            safe = None
        header = ["t", "l", "i"] + [f"x_{j + 1}" for j in range(self.d)]
        header += ["value", "safe", "n"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in range(len(self)):
                xs = [repr(float(v)) for v in self._x[r]]
                s = "" if safe is None else str(int(safe[r]))
                for i in range(self.k):
                    w.writerow(
                        [int(self._t[r]), int(self._l[r]), i, *xs,
                         repr(float(self._v[r, i])), s, int(self._n[r])]
                    )


def read_ledger_csv(path) -> MeasurementLedger:
    """Rebuild a ledger from :meth:`MeasurementLedger.to_csv` output."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        xcols = [j for j, h in enumerate(header) if h.startswith("x_")]
        col = {h: j for j, h in enumerate(header)}
        rows = list(reader)
    d = len(xcols)
    k = 1 + max((int(r[col["i"]]) for r in rows), default=0)
    led = MeasurementLedger(d, k)
    if not rows:
        return led
    for start in range(0, len(rows), k):
        block = rows[start : start + k]
        r0 = block[0]
        x = [float(r0[j]) for j in xcols]
        vals = np.full(k, np.nan)
        for r in block:
            vals[int(r[col["i"]])] = float(r[col["value"]])
        n = int(r0[col["n"]]) if "n" in col else 1
        led.append(x, vals, int(r0[col["t"]]), int(r0[col["l"]]), n)
    return led


class Oracle:
    """Exact (EZO) or noisy (SZO) zeroth-order oracle over a problem.

    Parameters
    ----------
    problem : ProblemSpec
    noise : NoiseModel, optional
        ``None`` gives the exact oracle.
    aggregate : bool
        When the noise model has a closed-form law for the mean of ``n``
        draws, replicate batches are drawn as that mean directly and stored
        as a single ledger row with multiplicity ``n``. Otherwise every
        replicate is drawn and recorded individually.
    """

    def __init__(self, problem: ProblemSpec, noise: Optional[NoiseModel] = None,
                 ledger: Optional[MeasurementLedger] = None, aggregate: bool = True):
        self.problem = problem
        self.noise = noise
        self.ledger = ledger if ledger is not None else MeasurementLedger(
            problem.d, problem.m + 1
        )
        self.aggregate = aggregate
        self._mask = problem.noisy_mask

    @property
    def sigma(self) -> float:
        return 0.0 if self.noise is None else self.noise.sigma

    @property
    def calls(self) -> int:
        return self.ledger.count

    def eval_exact(self, x, i: int, t: int = 0, l: int = 0) -> float:
        x = np.asarray(x, dtype=float)
        self._check_index(i)
        v = self.problem.evaluate(x)
        self.ledger.append(x, v, t, l)
        return float(v[i])

    def eval_noisy(self, x, i: int, t: int = 0, l: int = 0) -> float:
        x = np.asarray(x, dtype=float)
        self._check_index(i)
        v = self.problem.evaluate(x)
        if self.sigma > 0:
            v = v + self._mask * self.noise.draw(v.shape)
        self.ledger.append(x, v, t, l)
        return float(v[i])

    def sample(self, points, n: int = 1, t: int = 0, l0: int = 0) -> np.ndarray:
        """Query each point ``n`` times; return per-point mean values.

        Parameters
        ----------
        points : array_like, shape (p, d)
        n : int
            Replicates per point; ``p * n`` oracle calls are charged.

        Returns
        -------
        ndarray, shape (p, m + 1)
        """
        n = int(n)
        if n < 1:
            raise ValueError("replicate count must be >= 1")
        P = np.atleast_2d(np.asarray(points, dtype=float))
        f = self.problem.evaluate(P)
        if self.sigma == 0:
            self.ledger.append(P, f, t, l0, n)
            return f
        if self.aggregate and self.noise.exact_mean:
            means = f + self._mask * self.noise.draw_mean(n, f.shape)
            self.ledger.append(P, means, t, l0, n)
            return means
        draws = f[None] + self._mask * self.noise.draw((n,) + f.shape)
        for l in range(n):
            self.ledger.append(P, draws[l], t, l0 + l, 1)
        return draws.mean(axis=0)

    def _check_index(self, i):
        if not 0 <= i <= self.problem.m:
            raise IndexError(f"function index {i} outside 0..{self.problem.m}")


@dataclass(frozen=True)
class Violation:
    row: int
    t: int
    l: int
    i: int
    x: tuple
    magnitude: float


def audit_points(points, problem: ProblemSpec, tol: float = 0.0) -> list:
    """Return ``(row, constraint index, magnitude)`` for every ``f_i(x) > tol``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        return []
    C = problem.constraint_values(P)
    rows, cols = np.nonzero(C > tol)
    return [(int(r), int(c) + 1, float(C[r, c])) for r, c in zip(rows, cols)]


def audit_safety(ledger: MeasurementLedger, problem: ProblemSpec) -> list:
    """Every ledger row whose point violates a ground-truth constraint."""
    out = []
    for r, i, mag in audit_points(ledger.points, problem):
        out.append(
            Violation(r, int(ledger.t[r]), int(ledger.l[r]), i,
                      tuple(float(v) for v in ledger.points[r]), mag)
        )
    return out
