"""Benchmark and verification problems, plus a brute-force grid reference.

Built-ins:

* ``turning``: cost of a turning (machining) process over cutting speed and
  feed rate, with a surface-roughness constraint and a known box.
* ``linear1d``: ``min x s.t. -x <= 0``; barrier minimizer ``x = eta``.
* ``disk``: ``min (x1-2)^2 + (x2-2)^2 s.t. x1^2 + x2^2 <= 1``; KKT point
  ``(1, 1)/sqrt(2)``.
* ``random``: seeded random quadratic instances with certified constants.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .oracle import ProblemSpec

__all__ = [
    "DomainError",
    "NoFeasiblePoint",
    "TURNING_DEFAULTS",
    "turning_problem",
    "turning_eval",
    "tool_life",
    "roughness",
    "AnalyticProblem",
    "linear1d",
    "disk_quadratic",
    "random_instance",
    "ReferenceSolution",
    "grid_reference",
    "check_constants",
    "problem_from_config",
    "PROBLEMS",
]


class DomainError(ValueError):
    """Raised when a model is evaluated outside its valid region."""


class NoFeasiblePoint(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# turning process

TURNING_DEFAULTS = {
    "tool_life": (127.5365, -0.84629, -144.21, 0.001703, 0.3656),
    "roughness": (0.7844, -0.010035, 7.0877, 0.000034, -0.018969),
    "roughness_max": 0.7,
    "cost_tool": 40.0,      # C_I
    "cost_machine": 50.0,   # C_M
    "geometry_constant": 1.0,
    "speed_scale": 1000.0,  # v_c = speed_scale * x_1
    "box": ((0.1, 0.2), (0.08, 0.16)),
    "x0": (0.15, 0.09),
    "M": 5.0,
    "L": 7.0,
}


def _poly(c, vc, f):
    return c[0] + c[1] * vc + c[2] * f + c[3] * vc**2 + c[4] * vc * f


def _poly_grad(c, vc, f):
    return c[1] + 2 * c[3] * vc + c[4] * f, c[2] + c[4] * vc


def tool_life(vc, f, coef=TURNING_DEFAULTS["tool_life"]):
    """Tool life ``T`` at unscaled cutting speed ``vc`` and feed ``f``."""
    return _poly(coef, vc, f)


def roughness(vc, f, coef=TURNING_DEFAULTS["roughness"]):
    """Surface roughness ``R`` at unscaled cutting speed ``vc`` and feed ``f``."""
    return _poly(coef, vc, f)


class _Turning:
    def __init__(self, params):
        self.p = params
        self.s = params["speed_scale"]

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        return self.s * x[..., 0], x[..., 1]

    def _life(self, vc, f):
        T = _poly(self.p["tool_life"], vc, f)
        if np.any(T <= 0):
            raise DomainError("tool life model is nonpositive at the query point")
        return T

    def cost(self, x):
        vc, f = self._split(x)
        T = self._life(vc, f)
        p = self.p
        return p["geometry_constant"] / (vc * f) * (p["cost_machine"] + p["cost_tool"] / T)

    def cost_grad(self, x):
        vc, f = self._split(x)
        p = self.p
        T = self._life(vc, f)
        tc = p["geometry_constant"] / (vc * f)
        bracket = p["cost_machine"] + p["cost_tool"] / T
        dT_dv, dT_df = _poly_grad(p["tool_life"], vc, f)
        dv = -tc / vc * bracket - tc * p["cost_tool"] / T**2 * dT_dv
        df = -tc / f * bracket - tc * p["cost_tool"] / T**2 * dT_df
        return np.stack([self.s * dv, df], axis=-1)

    def rough(self, x):
        vc, f = self._split(x)
        return _poly(self.p["roughness"], vc, f) - self.p["roughness_max"]

    def rough_grad(self, x):
        vc, f = self._split(x)
        dv, df = _poly_grad(self.p["roughness"], vc, f)
        return np.stack([self.s * dv * np.ones_like(f), df * np.ones_like(vc)], axis=-1)


def _box_constraints(box):
    funcs, grads = [], []
    d = len(box)
    for j, (lo, hi) in enumerate(box):
        e = np.zeros(d)
        e[j] = 1.0
        funcs.append(lambda x, j=j, lo=lo: lo - np.asarray(x, float)[..., j])
        grads.append(lambda x, e=-e: np.broadcast_to(e, np.shape(x)).copy())
        funcs.append(lambda x, j=j, hi=hi: np.asarray(x, float)[..., j] - hi)
        grads.append(lambda x, e=e: np.broadcast_to(e, np.shape(x)).copy())
    return funcs, grads


def turning_problem(**overrides) -> ProblemSpec:
    """The turning-process instance in rescaled coordinates ``(v_c/1000, f)``.

    Constraints, in order: roughness ``R(x) - R_max``, then the box residuals
    ``lo_1 - x_1, x_1 - hi_1, lo_2 - x_2, x_2 - hi_2``. The box is noise-free
    and has Lipschitz constant 1.
    """
    unknown = set(overrides) - set(TURNING_DEFAULTS)
    if unknown:
        raise KeyError(f"unknown turning parameters: {sorted(unknown)}")
    p = {**TURNING_DEFAULTS, **overrides}
    if p["geometry_constant"] <= 0:
        raise ValueError("geometry_constant must be positive")
    model = _Turning(p)
    bf, bg = _box_constraints(p["box"])
    return ProblemSpec(
        objective=model.cost,
        constraints=[model.rough] + bf,
        x0=p["x0"],
        M=p["M"],
        L=p["L"],
        objective_grad=model.cost_grad,
        constraint_grads=[model.rough_grad] + bg,
        known_exactly=[False] + [True] * len(bf),
        constraint_lipschitz=[p["L"]] + [1.0] * len(bf),
        bounds=np.asarray(p["box"], dtype=float),
        name="turning",
        descriptor={"kind": "turning", **{k: v for k, v in overrides.items()}},
    )


_TURNING_WHICH = ("cost", "roughness", "box_1_lo", "box_1_hi", "box_2_lo", "box_2_hi")


def turning_eval(x, which: str = "cost", **overrides) -> float:
    """Evaluate one turning-process function at rescaled ``x``.

    ``which`` is ``"cost"``, ``"roughness"`` (the ``R - R_max`` residual) or
    ``"box_<j>_<lo|hi>"``.
    """
    if which not in _TURNING_WHICH:
        raise KeyError(f"which must be one of {_TURNING_WHICH}")
    prob = turning_problem(**overrides)
    v = prob.evaluate(np.asarray(x, dtype=float))
    return float(v[_TURNING_WHICH.index(which)])


# ---------------------------------------------------------------------------
# analytic problems

class AnalyticProblem(ProblemSpec):
    """Problem with a closed-form barrier minimizer and/or KKT point."""

    def barrier_minimizer(self, eta: float) -> np.ndarray:
        return self._barrier_min(eta)

    def __init__(self, *args, barrier_min=None, kkt_point=None, kkt_multiplier=None,
                 **kw):
        super().__init__(*args, **kw)
        self._barrier_min = barrier_min
        self.kkt_point = None if kkt_point is None else np.asarray(kkt_point, float)
        self.kkt_multiplier = (None if kkt_multiplier is None
                               else np.asarray(kkt_multiplier, float))
        self._verify()

    def _verify(self):
        if self._barrier_min is not None:
            for eta in (0.2, 0.1, 0.05):
                r = np.linalg.norm(self.barrier_grad(self._barrier_min(eta), eta))
                if r > 1e-8:
                    raise AssertionError(f"stated barrier minimizer has residual {r}")
        if self.kkt_point is not None:
            G = self.gradients(self.kkt_point)
            r = np.linalg.norm(G[0] + self.kkt_multiplier @ G[1:])
            c = self.constraint_values(self.kkt_point)
            if r > 1e-8 or np.any(np.abs(self.kkt_multiplier * c) > 1e-8):
                raise AssertionError(f"stated KKT point has residual {r}")


def linear1d() -> AnalyticProblem:
    return AnalyticProblem(
        objective=lambda x: np.asarray(x, float)[..., 0],
        constraints=[lambda x: -np.asarray(x, float)[..., 0]],
        x0=[1.0],
        M=1.0,
        L=1.0,
        objective_grad=lambda x: np.ones(1),
        constraint_grads=[lambda x: -np.ones(1)],
        bounds=[[0.0, 2.0]],
        name="linear1d",
        descriptor={"kind": "linear1d"},
        barrier_min=lambda eta: np.array([eta]),
    )


def _disk_barrier_min(eta):
    # on the diagonal x = (s, s): 2(s - 2) + 2 eta s / (1 - 2 s^2) = 0
    def h(s):
        return 2 * (s - 2) + 2 * eta * s / (1 - 2 * s * s)

    lo, hi = 0.0, 1.0 / math.sqrt(2) - 1e-15
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    return np.array([0.5 * (lo + hi)] * 2)


def disk_quadratic() -> AnalyticProblem:
    r2 = 1.0 / math.sqrt(2.0)
    return AnalyticProblem(
        objective=lambda x: ((np.asarray(x, float) - 2.0) ** 2).sum(axis=-1),
        constraints=[lambda x: (np.asarray(x, float) ** 2).sum(axis=-1) - 1.0],
        x0=[0.0, 0.0],
        M=2.0,
        L=2.0,
        objective_grad=lambda x: 2.0 * (np.asarray(x, float) - 2.0),
        constraint_grads=[lambda x: 2.0 * np.asarray(x, float)],
        bounds=[[-1.0, 1.0], [-1.0, 1.0]],
        name="disk",
        descriptor={"kind": "disk"},
        barrier_min=_disk_barrier_min,
        kkt_point=[r2, r2],
        kkt_multiplier=[2.0 * math.sqrt(2.0) - 1.0],
    )


# ---------------------------------------------------------------------------
# random instances

def _quad(A, b, c):
    def f(x):
        x = np.asarray(x, float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, A, x) + x @ b + c

    def g(x):
        return np.asarray(x, float) @ A + b

    return f, g


def random_instance(d: int, m: int, seed: int = 0, M: float = 2.0,
                    L: float = 4.0) -> ProblemSpec:
    """Random smooth instance on the box ``[-1, 1]^d`` with witness ``x0 = 0``.

    The first constraint is a ball of radius 0.9 that keeps the feasible set
    inside the box; the others are random quadratics. All Hessian norms are
    at most ``M`` and all constraint gradients at most ``L`` on the box.
    """
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    rng = np.random.default_rng([seed, d, m])
    sd = math.sqrt(d)

    def sym(scale):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        return (Q * rng.uniform(-scale, scale, d)) @ Q.T

    H = sym(M)
    b0 = rng.standard_normal(d)
    f0, g0 = _quad(H, b0, 0.0)

    c_ball = min(M / 2.0, L / (2.0 * sd))
    cons, grads = [], []
    f, g = _quad(2.0 * c_ball * np.eye(d), np.zeros(d), -c_ball * 0.81)
    cons.append(f)
    grads.append(g)
    a = min(M, L / (2.0 * sd))
    for _ in range(m - 1):
        A = sym(a)
        b = rng.standard_normal(d)
        b *= rng.uniform(0.0, L / 2.0) / max(np.linalg.norm(b), 1e-12)
        c = -rng.uniform(0.2, 1.0)
        f, g = _quad(A, b, c)
        cons.append(f)
        grads.append(g)
    return ProblemSpec(
        objective=f0,
        constraints=cons,
        x0=np.zeros(d),
        M=M,
        L=L,
        objective_grad=g0,
        constraint_grads=grads,
        bounds=np.tile([-1.0, 1.0], (d, 1)),
        name="random",
        descriptor={"kind": "random", "d": d, "m": m, "seed": seed, "M": M, "L": L},
    )


# ---------------------------------------------------------------------------
# grid reference

@dataclass
class ReferenceSolution:
    h: float
    target: str
    eta: Optional[float]
    point: np.ndarray
    value: float
    coarse_point: np.ndarray
    coarse_value: float
    levels: list = field(default_factory=list)


def _target_values(problem, P, target, eta):
    V = problem.evaluate(P)
    C = V[:, 1:]
    if target == "objective":
        ok = np.all(C <= 0, axis=1)
        val = V[:, 0]
    else:
        ok = np.all(C < 0, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = V[:, 0] - eta * np.sum(np.log(np.where(ok[:, None], -C, 1.0)), axis=1)
    return np.where(ok, val, np.inf)


def _grid_min(problem, axes, target, eta, chunk=1 << 20):
    shape = tuple(a.size for a in axes)
    total = int(np.prod(shape))
    best_val, best_idx = np.inf, -1
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        sub = np.unravel_index(idx, shape)
        P = np.stack([axes[j][sub[j]] for j in range(len(axes))], axis=1)
        vals = _target_values(problem, P, target, eta)
        k = int(np.argmin(vals))  # first index on ties
        if vals[k] < best_val:
            best_val, best_idx = float(vals[k]), int(idx[k])
    if best_idx < 0:
        return None, np.inf
    sub = np.unravel_index(best_idx, shape)
    return np.array([axes[j][sub[j]] for j in range(len(axes))]), best_val


def grid_reference(problem: ProblemSpec, target: str = "objective", h: float = 1e-3,
                   eta: Optional[float] = None, refine: int = 2) -> ReferenceSolution:
    """Exhaustive grid minimum of the objective (over ``D``) or of ``B_eta``.

    The grid spans ``problem.bounds`` with spacing ``h``; the best point is
    then refined ``refine`` times on a 10x finer local grid, keeping a
    refinement only when it strictly lowers the target.
    """
    if target not in ("objective", "barrier"):
        raise ValueError("target must be 'objective' or 'barrier'")
    if target == "barrier" and not (eta and eta > 0):
        raise ValueError("barrier target needs eta > 0")
    if h <= 0:
        raise ValueError("h must be positive")
    if problem.bounds is None:
        raise ValueError("problem has no bounding box")
    if problem.d > 3:
        raise ValueError("grid reference is limited to d <= 3")
    axes = [np.arange(lo, hi + 0.5 * h, h) for lo, hi in problem.bounds]
    pt, val = _grid_min(problem, axes, target, eta)
    if pt is None:
        raise NoFeasiblePoint("no feasible grid point")
    coarse_pt, coarse_val = pt.copy(), val
    levels = [val]
    step = h
    for _ in range(refine):
        fine = step / 10.0
        axes = [np.linspace(c - step, c + step, 21) for c in pt]
        p2, v2 = _grid_min(problem, axes, target, eta)
        if p2 is None or not v2 < val:
            break
        pt, val, step = p2, v2, fine
        levels.append(val)
    return ReferenceSolution(h, target, eta, pt, val, coarse_pt, coarse_val, levels)


# ---------------------------------------------------------------------------
# constant checks and config

def _sample_feasible(problem, n, rng):
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    P = rng.uniform(lo, hi, size=(n, problem.d))
    ok = np.all(problem.constraint_values(P) <= 0, axis=1)
    return P[ok]


def check_constants(problem: ProblemSpec, n: int = 2000, seed: int = 0,
                    warn: bool = True) -> dict:
    """Sample the feasible region and estimate the actual ``M`` and ``L``.

    Constraint gradient norms use analytic gradients when available, central
    differences otherwise; Hessian norms use central differences of those.
    A warning is issued when a stated constant is exceeded.
    """
    if problem.bounds is None:
        raise ValueError("problem has no bounding box")
    rng = np.random.default_rng(seed)
    P = _sample_feasible(problem, n, rng)
    d = problem.d
    eps = 1e-5

    def grads(x):
        if problem.has_gradients:
            return problem.gradients(x)
        E = np.eye(d) * eps
        return ((problem.evaluate(x + E) - problem.evaluate(x - E)) / (2 * eps)).T

    lip = np.zeros(problem.m)
    hess = 0.0
    for x in P:
        G = grads(x)
        lip = np.maximum(lip, np.linalg.norm(G[1:], axis=1))
        for k in range(problem.m + 1):
            Hk = np.empty((d, d))
            for j in range(d):
                e = np.zeros(d)
                e[j] = eps
                Hk[:, j] = (grads(x + e)[k] - grads(x - e)[k]) / (2 * eps)
            hess = max(hess, float(np.linalg.norm(0.5 * (Hk + Hk.T), 2)))
    out = {
        "samples": int(len(P)),
        "max_constraint_gradient": lip.tolist(),
        "max_hessian_norm": hess,
        "L_ok": bool(np.all(lip <= problem.constraint_lipschitz * (1 + 1e-6))),
        "M_ok": bool(hess <= problem.M * (1 + 1e-6)),
    }
    if warn and not out["L_ok"]:
        warnings.warn(f"{problem.name}: sampled constraint gradients {lip} exceed "
                      f"stated Lipschitz constants", RuntimeWarning, stacklevel=2)
    if warn and not out["M_ok"]:
        warnings.warn(f"{problem.name}: sampled Hessian norm {hess:.4g} exceeds "
                      f"M={problem.M}", RuntimeWarning, stacklevel=2)
    return out


PROBLEMS = ("turning", "linear1d", "disk", "random")


def _floats(v):
    if isinstance(v, str):
        return tuple(float(s) for s in v.split(","))
    return tuple(float(s) for s in np.atleast_1d(v))


def problem_from_config(cfg: dict) -> ProblemSpec:
    """Build a problem from ``problem.*`` keys (prefix already stripped)."""
    cfg = dict(cfg)
    name = str(cfg.pop("name", "turning")).lower()
    if name == "turning":
        kw = {}
        for key in ("geometry_constant", "cost_tool", "cost_machine", "roughness_max",
                    "speed_scale", "M", "L"):
            if key in cfg:
                kw[key] = float(cfg.pop(key))
        for key in ("tool_life", "roughness", "x0"):
            if key in cfg:
                kw[key] = _floats(cfg.pop(key))
        if "box" in cfg:
            b = _floats(cfg.pop("box"))
            kw["box"] = ((b[0], b[1]), (b[2], b[3]))
        prob = turning_problem(**kw)
    elif name == "linear1d":
        prob = linear1d()
    elif name == "disk":
        prob = disk_quadratic()
    elif name == "random":
        prob = random_instance(int(cfg.pop("d", 2)), int(cfg.pop("m", 1)),
                               int(cfg.pop("seed", 0)), float(cfg.pop("M", 2.0)),
                               float(cfg.pop("L", 4.0)))
    else:
        raise KeyError(f"unknown problem {name!r}; choose from {PROBLEMS}")
    if name in ("linear1d", "disk", "random") and "x0" in cfg:
        x0 = np.asarray(_floats(cfg.pop("x0")))
        prob = _with_x0(prob, x0)
    if cfg:
        raise KeyError(f"unknown problem keys: {sorted(cfg)}")
    return prob


def _with_x0(prob, x0):
    if isinstance(prob, AnalyticProblem):
        return AnalyticProblem(
            prob.objective, prob.constraints, x0, prob.M, prob.L,
            prob.objective_grad, prob.constraint_grads, prob.known_exactly,
            prob.constraint_lipschitz, prob.bounds, prob.name,
            {**prob.descriptor, "x0": x0.tolist()},
            barrier_min=prob._barrier_min, kkt_point=prob.kkt_point,
            kkt_multiplier=prob.kkt_multiplier,
        )
    return ProblemSpec(
        prob.objective, prob.constraints, x0, prob.M, prob.L, prob.objective_grad,
        prob.constraint_grads, prob.known_exactly, prob.constraint_lipschitz,
        prob.bounds, prob.name, {**prob.descriptor, "x0": x0.tolist()},
    )
