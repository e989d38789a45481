"""Safe zeroth-order log-barrier solver for exact and noisy oracles, with the
outer barrier-weight schedule, best-iterate selection and scaled-KKT
certification.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Optional, Union

import numpy as np

from . import kernels
from .estimator import batch_size
from .oracle import GaussianNoise, Oracle, ProblemSpec, UniformNoise

__all__ = [
    "SolverConfig",
    "IterateRecord",
    "Trajectory",
    "SubproblemResult",
    "SolveResult",
    "KKTReport",
    "SlackExhausted",
    "iteration_budget",
    "barrier_lower_bound",
    "solve_subproblem",
    "solve",
    "certify_kkt",
    "make_oracle",
]

log = logging.getLogger(__name__)

# ledger multiplicities are stored as int64
_MAX_BATCH = 2**62


class SlackExhausted(RuntimeError):
    """No safe probe radius can be certified at the current iterate.

    ``result`` holds the partial result (a :class:`SubproblemResult`, or a
    :class:`SolveResult` once propagated by :func:`solve`).
    """

    def __init__(self, msg, result=None, round_index=None):
        super().__init__(msg)
        self.result = result
        self.round_index = round_index


@dataclass
class SolverConfig:
    eta0: float = 0.1
    mu: float = 5.0
    rounds: int = 1
    T: Union[int, str] = "auto"
    delta: float = 0.01
    sigma: float = 0.0
    mode: str = "EZO"
    seed: int = 0
    stop_threshold: float = 0.0
    B_low: Optional[float] = None
    noise: str = "gaussian"
    aggregate: bool = True

    def __post_init__(self):
        self.mode = self.mode.upper()
        if self.mode not in ("EZO", "SZO"):
            raise ValueError("mode must be 'EZO' or 'SZO'")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if not self.mu > 1:
            raise ValueError("mu must exceed 1")
        if int(self.rounds) < 1:
            raise ValueError("rounds must be >= 1")
        self.rounds = int(self.rounds)
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.stop_threshold < 0:
            raise ValueError("stop_threshold must be nonnegative")
        if isinstance(self.T, str):
            if self.T != "auto":
                self.T = int(self.T)
        if not isinstance(self.T, str) and self.T < 1:
            raise ValueError("T must be >= 1 or 'auto'")
        if self.noise not in ("gaussian", "uniform"):
            raise ValueError("noise must be 'gaussian' or 'uniform'")
        if self.mode == "EZO" and self.sigma > 0:
            raise ValueError("EZO mode is noise-free; use mode='SZO' with sigma > 0")

    def etas(self):
        return [self.eta0 / self.mu**r for r in range(self.rounds)]


@dataclass
class IterateRecord:
    t: int
    x: np.ndarray
    nu: float
    n: int
    gamma: float
    g: np.ndarray
    gnorm: float
    slack: float
    lam: np.ndarray
    barrier: float
    cum_measurements: int
    score: float


class Trajectory:
    """Column store of per-iteration state; indexing yields IterateRecord."""

    _COLS = ("t", "x", "nu", "n", "gamma", "g", "gnorm", "slack", "lam",
             "barrier", "cum_measurements", "score")

    def __init__(self):
        self._data = {c: [] for c in self._COLS}

    def append(self, **kw):
        for c in self._COLS:
            self._data[c].append(kw[c])

    def __len__(self):
        return len(self._data["t"])

    def __getitem__(self, i):
        return IterateRecord(**{c: self._data[c][i] for c in self._COLS})

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def column(self, name):
        col = self._data[name]
        if name in ("n", "cum_measurements"):
            return list(col)
        return np.asarray(col)


@dataclass
class SubproblemResult:
    eta: float
    trajectory: Trajectory
    k: int
    x_last: np.ndarray
    T: int
    measurements: int
    stopped_early: bool = False
    halted: Optional[str] = None

    @property
    def budget_exhausted(self) -> bool:
        return self.halted is None and not self.stopped_early

    @property
    def selected(self) -> IterateRecord:
        return self.trajectory[self.k]


@dataclass
class KKTReport:
    x: np.ndarray
    lam: np.ndarray
    eta: float
    mode: str
    level: float
    residual: float
    residual_source: str
    complementarity: np.ndarray
    dual_feasible: bool
    primal_feasible: bool
    stationarity_ok: bool
    complementarity_ok: bool
    verdict: bool
    barrier_gradient_norm: Optional[float] = None
    selected_bound_ok: Optional[bool] = None
    min_slack: Optional[float] = None
    Q: Optional[float] = None

    @property
    def lambda_inf(self) -> float:
        return float(np.max(self.lam)) if self.lam.size else 0.0

    @property
    def unscaled_level(self) -> Optional[float]:
        """Accuracy as an unscaled KKT point, ``(Q + 1) * level``."""
        return None if self.Q is None else (self.Q + 1.0) * self.level

    def to_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, np.ndarray):
                out[k] = v.tolist()
        out["lambda_inf"] = self.lambda_inf
        out["unscaled_level"] = self.unscaled_level
        return out


@dataclass
class SolveResult:
    config: SolverConfig
    rounds: list
    report: Optional[KKTReport]
    oracle: Oracle
    wall_time: float = 0.0
    halted_round: Optional[int] = None

    @property
    def ledger(self):
        return self.oracle.ledger

    @property
    def N_T(self) -> int:
        return self.oracle.ledger.count

    @property
    def x_selected(self):
        for r in reversed(self.rounds):
            if len(r.trajectory):
                return r.selected.x
        return self.oracle.problem.x0

    @property
    def min_slack(self) -> float:
        vals = [float(np.min(r.trajectory.column("slack")))
                for r in self.rounds if len(r.trajectory)]
        return min(vals) if vals else math.nan


def iteration_budget(eta: float, m: int, M: float, L: float, gap: float) -> int:
    """Iterations after which a scaled-KKT point is guaranteed to have been
    visited: ``ceil(2 * gap * max((m M eta + 4 L^2 m) / eta^3, L / eta^2))``.
    """
    if gap < 0:
        raise ValueError("barrier gap must be nonnegative")
    if eta <= 0 or m < 1 or M <= 0 or L <= 0:
        raise ValueError("eta, m, M, L must be positive")
    b = 2.0 * gap * max((m * M * eta + 4.0 * L * L * m) / eta**3, L / eta**2)
    return max(1, math.ceil(b))


def barrier_lower_bound(problem: ProblemSpec, eta: float, points_per_axis: int = 41,
                        seed: int = 0) -> float:
    """Crude lower bound on ``min_D B_eta`` from a coarse feasible sample.

    ``min f0 - eta * sum_i log(max(-f_i))`` over the feasible sample points.
    """
    if problem.bounds is None:
        raise ValueError("barrier lower bound needs problem bounds; set B_low")
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    if problem.d <= 3:
        axes = [np.linspace(a, b, points_per_axis) for a, b in zip(lo, hi)]
        P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.d)
    else:
        P = np.random.default_rng(seed).uniform(lo, hi, (4096, problem.d))
    P = np.vstack([P, problem.x0])
    V = problem.evaluate(P)
    ok = np.all(V[:, 1:] < 0, axis=1)
    V = V[ok]
    return float(V[:, 0].min() - eta * np.sum(np.log(np.max(-V[:, 1:], axis=0))))


def make_oracle(problem: ProblemSpec, config: SolverConfig) -> Oracle:
    noise = None
    if config.mode == "SZO":
        cls = GaussianNoise if config.noise == "gaussian" else UniformNoise
        noise = cls(config.sigma, seed=config.seed)
    return Oracle(problem, noise, aggregate=config.aggregate)


def _resolve_T(problem, config, x_start, eta):
    if config.T != "auto":
        return int(config.T)
    B_low = config.B_low
    if B_low is None:
        B_low = barrier_lower_bound(problem, eta)
    gap = max(problem.barrier(x_start, eta) - B_low, 1e-12)
    return iteration_budget(eta, problem.m, problem.M, problem.L, gap)


def solve_subproblem(problem: ProblemSpec, config: SolverConfig, x_start=None,
                     eta: Optional[float] = None, oracle: Optional[Oracle] = None,
                     t_offset: int = 0) -> SubproblemResult:
    """Minimize ``B_eta`` from a strictly feasible start with safe steps.

    Each iteration measures the current point and ``d`` coordinate probes
    (``n_t`` times each in SZO mode), forms the barrier-gradient estimate,
    takes a step of length at most ``slack / (2 L)`` and of size at most
    ``1 / L2``, and records the state.
    Iteration stops after ``T`` steps or once ``gamma_t |g_t|^2`` drops to
    ``config.stop_threshold``.

    Raises
    ------
    SlackExhausted
        If the constraint upper bounds leave no positive slack. The partial
        result is attached.
    """
    eta = config.eta0 if eta is None else float(eta)
    x = np.array(problem.x0 if x_start is None else x_start, dtype=float)
    oracle = make_oracle(problem, config) if oracle is None else oracle
    T = _resolve_T(problem, config, x, eta)

    d, m, M, L = problem.d, problem.m, problem.M, problem.L
    lip = problem.constraint_lipschitz
    noisy = config.mode == "SZO"
    sigma = oracle.sigma
    delta = config.delta
    shift_mask = (~problem.known_exactly).astype(float)
    conf = sigma * math.sqrt(math.log(1.0 / delta))
    eye = np.eye(d)
    nu_max = eta / (math.sqrt(d) * M)
    n_pre = batch_size(nu_max, sigma, delta, M) if noisy else 1
    start_calls = oracle.calls

    traj = Trajectory()
    halted = None
    stopped = False
    x_last = x.copy()

    for step in range(T):
        t = t_offset + step
        if noisy:
            if n_pre >= _MAX_BATCH:
                halted = f"batch size {n_pre} too large at t={t}"
                break
            pre = oracle.sample(x[None], n_pre, t)[0]
            guard = pre[1:] + shift_mask * (conf / math.sqrt(n_pre))
            if np.any(guard >= 0):
                halted = f"upper confidence bound nonnegative at t={t}"
                break
            slack_hat = kernels.effective_slack(guard, lip, L)
            nu = kernels.probe_radius(eta, d, M, L, m, slack_hat, 2.0)
            n = batch_size(nu, sigma, delta, M)
            if n >= _MAX_BATCH:
                halted = f"batch size {n} too large at t={t}"
                break
            center = pre
            if n > n_pre:
                top = oracle.sample(x[None], n - n_pre, t, l0=n_pre)[0]
                center = (pre * n_pre + top * (n - n_pre)) / n
            probes = oracle.sample(x + nu * eye, n, t)
            cons = center[1:] + shift_mask * (conf / math.sqrt(n))
            if np.any(cons >= 0):
                halted = f"upper confidence bound nonnegative at t={t}"
                break
        else:
            n = 1
            center = oracle.sample(x[None], 1, t)[0]
            cons = center[1:]
            if np.any(cons >= 0):
                halted = f"constraint value nonnegative at t={t}"
                break
            slack_eff = kernels.effective_slack(cons, lip, L)
            nu = kernels.probe_radius(eta, d, M, L, m, slack_eff, 1.0)
            probes = oracle.sample(x + nu * eye, 1, t)

        g, gnorm, L2, gamma, _, x_next = kernels.barrier_step(
            x, center, probes, cons, nu, eta, M, L, lip)
        score = gamma * gnorm * gnorm
        traj.append(
            t=t, x=x, nu=nu, n=n, gamma=gamma, g=g, gnorm=gnorm,
            slack=float(np.min(-cons)), lam=eta / -cons,
            barrier=float(center[0] - eta * np.sum(np.log(-cons))),
            cum_measurements=oracle.calls, score=score,
        )
        x_last = x_next
        if score <= config.stop_threshold:
            stopped = True
            break
        x = x_next

    k = int(np.argmin(traj.column("score"))) if len(traj) else -1
    res = SubproblemResult(eta=eta, trajectory=traj, k=k, x_last=x_last, T=T,
                           measurements=oracle.calls - start_calls,
                           stopped_early=stopped, halted=halted)
    if halted is not None:
        raise SlackExhausted(halted, result=res)
    return res


def certify_kkt(problem: ProblemSpec, x, lam, eta: float, mode: str = "EZO",
                fd_step: Optional[float] = None) -> KKTReport:
    """Check the scaled approximate KKT conditions for ``(x, lam)``.

    The level is ``eta`` for exact-oracle runs and ``4 * eta`` for noisy ones.
    Gradients are analytic when the problem provides them; otherwise a
    central-difference pass with step ``fd_step`` is used (and must be
    requested explicitly).
    """
    x = np.asarray(x, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    mode = mode.upper()
    c = 1.0 if mode == "EZO" else 4.0
    level = c * eta
    if problem.has_gradients:
        G = problem.gradients(x)
        source = "analytic"
    elif fd_step:
        E = np.eye(problem.d) * fd_step
        G = ((problem.evaluate(x + E) - problem.evaluate(x - E)) / (2 * fd_step)).T
        source = "finite-difference"
    else:
        raise ValueError("no analytic gradients; pass fd_step to allow a "
                         "finite-difference pass")
    cons = problem.constraint_values(x)
    residual = float(np.linalg.norm(G[0] + lam @ G[1:]))
    comp = lam * -cons
    lam_inf = float(np.max(lam)) if lam.size else 0.0
    tol = 1e-9
    dual_ok = bool(np.all(lam >= 0))
    primal_ok = bool(np.all(-cons >= 0))
    stat_ok = residual <= level * (1.0 + lam_inf) * (1 + tol)
    comp_ok = bool(np.all(comp <= level * (1 + tol)))
    bgrad = None
    sel_ok = None
    if np.all(cons < 0):
        bgrad = float(np.linalg.norm(G[0] + (eta / -cons) @ G[1:]))
        sel_ok = bgrad <= eta * (4.0 + lam_inf) * (1 + tol)
    return KKTReport(
        x=x, lam=lam, eta=eta, mode=mode, level=level, residual=residual,
        residual_source=source, complementarity=comp, dual_feasible=dual_ok,
        primal_feasible=primal_ok, stationarity_ok=bool(stat_ok),
        complementarity_ok=comp_ok,
        verdict=bool(dual_ok and primal_ok and stat_ok and comp_ok),
        barrier_gradient_norm=bgrad, selected_bound_ok=sel_ok,
    )


def _estimate_report(problem, config, res: SubproblemResult) -> KKTReport:
    rec = res.selected
    eta = res.eta
    lam = rec.lam
    lam_inf = float(np.max(lam))
    if config.mode == "EZO":
        level = eta
        err = (1 + problem.m * eta / rec.slack) * math.sqrt(problem.d) * rec.nu * problem.M / 2
    else:
        level = 4 * eta
        err = eta * (4 + eta / (problem.L * math.sqrt(problem.d)))
    residual = rec.gnorm + err
    comp = np.full(problem.m, eta)
    stat_ok = residual <= level * (1 + lam_inf)
    return KKTReport(
        x=rec.x, lam=lam, eta=eta, mode=config.mode, level=level, residual=residual,
        residual_source="estimate", complementarity=comp, dual_feasible=True,
        primal_feasible=True, stationarity_ok=bool(stat_ok), complementarity_ok=True,
        verdict=bool(stat_ok),
    )


def solve(problem: ProblemSpec, config: SolverConfig,
          oracle: Optional[Oracle] = None) -> SolveResult:
    """Run the barrier subproblem for ``eta0, eta0/mu, ...`` with warm starts.

    Each round starts at the previous round's selected iterate. The final
    report certifies the last round's selected pair.
    """
    t0 = time.perf_counter()
    oracle = make_oracle(problem, config) if oracle is None else oracle
    rounds = []
    x = problem.x0.copy()
    t_offset = 0
    for r, eta in enumerate(config.etas()):
        try:
            res = solve_subproblem(problem, config, x, eta, oracle, t_offset)
        except SlackExhausted as exc:
            rounds.append(exc.result)
            out = SolveResult(config, rounds, None, oracle,
                              time.perf_counter() - t0, halted_round=r)
            raise SlackExhausted(f"round {r}: {exc}", result=out, round_index=r) from exc
        log.debug("round %d eta=%g: %d iterations, k=%d", r, eta, len(res.trajectory), res.k)
        rounds.append(res)
        x = res.selected.x
        t_offset += len(res.trajectory)

    final = rounds[-1]
    rec = final.selected
    if problem.has_gradients:
        report = certify_kkt(problem, rec.x, rec.lam, final.eta, config.mode)
    else:
        report = _estimate_report(problem, config, final)
    out = SolveResult(config, rounds, report, oracle, 0.0)
    report.min_slack = out.min_slack
    report.Q = max(float(np.max(np.asarray(r.trajectory.column("lam")))) for r in rounds)
    out.wall_time = time.perf_counter() - t0
    return out
