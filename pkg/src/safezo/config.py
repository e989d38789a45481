"""Flat ``key = value`` run configuration with dotted keys.

Example::

    # noisy turning run
    problem.name = turning
    solver.mode = SZO
    solver.sigma = 0.01
    run.replicates = 20

See ``docs/config.md`` for every key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .solver import SolverConfig

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "load_config",
           "DEFAULT_OUT_ENV"]

DEFAULT_OUT_ENV = "SAFEZO_OUT"

_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
_RUN_KEYS = {"replicates", "jobs", "out", "ledger"}


class ConfigError(ValueError):
    pass


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config_text(text: str) -> dict:
    """Parse dotted ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or "." not in key:
            raise ConfigError(f"line {lineno}: keys must be dotted, got {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _coerce(value)
    return out


@dataclass
class RunConfig:
    problem: dict = field(default_factory=lambda: {"name": "turning"})
    solver: dict = field(default_factory=dict)
    replicates: int = 1
    jobs: int = 1
    out: str = ""
    ledger: bool = True

    @classmethod
    def from_flat(cls, flat: dict) -> "RunConfig":
        cfg = cls(problem={}, solver={})
        for key, value in flat.items():
            section, name = key.split(".", 1)
            if section == "problem":
                cfg.problem[name] = value
            elif section == "solver":
                if name not in _SOLVER_KEYS:
                    raise ConfigError(f"unknown solver key {key!r}")
                cfg.solver[name] = value
            elif section == "run":
                if name not in _RUN_KEYS:
                    raise ConfigError(f"unknown run key {key!r}")
                setattr(cfg, name, value)
            else:
                raise ConfigError(f"unknown section in {key!r}")
        cfg.problem.setdefault("name", "turning")
        cfg.validate()
        return cfg

    def solver_config(self, **overrides) -> SolverConfig:
        kw = {**self.solver, **overrides}
        if "T" in kw and isinstance(kw["T"], float):
            kw["T"] = int(kw["T"])
        return SolverConfig(**kw)

    def validate(self):
        from .problems import problem_from_config

        try:
            self.solver_config()
            problem_from_config(self.problem)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ConfigError("run.replicates must be a positive integer")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError("run.jobs must be a positive integer")

    def output_dir(self, override=None) -> str:
        return override or self.out or os.environ.get(DEFAULT_OUT_ENV) or "safezo_out"

    def flat(self) -> dict:
        out = {f"problem.{k}": v for k, v in self.problem.items()}
        out.update({f"solver.{k}": v for k, v in self.solver.items()})
        out.update({"run.replicates": self.replicates, "run.jobs": self.jobs,
                    "run.out": self.out, "run.ledger": self.ledger})
        return out


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_flat(parse_config_text(text))
