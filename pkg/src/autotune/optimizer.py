"""Sequential tuning loop: Bayesian optimization and the random-search baseline.

Every step draws its random numbers from a generator seeded by
``(run seed, observation index)``, so a run can be resumed from its log alone
and still produce the same sequence as an uninterrupted run.

Run log format (JSON lines)::

    {"space_hash", "strategy", "seed", "m0", "N", "version", "pool_size", "space"}
    {"index", "phase", "config", "value", "wall_time", "meta"}
    ...
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, TextIO

import numpy as np

from . import search_space as ss
from .acquisition import DEFAULT_POOL_SIZE, Incumbent, SpaceExhausted, propose_next
from .evaluators.base import EvalRequest, EvalResponse
from .gp import fit_auto

log = logging.getLogger(__name__)

LOG_VERSION = 1
STRATEGIES = ("bayes_opt", "random_search")
RANDOM_ATTEMPTS = 100


class EvaluatorError(RuntimeError):
    """The evaluator failed twice on the same configuration."""


class ResumeError(ValueError):
    def __init__(self, msg: str, last_valid_index: int):
        super().__init__(f"{msg} (last valid index {last_valid_index})")
        self.last_valid_index = last_valid_index


@dataclass(frozen=True)
class Budget:
    m0: int = 20
    n_total: int = 50

    def __post_init__(self):
        if not 1 <= self.m0 < self.n_total:
            raise ValueError(f"need 1 <= m0 < N, got m0={self.m0}, N={self.n_total}")

    @classmethod
    def default(cls, strategy: str) -> "Budget":
        if strategy == "random_search":
            return cls(m0=1, n_total=100)
        return cls()


@dataclass
class Observation:
    index: int
    config: dict
    encoded: np.ndarray
    value: float
    phase: str
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {"index": self.index, "phase": self.phase, "config": self.config,
                "value": self.value, "wall_time": self.wall_time, "meta": self.meta}


@dataclass
class TuningRun:
    space: ss.SearchSpace
    budget: Budget
    strategy: str
    seed: int
    pool_size: int = DEFAULT_POOL_SIZE
    epochs: int = 50
    run_id: str = ""
    observations: list[Observation] = field(default_factory=list)
    status: str = "running"
    clock: Callable[[], float] = field(default=time.perf_counter, repr=False)
    sink: "RunLog | None" = field(default=None, repr=False)

    @property
    def incumbent(self) -> Incumbent | None:
        best = None
        for obs in self.observations:
            if best is None or obs.value > best.value:  # ties keep the earliest
                best = obs
        return None if best is None else Incumbent(dict(best.config), best.value)

    def incumbent_trace(self) -> list[float]:
        trace, best = [], -math.inf
        for obs in self.observations:
            best = max(best, obs.value)
            trace.append(best)
        return trace

    def evaluated_keys(self) -> set:
        return {ss.config_key(self.space, o.config) for o in self.observations}

    def header(self) -> dict:
        return {"space_hash": self.space.digest(), "strategy": self.strategy,
                "seed": self.seed, "m0": self.budget.m0, "N": self.budget.n_total,
                "version": LOG_VERSION, "pool_size": self.pool_size, "epochs": self.epochs,
                "space": self.space.to_dict()}


def init_run(space: ss.SearchSpace, budget: Budget | None = None,
             strategy: str = "bayes_opt", seed: int = 0,
             pool_size: int = DEFAULT_POOL_SIZE, epochs: int = 50, run_id: str = "",
             clock: Callable[[], float] = time.perf_counter) -> TuningRun:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    ss.check(space)
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    budget = budget or Budget.default(strategy)
    return TuningRun(space, budget, strategy, int(seed), pool_size, epochs,
                     run_id or f"{strategy}-{seed}", clock=clock)


def _step_rng(run: TuningRun, index: int) -> np.random.Generator:
    return np.random.default_rng([run.seed, index])


def _uniform_unevaluated(run: TuningRun, rng: np.random.Generator) -> dict:
    done = run.evaluated_keys()
    for _ in range(RANDOM_ATTEMPTS):
        c = ss.sample_uniform(run.space, rng)
        if ss.config_key(run.space, c) not in done:
            return c
    raise SpaceExhausted()


def _next_config(run: TuningRun, index: int) -> tuple[dict, str]:
    rng = _step_rng(run, index)
    if run.strategy == "random_search":
        return _uniform_unevaluated(run, rng), "random"
    if index <= run.budget.m0:
        return _uniform_unevaluated(run, rng), "seed"
    X = np.stack([o.encoded for o in run.observations])
    y = np.array([o.value for o in run.observations])
    model = fit_auto(X, y)
    config = propose_next(model, run.space, run.incumbent, run.evaluated_keys(), rng,
                          run.pool_size)
    return config, "bayes"


def step(run: TuningRun, evaluator: Callable[[EvalRequest], EvalResponse]) -> Observation | None:
    """Propose, evaluate and record one observation.

    Returns ``None`` (and marks the run exhausted) when no unevaluated
    configuration is left. A failed evaluation is retried once; a second
    failure raises :class:`EvaluatorError` after the log has been flushed.
    """
    if run.status != "running":
        raise RuntimeError(f"run is {run.status}")
    index = len(run.observations) + 1
    try:
        config, phase = _next_config(run, index)
    except SpaceExhausted:
        run.status = "exhausted"
        return None

    request = EvalRequest(run.run_id, index, config, run.epochs)
    t0 = run.clock()
    resp = evaluator(request)
    meta: dict[str, Any] = {}
    if not resp.ok:
        log.warning("evaluation %d failed (%s), retrying", index, resp.reason)
        meta["retried"] = resp.meta
        resp = evaluator(request)
        if not resp.ok:
            if run.sink is not None:
                run.sink.flush()
            raise EvaluatorError(f"evaluator error at index {index}: {resp.reason}")
    wall = run.clock() - t0
    meta.update(resp.meta)
    obs = Observation(index, config, ss.encode(run.space, config), float(resp.value), phase,
                      float(wall), meta)
    run.observations.append(obs)
    if run.sink is not None:
        run.sink.write(obs)
    if len(run.observations) >= run.budget.n_total:
        run.status = "complete"
    return obs


def run_to_completion(run: TuningRun,
                      evaluator: Callable[[EvalRequest], EvalResponse]) -> TuningRun:
    while run.status == "running":
        step(run, evaluator)
    return run


def run_search(space: ss.SearchSpace, evaluator, strategy: str = "bayes_opt", seed: int = 0,
               budget: Budget | None = None, pool_size: int = DEFAULT_POOL_SIZE,
               log_path: str | Path | None = None, epochs: int = 50) -> TuningRun:
    """Convenience wrapper: init, optionally persist, run to completion."""
    run = init_run(space, budget, strategy, seed, pool_size, epochs)
    if log_path is not None:
        persist(run, log_path)
    try:
        return run_to_completion(run, evaluator)
    finally:
        if run.sink is not None:
            run.sink.close()


# ---------------------------------------------------------------------------
# persistence


def _dumps(doc: dict) -> str:
    return json.dumps(doc, separators=(", ", ": "))


class RunLog:
    """Append-only JSON-lines sink; every record is flushed as written."""

    def __init__(self, path: str | Path, header: dict, existing: list[Observation] = ()):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lines = [_dumps(header)] + [_dumps(o.record()) for o in existing]
        self._fh: TextIO = open(self.path, "w", encoding="utf-8")
        self._fh.write("\n".join(lines) + "\n")
        self._fh.flush()

    def write(self, obs: Observation) -> None:
        self._fh.write(_dumps(obs.record()) + "\n")
        self._fh.flush()

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def persist(run: TuningRun, path: str | Path) -> RunLog:
    """Write the header and any existing observations, then log every new one."""
    run.sink = RunLog(path, run.header(), run.observations)
    return run.sink


def read_log(path: str | Path) -> tuple[dict | None, list[dict]]:
    """Parse a run log. A truncated final line is dropped; any other bad line
    raises :class:`ResumeError`."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return None, []
    try:
        header = json.loads(lines[0])
        if not isinstance(header, dict) or "strategy" not in header:
            raise ValueError("missing header fields")
    except ValueError:
        if len(lines) == 1:
            return None, []
        raise ResumeError("corrupt header", 0) from None
    records: list[dict] = []
    for i, line in enumerate(lines[1:], start=1):
        last = i == len(lines) - 1
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict) or rec.get("index") != len(records) + 1:
                raise ValueError("bad record")
            for key in ("phase", "config", "value"):
                if key not in rec:
                    raise ValueError(f"record without {key}")
        except ValueError:
            if last and not text.endswith("\n"):
                break  # interrupted mid-write
            raise ResumeError(f"corrupt record on line {i + 1}", len(records)) from None
        records.append(rec)
    return header, records


def resume(path: str | Path, evaluator_space: ss.SearchSpace | None = None,
           strategy: str = "bayes_opt", seed: int = 0, budget: Budget | None = None,
           pool_size: int = DEFAULT_POOL_SIZE, epochs: int = 50,
           clock: Callable[[], float] = time.perf_counter) -> TuningRun:
    """Rebuild a run from its log and reopen the log for appending.

    An empty or missing log yields a fresh run built from the keyword
    arguments (``evaluator_space`` is then required).
    """
    path = Path(path)
    header, records = read_log(path) if path.exists() else (None, [])
    if header is None:
        if evaluator_space is None:
            raise ResumeError("empty log and no space given", 0)
        run = init_run(evaluator_space, budget, strategy, seed, pool_size, epochs, clock=clock)
        persist(run, path)
        return run

    space = ss.space_from_dict(header["space"])
    if space.digest() != header["space_hash"]:
        raise ResumeError("space hash does not match embedded space", 0)
    if evaluator_space is not None and evaluator_space.digest() != space.digest():
        raise ResumeError("log was written for a different space", 0)
    strategy = header["strategy"]
    run = init_run(space, Budget(header["m0"], header["N"]), strategy, header["seed"],
                   header.get("pool_size", DEFAULT_POOL_SIZE), header.get("epochs", epochs),
                   clock=clock)
    for rec in records:
        config = rec["config"]
        try:
            ss.check_config(space, config)
        except ss.SearchSpaceError as exc:
            raise ResumeError(f"record {rec['index']}: {exc}", rec["index"] - 1) from None
        run.observations.append(Observation(rec["index"], config, ss.encode(space, config),
                                            float(rec["value"]), rec["phase"],
                                            float(rec.get("wall_time", 0.0)),
                                            rec.get("meta", {})))
    if len(run.observations) >= run.budget.n_total:
        run.status = "complete"
    persist(run, path)
    return run
