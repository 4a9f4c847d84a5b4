"""Pick the fastest of k configurations with geometrically growing timeouts.

Configurations are evaluated in rounds. Each round gives every configuration
a budget ``t`` for its not-yet-completed queries, then multiplies ``t`` by
``alpha``. Once some configuration completes the whole workload, every other
candidate gets one more chance with a budget equal to the incumbent's total
minus the time it has already banked; whatever exceeds that budget cannot win.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from lttune.evaluator import ConfigMeta, IndexCostBook, evaluate
from lttune.events import EventLog
from lttune.executor import Executor
from lttune.llm import Configuration
from lttune.scheduler import MAX_DP_UNITS
from lttune.workload import Workload

DEFAULT_T0 = 10.0
DEFAULT_ALPHA = 10.0
DEFAULT_MAX_ROUNDS = 12


class SelectionError(RuntimeError):
    """No configuration finished; carries the partial bookkeeping."""

    def __init__(self, msg: str, meta: dict[int, ConfigMeta]) -> None:
        super().__init__(msg)
        self.meta = meta


@dataclass
class BestConfig:
    time: float = math.inf
    config: Configuration | None = None

    @property
    def known(self) -> bool:
        return self.config is not None


def throughput(m: ConfigMeta) -> float:
    spent = m.time + m.wasted_time + m.cumulative_index_time
    return len(m.completed_queries) / spent if spent > 0 else math.nan


def throughput_order(configs: Sequence[Configuration], meta: dict[int, ConfigMeta]) -> list[Configuration]:
    """Most completed queries per second first.

    Configurations that have not spent any time yet have no throughput; they
    go first (they must be tried anyway), ranked by completed-query count and
    then id. The sort is stable.
    """
    def key(c: Configuration):
        m = meta[c.id]
        tp = throughput(m)
        if math.isnan(tp):
            return (0, -len(m.completed_queries), c.id)
        return (1, -tp, c.id)
    return sorted(configs, key=key)


class _Run:
    def __init__(self, workload: Workload, executor: Executor, meta: dict[int, ConfigMeta],
                 log: EventLog, cluster_cap: int) -> None:
        self.workload = workload
        self.executor = executor
        self.meta = meta
        self.log = log
        self.costs = IndexCostBook(executor)
        self.cluster_cap = cluster_cap
        self.best = BestConfig()

    def update(self, c: Configuration, t: float) -> None:
        m = self.meta[c.id]
        if self.best.known:
            t = self.best.time - m.time
            if t <= 0:
                self.log.emit(self.executor.now(), "prune", config=c.id, budget=t)
                return
        remaining = [q for q in self.workload if q.id not in m.completed_queries]
        self.log.emit(self.executor.now(), "evaluate", config=c.id, budget=t, queries=len(remaining))
        evaluate(c, remaining, t, self.meta, self.executor, self.log, self.costs, self.cluster_cap)
        if m.is_complete and m.time < self.best.time:
            self.best.time = m.time
            self.best.config = c
            self.log.emit(self.executor.now(), "incumbent", config=c.id, time=m.time)


def update(c: Configuration, workload: Workload, meta: dict[int, ConfigMeta], t: float,
           best: BestConfig, executor: Executor, log: EventLog | None = None) -> None:
    """One evaluation step for ``c``; mutates ``meta`` and ``best``."""
    run = _Run(workload, executor, meta, log if log is not None else EventLog(), MAX_DP_UNITS)
    run.best = best
    run.update(c, t)


def config_select(workload: Workload, configs: Sequence[Configuration], t0: float = DEFAULT_T0,
                  alpha: float = DEFAULT_ALPHA, executor: Executor | None = None,
                  max_rounds: int = DEFAULT_MAX_ROUNDS, meta: dict[int, ConfigMeta] | None = None,
                  log: EventLog | None = None, cluster_cap: int = MAX_DP_UNITS) -> BestConfig:
    """Return the configuration with the smallest total workload time.

    ``meta`` (if given) is filled with per-configuration bookkeeping and
    ``log`` receives round, query, index and incumbent events.
    """
    if executor is None:
        raise ValueError("an executor is required")
    if alpha < 2:
        raise ValueError("alpha must be >= 2")
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    if not configs:
        raise ValueError("no configurations to select from")
    if len({c.id for c in configs}) != len(configs):
        raise ValueError("configuration ids must be unique")
    meta = meta if meta is not None else {}
    for c in configs:
        meta.setdefault(c.id, ConfigMeta())
    log = log if log is not None else EventLog()
    run = _Run(workload, executor, meta, log, cluster_cap)

    t = float(t0)
    candidates: list[Configuration] = []
    rounds = 0
    while not run.best.known:
        active = [c for c in configs if not meta[c.id].failed]
        if not active or rounds >= max_rounds:
            raise SelectionError(
                f"no configuration completed the workload within {rounds} rounds", meta)
        rounds += 1
        log.emit(executor.now(), "round_start", round=rounds, timeout=t)
        for c in throughput_order(active, meta):
            run.update(c, t)
            if meta[c.id].is_complete:
                candidates = [o for o in configs if o.id != c.id]
                break
            # reconfiguration overheads raise the floor of the timeout
            t = max(t, max(m.index_time for m in meta.values()))
        t = alpha * t

    log.emit(executor.now(), "final_pass", incumbent=run.best.config.id, time=run.best.time)
    finalists = [c for c in candidates if not meta[c.id].failed]
    for c in throughput_order(finalists, meta):
        run.update(c, t)
    return run.best
