"""Budgeted evaluation of one configuration with lazy index creation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from lttune.events import EventLog
from lttune.executor import Executor, ExecutorError
from lttune.llm import Configuration, IndexSpec
from lttune.scheduler import MAX_DP_UNITS, schedule
from lttune.workload import ColumnRef, Query

logger = logging.getLogger(__name__)


@dataclass
class ConfigMeta:
    time: float = 0.0
    is_complete: bool = False
    index_time: float = 0.0
    completed_queries: set[str] = field(default_factory=set)
    # bookkeeping beyond the four core fields
    query_times: dict[str, float] = field(default_factory=dict)
    wasted_time: float = 0.0
    cumulative_index_time: float = 0.0
    reconfig_time: float = 0.0
    failed: bool = False
    warnings: list[str] = field(default_factory=list)


def query_index_map(queries: Sequence[Query], config: Configuration) -> dict[str, set[IndexSpec]]:
    """Indexes whose columns overlap the query's predicate columns on the same table."""
    out: dict[str, set[IndexSpec]] = {}
    for q in queries:
        cols = q.predicate_columns
        out[q.id] = {
            ix for ix in config.indexes
            if ix.table in q.tables and any(ColumnRef(ix.table, c) in cols for c in ix.columns)
        }
    return out


class IndexCostBook:
    """Creation-cost estimates; a measured creation time replaces the estimate."""

    def __init__(self, executor: Executor) -> None:
        self.executor = executor
        self.known: dict[str, float] = {}

    def cost(self, ix: IndexSpec) -> float:
        if ix.name not in self.known:
            self.known[ix.name] = float(self.executor.estimate_index_cost(ix))
        return self.known[ix.name]

    def measured(self, ix: IndexSpec, seconds: float) -> None:
        self.known[ix.name] = seconds


def evaluate(config: Configuration, queries: Sequence[Query], t: float, meta: dict[int, ConfigMeta],
             executor: Executor, log: EventLog | None = None, costs: IndexCostBook | None = None,
             cluster_cap: int = MAX_DP_UNITS) -> None:
    """Run ``queries`` under configuration ``config`` within a total budget ``t``.

    Updates ``meta[config.id]`` in place. Index creation time is metered
    separately and never consumed from the query budget. Every index
    created here is dropped before returning and parameters are reset.
    """
    if t < 0:
        raise ValueError("timeout must be >= 0")
    m = meta[config.id]
    log = log if log is not None else EventLog()
    costs = costs if costs is not None else IndexCostBook(executor)
    remaining = t
    created: list[IndexSpec] = []
    created_names: set[str] = set(executor.list_indexes())  # pre-existing: never rebuilt or dropped
    m.is_complete = True
    m.index_time = 0.0
    try:
        try:
            m.reconfig_time += executor.apply_params(config.param_sets, config.id)
        except ExecutorError as e:
            m.failed = True
            m.is_complete = False
            m.warnings.append(f"applying parameters failed: {e}")
            log.emit(executor.now(), "config_failed", config=config.id, reason=str(e))
            return
        imap = query_index_map(queries, config)
        by_id = {q.id: q for q in queries}
        names = {qid: frozenset(ix.name for ix in ixs) for qid, ixs in imap.items()}
        price = {ix.name: costs.cost(ix) for ixs in imap.values() for ix in ixs}
        order = schedule(list(by_id), names, price, cluster_cap)
        for qid in order:
            for ix in sorted(imap[qid], key=lambda i: i.name):
                if ix.name in created_names:
                    continue
                try:
                    spent = executor.create_index(ix)
                except ExecutorError as e:
                    msg = f"index {ix.name} skipped: {e}"
                    logger.warning(msg)
                    m.warnings.append(msg)
                    continue
                costs.measured(ix, spent)
                m.index_time += spent
                created.append(ix)
                created_names.add(ix.name)
                log.emit(executor.now(), "index_create", config=config.id, index=ix.name, seconds=spent)
            try:
                res = executor.execute(by_id[qid], remaining, names[qid])
            except ExecutorError as e:
                m.failed = True
                m.is_complete = False
                m.warnings.append(f"query {qid} failed: {e}")
                log.emit(executor.now(), "config_failed", config=config.id, query=qid, reason=str(e))
                break
            if not res.complete:
                m.is_complete = False
                m.wasted_time += res.execution_time
                log.emit(executor.now(), "query_interrupt", config=config.id, query=qid,
                         seconds=res.execution_time)
                break
            remaining -= res.execution_time
            m.time += res.execution_time
            m.query_times[qid] = res.execution_time
            m.completed_queries.add(qid)
            log.emit(executor.now(), "query_complete", config=config.id, query=qid,
                     seconds=res.execution_time)
    finally:
        for ix in reversed(created):
            try:
                executor.drop_index(ix.name)
            except ExecutorError as e:
                m.warnings.append(f"dropping {ix.name} failed: {e}")
        executor.reset_params()
        m.cumulative_index_time += m.index_time
