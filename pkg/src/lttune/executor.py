"""DBMS surface used by the evaluator, and a deterministic simulator of it."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol

from lttune.llm import IndexSpec
from lttune.workload import Query


class ExecutorError(RuntimeError):
    pass


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class QueryResult:
    complete: bool
    execution_time: float


class Executor(Protocol):
    def apply_params(self, params: list[tuple[str, str]], config_id: int | None = None) -> float:
        """Apply settings; returns the reconfiguration overhead in seconds."""
        ...

    def reset_params(self) -> None: ...

    def create_index(self, index: IndexSpec) -> float: ...

    def drop_index(self, name: str) -> None: ...

    def execute(self, query: Query, budget: float, indexes: Iterable[str] = ()) -> QueryResult: ...

    def list_indexes(self) -> set[str]: ...

    def estimate_index_cost(self, index: IndexSpec) -> float: ...

    def now(self) -> float: ...


@dataclass
class VirtualClock:
    """Monotone simulated time with separate meters per kind of work."""

    query_time: float = 0.0
    index_time: float = 0.0
    reconfig_time: float = 0.0
    trace: list[tuple[str, str, float]] = field(default_factory=list)

    def charge(self, meter: str, what: str, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("negative time charge")
        setattr(self, meter, getattr(self, meter) + seconds)
        self.trace.append((meter, what, seconds))

    def now(self) -> float:
        return self.query_time + self.index_time + self.reconfig_time


@dataclass
class SimScenario:
    queries: list[str]
    configs: list[str]
    times: dict[str, dict[str, float]]
    index_costs: dict[str, float] = field(default_factory=dict)
    index_speedups: dict[str, dict[str, float]] = field(default_factory=dict)
    join_costs: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    default_index_cost: float = 0.0

    def row_sum(self, config: str) -> float:
        return math.fsum(self.times[config][q] for q in self.queries)

    def to_dict(self) -> dict:
        return {
            "queries": self.queries,
            "configs": self.configs,
            "times": self.times,
            "index_costs": self.index_costs,
            "index_speedups": self.index_speedups,
            "join_costs": self.join_costs,
            "default_index_cost": self.default_index_cost,
        }

    @classmethod
    def from_dict(cls, data: Any) -> "SimScenario":
        def fail(path: str, msg: str):
            raise ScenarioError(f"{path}: {msg}")

        def nonneg(path: str, v: Any) -> float:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                fail(path, f"expected a finite number, got {v!r}")
            if v < 0:
                fail(path, "must be >= 0")
            return float(v)

        if not isinstance(data, dict):
            fail("$", "expected an object")
        for key in ("queries", "configs", "times"):
            if key not in data:
                fail(key, "missing")
        queries, configs = data["queries"], data["configs"]
        for key, seq in (("queries", queries), ("configs", configs)):
            if not isinstance(seq, list) or not seq or not all(isinstance(s, str) for s in seq):
                fail(key, "expected a non-empty list of strings")
            if len(set(seq)) != len(seq):
                fail(key, "duplicate entries")
        times = {}
        for c in configs:
            row = data["times"].get(c) if isinstance(data["times"], dict) else None
            if not isinstance(row, dict):
                fail(f"times.{c}", "missing row")
            times[c] = {}
            for q in queries:
                if q not in row:
                    fail(f"times.{c}.{q}", "missing")
                times[c][q] = nonneg(f"times.{c}.{q}", row[q])
        index_costs = {k: nonneg(f"index_costs.{k}", v) for k, v in data.get("index_costs", {}).items()}
        speedups: dict[str, dict[str, float]] = {}
        for c, row in data.get("index_speedups", {}).items():
            if c not in configs:
                fail(f"index_speedups.{c}", "unknown config")
            speedups[c] = {}
            for q, v in row.items():
                if q not in queries:
                    fail(f"index_speedups.{c}.{q}", "unknown query")
                speedups[c][q] = nonneg(f"index_speedups.{c}.{q}", v)
        join_costs: dict[str, list[dict[str, Any]]] = {}
        for q, rows in data.get("join_costs", {}).items():
            if not isinstance(rows, list):
                fail(f"join_costs.{q}", "expected a list")
            for i, r in enumerate(rows):
                for k in ("left", "right", "cost"):
                    if not isinstance(r, dict) or k not in r:
                        fail(f"join_costs.{q}[{i}].{k}", "missing")
                nonneg(f"join_costs.{q}[{i}].cost", r["cost"])
            join_costs[q] = rows
        default_cost = nonneg("default_index_cost", data.get("default_index_cost", 0.0))
        return cls(list(queries), list(configs), times, index_costs, speedups, join_costs, default_cost)

    @classmethod
    def load(cls, path: str | Path) -> "SimScenario":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ScenarioError(f"{path}: {e}") from e
        return cls.from_dict(data)


class SimExecutor:
    """Executor backed by a scenario matrix and a virtual clock.

    Configuration ``k`` (the sample index) maps to ``scenario.configs[k]``.
    A query runs for its scenario time, scaled by the configuration's index
    speedup when every index the caller deems relevant exists; it completes
    iff that time fits the budget, otherwise it is charged the full budget.
    """

    def __init__(self, scenario: SimScenario) -> None:
        self.scenario = scenario
        self.clock = VirtualClock()
        self._active: str | None = None
        self._params: list[tuple[str, str]] = []
        self._indexes: set[str] = set()

    def now(self) -> float:
        return self.clock.now()

    def apply_params(self, params, config_id=None) -> float:
        if config_id is None or not 0 <= config_id < len(self.scenario.configs):
            raise ExecutorError(f"configuration {config_id} has no scenario row")
        self._active = self.scenario.configs[config_id]
        self._params = list(params)
        return 0.0

    def reset_params(self) -> None:
        self._active = None
        self._params = []

    def estimate_index_cost(self, index: IndexSpec) -> float:
        return self.scenario.index_costs.get(index.name, self.scenario.default_index_cost)

    def create_index(self, index: IndexSpec) -> float:
        if index.name in self._indexes:
            return 0.0
        cost = self.estimate_index_cost(index)
        self.clock.charge("index_time", index.name, cost)
        self._indexes.add(index.name)
        return cost

    def drop_index(self, name: str) -> None:
        self._indexes.discard(name)

    def list_indexes(self) -> set[str]:
        return set(self._indexes)

    def true_time(self, qid: str, indexes: Iterable[str] = ()) -> float:
        if self._active is None:
            raise ExecutorError("no configuration applied")
        row = self.scenario.times[self._active]
        if qid not in row:
            raise ExecutorError(f"query {qid} not in scenario")
        t = row[qid]
        needed = set(indexes)
        if needed and needed <= self._indexes:
            t *= self.scenario.index_speedups.get(self._active, {}).get(qid, 1.0)
        return t

    def execute(self, query, budget: float, indexes: Iterable[str] = ()) -> QueryResult:
        qid = query if isinstance(query, str) else query.id
        t = self.true_time(qid, indexes)
        budget = max(0.0, budget)
        if t <= budget:
            self.clock.charge("query_time", qid, t)
            return QueryResult(True, t)
        self.clock.charge("query_time", qid, budget)
        return QueryResult(False, budget)


def sim_load(path: str | Path) -> SimExecutor:
    return SimExecutor(SimScenario.load(path))
