"""Builders shared by the evaluator, selector and acceptance tests."""

import random

from lttune.executor import SimExecutor, SimScenario
from lttune.llm import Configuration, IndexSpec
from lttune.workload import Query, Workload


def plain_workload(n: int) -> Workload:
    return Workload(tuple(Query(f"q{k:02d}", "SELECT 1") for k in range(n)))


def matrix_scenario(times, index_costs=None, speedups=None) -> SimScenario:
    """``times[c][q]`` with configs c0.. and queries q00.. in list order."""
    configs = [f"c{i}" for i in range(len(times))]
    queries = [f"q{k:02d}" for k in range(len(times[0]))]
    return SimScenario.from_dict({
        "queries": queries,
        "configs": configs,
        "times": {c: dict(zip(queries, row)) for c, row in zip(configs, times)},
        "index_costs": index_costs or {},
        "index_speedups": speedups or {},
    })


def plain_configs(k: int) -> list[Configuration]:
    return [Configuration(i, "") for i in range(k)]


def random_times(rng: random.Random, k_range=(2, 8), n_range=(3, 20), lo=0.01, hi=50.0):
    k = rng.randint(*k_range)
    n = rng.randint(*n_range)
    return [[rng.uniform(lo, hi) for _ in range(n)] for _ in range(k)]


class AuditedExecutor(SimExecutor):
    """Simulator that records what existed when each query ran."""

    def __init__(self, scenario, required=None):
        super().__init__(scenario)
        self.required = required or {}
        self.missing: list[tuple[str, set]] = []
        self.applied = 0
        self.resets = 0
        self.budgets: list[float] = []

    def apply_params(self, params, config_id=None):
        self.applied += 1
        return super().apply_params(params, config_id)

    def reset_params(self):
        self.resets += 1
        super().reset_params()

    def execute(self, query, budget, indexes=()):
        qid = query if isinstance(query, str) else query.id
        need = set(self.required.get(qid, ()))
        if not need <= self.list_indexes():
            self.missing.append((qid, need - self.list_indexes()))
        self.budgets.append(budget)
        return super().execute(query, budget, indexes)


def index(table: str, *cols: str) -> IndexSpec:
    return IndexSpec(table, cols)
