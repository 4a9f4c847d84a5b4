"""Query ordering that minimizes expected index-creation cost under timeouts.

With ``n`` units run in order ``u_1..u_n`` and an interruption after any
position equally likely, the expected cost of creating indexes is

    (1/n) * sum_k sum_{j<=k} z(u_j | u_1..u_{j-1})
  = (1/n) * sum_j (n - j + 1) * z(u_j | u_1..u_{j-1})

where ``z`` charges only the indexes not created by earlier units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

MAX_DP_UNITS = 13
KMEANS_SEED = 0
KMEANS_MAX_ITER = 100
_REL_TOL = 1e-9


class SchedulerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Unit:
    """A query or a cluster of queries, scheduled as one block."""

    id: str
    indexes: frozenset[str]
    members: tuple[str, ...] = ()

    @property
    def queries(self) -> tuple[str, ...]:
        return self.members or (self.id,)


@dataclass(frozen=True)
class CostModelInput:
    units: tuple[Unit, ...]
    index_costs: Mapping[str, float]

    def __post_init__(self) -> None:
        for u in self.units:
            for ix in u.indexes:
                if ix not in self.index_costs:
                    raise ValueError(f"no creation cost for index {ix}")
                if self.index_costs[ix] < 0:
                    raise ValueError(f"negative creation cost for index {ix}")


@dataclass(frozen=True)
class Order:
    sequence: tuple[str, ...]
    expected_cost: float


def _z(indexes, created, costs) -> float:
    return sum(costs[i] for i in indexes if i not in created)


def expected_cost(order: Sequence[str], inp: CostModelInput) -> float:
    """Average, over the n interruption points, of the index cost paid so far."""
    by_id = {u.id: u for u in inp.units}
    if sorted(order) != sorted(by_id):
        raise ValueError("order is not a permutation of the units")
    n = len(order)
    if n == 0:
        return 0.0
    created: set[str] = set()
    prefix = 0.0
    total = 0.0
    for uid in order:
        u = by_id[uid]
        prefix += _z(u.indexes, created, inp.index_costs)
        created |= u.indexes
        total += prefix
    return total / n


def expected_cost_weighted(order: Sequence[str], inp: CostModelInput) -> float:
    """Same value via position weights ``(n - j + 1)``."""
    by_id = {u.id: u for u in inp.units}
    n = len(order)
    if n == 0:
        return 0.0
    created: set[str] = set()
    total = 0.0
    for j, uid in enumerate(order, start=1):
        u = by_id[uid]
        total += (n - j + 1) * _z(u.indexes, created, inp.index_costs)
        created |= u.indexes
    return total / n


def find_optimal_order(units: Sequence[Unit], index_costs: Mapping[str, float],
                       max_units: int = MAX_DP_UNITS) -> Order:
    """Subset DP over unit sets in increasing size.

    ``cost[S] = min_{u in S} cost[S - u] + (n - |S| + 1) * z(u | S - u)``;
    the weight makes the DP minimize the interruption-averaged cost rather
    than the order-invariant union cost. Ties go to the lexicographically
    smaller sequence of unit ids.
    """
    inp = CostModelInput(tuple(units), index_costs)
    n = len(units)
    if n > max_units:
        raise SchedulerError(f"{n} units exceed the DP limit of {max_units}; cluster first")
    if n == 0:
        return Order((), 0.0)
    ids = [u.id for u in units]
    if len(set(ids)) != n:
        raise SchedulerError("duplicate unit ids")
    # index bitmasks keep the per-subset union cheap
    names = sorted({i for u in units for i in u.indexes})
    bit = {name: 1 << k for k, name in enumerate(names)}
    icost = [float(index_costs[name]) for name in names]
    umask = [sum(bit[i] for i in u.indexes) for u in units]

    def mask_cost(m: int) -> float:
        s = 0.0
        k = 0
        while m:
            if m & 1:
                s += icost[k]
            m >>= 1
            k += 1
        return s

    full = (1 << n) - 1
    union = [0] * (1 << n)
    for s in range(1, 1 << n):
        low = s & -s
        union[s] = union[s ^ low] | umask[low.bit_length() - 1]
    cost = [0.0] * (1 << n)
    seq: list[tuple[str, ...] | None] = [None] * (1 << n)
    seq[0] = ()
    z_cache: dict[int, float] = {}
    for s in sorted(range(1, 1 << n), key=lambda s: bin(s).count("1")):
        size = bin(s).count("1")
        weight = n - size + 1
        best_c = None
        best_seq = None
        rest = s
        while rest:
            low = rest & -rest
            rest ^= low
            u = low.bit_length() - 1
            prev = s ^ low
            missing = umask[u] & ~union[prev]
            z = z_cache.get(missing)
            if z is None:
                z = z_cache[missing] = mask_cost(missing)
            c = cost[prev] + weight * z
            cand = seq[prev] + (ids[u],)
            if best_c is None or c < best_c - _REL_TOL * max(1.0, abs(best_c)):
                best_c, best_seq = c, cand
            elif abs(c - best_c) <= _REL_TOL * max(1.0, abs(best_c)) and cand < best_seq:
                best_c, best_seq = min(c, best_c), cand
        cost[s] = best_c
        seq[s] = best_seq
    return Order(seq[full], cost[full] / n)


def cluster_queries(query_ids: Sequence[str], index_map: Mapping[str, frozenset[str]],
                    cap: int = MAX_DP_UNITS, seed: int = KMEANS_SEED) -> list[Unit]:
    """Group queries by index usage so the DP sees at most ``cap`` units.

    Queries become binary index-incidence vectors clustered by k-means
    (Euclidean, k = cap) with farthest-point seeding from a fixed seed.
    Clusters keep their members in input order and carry the union of the
    members' index sets. Empty clusters are dropped.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    qids = list(query_ids)
    if len(qids) <= cap:
        return [Unit(q, frozenset(index_map.get(q, ())), (q,)) for q in qids]
    names = sorted({i for q in qids for i in index_map.get(q, ())})
    col = {name: k for k, name in enumerate(names)}
    X = np.zeros((len(qids), max(1, len(names))))
    for r, q in enumerate(qids):
        for i in index_map.get(q, ()):
            X[r, col[i]] = 1.0
    labels = kmeans(X, cap, seed)
    units = []
    for k in range(cap):
        members = tuple(q for q, lab in zip(qids, labels) if lab == k)
        if not members:
            continue
        idx = frozenset().union(*(frozenset(index_map.get(q, ())) for q in members))
        units.append(Unit(members[0], idx, members))
    return units


def kmeans(X: np.ndarray, k: int, seed: int = KMEANS_SEED, max_iter: int = KMEANS_MAX_ITER) -> list[int]:
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    centers_idx = [int(rng.integers(n))]
    d2 = ((X - X[centers_idx[0]]) ** 2).sum(axis=1)
    while len(centers_idx) < k:
        nxt = int(np.argmax(d2))  # first maximal index on ties
        centers_idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    C = X[centers_idx].copy()
    labels = None
    for _ in range(max_iter):
        dist = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        new = dist.argmin(axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            pts = X[labels == j]
            if len(pts):
                C[j] = pts.mean(axis=0)
    return [int(x) for x in labels]


def schedule(query_ids: Sequence[str], index_map: Mapping[str, frozenset[str]],
             index_costs: Mapping[str, float], cap: int = MAX_DP_UNITS) -> list[str]:
    """Execution order for a batch: cluster if needed, order units, expand members."""
    if not any(index_map.get(q) for q in query_ids):
        return sorted(query_ids)
    units = cluster_queries(query_ids, index_map, cap)
    order = find_optimal_order(units, index_costs, cap)
    by_id = {u.id: u for u in units}
    out: list[str] = []
    for uid in order.sequence:
        out.extend(by_id[uid].queries)
    return out
