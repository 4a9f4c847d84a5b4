import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lttune.scheduler import (CostModelInput, SchedulerError, Unit, cluster_queries, expected_cost,
                              expected_cost_weighted, find_optimal_order, kmeans, schedule)


def units_of(sets):
    return tuple(Unit(k, frozenset(v)) for k, v in sets.items())


def oracle_cost(order, sets, costs):
    """Average over interruption points k of the index cost of the first k units."""
    n = len(order)
    if n == 0:
        return 0.0
    total = 0.0
    for k in range(1, n + 1):
        needed = set().union(*(sets[u] for u in order[:k]))
        total += sum(costs[i] for i in needed)
    return total / n


def brute_force(sets, costs):
    best = None
    for perm in itertools.permutations(sorted(sets)):
        c = oracle_cost(perm, sets, costs)
        if best is None or c < best[0] - 1e-12:
            best = (c, perm)
    return best


def random_case(rng, n_max=8, idx_max=6):
    n = rng.randint(1, n_max)
    names = [f"i{j}" for j in range(rng.randint(1, idx_max))]
    sets = {f"q{k}": set(rng.sample(names, rng.randint(0, len(names)))) for k in range(n)}
    costs = {i: rng.choice([0.0, round(rng.uniform(0, 10), 3), float(rng.randint(1, 5))]) for i in names}
    return sets, costs


# --- expected cost ---------------------------------------------------------

def test_golden_pair():
    inp = CostModelInput(units_of({"q1": {"a"}, "q2": {"b"}}), {"a": 1.0, "b": 5.0})
    assert expected_cost(["q1", "q2"], inp) == 3.5
    assert expected_cost(["q2", "q1"], inp) == 5.5
    assert expected_cost_weighted(["q1", "q2"], inp) == 3.5
    assert expected_cost_weighted(["q2", "q1"], inp) == 5.5


def test_no_indexes_costs_nothing():
    inp = CostModelInput(units_of({"a": set(), "b": set(), "c": set()}), {})
    for perm in itertools.permutations("abc"):
        assert expected_cost(perm, inp) == 0.0


def test_order_must_be_permutation():
    inp = CostModelInput(units_of({"q1": {"a"}}), {"a": 1.0})
    with pytest.raises(ValueError):
        expected_cost(["q2"], inp)


def test_missing_or_negative_costs_rejected():
    with pytest.raises(ValueError):
        CostModelInput(units_of({"q1": {"a"}}), {})
    with pytest.raises(ValueError):
        CostModelInput(units_of({"q1": {"a"}}), {"a": -1.0})


case_st = st.integers(0, 10_000).map(lambda s: random_case(random.Random(s)))


@given(case_st, st.randoms(use_true_random=False))
def test_weighted_form_matches_prefix_form(case, rnd):
    sets, costs = case
    order = sorted(sets)
    rnd.shuffle(order)
    inp = CostModelInput(units_of(sets), costs)
    a, b = expected_cost(order, inp), expected_cost_weighted(order, inp)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)
    assert a == pytest.approx(oracle_cost(order, sets, costs), rel=1e-9, abs=1e-12)


@given(case_st, st.randoms(use_true_random=False))
def test_unweighted_sum_is_union_cost(case, rnd):
    sets, costs = case
    order = sorted(sets)
    rnd.shuffle(order)
    created, total = set(), 0.0
    for q in order:
        total += sum(costs[i] for i in sets[q] - created)
        created |= sets[q]
    union = set().union(*sets.values())
    assert total == pytest.approx(sum(costs[i] for i in union))


# --- dynamic program -------------------------------------------------------

def test_dp_golden_pair():
    order = find_optimal_order(units_of({"q1": {"a"}, "q2": {"b"}}), {"a": 1.0, "b": 5.0})
    assert order.sequence == ("q1", "q2") and order.expected_cost == 3.5


def test_identical_sets_give_lexicographic_order():
    order = find_optimal_order(units_of({"c": {"x"}, "a": {"x"}, "b": {"x"}}), {"x": 2.0})
    assert order.sequence == ("a", "b", "c")


def test_ties_resolve_lexicographically():
    # q1 and q2 cost the same either way round; q0 is cheapest and goes first
    order = find_optimal_order(units_of({"q2": {"b"}, "q1": {"a"}, "q0": set()}),
                               {"a": 3.0, "b": 3.0})
    assert order.sequence == ("q0", "q1", "q2")


def test_dp_matches_brute_force():
    rng = random.Random(1)
    for _ in range(80):
        sets, costs = random_case(rng)
        order = find_optimal_order(units_of(sets), costs)
        best, _ = brute_force(sets, costs)
        assert order.expected_cost == pytest.approx(best, rel=1e-9, abs=1e-12)
        assert oracle_cost(order.sequence, sets, costs) == pytest.approx(best, rel=1e-9, abs=1e-12)


def test_dp_guard():
    sets = {f"q{k:02d}": {"a"} for k in range(14)}
    with pytest.raises(SchedulerError, match="cluster"):
        find_optimal_order(units_of(sets), {"a": 1.0})
    assert len(find_optimal_order(units_of(dict(list(sets.items())[:13])), {"a": 1.0}).sequence) == 13


def test_empty_and_duplicate_units():
    assert find_optimal_order((), {}).sequence == ()
    with pytest.raises(SchedulerError):
        find_optimal_order((Unit("a", frozenset()), Unit("a", frozenset())), {})


# --- clustering ------------------------------------------------------------

def test_two_queries_same_index():
    imap = {"q1": frozenset({"A"}), "q2": frozenset({"A"})}
    two = cluster_queries(["q1", "q2"], imap, cap=2)
    assert [u.queries for u in two] == [("q1",), ("q2",)]
    one = cluster_queries(["q1", "q2"], imap, cap=1)
    assert len(one) == 1
    assert one[0].indexes == frozenset({"A"}) and one[0].queries == ("q1", "q2")


def test_clusters_partition_queries():
    rng = random.Random(4)
    qids = [f"q{k:02d}" for k in range(20)]
    imap = {q: frozenset(rng.sample("abcdefg", rng.randint(0, 3))) for q in qids}
    units = cluster_queries(qids, imap, cap=13)
    assert len(units) <= 13
    members = [q for u in units for q in u.queries]
    assert sorted(members) == qids
    for u in units:
        assert u.indexes == frozenset().union(*(imap[q] for q in u.queries))


def sse(X, groups):
    return sum(((X[g] - X[g].mean(axis=0)) ** 2).sum() for g in groups if g)


def test_two_separated_groups_match_exact_partition():
    g1 = {f"a{k}": frozenset({"x", "y"} if k % 2 else {"x"}) for k in range(4)}
    g2 = {f"b{k}": frozenset({"u", "v", "w"} if k % 3 else {"v", "w"}) for k in range(5)}
    imap = {**g1, **g2}
    qids = sorted(imap)
    names = sorted(set().union(*imap.values()))
    X = np.array([[1.0 if n in imap[q] else 0.0 for n in names] for q in qids])
    best = None
    for mask in range(1, 2 ** (len(qids) - 1)):
        a = [i for i in range(len(qids)) if mask >> i & 1]
        b = [i for i in range(len(qids)) if not mask >> i & 1]
        cost = sse(X, [a, b])
        if best is None or cost < best[0]:
            best = (cost, {frozenset(qids[i] for i in a), frozenset(qids[i] for i in b)})
    units = cluster_queries(qids, imap, cap=2)
    assert {frozenset(u.queries) for u in units} == best[1] == {frozenset(g1), frozenset(g2)}


def test_kmeans_deterministic_and_labels_in_range():
    rng = np.random.default_rng(3)
    X = (rng.random((30, 5)) < 0.4).astype(float)
    a, b = kmeans(X, 4), kmeans(X, 4)
    assert a == b and set(a) <= set(range(4))


def test_duplicate_points_leave_empty_clusters_dropped():
    imap = {f"q{k}": frozenset({"a"}) for k in range(5)}
    units = cluster_queries(sorted(imap), imap, cap=3)
    assert len(units) == 1 and len(units[0].queries) == 5


# --- schedule --------------------------------------------------------------

def test_schedule_without_indexes_is_sorted():
    assert schedule(["q3", "q1", "q2"], {}, {}) == ["q1", "q2", "q3"]


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_schedule_is_permutation(seed, cap):
    rng = random.Random(seed)
    qids = [f"q{k}" for k in range(rng.randint(1, 15))]
    imap = {q: frozenset(rng.sample("abcde", rng.randint(0, 2))) for q in qids}
    order = schedule(qids, imap, {i: 1.0 + ord(i) % 3 for i in "abcde"}, cap)
    assert sorted(order) == sorted(qids)


def test_schedule_puts_cheap_index_first():
    order = schedule(["q1", "q2"], {"q1": frozenset({"big"}), "q2": frozenset({"small"})},
                     {"big": 9.0, "small": 1.0})
    assert order == ["q2", "q1"]
