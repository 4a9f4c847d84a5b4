import itertools
import random
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lttune.compressor import (IlpProblem, ScaleGuardError, Selection, build_ilp, column_token_costs,
                               compress, default_budget, render_compressed, solve_ilp)
from lttune.workload import JoinPair, token_cost


# --- oracles ---------------------------------------------------------------

def literal_optimum(pairs, H, B):
    """Every 0/1 assignment of every L and R variable, filtered by the four constraint families."""
    cols = sorted({c for p in pairs for c in p})
    directed = [(a, b) for a, b in pairs] + [(b, a) for a, b in pairs]
    V = {**pairs, **{(b, a): v for (a, b), v in pairs.items()}}
    best = 0.0
    for L in itertools.product((0, 1), repeat=len(cols)):
        Lc = dict(zip(cols, L))
        for R in itertools.product((0, 1), repeat=len(directed)):
            Rp = dict(zip(directed, R))
            if any(Rp[(a, b)] > Lc[a] for a, b in directed):
                continue
            if any(Lc[c] > sum(Rp[d] for d in directed if d[0] == c) for c in cols):
                continue
            if any(Rp[(a, b)] + Rp[(b, a)] > 1 for a, b in pairs):
                continue
            if sum(H[b] * Rp[(a, b)] for a, b in directed) + sum(H[c] * Lc[c] for c in cols) > B:
                continue
            best = max(best, sum(V[d] * Rp[d] for d in directed))
    return best


@lru_cache(maxsize=None)
def _orientations(m):
    return np.array(list(itertools.product((0, 1, 2), repeat=m)), dtype=np.int8).reshape(-1, m)


def enumeration_optimum(pairs, H, B):
    """Max over all 3^m orientations; the cheapest L for a given R opens exactly the used lines."""
    keys = list(pairs)
    m = len(keys)
    if m == 0:
        return 0.0
    O = _orientations(m)
    v = np.array([pairs[k] for k in keys], dtype=float)
    value = (O > 0) @ v
    cost = np.zeros(len(O))
    cols = sorted({c for k in keys for c in k})
    opened = {c: np.zeros(len(O), dtype=bool) for c in cols}
    for j, (a, b) in enumerate(keys):
        fwd, bwd = O[:, j] == 1, O[:, j] == 2
        cost += fwd * H[b] + bwd * H[a]
        opened[a] |= fwd
        opened[b] |= bwd
    for c in cols:
        cost += opened[c] * H[c]
    ok = cost <= B
    return float(value[ok].max())


def milp_optimum(pairs, H, B):
    from scipy.optimize import Bounds, LinearConstraint, milp
    cols = sorted({c for p in pairs for c in p})
    directed = [(a, b) for a, b in pairs] + [(b, a) for a, b in pairs]
    vals = [pairs[(a, b)] for a, b in pairs] * 2
    nL, nR = len(cols), len(directed)
    ci = {c: i for i, c in enumerate(cols)}
    rows, lo, hi = [], [], []

    def row():
        return np.zeros(nL + nR)
    for k, (a, b) in enumerate(directed):
        r = row(); r[nL + k] = 1; r[ci[a]] = -1; rows.append(r); lo.append(-np.inf); hi.append(0)
    for c in cols:
        r = row(); r[ci[c]] = 1
        for k, (a, _) in enumerate(directed):
            if a == c:
                r[nL + k] = -1
        rows.append(r); lo.append(-np.inf); hi.append(0)
    m = len(pairs)
    for k in range(m):
        r = row(); r[nL + k] = 1; r[nL + m + k] = 1; rows.append(r); lo.append(-np.inf); hi.append(1)
    r = row()
    for c in cols:
        r[ci[c]] = H[c]
    for k, (_, b) in enumerate(directed):
        r[nL + k] = H[b]
    rows.append(r); lo.append(-np.inf); hi.append(B)
    c = np.concatenate([np.zeros(nL), -np.array(vals, dtype=float)])
    res = milp(c, constraints=LinearConstraint(np.array(rows), lo, hi),
               integrality=np.ones(nL + nR), bounds=Bounds(0, 1))
    assert res.success
    return -res.fun


def random_instance(rng, max_pairs, n_cols=None, integral=True):
    n_cols = n_cols or rng.randint(2, 8)
    cols = [chr(ord("A") + i) for i in range(n_cols)]
    all_pairs = list(itertools.combinations(cols, 2))
    rng.shuffle(all_pairs)
    k = rng.randint(0, min(max_pairs, len(all_pairs)))
    pairs = {p: (rng.randint(0, 10) if integral else round(rng.uniform(0, 10), 3))
             for p in all_pairs[:k]}
    H = {c: rng.randint(1, 5) for c in cols}
    B = rng.randint(0, 4 * n_cols)
    return pairs, H, B


def check_selection(sel: Selection, prob: IlpProblem):
    x = sel.assignment()
    for con in prob.constraints():
        assert con.holds(x), con.family
    assert sel.tokens_used <= prob.budget
    for left, rights in sel.lines.items():
        assert rights
        for r in rights:
            assert left not in sel.lines.get(r, [])
    assert sel.objective == pytest.approx(prob.objective(x))


# --- construction ----------------------------------------------------------

def test_smallest_instance_counts():
    prob = build_ilp({("A", "B"): 1.0}, {"A": 1, "B": 1}, 3)
    assert len(prob.columns) == 2
    assert len(prob.directed_pairs) == 2
    assert {c.family for c in prob.constraints()} == {"link", "cover", "symmetry", "budget"}


def test_star_instance_counts():
    prob = build_ilp({("A", "B"): 1, ("A", "C"): 1, ("A", "D"): 1}, dict.fromkeys("ABCD", 1), 4)
    assert len(prob.columns) == 4
    assert len(prob.directed_pairs) == 6
    fam = [c.family for c in prob.constraints()]
    assert fam.count("link") == 6 and fam.count("cover") == 4
    assert fam.count("symmetry") == 3 and fam.count("budget") == 1


def test_empty_problem():
    prob = build_ilp({}, {}, 10)
    assert prob.variables == []
    sel = solve_ilp(prob)
    assert sel.objective == 0 and sel.lines == {}


def test_negative_budget_rejected():
    with pytest.raises(ValueError):
        build_ilp({("A", "B"): 1}, {"A": 1, "B": 1}, -1)


def test_joinpair_keys_accepted():
    p = JoinPair.of("t1.a", "t2.b")
    prob = build_ilp({p: 2.0}, {p.left: 1, p.right: 1}, 2)
    assert set(prob.directed_pairs) == {(p.left, p.right), (p.right, p.left)}


# --- solving ---------------------------------------------------------------

def test_budget_zero_is_empty():
    sel = solve_ilp(build_ilp({("A", "B"): 5}, {"A": 1, "B": 1}, 0))
    assert sel.lines == {} and sel.objective == 0 and render_compressed(sel) == ""


def test_star_golden():
    prob = build_ilp({("A", "B"): 1, ("A", "C"): 1, ("A", "D"): 1}, dict.fromkeys("ABCD", 1), 4)
    sel = solve_ilp(prob)
    assert sel.lines == {"A": ["B", "C", "D"]}
    assert sel.objective == 3 and sel.tokens_used == 4
    assert render_compressed(sel) == "A:B,C,D"


def test_render_examples():
    assert render_compressed(Selection({}, 0, 0)) == ""
    assert render_compressed(Selection({"C": ["D"], "A": ["B"]}, 2, 4)) == "A:B\nC:D"


def test_right_columns_sorted_by_value_then_name():
    pairs = {("A", "B"): 1, ("A", "C"): 5, ("A", "D"): 5}
    sel = solve_ilp(build_ilp(pairs, dict.fromkeys("ABCD", 1), 4))
    assert render_compressed(sel) == "A:C,D,B"


def test_tiny_instances_match_literal_enumeration():
    rng = random.Random(7)
    for _ in range(40):
        pairs, H, B = random_instance(rng, 3, n_cols=rng.randint(2, 4))
        prob = build_ilp(pairs, H, B)
        sel = solve_ilp(prob)
        check_selection(sel, prob)
        assert sel.objective == literal_optimum(pairs, H, B)


def test_random_instances_match_orientation_enumeration():
    rng = random.Random(11)
    for _ in range(60):
        pairs, H, B = random_instance(rng, 10, integral=rng.random() < 0.5)
        prob = build_ilp(pairs, H, B)
        sel = solve_ilp(prob)
        check_selection(sel, prob)
        assert sel.objective == pytest.approx(enumeration_optimum(pairs, H, B), rel=1e-12, abs=1e-12)


def test_enumeration_oracle_agrees_with_literal_oracle():
    rng = random.Random(3)
    for _ in range(25):
        pairs, H, B = random_instance(rng, 3, n_cols=4)
        assert enumeration_optimum(pairs, H, B) == literal_optimum(pairs, H, B)


@pytest.mark.parametrize("seed", range(6))
def test_larger_instances_match_milp(seed):
    rng = random.Random(100 + seed)
    n = 10
    cols = [f"c{i}" for i in range(n)]
    all_pairs = list(itertools.combinations(cols, 2))
    rng.shuffle(all_pairs)
    pairs = {p: round(rng.uniform(0.5, 100), 2) for p in all_pairs[:24]}
    H = {c: rng.randint(1, 6) for c in cols}
    B = rng.randint(10, 40)
    prob = build_ilp(pairs, H, B)
    sel = solve_ilp(prob)
    check_selection(sel, prob)
    assert sel.objective == pytest.approx(milp_optimum(pairs, H, B), rel=1e-7)


def test_scale_guard():
    pairs = {(f"a{i}", f"b{i}"): 1 for i in range(3)}
    prob = build_ilp(pairs, {c: 1 for p in pairs for c in p}, 10)
    with pytest.raises(ScaleGuardError, match="pre-prune"):
        solve_ilp(prob, max_directed=4)


def test_deterministic():
    rng = random.Random(5)
    pairs, H, B = random_instance(rng, 10, n_cols=7)
    a = solve_ilp(build_ilp(pairs, H, B))
    b = solve_ilp(build_ilp(dict(reversed(list(pairs.items()))), H, B))
    assert a == b


# --- end-to-end with real column text -------------------------------------

def test_rendered_text_fits_budget_on_benchmark(data_dir):
    from lttune.workload import UniformCostProvider, load_workload, pair_values
    values = pair_values(load_workload(data_dir / "job_sample"), UniformCostProvider())
    for B in (0, 7, 30, 80, 196):
        sel = compress(values, B)
        assert token_cost(render_compressed(sel)) <= B


def test_column_costs_include_separator():
    assert column_token_costs(["abc"]) == {"abc": 1}
    assert column_token_costs(["abcd"]) == {"abcd": 2}


def test_default_budget():
    assert default_budget(8192, 200, 1024) == 6968
    assert default_budget(100, 200, 10) == 0


pair_maps = st.dictionaries(
    st.tuples(st.sampled_from("ABCDEF"), st.sampled_from("ABCDEF")).filter(lambda p: p[0] < p[1]),
    st.integers(0, 9), max_size=8)


@settings(max_examples=60)
@given(pair_maps, st.integers(0, 25), st.integers(0, 10))
def test_monotone_in_budget(pairs, B, extra):
    H = {c: 1 + (ord(c) % 3) for c in "ABCDEF"}
    lo = solve_ilp(build_ilp(pairs, H, B)).objective
    hi = solve_ilp(build_ilp(pairs, H, B + extra)).objective
    assert hi >= lo


@settings(max_examples=60)
@given(pair_maps, st.integers(0, 25))
def test_solution_feasible_and_optimal(pairs, B):
    H = {c: 1 + (ord(c) % 3) for c in "ABCDEF"}
    prob = build_ilp(pairs, H, B)
    sel = solve_ilp(prob)
    check_selection(sel, prob)
    assert sel.objective == enumeration_optimum(pairs, H, B)
