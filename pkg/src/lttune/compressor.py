"""Token-budgeted selection of join snippets.

The snippet-selection ILP has binary variables ``L_c`` (column ``c`` opens a
line) and ``R_<c1,c2>`` (``c2`` is listed on the line of ``c1``)::

    maximize    sum V(p) * R_p
    subject to  R_<c1,c2> <= L_c1
                L_c1 <= sum_c2 R_<c1,c2>
                R_<c1,c2> + R_<c2,c1> <= 1
                sum H_c2 * R_<c1,c2> + sum H_c * L_c <= B

``solve_ilp`` solves it exactly by depth-first branch and bound. The left
variables are implied by the right ones (a line is open iff it lists at
least one column), so the search branches over unordered pairs with three
outcomes each: oriented one way, the other way, or left out.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any, Hashable, Mapping

from lttune.workload import DEFAULT_TOKENIZER, JoinPair, Tokenizer

MAX_DIRECTED_PAIRS = 4096
_REL_TOL = 1e-12

Column = Hashable
Directed = tuple[Any, Any]


class ScaleGuardError(ValueError):
    pass


@dataclass(frozen=True)
class LinearConstraint:
    """``sum(coeffs[v] * v) <= rhs``; variables are ``("L", c)`` or ``("R", (c1, c2))``."""

    family: str
    coeffs: tuple[tuple[tuple, float], ...]
    rhs: float

    def holds(self, x: Mapping[tuple, int]) -> bool:
        return sum(a * x.get(v, 0) for v, a in self.coeffs) <= self.rhs + 1e-9


@dataclass
class IlpProblem:
    columns: list
    directed_pairs: list[Directed]
    values: dict[Directed, float]
    token_costs: dict
    budget: int

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        cols = set(self.columns)
        for a, b in self.directed_pairs:
            if a not in cols or b not in cols:
                raise ValueError(f"pair ({a}, {b}) references an unknown column")

    @property
    def variables(self) -> list[tuple]:
        return [("L", c) for c in self.columns] + [("R", p) for p in self.directed_pairs]

    def constraints(self) -> list[LinearConstraint]:
        out = []
        by_left: dict = {}
        for p in self.directed_pairs:
            by_left.setdefault(p[0], []).append(p)
            out.append(LinearConstraint("link", ((("R", p), 1.0), (("L", p[0]), -1.0)), 0.0))
        for c in self.columns:
            coeffs = [(("L", c), 1.0)] + [(("R", p), -1.0) for p in by_left.get(c, [])]
            out.append(LinearConstraint("cover", tuple(coeffs), 0.0))
        for a, b in self.directed_pairs:
            if str(a) < str(b):
                out.append(LinearConstraint("symmetry", ((("R", (a, b)), 1.0), (("R", (b, a)), 1.0)), 1.0))
        budget = [(("R", p), float(self.token_costs[p[1]])) for p in self.directed_pairs]
        budget += [(("L", c), float(self.token_costs[c])) for c in self.columns]
        out.append(LinearConstraint("budget", tuple(budget), float(self.budget)))
        return out

    def objective(self, x: Mapping[tuple, int]) -> float:
        return sum(self.values[p] * x.get(("R", p), 0) for p in self.directed_pairs)


@dataclass
class Selection:
    lines: dict = field(default_factory=dict)  # left column -> ordered right columns
    objective: float = 0.0
    tokens_used: int = 0

    def directed(self) -> set[Directed]:
        return {(l, r) for l, rs in self.lines.items() for r in rs}

    def assignment(self) -> dict[tuple, int]:
        x = {("R", p): 1 for p in self.directed()}
        x.update({("L", c): 1 for c in self.lines})
        return x


def _endpoints(key) -> Directed:
    if isinstance(key, JoinPair):
        return key.left, key.right
    a, b = key
    return a, b


def build_ilp(pairs: Mapping, token_costs: Mapping, budget: int) -> IlpProblem:
    """Instantiate the selection ILP.

    ``pairs`` maps unordered pairs (``JoinPair`` or 2-tuples) to values;
    both orientations become variables with the same value.
    """
    values: dict[Directed, float] = {}
    for key, v in pairs.items():
        a, b = _endpoints(key)
        if a == b:
            raise ValueError(f"pair on a single column {a}")
        if v < 0:
            raise ValueError(f"negative value for pair ({a}, {b})")
        values[(a, b)] = values[(b, a)] = float(v)
    columns = sorted({c for p in values for c in p}, key=str)
    for c in columns:
        if c not in token_costs:
            raise ValueError(f"no token cost for column {c}")
    directed = sorted(values, key=lambda p: (str(p[0]), str(p[1])))
    return IlpProblem(columns, directed, values,
                      {c: int(token_costs[c]) for c in columns}, int(budget))


def solve_ilp(problem: IlpProblem, max_directed: int = MAX_DIRECTED_PAIRS) -> Selection:
    """Provably optimal selection by branch and bound.

    The node bound is the current value plus a fractional knapsack over the
    undecided pairs. Each pair is weighted by the cheapest way it could still
    be listed: its right-hand column plus, when the left column has no line
    yet, that line's cost split across every undecided pair that could share
    it. Pairs of value zero can never raise the objective and are not
    branched on. The incumbent is replaced only by a strictly better
    solution, so among optima the first one in the fixed exploration order
    wins.
    """
    if len(problem.directed_pairs) > max_directed:
        raise ScaleGuardError(
            f"{len(problem.directed_pairs)} directed pairs exceed the exact-solver guard "
            f"of {max_directed}; raise the guard or pre-prune pairs by value")
    H = problem.token_costs
    B = problem.budget
    items = []
    for a, b in problem.directed_pairs:
        if str(a) < str(b) and problem.values[(a, b)] > 0:
            v = problem.values[(a, b)]
            w = min(H[a], H[b])
            ratio = math.inf if w == 0 else v / w
            items.append((a, b, v, w, ratio))
    items.sort(key=lambda it: (-it[4], str(it[0]), str(it[1])))
    m = len(items)
    # remaining degree: undecided items touching each column
    remdeg: dict = {}
    for a, b, *_ in items:
        remdeg[a] = remdeg.get(a, 0) + 1
        remdeg[b] = remdeg.get(b, 0) + 1

    def bound(i: int, cap: float) -> float:
        # Every remaining pair pays its right-hand column plus a share of its
        # line's opening cost; an unopened line is shared by at most as many
        # pairs as remain on its column. Fractional knapsack over those weights.
        rated = []
        for a, b, v, _, _ in items[i:]:
            w = min(H[r] + (0.0 if open_count.get(l) else H[l] / remdeg[l])
                    for l, r in ((a, b), (b, a)))
            rated.append((math.inf if w <= 0 else v / w, v, w))
        rated.sort(key=lambda t: -t[0])
        extra = 0.0
        for _, v, w in rated:
            if w <= cap:
                extra += v
                cap -= w
            else:
                extra += v * cap / w
                break
        return extra

    best_value = 0.0
    best_choice: list[tuple] = []
    chosen: list[tuple] = []
    open_count: dict = {}

    def tol(x: float) -> float:
        return _REL_TOL * max(1.0, abs(x))

    # with integral values an improvement is worth at least their gcd
    step = 0
    if all(float(it[2]).is_integer() and it[2] < 2 ** 53 for it in items):
        step = math.gcd(*(int(it[2]) for it in items)) if items else 0

    def dfs(i: int, used: int, value: float) -> None:
        nonlocal best_value, best_choice
        if value > best_value + tol(best_value):
            best_value = value
            best_choice = list(chosen)
        if i == m:
            return
        ub = value + bound(i, B - used)
        if ub <= best_value + tol(best_value) or (step and ub + tol(ub) < best_value + step):
            return
        a, b, v, _, _ = items[i]
        remdeg[a] -= 1
        remdeg[b] -= 1
        options = []
        for left, right in ((a, b), (b, a)):
            cost = H[right] + (0 if open_count.get(left) else H[left])
            if used + cost <= B:
                options.append((cost, str(left), left, right))
        options.sort(key=lambda o: (o[0], o[1]))
        for cost, _, left, right in options:
            chosen.append((left, right))
            open_count[left] = open_count.get(left, 0) + 1
            dfs(i + 1, used + cost, value + v)
            open_count[left] -= 1
            chosen.pop()
        dfs(i + 1, used, value)
        remdeg[a] += 1
        remdeg[b] += 1

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 2 * m + 200))
    try:
        dfs(0, 0, 0.0)
    finally:
        sys.setrecursionlimit(limit)

    lines: dict = {}
    for left, right in best_choice:
        lines.setdefault(left, []).append(right)
    for left in lines:
        lines[left].sort(key=lambda r: (-problem.values[(left, r)], str(r)))
    lines = {k: lines[k] for k in sorted(lines, key=str)}
    tokens = sum(H[r] for rs in lines.values() for r in rs) + sum(H[l] for l in lines)
    objective = sum(problem.values[(l, r)] for l, rs in lines.items() for r in rs)
    return Selection(lines, objective, tokens)


def render_compressed(selection: Selection) -> str:
    rows = []
    for left in sorted(selection.lines, key=str):
        rows.append(f"{left}:{','.join(str(r) for r in selection.lines[left])}")
    return "\n".join(rows)


def column_token_costs(columns, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> dict:
    # one separator (":" or ",") is charged with every column occurrence
    return {c: tokenizer.count(f"{c},") for c in columns}


def compress(values: Mapping, budget: int, tokenizer: Tokenizer = DEFAULT_TOKENIZER,
             max_directed: int = MAX_DIRECTED_PAIRS) -> Selection:
    """Select and merge join snippets for a workload's pair values."""
    cols = {c for key in values for c in _endpoints(key)}
    problem = build_ilp(values, column_token_costs(cols, tokenizer), budget)
    return solve_ilp(problem, max_directed)


def default_budget(context_limit: int, template_tokens: int, reserve: int) -> int:
    """Whatever the model's context leaves after the fixed prompt text and the reply."""
    return max(0, context_limit - template_tokens - reserve)
