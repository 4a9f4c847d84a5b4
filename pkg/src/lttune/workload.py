"""Workload loading, join-pair extraction and join-pair values."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol

from lttune.sqlscan import ScanResult, SqlScanError, scan

logger = logging.getLogger(__name__)

Schema = Mapping[str, Iterable[str]]


class WorkloadError(Exception):
    pass


@dataclass(frozen=True, order=True)
class ColumnRef:
    table: str
    column: str

    def __post_init__(self) -> None:
        if not self.table or not self.column:
            raise ValueError("table and column must be non-empty")
        object.__setattr__(self, "table", self.table.lower())
        object.__setattr__(self, "column", self.column.lower())

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"

    @classmethod
    def parse(cls, text: str) -> "ColumnRef":
        table, _, column = text.strip().rpartition(".")
        return cls(table, column)


@dataclass(frozen=True)
class JoinPair:
    """Unordered join-column pair stored with the smaller rendering first."""

    left: ColumnRef
    right: ColumnRef

    def __post_init__(self) -> None:
        if self.left == self.right:
            raise ValueError(f"degenerate join pair on {self.left}")
        if str(self.right) < str(self.left):
            l, r = self.left, self.right
            object.__setattr__(self, "left", r)
            object.__setattr__(self, "right", l)

    def __str__(self) -> str:
        return f"{self.left}={self.right}"

    @classmethod
    def of(cls, a: str | ColumnRef, b: str | ColumnRef) -> "JoinPair":
        a = a if isinstance(a, ColumnRef) else ColumnRef.parse(a)
        b = b if isinstance(b, ColumnRef) else ColumnRef.parse(b)
        return cls(a, b)


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    join_pairs: frozenset[JoinPair] = frozenset()
    predicate_columns: frozenset[ColumnRef] = frozenset()
    warnings: tuple[str, ...] = ()

    @property
    def tables(self) -> frozenset[str]:
        return frozenset(c.table for c in self.predicate_columns)

    @classmethod
    def from_sql(cls, id: str, text: str, schema: Schema | None = None) -> "Query":
        a = analyze(text, schema)
        return cls(id, text, a.join_pairs, a.predicate_columns, tuple(a.warnings))


@dataclass(frozen=True)
class Workload:
    queries: tuple[Query, ...]

    def __post_init__(self) -> None:
        ids = [q.id for q in self.queries]
        if len(set(ids)) != len(ids):
            raise WorkloadError("duplicate query ids in workload")

    def __iter__(self):
        return iter(self.queries)

    def __len__(self) -> int:
        return len(self.queries)

    @property
    def ids(self) -> list[str]:
        return [q.id for q in self.queries]

    def by_id(self, qid: str) -> Query:
        for q in self.queries:
            if q.id == qid:
                return q
        raise KeyError(qid)

    def __add__(self, other: "Workload") -> "Workload":
        return Workload(self.queries + other.queries)


@dataclass
class Analysis:
    join_pairs: frozenset[JoinPair] = frozenset()
    predicate_columns: frozenset[ColumnRef] = frozenset()
    warnings: list[str] = field(default_factory=list)


def _schema_index(schema: Schema | None) -> dict[str, set[str]]:
    if not schema:
        return {}
    return {t.lower(): {c.lower() for c in cols} for t, cols in schema.items()}


def analyze(sql: str, schema: Schema | None = None) -> Analysis:
    """Extract join pairs and predicate columns from one statement.

    Qualified references are resolved through the FROM-clause aliases; an
    unknown qualifier is kept verbatim as the table name. Unqualified
    references resolve against ``schema`` (restricted to the tables of the
    statement) or, failing that, to the sole table of the statement.
    Extraction never raises: unusable SQL yields an empty analysis plus a
    warning.
    """
    try:
        raw = scan(sql)
    except SqlScanError as e:
        msg = f"unparseable statement: {e}"
        logger.warning(msg)
        return Analysis(warnings=[msg])
    return _resolve(raw, _schema_index(schema))


def _resolve(raw: ScanResult, schema: dict[str, set[str]]) -> Analysis:
    warnings = list(raw.warnings)
    unresolved: set[str] = set()

    def resolve(ref) -> tuple[str, ColumnRef] | None:
        # returns (relation identity, column)
        if ref.qualifier is not None:
            table = raw.aliases.get(ref.qualifier, ref.qualifier)
            return ref.qualifier, ColumnRef(table, ref.column)
        owners = [t for t in raw.base_tables if ref.column in schema.get(t, ())]
        if len(owners) == 1:
            return owners[0], ColumnRef(owners[0], ref.column)
        if not owners and len(raw.base_tables) == 1 and raw.base_tables[0] not in schema:
            t = raw.base_tables[0]
            return t, ColumnRef(t, ref.column)
        if schema and not owners:
            return None  # not a column of any known table
        unresolved.add(ref.column)
        return None

    cols = set()
    for ref in raw.refs:
        r = resolve(ref)
        if r is not None:
            cols.add(r[1])
    pairs = set()
    for a, b in raw.equalities:
        ra, rb = resolve(a), resolve(b)
        if ra is None or rb is None:
            continue
        if ra[0] == rb[0] or ra[1] == rb[1]:
            continue  # same relation instance, or self-join on the same column
        pairs.add(JoinPair(ra[1], rb[1]))
    for name in sorted(unresolved):
        msg = f"could not resolve unqualified column {name!r}"
        logger.warning(msg)
        warnings.append(msg)
    return Analysis(frozenset(pairs), frozenset(cols), warnings)


def extract_join_pairs(sql: str, schema: Schema | None = None) -> set[JoinPair]:
    return set(analyze(sql, schema).join_pairs)


def predicate_columns(sql: str, schema: Schema | None = None) -> set[ColumnRef]:
    return set(analyze(sql, schema).predicate_columns)


def load_workload(directory: str | Path, schema: Schema | None = None) -> Workload:
    """Read ``*.sql`` files (one statement each) sorted by file name.

    A ``schema.json`` file next to the queries (``{"table": ["col", ...]}``)
    is used for resolving unqualified columns unless ``schema`` is given.
    """
    d = Path(directory)
    if not d.is_dir():
        raise WorkloadError(f"workload directory not found: {d}")
    files = sorted(d.glob("*.sql"), key=lambda p: p.name)
    if not files:
        raise WorkloadError(f"no .sql files in {d}")
    if schema is None and (d / "schema.json").is_file():
        schema = json.loads((d / "schema.json").read_text(encoding="utf-8"))
    queries = []
    for f in files:
        try:
            text = f.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise WorkloadError(f"cannot read {f.name}: {e}") from e
        queries.append(Query.from_sql(f.stem, text, schema))
    return Workload(tuple(queries))


class Tokenizer(Protocol):
    def count(self, text: str) -> int: ...


class CharTokenizer:
    """Upper-bound heuristic: one token per four characters."""

    chars_per_token = 4

    def count(self, text: str) -> int:
        return math.ceil(len(text) / self.chars_per_token)


DEFAULT_TOKENIZER = CharTokenizer()


def token_cost(text: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> int:
    return tokenizer.count(text)


class CostProvider(Protocol):
    def join_costs(self, query: Query) -> list[tuple[JoinPair, float]]:
        """(join pair, estimated cost) for every join operator of the default plan."""
        ...


class UniformCostProvider:
    """Fallback without optimizer access: each join condition occurrence costs 1."""

    def join_costs(self, query: Query) -> list[tuple[JoinPair, float]]:
        return [(p, 1.0) for p in sorted(query.join_pairs, key=str)]


class ScenarioCostProvider:
    """Join costs read from the ``join_costs`` section of a simulator scenario."""

    def __init__(self, join_costs: Mapping[str, list]) -> None:
        self._costs: dict[str, list[tuple[JoinPair, float]]] = {}
        for qid, entries in join_costs.items():
            rows = []
            for e in entries:
                rows.append((JoinPair.of(e["left"], e["right"]), float(e["cost"])))
            self._costs[qid] = rows

    def join_costs(self, query: Query) -> list[tuple[JoinPair, float]]:
        if query.id not in self._costs:
            raise KeyError(f"no join costs for query {query.id}")
        return self._costs[query.id]


def pair_values(workload: Workload, costs: CostProvider,
                warnings: list[str] | None = None) -> dict[JoinPair, float]:
    """Sum of estimated join-operator costs per join condition across the workload."""
    values: dict[JoinPair, float] = {}
    for q in workload:
        try:
            entries = costs.join_costs(q)
        except Exception as e:  # provider failures are isolated per query
            msg = f"cost provider failed for {q.id}: {e}"
            logger.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            continue
        for pair, ec in entries:
            if ec < 0:
                raise ValueError(f"negative join cost for {pair} in {q.id}")
            values[pair] = values.get(pair, 0.0) + ec
    return values
