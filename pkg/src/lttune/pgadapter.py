"""PostgreSQL-dialect executor and EXPLAIN-based join cost provider.

Both work over any DB-API 2.0 connection in autocommit mode (``ALTER
SYSTEM`` cannot run inside a transaction block). ``connect`` builds one with
psycopg2, which is an optional dependency.
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from typing import Any, Callable, Iterable

from lttune.executor import ExecutorError, QueryResult
from lttune.llm import IndexSpec
from lttune.sqlscan import SqlScanError, scan
from lttune.workload import JoinPair, Query

logger = logging.getLogger(__name__)

QUERY_CANCELED = "57014"
# rough creation cost per table row, used before an index has been built once
SECONDS_PER_ROW = 1e-6


def connect(db_url: str):
    try:
        import psycopg2
    except ImportError as e:
        raise ExecutorError("the PostgreSQL adapter needs psycopg2 (pip install psycopg2-binary)") from e
    try:
        conn = psycopg2.connect(db_url)
    except Exception as e:
        raise ExecutorError(f"cannot connect: {e}") from e
    conn.autocommit = True
    return conn


def _literal(value: str) -> str:
    return "'" + str(value).replace("'", "''") + "'"


_NAME = re.compile(r"^[A-Za-z_][A-Za-z_0-9.]*$")


def _check_name(name: str) -> str:
    if not _NAME.match(name):
        raise ExecutorError(f"refusing unsafe identifier {name!r}")
    return name


def _is_timeout(exc: Exception) -> bool:
    code = getattr(exc, "pgcode", None) or getattr(getattr(exc, "diag", None), "sqlstate", None)
    return code == QUERY_CANCELED or "statement timeout" in str(exc)


class PostgresExecutor:
    """Executor speaking to a live PostgreSQL server.

    ``restart`` is an optional callable that restarts the server (and returns
    a fresh connection); it is needed when a parameter has ``postmaster``
    context. Reconfiguration time is returned by ``apply_params`` and is not
    charged against query budgets.
    """

    def __init__(self, conn, restart: Callable[[], Any] | None = None,
                 clock: Callable[[], float] = time.perf_counter) -> None:
        self.conn = conn
        self.restart = restart
        self._clock = clock
        self._t0 = clock()
        self._pending_restart = False

    def _exec(self, sql: str, params: tuple = ()) -> list:
        cur = self.conn.cursor()
        try:
            cur.execute(sql, params) if params else cur.execute(sql)
            try:
                return cur.fetchall()
            except Exception:
                return []
        finally:
            cur.close()

    def now(self) -> float:
        return self._clock() - self._t0

    def _needs_restart(self, names: Iterable[str]) -> bool:
        names = list(names)
        if not names:
            return False
        rows = self._exec("SELECT name FROM pg_settings WHERE context = 'postmaster' AND name = ANY(%s)",
                          (names,))
        return bool(rows)

    def _reload(self, restart_needed: bool) -> None:
        if restart_needed:
            if self.restart is None:
                raise ExecutorError("parameter requires a server restart but no restart hook is set")
            new_conn = self.restart()
            if new_conn is not None:
                self.conn = new_conn
        else:
            self._exec("SELECT pg_reload_conf()")

    def apply_params(self, params, config_id=None) -> float:
        start = self._clock()
        try:
            for name, value in params:
                self._exec(f"ALTER SYSTEM SET {_check_name(name)} = {_literal(value)}")
            self._pending_restart = self._needs_restart(n for n, _ in params)
            self._reload(self._pending_restart)
        except ExecutorError:
            raise
        except Exception as e:
            raise ExecutorError(f"applying parameters failed: {e}") from e
        return self._clock() - start

    def reset_params(self) -> None:
        try:
            self._exec("ALTER SYSTEM RESET ALL")
            self._reload(self._pending_restart)
        except Exception as e:
            raise ExecutorError(f"resetting parameters failed: {e}") from e
        finally:
            self._pending_restart = False

    def create_index(self, index: IndexSpec) -> float:
        cols = ", ".join(_check_name(c) for c in index.columns)
        sql = f"CREATE INDEX IF NOT EXISTS {_check_name(index.name)} ON {_check_name(index.table)} ({cols})"
        start = self._clock()
        try:
            self._exec(sql)
        except Exception as e:
            raise ExecutorError(f"creating {index.name} failed: {e}") from e
        return self._clock() - start

    def drop_index(self, name: str) -> None:
        try:
            self._exec(f"DROP INDEX IF EXISTS {_check_name(name)}")
        except Exception as e:
            raise ExecutorError(f"dropping {name} failed: {e}") from e

    def list_indexes(self) -> set[str]:
        rows = self._exec("SELECT indexname FROM pg_indexes WHERE schemaname = current_schema()")
        return {r[0] for r in rows}

    def estimate_index_cost(self, index: IndexSpec) -> float:
        rows = self._exec("SELECT reltuples FROM pg_class WHERE relname = %s", (index.table,))
        tuples = max(0.0, float(rows[0][0])) if rows else 0.0
        return tuples * SECONDS_PER_ROW

    def execute(self, query: Query, budget: float, indexes: Iterable[str] = ()) -> QueryResult:
        if budget <= 0:
            return QueryResult(False, 0.0)
        ms = max(1, math.ceil(budget * 1000))
        self._exec(f"SET statement_timeout = {ms}")
        start = self._clock()
        try:
            self._exec(query.text.strip().rstrip(";"))
            elapsed = self._clock() - start
        except Exception as e:
            if _is_timeout(e):
                return QueryResult(False, budget)
            raise ExecutorError(f"query {query.id} failed: {e}") from e
        finally:
            try:
                self._exec("SET statement_timeout = 0")
            except Exception:
                logger.warning("could not clear statement_timeout")
        if elapsed > budget:
            return QueryResult(False, budget)
        return QueryResult(True, elapsed)


_JOIN_NODES = {"Hash Join", "Merge Join", "Nested Loop"}
_COND_KEYS = ("Hash Cond", "Merge Cond", "Join Filter")
_EQ = re.compile(r"\(?\s*([\w\"]+)\.([\w\"]+)\s*=\s*([\w\"]+)\.([\w\"]+)\s*\)?")


class ExplainCostProvider:
    """Join costs from ``EXPLAIN (FORMAT JSON)`` of the default plan.

    Each join node's equality condition is mapped back to base tables via
    the query's aliases; nested-loop joins whose condition sits in the inner
    index scan are resolved from that scan's ``Index Cond``.
    """

    def __init__(self, conn) -> None:
        self.conn = conn

    def plan(self, query: Query) -> dict:
        cur = self.conn.cursor()
        try:
            cur.execute("EXPLAIN (FORMAT JSON) " + query.text.strip().rstrip(";"))
            raw = cur.fetchall()[0][0]
        finally:
            cur.close()
        data = json.loads(raw) if isinstance(raw, str) else raw
        return data[0]["Plan"]

    def join_costs(self, query: Query) -> list[tuple[JoinPair, float]]:
        return plan_join_costs(self.plan(query), query.text)


def plan_join_costs(plan: dict, sql: str) -> list[tuple[JoinPair, float]]:
    try:
        aliases = scan(sql).aliases
    except SqlScanError:
        aliases = {}
    out: list[tuple[JoinPair, float]] = []

    def pairs_in(text: str) -> list[JoinPair]:
        found = []
        for a, ca, b, cb in _EQ.findall(text or ""):
            a, b = a.strip('"').lower(), b.strip('"').lower()
            if a == b:
                continue
            ta, tb = aliases.get(a, a), aliases.get(b, b)
            try:
                found.append(JoinPair.of(f"{ta}.{ca.strip(chr(34))}", f"{tb}.{cb.strip(chr(34))}"))
            except ValueError:
                continue
        return found

    def inner_index_cond(node: dict) -> str:
        # the inner index scan names its own columns without a qualifier
        for child in node.get("Plans", []):
            if "Index Cond" in child:
                alias = child.get("Alias") or child.get("Relation Name", "")
                return re.sub(r"\((\w+)\s*=", lambda m: f"({alias}.{m.group(1)} =", child["Index Cond"])
            deeper = inner_index_cond(child)
            if deeper:
                return deeper
        return ""

    def walk(node: dict) -> None:
        if node.get("Node Type") in _JOIN_NODES:
            conds = [node.get(k, "") for k in _COND_KEYS]
            found = [p for c in conds for p in pairs_in(c)]
            if not found and node.get("Node Type") == "Nested Loop":
                found = pairs_in(inner_index_cond(node))
            cost = float(node.get("Total Cost", 0.0))
            for p in dict.fromkeys(found):
                out.append((p, cost))
        for child in node.get("Plans", []):
            walk(child)

    walk(plan)
    return out
