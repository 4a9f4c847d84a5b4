"""Tolerant SQL scanner for join and predicate structure.

Only what workload compression and index mapping need is recovered: the
FROM items (with aliases), the WHERE/ON predicate regions, and the column
references inside them. Subqueries are scanned recursively and their
findings are merged into the enclosing statement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*|/\*.*?\*/)
  | (?P<string>'(?:[^']|'')*')
  | (?P<qident>"(?:[^"]|"")*"(?:\.(?:"(?:[^"]|"")*"|[A-Za-z_][A-Za-z_0-9$]*))*)
  | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9$]*(?:\.(?:[A-Za-z_][A-Za-z_0-9$]*|"(?:[^"]|"")*"|\*))*)
  | (?P<op><=|>=|<>|!=|\|\||::|[=<>+\-*/%,;()])
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)

KEYWORDS = frozenset(
    """
    select from where group by order having limit offset union all intersect except
    join inner left right full outer cross natural on using as and or not in is null
    like ilike between exists case when then else end distinct asc desc interval date
    time timestamp year month day hour minute second extract substring for with
    true false any some escape similar to fetch first next rows only window over
    partition varchar char integer int numeric decimal cast nulls lateral
    """.split()
)

COMPARISONS = frozenset({"=", "<>", "!=", "<", ">", "<=", ">="})
_ARITH = frozenset({"+", "-", "*", "/", "%", "||", "::"})
_CLAUSES = ("select", "from", "where", "group", "having", "order", "limit", "offset",
            "union", "intersect", "except", "window", "fetch")
_JOIN_WORDS = frozenset({"join", "inner", "left", "right", "full", "outer", "cross", "natural"})


class SqlScanError(ValueError):
    pass


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str

    @property
    def low(self) -> str:
        return self.text.lower()


@dataclass
class _Ref:
    qualifier: str | None  # alias or table prefix as written, lower-case
    column: str


@dataclass
class ScanResult:
    """Raw scan findings; resolution against aliases happens in ``resolve``."""

    aliases: dict[str, str] = field(default_factory=dict)
    base_tables: list[str] = field(default_factory=list)
    refs: list[_Ref] = field(default_factory=list)
    equalities: list[tuple[_Ref, _Ref]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def tokenize(sql: str) -> list[Tok]:
    out = []
    for m in _TOKEN_RE.finditer(sql):
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        out.append(Tok(kind, m.group()))
    return out


def _nest(tokens: list[Tok]) -> list:
    """Group tokens into nested lists on parentheses."""
    stack: list[list] = [[]]
    for t in tokens:
        if t.text == "(":
            stack.append([])
        elif t.text == ")":
            if len(stack) == 1:
                raise SqlScanError("unbalanced ')'")
            inner = stack.pop()
            stack[-1].append(inner)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise SqlScanError("unbalanced '('")
    return stack[0]


def _is_tok(x, *words: str) -> bool:
    return isinstance(x, Tok) and x.low in words


def _is_subquery(x) -> bool:
    return isinstance(x, list) and bool(x) and _is_tok(x[0], "select", "with")


def _unquote(part: str) -> str:
    if part.startswith('"') and part.endswith('"'):
        return part[1:-1].replace('""', '"')
    return part


def _split_ident(text: str) -> list[str]:
    parts = re.findall(r'"(?:[^"]|"")*"|[^.]+', text)
    return [_unquote(p).lower() for p in parts]


def _colref(x) -> _Ref | None:
    if not isinstance(x, Tok) or x.kind not in ("ident", "qident"):
        return None
    parts = _split_ident(x.text)
    if parts[-1] == "*":
        return None
    if len(parts) == 1:
        if x.kind == "ident" and parts[0] in KEYWORDS:
            return None
        return _Ref(None, parts[0])
    return _Ref(parts[-2], parts[-1])


class _Scanner:
    def __init__(self) -> None:
        self.res = ScanResult()

    def block(self, items: list) -> None:
        """Scan one SELECT block (possibly with WITH / set operations)."""
        clauses = self._split_clauses(items)
        for name, body in clauses:
            if name == "from":
                self._from(body)
            elif name == "where" or name == "having":
                self._predicate(body)
            else:
                self._nested_only(body)

    def _split_clauses(self, items: list) -> list[tuple[str, list]]:
        out: list[tuple[str, list]] = []
        name, body = "head", []
        for x in items:
            if isinstance(x, Tok) and x.low in _CLAUSES:
                out.append((name, body))
                name, body = x.low, []
            else:
                body.append(x)
        out.append((name, body))
        return out

    def _nested_only(self, body: list) -> None:
        # select lists, group/order clauses, CTE heads: only subqueries matter
        for x in body:
            if _is_subquery(x):
                self.block(x)
            elif isinstance(x, list):
                self._nested_only(x)

    def _from(self, body: list) -> None:
        item: list = []
        i = 0
        while i < len(body):
            x = body[i]
            if _is_tok(x, ","):
                self._from_item(item)
                item = []
            elif isinstance(x, Tok) and x.low in _JOIN_WORDS:
                if item:
                    self._from_item(item)
                    item = []
            elif _is_tok(x, "on"):
                self._from_item(item)
                item = []
                j = i + 1
                cond = []
                while j < len(body) and not (
                    _is_tok(body[j], ",") or (isinstance(body[j], Tok) and body[j].low in _JOIN_WORDS)
                ):
                    cond.append(body[j])
                    j += 1
                self._predicate(cond)
                i = j
                continue
            elif _is_tok(x, "using"):
                self._from_item(item)
                item = []
                if i + 1 < len(body) and isinstance(body[i + 1], list):
                    i += 1
            else:
                item.append(x)
            i += 1
        self._from_item(item)

    def _from_item(self, item: list) -> None:
        if not item:
            return
        if _is_tok(item[0], "lateral"):
            item = item[1:]
        if not item:
            return
        head = item[0]
        rest = [x for x in item[1:] if not _is_tok(x, "as")]
        alias = None
        if rest and isinstance(rest[0], Tok) and rest[0].kind in ("ident", "qident"):
            alias = _split_ident(rest[0].text)[-1]
        if isinstance(head, list):
            if _is_subquery(head):
                self.block(head)
            if alias:
                self.res.aliases[alias] = alias
            return
        if not isinstance(head, Tok) or head.kind not in ("ident", "qident"):
            return
        table = _split_ident(head.text)[-1]
        if table not in self.res.base_tables:
            self.res.base_tables.append(table)
        self.res.aliases.setdefault(table, table)
        if alias:
            self.res.aliases[alias] = table

    def _predicate(self, body: list) -> None:
        flat: list = []
        self._flatten(body, flat)
        for k, x in enumerate(flat):
            if isinstance(x, Tok) and k + 1 < len(flat) and flat[k + 1] == "(":
                continue  # function name
            ref = _colref(x)
            if ref is not None:
                self.res.refs.append(ref)
        for k, x in enumerate(flat):
            if not _is_tok(x, "=") or k == 0 or k + 1 >= len(flat):
                continue
            left, right = _colref(flat[k - 1]), _colref(flat[k + 1])
            if left is None or right is None:
                continue
            before = flat[k - 2] if k >= 2 else None
            after = flat[k + 2] if k + 2 < len(flat) else None
            if (isinstance(before, Tok) and before.text in _ARITH) or before == "." :
                continue
            if (isinstance(after, Tok) and after.text in _ARITH) or after == "(":
                continue
            self.res.equalities.append((left, right))

    def _flatten(self, body: list, out: list) -> None:
        for x in body:
            if _is_subquery(x):
                self.block(x)
                out.append(Tok("other", "<subquery>"))
            elif isinstance(x, list):
                out.append("(")
                self._flatten(x, out)
                out.append(")")
            else:
                out.append(x)


def scan(sql: str) -> ScanResult:
    """Scan a single statement. Raises SqlScanError for unusable input."""
    tokens = [t for t in tokenize(sql)]
    while tokens and tokens[-1].text == ";":
        tokens.pop()
    if any(t.text == ";" for t in tokens):
        raise SqlScanError("more than one statement")
    nested = _nest(tokens)
    if not nested or not (_is_tok(nested[0], "select", "with") or _is_subquery(nested[0])):
        raise SqlScanError("not a SELECT statement")
    sc = _Scanner()
    if isinstance(nested[0], list):
        nested = nested[0] + nested[1:]
    sc.block(nested)
    return sc.res
