"""Configuration sampling from a chat-completion model and response parsing."""

from __future__ import annotations

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

logger = logging.getLogger(__name__)

API_KEY_ENV = "LT_LLM_API_KEY"
DEFAULT_TEMPERATURE = 1.0
MAX_RETRIES = 3


class LlmError(RuntimeError):
    pass


@dataclass(frozen=True)
class IndexSpec:
    table: str
    columns: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise ValueError("index needs at least one column")
        object.__setattr__(self, "table", self.table.lower())
        object.__setattr__(self, "columns", tuple(c.lower() for c in self.columns))

    @property
    def name(self) -> str:
        return f"lt_{self.table}_{'_'.join(self.columns)}"

    def ddl(self) -> str:
        return f"CREATE INDEX {self.name} ON {self.table} ({', '.join(self.columns)});"


@dataclass
class Configuration:
    id: int
    raw: str
    param_sets: list[tuple[str, str]] = field(default_factory=list)
    indexes: list[IndexSpec] = field(default_factory=list)
    ignored: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.param_sets and not self.indexes

    def __hash__(self) -> int:
        return hash(self.id)


@dataclass
class Completion:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


class LlmClient(Protocol):
    def complete(self, prompt: str, temperature: float) -> Completion: ...


class ReplayClient:
    """Serves ``resp_<k>.txt`` fixtures in index order."""

    sequential = True

    def __init__(self, directory: str | Path) -> None:
        d = Path(directory)
        files = []
        for f in d.glob("resp_*.txt"):
            m = re.fullmatch(r"resp_(\d+)\.txt", f.name)
            if m:
                files.append((int(m.group(1)), f))
        if not files:
            raise LlmError(f"no resp_<k>.txt fixtures in {d}")
        self._files = [f for _, f in sorted(files)]
        self._next = 0

    def complete(self, prompt: str, temperature: float) -> Completion:
        if self._next >= len(self._files):
            raise LlmError("replay fixtures exhausted")
        f = self._files[self._next]
        self._next += 1
        return Completion(f.read_text(encoding="utf-8"))


class HttpChatClient:
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint."""

    sequential = False

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 timeout: float = 120.0, transport: httpx.BaseTransport | None = None) -> None:
        self.endpoint = endpoint
        self.model = model
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def complete(self, prompt: str, temperature: float) -> Completion:
        body = {
            "model": self.model,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            r = self._http.post(self.endpoint, json=body)
            r.raise_for_status()
            data = r.json()
            text = data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as e:
            raise LlmError(f"chat completion failed: {e}") from e
        usage = data.get("usage") or {}
        return Completion(text, usage.get("prompt_tokens"), usage.get("completion_tokens"))


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_STMT_START = re.compile(r"^\s*(alter|set|create|drop|select|update|insert|delete|vacuum|analyze|reset|show)\b",
                         re.IGNORECASE)
_ALTER_SET = re.compile(r"^alter\s+system\s+set\s+([\w.]+)\s*(?:=|\bto\b)\s*(.+)$", re.IGNORECASE | re.DOTALL)
_SET_GLOBAL = re.compile(r"^set\s+(?:global|persist)\s+([\w.]+)\s*(?:=|\bto\b)\s*(.+)$", re.IGNORECASE | re.DOTALL)
_MYSQL_VAR = re.compile(r"^set\s+@@(?:global|persist)\.([\w.]+)\s*=\s*(.+)$", re.IGNORECASE | re.DOTALL)
_CREATE_INDEX = re.compile(
    r"^create\s+(?:unique\s+)?index\s+(?:concurrently\s+)?(?:if\s+not\s+exists\s+)?"
    r"(?:[\w.\"]+\s+)?on\s+(?:only\s+)?([\w.\"]+)\s*(?:using\s+\w+\s*)?\(([^()]*)\)",
    re.IGNORECASE | re.DOTALL,
)


def _statements(raw: str) -> list[str]:
    blocks = _FENCE.findall(raw)
    text = "\n".join(blocks) if blocks else raw
    lines = [re.sub(r"--.*$", "", ln) for ln in text.splitlines()]
    out: list[str] = []
    current: list[str] = []
    for ln in lines:
        for piece_i, piece in enumerate(ln.split(";")):
            if piece_i > 0:
                if current:
                    out.append(" ".join(current))
                current = []
            piece = piece.strip()
            if not piece:
                continue
            if current and _STMT_START.match(piece):
                out.append(" ".join(current))
                current = []
            current.append(piece)
    if current:
        out.append(" ".join(current))
    return [s.strip() for s in out if s.strip()]


def _clean_value(v: str) -> str:
    v = v.strip().rstrip(";").strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "'\"":
        v = v[1:-1]
    return v


def _ident(s: str) -> str:
    return s.replace('"', "").split(".")[-1].lower()


def parse_configuration(raw: str, dbms: str = "postgres", id: int = 0) -> Configuration:
    """Classify each statement of a model response.

    Recognized: ``ALTER SYSTEM SET``, ``SET GLOBAL``/``SET PERSIST`` (and the
    ``@@global.`` form), and ``CREATE INDEX ... ON t (c, ...)``. Everything
    else lands in ``ignored``. ``dbms`` only matters when rendering back.
    """
    params: dict[str, str] = {}
    indexes: dict[str, IndexSpec] = {}
    ignored: list[str] = []
    for stmt in _statements(raw):
        m = _ALTER_SET.match(stmt) or _SET_GLOBAL.match(stmt) or _MYSQL_VAR.match(stmt)
        if m:
            params[m.group(1).lower()] = _clean_value(m.group(2))
            continue
        m = _CREATE_INDEX.match(stmt)
        if m:
            cols = []
            for c in m.group(2).split(","):
                words = c.strip().split()
                if words:
                    cols.append(_ident(words[0]))
            if cols:
                spec = IndexSpec(_ident(m.group(1)), tuple(cols))
                indexes.setdefault(spec.name, spec)
                continue
        ignored.append(stmt)
    cfg = Configuration(id, raw, list(params.items()), list(indexes.values()), ignored)
    if cfg.empty:
        logger.warning("configuration %d has no recognized statements; defaults only", id)
    return cfg


def render_configuration(cfg: Configuration, dbms: str = "postgres") -> str:
    lines = []
    mysql = dbms.lower().startswith("mysql")
    for name, value in cfg.param_sets:
        if mysql:
            lines.append(f"SET GLOBAL {name} = '{value}';")
        else:
            lines.append(f"ALTER SYSTEM SET {name} = '{value}';")
    lines.extend(ix.ddl() for ix in cfg.indexes)
    return "\n".join(lines)


def sample_configurations(prompt: str, n: int, temperature: float, client: LlmClient,
                          dbms: str = "postgres", workers: int = 1,
                          usage: dict | None = None) -> list[Configuration]:
    """Draw ``n`` responses and parse each into a Configuration.

    Calls are retried up to three times; a call that still fails is skipped.
    Ids are the sample index, so a skipped call leaves a gap.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= temperature <= 2:
        raise ValueError("temperature must lie in [0, 2]")

    def one(i: int) -> tuple[int, Completion | None, Exception | None]:
        err = None
        for attempt in range(1 + MAX_RETRIES):
            try:
                return i, client.complete(prompt, temperature), None
            except LlmError as e:
                err = e
                logger.warning("sample %d attempt %d failed: %s", i, attempt + 1, e)
        return i, None, err

    if workers > 1 and not getattr(client, "sequential", True):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]
    results.sort(key=lambda r: r[0])

    configs = []
    last_err = None
    for i, comp, err in results:
        if comp is None:
            last_err = err
            logger.warning("sample %d skipped after %d retries", i, MAX_RETRIES)
            continue
        if usage is not None:
            usage["prompt_tokens"] = usage.get("prompt_tokens", 0) + (comp.prompt_tokens or 0)
            usage["completion_tokens"] = usage.get("completion_tokens", 0) + (comp.completion_tokens or 0)
        configs.append(parse_configuration(comp.text, dbms, id=i))
    if not configs:
        raise LlmError(f"all {n} LLM calls failed: {last_err}")
    return configs
