from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

SCHEMA = "lt-report/1"


@dataclass
class Winner:
    config_id: int
    total_time: float
    params: list[list[str]]
    indexes: list[dict[str, Any]]
    query_times: dict[str, float]


@dataclass
class Meters:
    query_time: float = 0.0
    wasted_time: float = 0.0
    index_time: float = 0.0
    reconfig_time: float = 0.0
    llm_prompt_tokens: int = 0
    llm_completion_tokens: int = 0


@dataclass
class RunReport:
    schema: str = SCHEMA
    status: str = "ok"
    error: str | None = None
    dbms: str = ""
    hardware: dict[str, Any] = field(default_factory=dict)
    settings: dict[str, Any] = field(default_factory=dict)
    token_budget: int = 0
    compressed: dict[str, Any] = field(default_factory=dict)
    prompt: dict[str, Any] = field(default_factory=dict)
    configurations: list[dict[str, Any]] = field(default_factory=list)
    config_meta: dict[str, dict[str, Any]] = field(default_factory=dict)
    events: list[dict[str, Any]] = field(default_factory=list)
    incumbents: list[dict[str, Any]] = field(default_factory=list)
    winner: Winner | None = None
    meters: Meters = field(default_factory=Meters)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(asdict(self))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunReport":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        kwargs = {f.name: data[f.name] for f in fields(cls) if f.name in data}
        kwargs = _restore(kwargs)
        if kwargs.get("winner") is not None:
            kwargs["winner"] = Winner(**kwargs["winner"])
        kwargs["meters"] = Meters(**kwargs.get("meters", {}))
        return cls(**kwargs)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def summary(self) -> str:
        lines = [f"status: {self.status}"]
        if self.error:
            lines.append(f"error: {self.error}")
        lines.append(f"prompt tokens: {self.prompt.get('token_count', 0)} "
                     f"(workload section {self.compressed.get('tokens', 0)} of budget {self.token_budget})")
        lines.append(f"configurations sampled: {len(self.configurations)}")
        if self.winner:
            w = self.winner
            lines.append(f"best configuration: #{w.config_id}, workload time {w.total_time:.6g}s")
            for name, value in w.params:
                lines.append(f"  SET {name} = {value}")
            for ix in w.indexes:
                lines.append(f"  INDEX {ix['name']} ON {ix['table']}({', '.join(ix['columns'])})")
        m = self.meters
        lines.append(f"query time {m.query_time:.6g}s (wasted {m.wasted_time:.6g}s), "
                     f"index time {m.index_time:.6g}s")
        return "\n".join(lines)


# infinities are not valid JSON; they are stored as tagged objects
_FLOAT_TAG = "$float"


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return {_FLOAT_TAG: "inf" if x > 0 else "-inf"}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(_jsonable(v) for v in x)
    return x


def _restore(x):
    if isinstance(x, dict) and set(x) == {_FLOAT_TAG}:
        return float(x[_FLOAT_TAG])
    if isinstance(x, dict):
        return {k: _restore(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_restore(v) for v in x]
    return x
