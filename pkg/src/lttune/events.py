from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class EventLog:
    """Append-only run log; each event is a flat JSON-ready dict."""

    events: list[dict[str, Any]] = field(default_factory=list)

    def emit(self, at: float, kind: str, **data: Any) -> None:
        if self.events and at < self.events[-1]["at"]:
            at = self.events[-1]["at"]  # clocks may jitter; keep the log ordered
        self.events.append({"at": at, "kind": kind, **data})

    def of_kind(self, *kinds: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["kind"] in kinds]
