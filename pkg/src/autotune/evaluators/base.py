"""Request/response records shared by all objective backends.

Wire form (one JSON object per line, UTF-8)::

    request:  {"run_id": ..., "index": ..., "config": {...}, "epochs": ...}
    response: {"value": <number>, "status": "ok" | "failed", "meta": {...}}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Protocol


@dataclass(frozen=True)
class EvalRequest:
    run_id: str
    index: int
    config: dict
    epochs: int = 50
    architecture: Any = None

    def to_json(self) -> str:
        doc = {"run_id": self.run_id, "index": self.index, "config": self.config,
               "epochs": self.epochs}
        if self.architecture is not None:
            doc["architecture"] = self.architecture
        return json.dumps(doc, sort_keys=False)


@dataclass(frozen=True)
class EvalResponse:
    value: float
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "ok" and not math.isfinite(self.value):
            raise ValueError("ok response needs a finite value")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def reason(self) -> str | None:
        return self.meta.get("reason")

    @classmethod
    def failed(cls, reason: str, **meta) -> "EvalResponse":
        return cls(math.nan, "failed", {"reason": reason, **meta})

    def to_json(self) -> str:
        value = self.value if math.isfinite(self.value) else None
        return json.dumps({"value": value, "status": self.status, "meta": self.meta})

    @classmethod
    def from_json(cls, line: str) -> "EvalResponse":
        """Parse one response line; raises ``ValueError`` on anything malformed."""
        doc = json.loads(line)
        if not isinstance(doc, dict) or "value" not in doc or "status" not in doc:
            raise ValueError("response must be an object with value and status")
        meta = doc.get("meta") or {}
        if not isinstance(meta, dict):
            raise ValueError("meta must be an object")
        status = doc["status"]
        if status == "failed":
            return cls(math.nan, "failed", meta)
        value = doc["value"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("value must be a number")
        return cls(float(value), status, meta)


class Evaluator(Protocol):
    def __call__(self, request: EvalRequest) -> EvalResponse: ...
