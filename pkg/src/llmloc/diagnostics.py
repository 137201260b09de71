"""Non-fatal warning collection shared by all pipeline stages."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

log = logging.getLogger("llmloc")


@dataclass(frozen=True)
class Diagnostic:
    stage: str
    message: str


class DiagnosticSink:
    """Append-only sink for warnings; safe for concurrent appends."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._items: list[Diagnostic] = []

    def warn(self, stage: str, message: str) -> None:
        with self._lock:
            self._items.append(Diagnostic(stage, message))
        log.debug("[%s] %s", stage, message)

    def items(self) -> list[Diagnostic]:
        with self._lock:
            return list(self._items)

    def messages(self, stage: str | None = None) -> list[str]:
        return [d.message for d in self.items() if stage is None or d.stage == stage]

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)
