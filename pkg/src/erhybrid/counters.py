"""Operation counters shared by retrieval and verification."""

from __future__ import annotations

import threading


class OpCounter:
    """Thread-safe monotone counter.

    Retrieval counts query-vs-reference similarity computations; verification
    counts composite-score evaluations. Memoization inside either stage must
    not change what gets counted.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._total = 0

    def add(self, amount: int) -> None:
        with self._lock:
            self._total += amount

    @property
    def total(self) -> int:
        return self._total

    def reset(self) -> None:
        with self._lock:
            self._total = 0
