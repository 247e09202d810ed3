"""Counting of pairwise similarity / distance evaluations.

Every pairwise comparison in the package goes through the helpers in
:mod:`proxyforge.embedding`, which report to whichever
:class:`ComparisonCounter` is active in the current context.
"""

from __future__ import annotations

import contextlib
import contextvars
import threading
from typing import Iterator

_active: contextvars.ContextVar["ComparisonCounter | None"] = contextvars.ContextVar(
    "proxyforge_comparison_counter", default=None
)


class ComparisonCounter:
    """Non-negative tally of vector-pair evaluations (safe to share across threads)."""

    def __init__(self) -> None:
        self.count = 0
        self._lock = threading.Lock()

    def record(self, n: int) -> None:
        if n < 0:
            raise ValueError("cannot record a negative number of comparisons")
        with self._lock:
            self.count += int(n)

    def reset(self) -> None:
        with self._lock:
            self.count = 0

    def __repr__(self) -> str:
        return f"ComparisonCounter(count={self.count})"


def record(n: int) -> None:
    counter = _active.get()
    if counter is not None:
        counter.record(n)


@contextlib.contextmanager
def counting(counter: ComparisonCounter | None = None) -> Iterator[ComparisonCounter]:
    """Activate ``counter`` (or a fresh one) for the duration of the block."""
    counter = ComparisonCounter() if counter is None else counter
    token = _active.set(counter)
    try:
        yield counter
    finally:
        _active.reset(token)
