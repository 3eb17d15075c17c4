"""Per-host request gating: serialisation plus a minimum delay between requests."""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager


class HostGate:
    """Allows at most one in-flight request per host and keeps consecutive
    request starts to the same host at least ``min_interval_ms`` apart.

    The gate is shared by all workers talking to the same set of hosts; a
    worker enters ``slot(host)`` around each request it issues.
    """

    def __init__(self, min_interval_ms: float = 0.0):
        self.min_interval = max(min_interval_ms, 0.0) / 1000.0
        self._mutex = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._last_start: dict[str, float] = {}

    def _lock_for(self, host: str) -> threading.Lock:
        with self._mutex:
            lock = self._locks.get(host)
            if lock is None:
                lock = threading.Lock()
                self._locks[host] = lock
            return lock

    @contextmanager
    def slot(self, host: str):
        lock = self._lock_for(host)
        with lock:
            if self.min_interval > 0:
                last = self._last_start.get(host)
                if last is not None:
                    wait = last + self.min_interval - time.monotonic()
                    if wait > 0:
                        time.sleep(wait)
            self._last_start[host] = time.monotonic()
            yield
