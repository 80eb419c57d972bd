"""In-process LRU response cache with a byte budget.

Keys hash the catalog version, the route, and the canonicalized request
body, so entries from older catalog versions become unreachable after a
reload instead of needing explicit invalidation.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass


def canonical_body(body) -> str:
    """Stable serialization: sorted fields, no insignificant whitespace."""
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def make_key(catalog_version: int, route: str, body) -> str:
    payload = f"{catalog_version}|{route}|{canonical_body(body)}"
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class CacheEntry:
    payload: bytes
    created_at: float


class ResponseCache:
    """Thread-safe LRU over response bytes; evicts least recently used
    entries once the byte budget is exceeded."""

    def __init__(self, max_bytes: int = 256 * 1024 * 1024):
        self.max_bytes = max_bytes
        self._entries: "OrderedDict[str, CacheEntry]" = OrderedDict()
        self._total = 0
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: str) -> bytes | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                self.misses += 1
                return None
            self._entries.move_to_end(key)
            self.hits += 1
            return entry.payload

    def put(self, key: str, payload: bytes) -> None:
        if len(payload) > self.max_bytes:
            return
        with self._lock:
            old = self._entries.pop(key, None)
            if old is not None:
                self._total -= len(old.payload)
            self._entries[key] = CacheEntry(payload=payload, created_at=time.time())
            self._total += len(payload)
            while self._total > self.max_bytes and self._entries:
                _, evicted = self._entries.popitem(last=False)
                self._total -= len(evicted.payload)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def total_bytes(self) -> int:
        return self._total
