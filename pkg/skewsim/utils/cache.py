"""LRU cache for tabulated moment sums"""

from collections import OrderedDict
from typing import Any, Callable, Dict, Optional
import hashlib

import numpy as np


class MomentTableCache:
    """LRU cache of G-tables keyed by (A, omega values, table shape).

    One instance belongs to one density evaluation. Points where several
    path lengths coincide (x and y on the same side of both barriers) then
    reuse a single table.

    Features:
    - LRU eviction when the cache is full
    - Size-based memory management
    - Hit/miss statistics
    """

    def __init__(self, max_size_mb: int = 64, max_items: int = 256):
        """Initialize the cache.

        Args:
            max_size_mb: Maximum total size of stored tables in megabytes
            max_items: Maximum number of stored tables
        """
        self.max_size_bytes = max_size_mb * 1024 * 1024
        self.max_items = max_items
        self.current_size = 0
        self.cache: OrderedDict[str, Dict[str, Any]] = OrderedDict()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def make_key(omega: np.ndarray, a: float, m_max: int, n_max: int,
                 scaled: bool) -> str:
        """Generate a cache key.

        Args:
            omega: Evaluation points
            a: The constant A
            m_max: Largest m in the table
            n_max: Largest n in the table
            scaled: Whether the table drops exp(-omega^2/2)

        Returns:
            MD5 digest of the arguments
        """
        digest = hashlib.md5(np.ascontiguousarray(omega, dtype=float).tobytes())
        digest.update(repr((float(a), m_max, n_max, scaled, np.shape(omega))).encode())
        return digest.hexdigest()

    def get(self, key: str) -> Optional[np.ndarray]:
        """Retrieve a table.

        Args:
            key: Key from make_key

        Returns:
            The cached table, or None
        """
        if key not in self.cache:
            self.misses += 1
            return None

        self.cache.move_to_end(key)
        self.hits += 1
        return self.cache[key]['table']

    def put(self, key: str, table: np.ndarray):
        """Store a table.

        Args:
            key: Key from make_key
            table: Array to store
        """
        size = int(table.nbytes)

        if key in self.cache:
            self._remove_entry(key)

        while (self.current_size + size > self.max_size_bytes or
               len(self.cache) >= self.max_items) and self.cache:
            self._evict_oldest()

        self.cache[key] = {'table': table, 'size': size}
        self.current_size += size

    def get_or_compute(self, key: str, compute: Callable[[], np.ndarray]) -> np.ndarray:
        """Return the cached table for key, computing and storing it on a miss."""
        table = self.get(key)
        if table is None:
            table = compute()
            self.put(key, table)
        return table

    def _remove_entry(self, key: str):
        if key in self.cache:
            entry = self.cache.pop(key)
            self.current_size -= entry['size']

    def _evict_oldest(self):
        """Evict the least recently used entry."""
        if self.cache:
            self._remove_entry(next(iter(self.cache)))

    def clear(self):
        """Clear all cached entries."""
        self.cache.clear()
        self.current_size = 0
        self.hits = 0
        self.misses = 0

    def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics.

        Returns:
            Dictionary with cache statistics
        """
        lookups = self.hits + self.misses
        hit_rate = self.hits / lookups if lookups > 0 else 0

        return {
            'size_mb': self.current_size / (1024 * 1024),
            'items': len(self.cache),
            'max_items': self.max_items,
            'hits': self.hits,
            'misses': self.misses,
            'hit_rate': f"{hit_rate:.2%}",
        }
