"""Performance monitoring for solver and simulation work"""

import time
from collections import defaultdict
from contextlib import contextmanager
from datetime import datetime
from typing import Dict, List, Any


class PerformanceMonitor:
    """Track solver and simulation timings."""

    def __init__(self):
        self.records: List[Dict[str, Any]] = []
        self.counters = defaultdict(int)
        self.start_time = datetime.now()

    def record(self, operation: str, duration: float, success: bool = True, **details):
        """
        Record one timed operation.

        Args:
            operation: Operation name (lp_solve, bnb_node, simulation_chunk, ...)
            duration: Duration in seconds
            success: Whether the operation succeeded
            **details: Extra fields kept with the record
        """
        self.records.append({
            'timestamp': datetime.now(),
            'operation': operation,
            'duration': duration,
            'success': success,
            **details
        })
        self.counters[operation] += 1

    @contextmanager
    def track(self, operation: str, **details):
        """Time the enclosed block and record it; failures are recorded too."""
        start = time.perf_counter()
        try:
            yield
        except Exception:
            self.record(operation, time.perf_counter() - start, success=False, **details)
            raise
        self.record(operation, time.perf_counter() - start, success=True, **details)

    def get_stats(self) -> Dict[str, Any]:
        """
        Get per-operation statistics.

        Returns:
            Dict keyed by operation with count, failures, total/avg/max duration (ms)
        """
        by_operation: Dict[str, List[Dict[str, Any]]] = defaultdict(list)
        for record in self.records:
            by_operation[record['operation']].append(record)

        stats = {}
        for operation, records in by_operation.items():
            durations = [r['duration'] for r in records]
            stats[operation] = {
                'count': len(records),
                'failures': len([r for r in records if not r['success']]),
                'total_ms': sum(durations) * 1000,
                'avg_ms': (sum(durations) / len(durations)) * 1000,
                'max_ms': max(durations) * 1000
            }
        return stats

    def print_stats(self):
        """Print formatted statistics."""
        stats = self.get_stats()

        print("\n" + "=" * 70)
        print("SOLVER STATISTICS")
        print("=" * 70)
        if not stats:
            print("  No operations recorded")
        for operation, s in sorted(stats.items()):
            print(f"  {operation:20s} count={s['count']:6d} failures={s['failures']:4d} "
                  f"total={s['total_ms']:10.1f}ms avg={s['avg_ms']:8.2f}ms max={s['max_ms']:8.2f}ms")
        print("=" * 70 + "\n")

    def reset(self):
        """Reset all statistics."""
        self.records.clear()
        self.counters.clear()
        self.start_time = datetime.now()


# Global monitor instance
monitor = PerformanceMonitor()
