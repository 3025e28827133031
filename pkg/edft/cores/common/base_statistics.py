# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import time
from contextlib import contextmanager
from typing import Dict, Iterable, List

import numpy as np

# phase name => BaseStatistics
statistics_dict: Dict[str, "BaseStatistics"] = {}


class BaseStatistics:
    """Wall-time samples of one solver phase (free energy, gradients, ...)."""

    def __init__(self):
        self.durations: List[float] = []

    def append_duration(self, duration: float):
        self.durations.append(duration)

    def calculate_statistics(self) -> Dict[str, object]:
        if not self.durations:
            return {"calls": 0, "p50_seconds": None, "p99_seconds": None, "average_seconds": None, "total_seconds": 0.0}
        samples = np.asarray(self.durations)
        p50, p99 = np.percentile(samples, [50, 99])
        return {
            "calls": int(samples.size),
            "p50_seconds": float(p50),
            "p99_seconds": float(p99),
            "average_seconds": float(samples.mean()),
            "total_seconds": float(samples.sum()),
        }

    def reset(self):
        self.durations.clear()


def register_statistics(names: Iterable[str]):
    """Decorator that makes sure a statistic exists for every phase the function times."""

    def decorator(func):
        for name in names:
            statistics_dict.setdefault(name, BaseStatistics())
        return func

    return decorator


@contextmanager
def record_duration(name: str):
    """Time the enclosed block into the statistic registered under ``name``."""
    start = time.perf_counter()
    try:
        yield
    finally:
        statistic = statistics_dict.get(name)
        if statistic is not None:
            statistic.append_duration(time.perf_counter() - start)


def collect_all_statistics() -> Dict[str, Dict[str, object]]:
    return {name: statistic.calculate_statistics() for name, statistic in statistics_dict.items()}


def reset_all_statistics():
    for statistic in statistics_dict.values():
        statistic.reset()
