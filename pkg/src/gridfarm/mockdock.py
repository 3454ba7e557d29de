"""Deterministic stand-in for one docking computation.

The score is a pure function of the task id (a splitmix64-style hash chain),
so any two workers on any two hosts produce bit-identical results.  The busy
loop burns real CPU rather than sleeping so measured cpu time is meaningful.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

_MASK = (1 << 64) - 1
_CHAIN_ROUNDS = 16
_CHAIN_SALT = 0x9E3779B97F4A7C15  # fixed constant mixed into every round


def _splitmix64(x: int) -> int:
    x = (x + _CHAIN_SALT) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def seed_for(task_id: int) -> int:
    return _splitmix64(task_id & _MASK)


def score_for(task_id: int) -> int:
    """64-bit hash chain over (task seed, fixed salt); the mock docking score."""
    value = seed_for(task_id)
    for _ in range(_CHAIN_ROUNDS):
        value = _splitmix64(value ^ _CHAIN_SALT)
    return value


@dataclass(frozen=True)
class MockDockTask:
    task_id: int
    work_ms: int = 0

    def __post_init__(self):
        if self.work_ms < 0:
            raise ValueError("work_ms must be >= 0")


@dataclass(frozen=True)
class MockDockOutcome:
    task_id: int
    score: int
    cpu_ms: int


def mock_dock(task: MockDockTask) -> MockDockOutcome:
    """Spin CPU-bound arithmetic for roughly ``work_ms``, then score the task."""
    start = time.process_time()
    budget = task.work_ms / 1000.0
    value = seed_for(task.task_id)
    while time.process_time() - start < budget:
        for _ in range(512):
            value = _splitmix64(value)
    cpu_ms = int(round((time.process_time() - start) * 1000))
    return MockDockOutcome(task_id=task.task_id, score=score_for(task.task_id),
                           cpu_ms=cpu_ms)
