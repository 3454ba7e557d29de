"""Runtime state of the simulated grid entities.

These objects hold capacity and staleness state only; job bookkeeping and
failure attribution stay in the schedulers that own the jobs.  Everything is
driven single-threaded by the owning kernel.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from .errors import NoMatch
from .model import (
    ComputingElementSpec,
    FabricSpec,
    FailureModel,
    GridJob,
    OutageWindow,
    to_ms,
)

THROTTLE_WINDOW_MS = 60_000


class ComputingElementSim:
    """CPU slots plus a bounded FIFO waiting queue."""

    def __init__(self, spec: ComputingElementSpec):
        self.spec = spec
        self.ce_id = spec.ce_id
        self.running: set[int] = set()
        self.waiting: deque[int] = deque()
        self.up = True

    @property
    def free_slots(self) -> int:
        return max(0, self.spec.cpu_slots - len(self.running))

    def true_status(self) -> tuple[int, int]:
        """(free slots, queue depth) as they really are right now."""
        if not self.up:
            return 0, self.spec.queue_limit
        return self.free_slots, len(self.waiting)

    def queue_full(self) -> bool:
        return len(self.waiting) >= self.spec.queue_limit

    def enqueue(self, job_id: int) -> None:
        self.waiting.append(job_id)

    def start_next(self) -> Optional[int]:
        """Pop the queue head into a free slot; None when nothing can start."""
        if not self.up or not self.waiting or self.free_slots == 0:
            return None
        job_id = self.waiting.popleft()
        self.running.add(job_id)
        return job_id

    def release(self, job_id: int) -> None:
        self.running.discard(job_id)

    def drop_waiting(self, job_id: int) -> None:
        try:
            self.waiting.remove(job_id)
        except ValueError:
            pass

    def evict_all(self) -> tuple[list[int], list[int]]:
        """Clear the CE on outage; returns (was_running, was_waiting)."""
        running = sorted(self.running)
        waiting = list(self.waiting)
        self.running.clear()
        self.waiting.clear()
        return running, waiting

    def run_ms(self, cpu_cost_ms: int) -> int:
        """Wall milliseconds this CE needs for a nominal CPU cost."""
        return max(1, int(round(cpu_cost_ms / self.spec.speed)))


class InformationSystemSim:
    """Periodically published CE status; frozen between publishes.

    A publish interval of zero disables staleness: readers always see the
    truth.  The frozen snapshot is what lets a dead-but-advertised-free CE
    keep attracting jobs.
    """

    def __init__(self, publish_interval_s: float):
        self.publish_interval_ms = to_ms(publish_interval_s)
        self.snapshot: dict[str, tuple[int, int]] = {}
        self.last_publish_ms: Optional[int] = None

    @property
    def live(self) -> bool:
        return self.publish_interval_ms == 0

    def publish(self, truth: dict[str, tuple[int, int]], at_ms: int) -> dict:
        self.snapshot = dict(truth)
        self.last_publish_ms = at_ms
        return self.snapshot

    def advertised(self, truth: dict[str, tuple[int, int]]) -> dict[str, tuple[int, int]]:
        if self.live or self.last_publish_ms is None:
            return truth
        return self.snapshot


class ResourceBrokerSim:
    """Accepts submissions under a sliding-window throttle and matches jobs."""

    def __init__(self, rb_id: str, throttle_per_min: int):
        self.rb_id = rb_id
        self.throttle = throttle_per_min
        self._accepted: deque[int] = deque()

    def try_accept(self, at_ms: int) -> Optional[int]:
        """None when accepted; otherwise the earliest time worth retrying."""
        while self._accepted and self._accepted[0] <= at_ms - THROTTLE_WINDOW_MS:
            self._accepted.popleft()
        if len(self._accepted) < self.throttle:
            self._accepted.append(at_ms)
            return None
        return self._accepted[0] + THROTTLE_WINDOW_MS

    def match(self, snapshot: dict[str, tuple[int, int]], job: GridJob,
              eligible: dict[str, ComputingElementSim]) -> str:
        """Pick the eligible CE with the most advertised free slots.

        Ties break on the lowest ce_id.  Only the advertised queue depth
        matters here; the true state may differ (that gap is the sinkhole
        precondition).
        """
        best: Optional[str] = None
        best_free = -1
        for ce_id in sorted(eligible):
            free, depth = snapshot.get(ce_id, (0, 0))
            if depth >= eligible[ce_id].spec.queue_limit:
                continue
            if free > best_free:
                best = ce_id
                best_free = free
        if best is None:
            raise NoMatch(f"job {job.job_id}: every advertised queue is at its limit")
        return best


class StorageElementSim:
    def __init__(self, se_id: str, bandwidth_bps: int, transfer_failure_rate: float):
        self.se_id = se_id
        self.bandwidth_bps = bandwidth_bps
        self.transfer_failure_rate = transfer_failure_rate
        self.bytes_stored = 0

    def transfer_ms(self, nbytes: int) -> int:
        if nbytes <= 0:
            return 0
        return max(1, int(round(nbytes / self.bandwidth_bps * 1000)))


class LicenseServerSim:
    """Token pool with scheduled outage windows."""

    def __init__(self, capacity: Optional[int], outages: tuple[OutageWindow, ...]):
        self.capacity = capacity
        self.outages = outages
        self.in_use = 0

    def in_outage(self, at_ms: int) -> bool:
        return any(w.contains_ms(at_ms) for w in self.outages)

    def acquire(self, at_ms: int) -> bool:
        if self.capacity is None:
            return True
        if self.in_outage(at_ms) or self.in_use >= self.capacity:
            return False
        self.in_use += 1
        return True

    def release(self) -> None:
        if self.capacity is not None and self.in_use > 0:
            self.in_use -= 1


class FabricSim:
    """All simulated grid services for one campaign."""

    def __init__(self, spec: FabricSpec, failure_model: FailureModel):
        self.spec = spec
        self.failure_model = failure_model
        self.ces = {ce.ce_id: ComputingElementSim(ce) for ce in spec.ces}
        self.rbs = [ResourceBrokerSim(rb.rb_id, rb.throttle_per_min) for rb in spec.rbs]
        self.ses = [StorageElementSim(se.se_id, se.bandwidth_bps, se.transfer_failure_rate)
                    for se in spec.ses]
        self.license = LicenseServerSim(
            spec.license.capacity if spec.license.required else None,
            failure_model.license_outages,
        )
        self.infosys = InformationSystemSim(spec.publish_interval_s)

    def truth(self) -> dict[str, tuple[int, int]]:
        return {ce_id: ce.true_status() for ce_id, ce in sorted(self.ces.items())}

    def advertised(self) -> dict[str, tuple[int, int]]:
        return self.infosys.advertised(self.truth())

    def publish_snapshot(self, at_ms: int) -> dict:
        return self.infosys.publish(self.truth(), at_ms)

    def se_for(self, index: int) -> StorageElementSim:
        return self.ses[index % len(self.ses)]
