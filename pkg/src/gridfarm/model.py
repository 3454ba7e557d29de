"""Domain types shared by the schedulers, the simulator and the live harness.

Virtual time is integer milliseconds everywhere inside the package; values
are converted to seconds only at the reporting boundary.  All durations and
rates in configuration objects are expressed in seconds because that is what
config files use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .errors import IllegalTransition, TimeRegression


MS = 1000  # virtual-time milliseconds per second


def to_ms(seconds: float) -> int:
    return int(round(seconds * MS))


def to_seconds(ms: int) -> float:
    return ms / MS


class TaskState(str, Enum):
    PENDING = "pending"
    ASSIGNED = "assigned"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


_TASK_EDGES = {
    TaskState.PENDING: {TaskState.ASSIGNED},
    TaskState.ASSIGNED: {TaskState.RUNNING},
    TaskState.RUNNING: {TaskState.COMPLETED, TaskState.FAILED},
    TaskState.FAILED: {TaskState.PENDING},  # resubmission, the only backward edge
    TaskState.COMPLETED: set(),
}


class JobState(str, Enum):
    CREATED = "created"
    SUBMITTED = "submitted"
    SCHEDULED = "scheduled"
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    ABORTED = "aborted"


_JOB_EDGES = {
    JobState.CREATED: {JobState.SUBMITTED},
    JobState.SUBMITTED: {JobState.SCHEDULED, JobState.ABORTED},
    JobState.SCHEDULED: {JobState.QUEUED, JobState.ABORTED},
    JobState.QUEUED: {JobState.RUNNING, JobState.ABORTED},
    JobState.RUNNING: {JobState.DONE, JobState.ABORTED},
    JobState.DONE: set(),
    JobState.ABORTED: set(),
}


class FailureClass(str, Enum):
    """Terminal failure taxonomy; every aborted job carries exactly one."""

    WORKLOAD_MANAGEMENT = "workload_management"
    DATA_MANAGEMENT = "data_management"
    SITE = "site"
    LICENSE_SERVER = "license_server"
    APPLICATION = "application"
    UNCLASSIFIED = "unclassified"
    OUTPUT_TRANSFER_LAST_MINUTE = "output_transfer_last_minute"


# When in a job's life each class strikes.  "pre" aborts before any CPU is
# burned, "mid" at a random fraction of the runtime, "post" after the full
# runtime (the expensive one: CPU spent, output lost).
FAILURE_TIMING = {
    FailureClass.WORKLOAD_MANAGEMENT: "pre",
    FailureClass.DATA_MANAGEMENT: "pre",
    FailureClass.UNCLASSIFIED: "pre",
    FailureClass.LICENSE_SERVER: "pre",
    FailureClass.SITE: "mid",
    FailureClass.APPLICATION: "mid",
    FailureClass.OUTPUT_TRANSFER_LAST_MINUTE: "post",
}


@dataclass(frozen=True)
class AttemptRecord:
    """One execution attempt of a task (or of a whole job's task block)."""

    executor_id: str
    start_ms: int
    end_ms: int
    cpu_ms: int
    failure: Optional[FailureClass] = None

    def __post_init__(self):
        if self.end_ms < self.start_ms:
            raise ValueError("attempt ends before it starts")
        if self.cpu_ms > self.end_ms - self.start_ms:
            raise ValueError("cpu_ms exceeds wall time of the attempt")

    @property
    def succeeded(self) -> bool:
        return self.failure is None


@dataclass
class Task:
    """One docking-sized unit of work."""

    task_id: int
    cpu_cost_ms: int
    input_bytes: int = 0
    output_bytes: int = 0
    state: TaskState = TaskState.PENDING
    attempts: list[AttemptRecord] = field(default_factory=list)

    def advance(self, to: TaskState) -> None:
        if to not in _TASK_EDGES[self.state]:
            raise IllegalTransition(f"task {self.task_id}", self.state.value, to.value)
        self.state = to


@dataclass(frozen=True)
class GridJob:
    """A batch of tasks pushed through a broker to one computing element.

    Immutable; state changes go through :func:`transition`, which returns an
    updated copy.
    """

    job_id: int
    task_ids: tuple[int, ...]
    target_ce: Optional[str] = None
    state: JobState = JobState.CREATED
    timestamps: dict = field(default_factory=dict)
    failure_class: Optional[FailureClass] = None
    output_corrupted: bool = False  # logged Done but output lost in transfer

    def __post_init__(self):
        if not self.task_ids:
            raise ValueError(f"job {self.job_id} holds no tasks")
        if len(set(self.task_ids)) != len(self.task_ids):
            raise ValueError(f"job {self.job_id} lists a task twice")


def transition(job: GridJob, to: JobState, at_ms: int,
               failure_class: Optional[FailureClass] = None, **extra) -> GridJob:
    """Advance *job* to state *to* at virtual time *at_ms*; pure.

    ``failure_class`` is mandatory for the edge into ABORTED and rejected on
    every other edge.  Extra keyword fields (``target_ce``,
    ``output_corrupted``) are applied to the copy.
    """
    if to not in _JOB_EDGES[job.state]:
        raise IllegalTransition(f"job {job.job_id}", job.state.value, to.value)
    last = max(job.timestamps.values(), default=None)
    if last is not None and at_ms < last:
        raise TimeRegression(
            f"job {job.job_id}: t={at_ms}ms precedes last timestamp {last}ms")
    if to is JobState.ABORTED:
        if failure_class is None:
            raise ValueError(f"job {job.job_id}: abort requires a failure class")
    elif failure_class is not None:
        raise ValueError(f"job {job.job_id}: failure class on non-abort edge")
    stamps = dict(job.timestamps)
    stamps[to.value] = at_ms
    return replace(job, state=to, timestamps=stamps,
                   failure_class=failure_class, **extra)


@dataclass(frozen=True)
class DurationModel:
    """Distribution descriptor for per-task CPU cost, in seconds.

    kinds: ``constant`` (a), ``uniform`` (a=lo, b=hi), ``lognormal``
    (a=mean of the distribution, b=sigma of the underlying normal).
    """

    kind: str
    a: float
    b: float = 0.0

    def sample(self, rng) -> float:
        if self.kind == "constant":
            return self.a
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b)
        if self.kind == "lognormal":
            mu = math.log(self.a) - self.b ** 2 / 2.0
            return rng.lognormvariate(mu, self.b)
        raise ValueError(f"unknown duration kind {self.kind!r}")

    def mean(self) -> float:
        if self.kind == "constant":
            return self.a
        if self.kind == "uniform":
            return (self.a + self.b) / 2.0
        if self.kind == "lognormal":
            return self.a
        raise ValueError(f"unknown duration kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.a:g}"
        return f"{self.kind}:{self.a:g}:{self.b:g}"

    @classmethod
    def parse(cls, text: str) -> "DurationModel":
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "constant" and len(parts) == 2:
            return cls("constant", float(parts[1]))
        if kind in ("uniform", "lognormal") and len(parts) == 3:
            return cls(kind, float(parts[1]), float(parts[2]))
        raise ValueError(f"cannot parse duration model {text!r}")


@dataclass(frozen=True)
class ComputingElementSpec:
    ce_id: str
    cpu_slots: int
    queue_limit: int
    speed: float = 1.0            # (0, 1]; wall time = cpu_cost / speed
    fail_rate: float = 0.0        # per-job mid-run Site failure on this CE


@dataclass(frozen=True)
class ResourceBrokerSpec:
    rb_id: str
    throttle_per_min: int         # accepted submissions per sliding 60 s


@dataclass(frozen=True)
class StorageElementSpec:
    se_id: str
    bandwidth_bps: int
    transfer_failure_rate: float = 0.0


@dataclass(frozen=True)
class LicenseSpec:
    capacity: Optional[int] = None   # None: jobs need no license token
    required: bool = False


@dataclass(frozen=True)
class OutageWindow:
    start_s: float
    end_s: float

    def contains_ms(self, t_ms: int) -> bool:
        return to_ms(self.start_s) <= t_ms < to_ms(self.end_s)


@dataclass(frozen=True)
class FabricSpec:
    """The simulated grid: CEs, brokers, the information system, SEs, licenses."""

    ces: tuple[ComputingElementSpec, ...]
    rbs: tuple[ResourceBrokerSpec, ...]
    ses: tuple[StorageElementSpec, ...]
    license: LicenseSpec = LicenseSpec()
    publish_interval_s: float = 0.0      # 0: information system never goes stale
    sched_overhead: DurationModel = DurationModel("constant", 0.0)
    pull_latency_s: float = 0.5          # master round trip per pulled task
    dataset_bytes: int = 0               # compound library staged in Install


@dataclass(frozen=True)
class FailureModel:
    """Per-class failure rates plus correlated outage windows.

    ``success`` plus all class rates must sum to 1.  Outage windows model the
    correlated bursts (a whole CE dying, the license server going away) on
    top of the independent per-job draws.
    """

    success: float = 1.0
    rates: dict = field(default_factory=dict)  # FailureClass -> probability
    license_outages: tuple[OutageWindow, ...] = ()
    ce_outages: dict = field(default_factory=dict)  # ce_id -> (OutageWindow, ...)

    def rate(self, cls: FailureClass) -> float:
        return self.rates.get(cls, 0.0)

    def total(self) -> float:
        return self.success + sum(self.rates.values())

    def draw(self, u: float) -> Optional[FailureClass]:
        """Map a uniform draw to an outcome; None means success."""
        edge = self.success
        if u < edge:
            return None
        for cls in FailureClass:
            edge += self.rates.get(cls, 0.0)
            if u < edge:
                return cls
        return None  # u landed in float slack beyond the last edge

    @classmethod
    def none(cls) -> "FailureModel":
        return cls(success=1.0, rates={})


class SchedulerMode(str, Enum):
    PUSH = "push"
    PULL = "pull"


class ResubmissionMode(str, Enum):
    AUTOMATIC = "automatic"
    MANUAL = "manual"


@dataclass(frozen=True)
class ResubmissionPolicy:
    mode: ResubmissionMode = ResubmissionMode.AUTOMATIC
    manual_delay_s: float = 0.0
    blacklist_threshold: int = 0

    @classmethod
    def automatic(cls) -> "ResubmissionPolicy":
        return cls(ResubmissionMode.AUTOMATIC)

    @classmethod
    def manual(cls, delay_s: float, blacklist_threshold: int) -> "ResubmissionPolicy":
        return cls(ResubmissionMode.MANUAL, delay_s, blacklist_threshold)


@dataclass(frozen=True)
class CampaignConfig:
    scheduler_mode: SchedulerMode
    task_count: int
    task_duration: DurationModel
    fabric: FabricSpec
    failure_model: FailureModel = field(default_factory=FailureModel.none)
    job_granularity: int = 1
    resubmission_policy: ResubmissionPolicy = field(default_factory=ResubmissionPolicy.automatic)
    seed: int = 0
    wall_clock_limit_s: Optional[float] = None
    task_input_bytes: int = 0
    task_output_bytes: int = 0
    # pull-model knobs
    worker_target: int = 1            # concurrent worker agents to maintain
    worker_replacement: bool = True   # resubmit a worker job when one dies
    heartbeat_interval_s: float = 60.0
    heartbeat_timeout_s: float = 180.0
    poll_interval_s: float = 10.0     # worker retry period on WAIT


def validate_config(cfg: CampaignConfig) -> list[str]:
    """Check every config invariant; returns one message per violation."""
    v: list[str] = []
    if cfg.task_count <= 0:
        v.append(f"task_count: must be positive, got {cfg.task_count}")
    if cfg.job_granularity < 1:
        v.append(f"job_granularity: must be >= 1, got {cfg.job_granularity}")
    if cfg.task_duration.kind not in ("constant", "uniform", "lognormal"):
        v.append(f"task_duration: unknown kind {cfg.task_duration.kind!r}")
    elif cfg.task_duration.mean() <= 0:
        v.append("task_duration: mean must be positive")
    if cfg.task_duration.kind == "uniform" and not 0 < cfg.task_duration.a <= cfg.task_duration.b:
        v.append("task_duration: uniform needs 0 < lo <= hi")

    fm = cfg.failure_model
    total = fm.total()
    if abs(total - 1.0) > 1e-9:
        v.append(f"failure_model: success plus class rates sum to {total:.6g}, expected 1.0")
    for cls, rate in fm.rates.items():
        if not 0.0 <= rate <= 1.0:
            v.append(f"failure_model.{cls.value}: rate {rate} outside [0, 1]")
    if not 0.0 <= fm.success <= 1.0:
        v.append(f"failure_model.success: rate {fm.success} outside [0, 1]")
    for w in fm.license_outages:
        if w.end_s <= w.start_s:
            v.append(f"failure_model.license_outages: empty window {w.start_s}-{w.end_s}")
    for ce_id, windows in fm.ce_outages.items():
        for w in windows:
            if w.end_s <= w.start_s:
                v.append(f"failure_model.ce_outages[{ce_id}]: empty window {w.start_s}-{w.end_s}")

    fab = cfg.fabric
    if not fab.ces:
        v.append("fabric.ces: at least one computing element required")
    seen = set()
    for ce in fab.ces:
        if ce.ce_id in seen:
            v.append(f"fabric.ces: duplicate id {ce.ce_id!r}")
        seen.add(ce.ce_id)
        if ce.cpu_slots < 1:
            v.append(f"fabric.ces[{ce.ce_id}].cpu_slots: must be >= 1")
        if ce.queue_limit < 0:
            v.append(f"fabric.ces[{ce.ce_id}].queue_limit: must be >= 0")
        if not 0.0 < ce.speed <= 1.0:
            v.append(f"fabric.ces[{ce.ce_id}].speed: must be in (0, 1], got {ce.speed}")
        if not 0.0 <= ce.fail_rate <= 1.0:
            v.append(f"fabric.ces[{ce.ce_id}].fail_rate: outside [0, 1]")
    for ce_id in fm.ce_outages:
        if ce_id not in seen:
            v.append(f"failure_model.ce_outages: unknown computing element {ce_id!r}")
    if cfg.scheduler_mode is SchedulerMode.PUSH and not fab.rbs:
        v.append("fabric.rbs: push mode needs at least one resource broker")
    for rb in fab.rbs:
        if rb.throttle_per_min < 1:
            v.append(f"fabric.rbs[{rb.rb_id}].throttle_per_min: must be >= 1")
    if not fab.ses:
        v.append("fabric.ses: at least one storage element required")
    for se in fab.ses:
        if se.bandwidth_bps < 1:
            v.append(f"fabric.ses[{se.se_id}].bandwidth_bps: must be >= 1")
        if not 0.0 <= se.transfer_failure_rate <= 1.0:
            v.append(f"fabric.ses[{se.se_id}].transfer_failure_rate: outside [0, 1]")
    if fab.license.capacity is not None and fab.license.capacity < 0:
        v.append("fabric.license.capacity: must be >= 0 or unset")
    if fab.publish_interval_s < 0:
        v.append("fabric.publish_interval_s: must be >= 0")
    if fab.pull_latency_s < 0:
        v.append("fabric.pull_latency_s: must be >= 0")
    if fab.dataset_bytes < 0:
        v.append("fabric.dataset_bytes: must be >= 0")

    pol = cfg.resubmission_policy
    if pol.mode is ResubmissionMode.AUTOMATIC:
        if pol.manual_delay_s != 0 or pol.blacklist_threshold != 0:
            v.append("resubmission_policy: automatic mode takes no delay and no blacklist")
    else:
        if pol.manual_delay_s <= 0:
            v.append("resubmission_policy.manual_delay_s: manual mode needs a positive delay")
        if pol.blacklist_threshold < 1:
            v.append("resubmission_policy.blacklist_threshold: manual mode needs >= 1")

    if not -(2 ** 63) <= cfg.seed < 2 ** 64:
        v.append("seed: must fit in 64 bits")
    if cfg.wall_clock_limit_s is not None and cfg.wall_clock_limit_s <= 0:
        v.append("wall_clock_limit_s: must be positive or unset")
    if cfg.task_input_bytes < 0 or cfg.task_output_bytes < 0:
        v.append("task_input_bytes/task_output_bytes: must be >= 0")

    if cfg.scheduler_mode is SchedulerMode.PULL:
        if cfg.worker_target < 1:
            v.append(f"worker_target: must be >= 1, got {cfg.worker_target}")
        if cfg.heartbeat_interval_s <= 0:
            v.append("heartbeat_interval_s: must be positive")
        if cfg.heartbeat_timeout_s < cfg.heartbeat_interval_s:
            v.append("heartbeat_timeout_s: must be >= heartbeat_interval_s")
        if cfg.poll_interval_s <= 0:
            v.append("poll_interval_s: must be positive")
    return v
