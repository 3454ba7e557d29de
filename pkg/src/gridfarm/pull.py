"""Pull-model scheduler: worker agents fetch tasks from a master's queue.

The master holds the plan produced by the Planner hook; worker agents are
themselves grid jobs submitted onto the fabric.  Workers register, pull,
execute and return results until the queue drains; heartbeat silence beyond
the timeout requeues the victim's task at the queue head, which is what
guarantees a finally complete campaign whenever one worker survives.

``MasterState`` is a sequential state machine with explicit time inputs: the
simulator drives it with virtual time and the live harness drives it from
socket threads through a serialization point, so both share one logic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

from . import mockdock
from .errors import DuplicateWorker, InvalidSession, NoMatch, WallClockExceeded
from .fabric import FabricSim
from .metrics import CampaignResult
from .model import (
    AttemptRecord,
    CampaignConfig,
    FailureClass,
    FAILURE_TIMING,
    GridJob,
    JobState,
    Task,
    TaskState,
    to_ms,
    transition,
)
from .sim import EventKind, SimKernel


class WorkerState(str, Enum):
    REGISTERING = "registering"
    IDLE = "idle"
    BUSY = "busy"
    DEAD = "dead"


@dataclass
class WorkerAgent:
    worker_id: str
    session: str
    state: WorkerState = WorkerState.IDLE
    current_task: Optional[int] = None
    last_heartbeat_ms: int = 0
    tasks_completed: int = 0


@dataclass(frozen=True)
class TaskResult:
    task_id: int
    worker_id: str
    score: int
    cpu_ms: int
    produced_at_ms: int


@dataclass(frozen=True)
class TaskFarmPlugins:
    """The three application hooks: split, execute, merge.

    All three are pure functions over domain values, so the same plugin set
    drives the simulator and the live harness.
    """

    create_plan: Callable[[Sequence[int]], list[int]]
    execute_task: Callable[[int], int]
    merge_result: Callable[[dict, TaskResult], None]


def _identity_plan(task_ids: Sequence[int]) -> list[int]:
    return list(task_ids)


def _merge_into_store(store: dict, result: TaskResult) -> None:
    store[result.task_id] = result.score


DEFAULT_PLUGINS = TaskFarmPlugins(
    create_plan=_identity_plan,
    execute_task=mockdock.score_for,
    merge_result=_merge_into_store,
)


class MasterState:
    """Task queue, in-flight map and result store with exactly-once semantics.

    pending + in-flight + completed partition the task set after every
    operation; a result is stored at most once no matter how workers die,
    reconnect, or return stale work.
    """

    def __init__(self, plan: Iterable[int], heartbeat_interval_ms: int,
                 heartbeat_timeout_ms: int,
                 token_factory: Callable[[], str],
                 plugins: TaskFarmPlugins = DEFAULT_PLUGINS):
        plan = list(plan)
        if len(set(plan)) != len(plan):
            raise ValueError("plan lists a task twice")
        self.task_ids = frozenset(plan)
        self.pending: deque[int] = deque(plan)
        self.in_flight: dict[int, str] = {}          # task -> session
        self.results: dict[int, TaskResult] = {}
        self.merged: dict = {}
        self.workers: dict[str, WorkerAgent] = {}    # session -> agent
        self.heartbeat_interval_ms = heartbeat_interval_ms
        self.heartbeat_timeout_ms = heartbeat_timeout_ms
        self._token_factory = token_factory
        self._plugins = plugins
        self.decisions: list[dict] = []
        self._seq = 0

    # ------------------------------------------------------------- bookkeeping

    def _log(self, t_ms: int, kind: str, subject_id: str, detail: dict) -> None:
        self.decisions.append({"t_ms": t_ms, "seq": self._seq, "kind": kind,
                               "subject_id": subject_id, "detail": detail})
        self._seq += 1

    def _agent(self, session: str) -> WorkerAgent:
        agent = self.workers.get(session)
        if agent is None or agent.state is WorkerState.DEAD:
            raise InvalidSession(f"unknown or dead session {session!r}")
        return agent

    @property
    def done(self) -> bool:
        return not self.pending and not self.in_flight

    def completed_count(self) -> int:
        return len(self.results)

    def live_workers(self) -> list[WorkerAgent]:
        return [w for w in self.workers.values() if w.state is not WorkerState.DEAD]

    # -------------------------------------------------------------- operations

    def register_worker(self, worker_id: str, now_ms: int) -> str:
        for agent in self.workers.values():
            if agent.worker_id == worker_id and agent.state is not WorkerState.DEAD:
                raise DuplicateWorker(f"worker id {worker_id!r} is already live")
        session = self._token_factory()
        self.workers[session] = WorkerAgent(
            worker_id=worker_id, session=session, state=WorkerState.IDLE,
            last_heartbeat_ms=now_ms)
        self._log(now_ms, "register", f"worker/{worker_id}", {"session": session})
        return session

    def heartbeat(self, session: str, now_ms: int) -> None:
        agent = self._agent(session)
        agent.last_heartbeat_ms = now_ms

    def next_task(self, session: str, now_ms: int) -> tuple[str, Optional[int]]:
        """("assign", task_id) | ("wait", None) | ("shutdown", None)."""
        agent = self._agent(session)
        if agent.state is WorkerState.BUSY:
            raise InvalidSession(
                f"worker {agent.worker_id} pulled while already holding a task")
        agent.last_heartbeat_ms = now_ms
        if self.pending:
            task_id = self.pending.popleft()
            self.in_flight[task_id] = session
            agent.state = WorkerState.BUSY
            agent.current_task = task_id
            self._log(now_ms, "assign", f"task/{task_id}",
                      {"worker": agent.worker_id, "session": session})
            return "assign", task_id
        if self.in_flight:
            return "wait", None
        return "shutdown", None

    def submit_result(self, session: str, result: TaskResult, now_ms: int) -> str:
        """Store once; anything late, repeated or orphaned is a duplicate ack."""
        agent = self.workers.get(session)
        owner = self.in_flight.get(result.task_id)
        valid = (agent is not None and agent.state is WorkerState.BUSY
                 and owner == session and result.task_id not in self.results)
        if not valid:
            self._log(now_ms, "duplicate", f"task/{result.task_id}",
                      {"worker": result.worker_id,
                       "reason": "completed" if result.task_id in self.results
                                 else "not-assigned-to-session"})
            return "duplicate"
        del self.in_flight[result.task_id]
        self.results[result.task_id] = result
        self._plugins.merge_result(self.merged, result)
        agent.state = WorkerState.IDLE
        agent.current_task = None
        agent.tasks_completed += 1
        agent.last_heartbeat_ms = now_ms
        self._log(now_ms, "complete", f"task/{result.task_id}",
                  {"worker": agent.worker_id, "cpu_ms": result.cpu_ms,
                   "score": result.score})
        if self.done:
            self._log(now_ms, "shutdown", "master",
                      {"completed": len(self.results)})
        return "stored"

    def detect_failures(self, now_ms: int) -> list[tuple[str, Optional[int]]]:
        """Mark workers silent past the timeout as dead; requeue their tasks."""
        victims = []
        for session in sorted(self.workers,
                              key=lambda s: self.workers[s].worker_id):
            agent = self.workers[session]
            if agent.state is WorkerState.DEAD:
                continue
            if now_ms - agent.last_heartbeat_ms >= self.heartbeat_timeout_ms:
                victims.append((agent.worker_id, self._kill(session, now_ms)))
        return victims

    def mark_dead(self, session: str, now_ms: int) -> Optional[int]:
        """Explicit death notice (socket closed, simulated kill)."""
        agent = self.workers.get(session)
        if agent is None or agent.state is WorkerState.DEAD:
            return None
        return self._kill(session, now_ms)

    def _kill(self, session: str, now_ms: int) -> Optional[int]:
        agent = self.workers[session]
        agent.state = WorkerState.DEAD
        task_id = agent.current_task
        agent.current_task = None
        self._log(now_ms, "dead", f"worker/{agent.worker_id}",
                  {"requeued_task": task_id})
        if task_id is not None and self.in_flight.get(task_id) == session:
            del self.in_flight[task_id]
            self.pending.appendleft(task_id)  # head: recovery latency stays bounded
            self._log(now_ms, "requeue", f"task/{task_id}",
                      {"worker": agent.worker_id})
        return task_id

    def check_partition(self) -> None:
        """Assert pending/in-flight/completed partition the task set."""
        pending = set(self.pending)
        in_flight = set(self.in_flight)
        completed = set(self.results)
        assert pending | in_flight | completed == self.task_ids
        assert not pending & in_flight
        assert not pending & completed
        assert not in_flight & completed


# --------------------------------------------------------------------- sim

@dataclass
class _SimWorker:
    worker_id: str
    job_id: int
    session: Optional[str] = None
    ce_id: Optional[str] = None
    alive: bool = False
    busy_event: Optional[object] = None
    death_at_ms: Optional[int] = None   # scripted death, if any
    holds_token: bool = False


class PullCampaign:
    """Simulated pull campaign: worker agents are grid jobs on the fabric."""

    def __init__(self, cfg: CampaignConfig,
                 plugins: TaskFarmPlugins = DEFAULT_PLUGINS,
                 death_schedule: Optional[dict[str, float]] = None):
        self.cfg = cfg
        self.plugins = plugins
        self.kernel = SimKernel(cfg.seed)
        self.fabric = FabricSim(cfg.fabric, cfg.failure_model)
        self.death_schedule = {w: to_ms(t) for w, t in (death_schedule or {}).items()}
        self.tasks: dict[int, Task] = {}
        self.workers: dict[str, _SimWorker] = {}
        self.jobs: dict[int, GridJob] = {}
        self._session_counter = 0
        self._next_worker = 0
        self._next_job_id = 0
        self._rb_index = 0
        self._pending_submissions: dict[str, list] = {}
        self._retry_scheduled: dict[str, bool] = {}
        self._attempts: list[dict] = []
        self._cumulative_jobs = 0
        self._ces_used: set[str] = set()
        self._bytes_produced = 0
        self._end_ms = 0
        self._finished = False

        s = self.kernel.streams
        self._rng_durations = s.get("task-durations")
        self._rng_overhead = s.get("sched-overhead")
        self._rng_attempts = s.get("attempt-outcomes")
        self._rng_timing = s.get("failure-timing")

        for task_id in range(cfg.task_count):
            cost_ms = max(1, to_ms(cfg.task_duration.sample(self._rng_durations)))
            self.tasks[task_id] = Task(task_id=task_id, cpu_cost_ms=cost_ms,
                                       input_bytes=cfg.task_input_bytes,
                                       output_bytes=cfg.task_output_bytes)
        plan = plugins.create_plan(sorted(self.tasks))
        if set(plan) != set(self.tasks):
            raise ValueError("plan does not cover the campaign tasks exactly once")
        self.master = MasterState(
            plan,
            heartbeat_interval_ms=to_ms(cfg.heartbeat_interval_s),
            heartbeat_timeout_ms=to_ms(cfg.heartbeat_timeout_s),
            token_factory=self._next_session,
            plugins=plugins)

    def _next_session(self) -> str:
        self._session_counter += 1
        return f"sess-{self._session_counter:08d}"

    # ------------------------------------------------------- worker submission

    def _spawn_worker(self) -> None:
        worker_id = f"w{self._next_worker:05d}"
        self._next_worker += 1
        job_id = self._next_job_id
        self._next_job_id += 1
        job = GridJob(job_id=job_id, task_ids=(-job_id - 1,))  # placeholder payload
        self.jobs[job_id] = job
        self.workers[worker_id] = _SimWorker(
            worker_id=worker_id, job_id=job_id,
            death_at_ms=self.death_schedule.get(worker_id))
        rb = self.fabric.rbs[self._rb_index % len(self.fabric.rbs)]
        self._rb_index += 1
        self._pending_submissions.setdefault(rb.rb_id, []).append(worker_id)
        self._drain_submissions(rb)

    def _drain_submissions(self, rb) -> None:
        pending = self._pending_submissions.get(rb.rb_id, [])
        now = self.kernel.now()
        while pending:
            retry_at = rb.try_accept(now)
            if retry_at is not None:
                if not self._retry_scheduled.get(rb.rb_id):
                    self._retry_scheduled[rb.rb_id] = True
                    self.kernel.schedule(
                        retry_at, EventKind.JOB_SUBMISSION, f"rb/{rb.rb_id}",
                        action=lambda ev, r=rb: self._retry_submissions(r), log=False)
                return
            worker_id = pending.pop(0)
            self._accept_worker(rb, worker_id, now)

    def _retry_submissions(self, rb) -> None:
        self._retry_scheduled[rb.rb_id] = False
        self._drain_submissions(rb)

    def _accept_worker(self, rb, worker_id: str, now: int) -> None:
        worker = self.workers[worker_id]
        self.jobs[worker.job_id] = transition(self.jobs[worker.job_id],
                                              JobState.SUBMITTED, now)
        self._cumulative_jobs += 1
        self.kernel.schedule(now, EventKind.JOB_SUBMISSION, f"worker/{worker_id}",
                             {"rb": rb.rb_id})
        overhead_ms = max(0, to_ms(self.cfg.fabric.sched_overhead.sample(self._rng_overhead)))
        self.kernel.schedule(now + overhead_ms, EventKind.JOB_DISPATCH,
                             f"worker/{worker_id}", {"rb": rb.rb_id},
                             action=lambda ev, w=worker_id, r=rb: self._dispatch_worker(w, r, ev),
                             log=False)

    def _dispatch_worker(self, worker_id: str, rb, ev) -> None:
        if self._finished:
            return
        worker = self.workers[worker_id]
        now = ev.fire_at_ms
        snapshot = self.fabric.advertised()
        eligible = dict(self.fabric.ces)
        try:
            ce_id = rb.match(snapshot, self.jobs[worker.job_id], eligible)
        except NoMatch:
            self._worker_job_aborted(worker, now, FailureClass.WORKLOAD_MANAGEMENT,
                                     replace_worker=True)
            return
        self.jobs[worker.job_id] = transition(self.jobs[worker.job_id],
                                              JobState.SCHEDULED, now, target_ce=ce_id)
        self.kernel.schedule(now, EventKind.JOB_DISPATCH, f"worker/{worker_id}",
                             {"rb": rb.rb_id, "ce": ce_id})
        ce = self.fabric.ces[ce_id]
        if not ce.up or ce.queue_full():
            self._worker_job_aborted(worker, now, FailureClass.SITE, replace_worker=True)
            return
        self.jobs[worker.job_id] = transition(self.jobs[worker.job_id], JobState.QUEUED, now)
        worker.ce_id = ce_id
        ce.enqueue(worker.job_id)
        self._start_ready(ce, now)

    def _start_ready(self, ce, now: int) -> None:
        while True:
            job_id = ce.start_next()
            if job_id is None:
                return
            worker = next(w for w in self.workers.values() if w.job_id == job_id)
            self._start_worker(worker, ce, now)

    def _start_worker(self, worker: _SimWorker, ce, now: int) -> None:
        if self.fabric.license.capacity is not None:
            if not self.fabric.license.acquire(now):
                ce.release(worker.job_id)
                self._worker_job_aborted(worker, now, FailureClass.LICENSE_SERVER,
                                         replace_worker=True)
                return
            worker.holds_token = True
        self.jobs[worker.job_id] = transition(self.jobs[worker.job_id],
                                              JobState.RUNNING, now)
        worker.alive = True
        self._ces_used.add(ce.ce_id)
        self.kernel.schedule(now, EventKind.JOB_START, f"worker/{worker.worker_id}",
                             {"ce": ce.ce_id})
        worker.session = self.master.register_worker(worker.worker_id, now)
        if worker.death_at_ms is not None:
            at = max(now, worker.death_at_ms)
            self.kernel.schedule(at, EventKind.WORKER_DEATH,
                                 f"worker/{worker.worker_id}",
                                 {"class": FailureClass.SITE.value, "scripted": True},
                                 action=lambda ev, w=worker: self._kill_worker(
                                     w, ev.fire_at_ms, FailureClass.SITE,
                                     log_event=False))
        self._schedule_heartbeat(worker, now)
        self._pull(worker, now)

    # ------------------------------------------------------------- pull cycle

    def _pull(self, worker: _SimWorker, now: int) -> None:
        if not worker.alive:
            return
        verdict, task_id = self.master.next_task(worker.session, now)
        if verdict == "shutdown":
            self._retire_worker(worker, now)
            return
        if verdict == "wait":
            worker.busy_event = self.kernel.schedule(
                now + to_ms(self.cfg.poll_interval_s), EventKind.HEARTBEAT_DUE,
                f"worker/{worker.worker_id}",
                action=lambda ev, w=worker: self._pull(w, ev.fire_at_ms), log=False)
            return
        self._execute(worker, task_id, now)

    def _execute(self, worker: _SimWorker, task_id: int, now: int) -> None:
        task = self.tasks[task_id]
        if task.state is TaskState.PENDING:
            task.advance(TaskState.ASSIGNED)
            task.advance(TaskState.RUNNING)
        ce = self.fabric.ces[worker.ce_id]
        exec_ms = ce.run_ms(task.cpu_cost_ms)
        latency_ms = to_ms(self.cfg.fabric.pull_latency_s)
        outcome = self.cfg.failure_model.draw(self._rng_attempts.random())
        if outcome is None:
            end = now + latency_ms + exec_ms
            worker.busy_event = self.kernel.schedule(
                end, EventKind.JOB_END, f"worker/{worker.worker_id}",
                action=lambda ev, w=worker, t=task_id, s=now: self._complete(
                    w, t, s, ev.fire_at_ms), log=False)
            return
        # the drawn class decides when the worker dies during this attempt
        timing = FAILURE_TIMING[outcome]
        if timing == "pre":
            death = now + latency_ms
            cpu = 0
        elif timing == "mid":
            death = now + latency_ms + max(1, int(round(exec_ms * self._rng_timing.random())))
            cpu = death - now - latency_ms
        else:  # full run, result lost on return
            death = now + latency_ms + exec_ms
            cpu = exec_ms
        worker.busy_event = self.kernel.schedule(
            death, EventKind.WORKER_DEATH, f"worker/{worker.worker_id}",
            {"class": outcome.value, "task": task_id, "cpu_ms": cpu},
            action=lambda ev, w=worker, o=outcome, t=task_id, s=now, c=cpu:
                self._die_in_flight(w, o, t, s, c, ev.fire_at_ms))

    def _complete(self, worker: _SimWorker, task_id: int, started: int, now: int) -> None:
        if not worker.alive:
            return
        worker.busy_event = None
        task = self.tasks[task_id]
        score = self.plugins.execute_task(task_id)
        cpu_ms = now - started - to_ms(self.cfg.fabric.pull_latency_s)
        result = TaskResult(task_id=task_id, worker_id=worker.worker_id,
                            score=score, cpu_ms=cpu_ms, produced_at_ms=now)
        status = self.master.submit_result(worker.session, result, now)
        self._attempts.append({"executor": worker.worker_id, "start_ms": started,
                               "end_ms": now, "cpu_ms": cpu_ms, "success": True})
        if status == "stored":
            if task.state is TaskState.RUNNING:
                task.advance(TaskState.COMPLETED)
            task.attempts.append(_attempt(worker, started, now, cpu_ms, None))
            self._bytes_produced += task.output_bytes
        if self.master.done and not self._finished:
            self._finish(now)
        self._pull(worker, now)

    def _die_in_flight(self, worker: _SimWorker, outcome: FailureClass,
                       task_id: int, started: int, cpu_ms: int, now: int) -> None:
        if not worker.alive:
            return
        task = self.tasks[task_id]
        if task.state is TaskState.RUNNING:
            task.advance(TaskState.FAILED)
            task.advance(TaskState.PENDING)
        task.attempts.append(_attempt(worker, started, now, cpu_ms, outcome))
        self._attempts.append({"executor": worker.worker_id, "start_ms": started,
                               "end_ms": now, "cpu_ms": cpu_ms, "success": False})
        self._kill_worker(worker, now, outcome, log_event=False)

    def _kill_worker(self, worker: _SimWorker, now: int, cls: FailureClass,
                     log_event: bool = True) -> None:
        if not worker.alive:
            return
        worker.alive = False
        if worker.busy_event is not None:
            self.kernel.cancel(worker.busy_event)
            worker.busy_event = None
        if log_event:
            self.kernel.schedule(now, EventKind.WORKER_DEATH,
                                 f"worker/{worker.worker_id}", {"class": cls.value})
        ce = self.fabric.ces.get(worker.ce_id)
        if ce is not None:
            ce.release(worker.job_id)
        self._release_token(worker)
        if self.jobs[worker.job_id].state is JobState.RUNNING:
            self.jobs[worker.job_id] = transition(
                self.jobs[worker.job_id], JobState.ABORTED, now, failure_class=cls)
            self.kernel.schedule(now, EventKind.JOB_END, f"worker/{worker.worker_id}",
                                 {"outcome": "aborted", "class": cls.value,
                                  "cpu_ms": 0, "ce": worker.ce_id})
        if ce is not None:
            self._start_ready(ce, now)
        # the master only notices at heartbeat timeout; detection sweeps requeue

    def _worker_job_aborted(self, worker: _SimWorker, now: int, cls: FailureClass,
                            replace_worker: bool) -> None:
        self.jobs[worker.job_id] = transition(self.jobs[worker.job_id],
                                              JobState.ABORTED, now, failure_class=cls)
        self.kernel.schedule(now, EventKind.JOB_END, f"worker/{worker.worker_id}",
                             {"outcome": "aborted", "class": cls.value,
                              "cpu_ms": 0, "ce": worker.ce_id})
        if replace_worker and self.cfg.worker_replacement and not self.master.done \
                and not self._finished:
            self._spawn_worker()

    def _retire_worker(self, worker: _SimWorker, now: int) -> None:
        worker.alive = False
        self._release_token(worker)
        ce = self.fabric.ces.get(worker.ce_id)
        if ce is not None:
            ce.release(worker.job_id)
        if self.jobs[worker.job_id].state is JobState.RUNNING:
            self.jobs[worker.job_id] = transition(self.jobs[worker.job_id],
                                                  JobState.DONE, now)
            self.kernel.schedule(now, EventKind.JOB_END, f"worker/{worker.worker_id}",
                                 {"outcome": "done", "class": None, "cpu_ms": 0,
                                  "ce": worker.ce_id})
        if ce is not None:
            self._start_ready(ce, now)

    def _release_token(self, worker: _SimWorker) -> None:
        if worker.holds_token:
            self.fabric.license.release()
            worker.holds_token = False

    # ---------------------------------------------------------- housekeeping

    def _schedule_heartbeat(self, worker: _SimWorker, now: int) -> None:
        def beat(ev, w=worker):
            if not w.alive or self._finished:
                return
            try:
                self.master.heartbeat(w.session, ev.fire_at_ms)
            except InvalidSession:
                return
            self._schedule_heartbeat(w, ev.fire_at_ms)

        self.kernel.schedule(now + self.master.heartbeat_interval_ms,
                             EventKind.HEARTBEAT_DUE, f"worker/{worker.worker_id}",
                             action=beat, log=False)

    def _workers_in_play(self) -> bool:
        """True while some worker job may still produce pulls."""
        terminal = (JobState.DONE, JobState.ABORTED)
        return any(self.jobs[w.job_id].state not in terminal
                   for w in self.workers.values())

    def _schedule_detection(self, now: int) -> None:
        def sweep(ev):
            if self._finished:
                return
            victims = self.master.detect_failures(ev.fire_at_ms)
            for worker_id, _task in victims:
                worker = self.workers[worker_id]
                if worker.alive:
                    # defensive: sim workers are never silent while alive
                    self._kill_worker(worker, ev.fire_at_ms, FailureClass.UNCLASSIFIED)
                if self.cfg.worker_replacement and not self.master.done:
                    self._spawn_worker()
            if self.master.done:
                if not self._finished:
                    self._finish(ev.fire_at_ms)
            elif self._workers_in_play():
                self._schedule_detection(ev.fire_at_ms)
            # otherwise the campaign is starved: stop sweeping so the run ends

        self.kernel.schedule(now + self.master.heartbeat_interval_ms,
                             EventKind.HEARTBEAT_DUE, "master",
                             action=sweep, log=False)

    def _schedule_publish(self, at_ms: int) -> None:
        def fire(ev):
            self.fabric.publish_snapshot(ev.fire_at_ms)
            if not self._finished:
                self._schedule_publish(ev.fire_at_ms + self.fabric.infosys.publish_interval_ms)

        self.kernel.schedule(at_ms, EventKind.SNAPSHOT_PUBLISH, "is",
                             {"interval_ms": self.fabric.infosys.publish_interval_ms},
                             action=fire)

    def _finish(self, now: int) -> None:
        self._finished = True
        self._end_ms = now

    # ----------------------------------------------------------------- runner

    def run(self) -> CampaignResult:
        cfg = self.cfg
        for _ in range(min(cfg.worker_target, cfg.task_count)):
            self._spawn_worker()
        if self.fabric.infosys.publish_interval_ms > 0:
            self._schedule_publish(0)
        self._schedule_detection(0)
        limit_ms = None if cfg.wall_clock_limit_s is None else to_ms(cfg.wall_clock_limit_s)
        self.kernel.run_until(limit_ms)
        if not self.master.done:
            result = self._result(completed=False)
            if limit_ms is not None and self.kernel.now() >= limit_ms:
                raise WallClockExceeded(result)
            return result
        if not self._finished:
            self._finish(self.kernel.now())
        return self._result(completed=True)

    def _result(self, completed: bool) -> CampaignResult:
        return CampaignResult(
            scheduler_mode="pull",
            seed=self.cfg.seed,
            task_count=self.cfg.task_count,
            events=self.kernel.log,
            decisions=self.master.decisions,
            attempts=self._attempts,
            tasks_completed=self.master.completed_count(),
            cumulative_jobs=self._cumulative_jobs,
            ces_used=len(self._ces_used),
            bytes_produced=self._bytes_produced,
            wall_ms=self._end_ms if self._finished else self.kernel.now(),
            completed=completed,
            resubmissions=sum(1 for d in self.master.decisions if d["kind"] == "requeue"),
        )


def _attempt(worker: _SimWorker, start: int, end: int, cpu: int,
             failure: Optional[FailureClass]) -> AttemptRecord:
    return AttemptRecord(executor_id=worker.worker_id, start_ms=start, end_ms=end,
                         cpu_ms=min(cpu, end - start), failure=failure)


def run_pull_campaign(cfg: CampaignConfig,
                      plugins: TaskFarmPlugins = DEFAULT_PLUGINS,
                      death_schedule: Optional[dict[str, float]] = None) -> CampaignResult:
    return PullCampaign(cfg, plugins, death_schedule).run()
