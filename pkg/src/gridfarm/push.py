"""Push-model scheduler: batch jobs through brokers onto computing elements.

Tasks are grouped into fixed-size jobs, staged data is replicated to storage
elements, probe jobs gate each CE, and production jobs flow through broker
throttles and the (possibly stale) information system.  Aborted jobs are
resubmitted automatically or by a modeled operator with a delay and a
blacklist rule; automatic resubmission against a stale snapshot is exactly
what makes a falsely-free failing CE swallow the campaign.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .errors import InvalidGranularity, NoMatch, WallClockExceeded
from .fabric import ComputingElementSim, FabricSim
from .metrics import CampaignResult
from .model import (
    AttemptRecord,
    CampaignConfig,
    FailureClass,
    FAILURE_TIMING,
    GridJob,
    JobState,
    ResubmissionMode,
    Task,
    TaskState,
    to_ms,
    transition,
)
from .sim import EventKind, SimKernel

PROBE_COST_MS = 1000
REGISTRATION_RETRIES = 3


def split_tasks(task_count: int, granularity: int, first_job_id: int = 0) -> list[GridJob]:
    """Group task ids 0..task_count-1 into jobs of `granularity` tasks.

    All jobs but possibly the last hold exactly `granularity` tasks; every
    task appears exactly once.
    """
    if task_count < 1 or granularity < 1:
        raise InvalidGranularity(
            f"task_count={task_count}, granularity={granularity}; both must be >= 1")
    jobs = []
    job_id = first_job_id
    for lo in range(0, task_count, granularity):
        ids = tuple(range(lo, min(lo + granularity, task_count)))
        jobs.append(GridJob(job_id=job_id, task_ids=ids))
        job_id += 1
    return jobs


@dataclass
class _LiveJob:
    """Mutable simulation-side view of one job instance."""

    job: GridJob
    rb_id: Optional[str] = None
    outcome: Optional[FailureClass] = None   # drawn fate; None = success
    start_ms: Optional[int] = None
    end_event: Optional[object] = None
    holds_token: bool = False
    resubmission: bool = False
    se_index: int = 0


class PushCampaign:
    """Owns one push campaign end to end: install, test, production."""

    def __init__(self, cfg: CampaignConfig):
        self.cfg = cfg
        self.kernel = SimKernel(cfg.seed)
        self.fabric = FabricSim(cfg.fabric, cfg.failure_model)
        self.tasks: dict[int, Task] = {}
        self.live: dict[int, _LiveJob] = {}
        self.excluded_ces: set[str] = set()
        self.blacklisted_ces: set[str] = set()
        self.install_report: dict[str, dict] = {}
        self.test_report: dict[str, bool] = {}
        self.registration_ledger: list[dict] = []
        self._next_job_id = 0
        self._rb_index = 0
        self._se_index = 0
        self._pending_submissions: dict[str, list] = {}
        self._retry_scheduled: dict[str, bool] = {}
        self._consecutive_site_failures: dict[str, int] = {}
        self._completed_tasks = 0
        self._cumulative_jobs = 0
        self._resubmissions = 0
        self._bytes_produced = 0
        self._ces_used: set[str] = set()
        self._attempts: list[dict] = []
        self._finished = False
        self._end_ms = 0
        self._install_done = False
        self._test_done = False

        s = self.kernel.streams
        self._rng_durations = s.get("task-durations")
        self._rng_overhead = s.get("sched-overhead")
        self._rng_outcomes = s.get("job-outcomes")
        self._rng_timing = s.get("failure-timing")
        self._rng_staging = s.get("staging")
        self._rng_registration = s.get("registration")

    # ------------------------------------------------------------------ phases

    def run_install_phase(self) -> dict:
        """Replicate the compound library to every SE before production."""
        nbytes = self.cfg.fabric.dataset_bytes
        for se in self.fabric.ses:
            attempts = 0
            t = self.kernel.now()
            ok = False
            while attempts < REGISTRATION_RETRIES and not ok:
                attempts += 1
                t += se.transfer_ms(nbytes)
                failed = nbytes > 0 and self._rng_staging.random() < se.transfer_failure_rate
                self.kernel.schedule(
                    t, EventKind.TRANSFER_END, f"se/{se.se_id}",
                    {"bytes": nbytes, "failed": failed, "staging": True})
                ok = not failed
            if ok:
                se.bytes_stored += nbytes
            self.install_report[se.se_id] = {
                "ok": ok,
                "staged_bytes": nbytes if ok else 0,
                "attempts": attempts,
                "failure_class": None if ok else FailureClass.DATA_MANAGEMENT.value,
            }
        self.kernel.run()
        self._install_done = True
        return self.install_report

    def run_test_phase(self) -> dict:
        """One probe job per CE; a CE whose probe aborts is excluded."""
        for ce_id in sorted(self.fabric.ces):
            ce = self.fabric.ces[ce_id]
            job_id = self._next_job_id
            self._next_job_id += 1
            t = self.kernel.now()
            if not ce.up:
                self.kernel.schedule(t, EventKind.JOB_END, f"job/{job_id}",
                                     {"outcome": "aborted", "class": FailureClass.SITE.value,
                                      "cpu_ms": 0, "ce": ce_id, "probe": True})
                self.test_report[ce_id] = False
                continue
            run_ms = ce.run_ms(PROBE_COST_MS)
            fails = ce.spec.fail_rate > 0 and \
                self.kernel.streams.get(f"ce-fail/{ce_id}").random() < ce.spec.fail_rate
            self.kernel.schedule(t, EventKind.JOB_START, f"job/{job_id}",
                                 {"ce": ce_id, "probe": True})
            if fails:
                self.kernel.schedule(t + run_ms, EventKind.JOB_END, f"job/{job_id}",
                                     {"outcome": "aborted", "class": FailureClass.SITE.value,
                                      "cpu_ms": run_ms, "ce": ce_id, "probe": True})
            else:
                self.kernel.schedule(t + run_ms, EventKind.JOB_END, f"job/{job_id}",
                                     {"outcome": "done", "class": None,
                                      "cpu_ms": run_ms, "ce": ce_id, "probe": True})
            self.test_report[ce_id] = not fails
        self.kernel.run()
        self.excluded_ces |= {ce_id for ce_id, ok in self.test_report.items() if not ok}
        self._test_done = True
        return self.test_report

    # -------------------------------------------------------------- production

    def run_production(self) -> CampaignResult:
        cfg = self.cfg
        self._make_tasks()
        for skeleton in split_tasks(cfg.task_count, cfg.job_granularity,
                                    first_job_id=self._next_job_id):
            self._next_job_id = skeleton.job_id + 1
            self.live[skeleton.job_id] = _LiveJob(job=skeleton)
            self._queue_submission(skeleton.job_id, resubmission=False)
        self._schedule_outages()
        if self.fabric.infosys.publish_interval_ms > 0:
            self._schedule_publish(self.kernel.now())
        limit_ms = None if cfg.wall_clock_limit_s is None else to_ms(cfg.wall_clock_limit_s)
        self.kernel.run_until(limit_ms)
        if not self._finished:
            # either the limit cut us short or every CE became unusable
            result = self._result(completed=False)
            if limit_ms is not None and self.kernel.now() >= limit_ms:
                raise WallClockExceeded(result)
            return result
        self.collect_outputs()
        return self._result(completed=True)

    def _make_tasks(self) -> None:
        cfg = self.cfg
        for task_id in range(cfg.task_count):
            cost_ms = max(1, to_ms(cfg.task_duration.sample(self._rng_durations)))
            self.tasks[task_id] = Task(
                task_id=task_id, cpu_cost_ms=cost_ms,
                input_bytes=cfg.task_input_bytes, output_bytes=cfg.task_output_bytes)

    def _schedule_outages(self) -> None:
        for ce_id in sorted(self.cfg.failure_model.ce_outages):
            for w in self.cfg.failure_model.ce_outages[ce_id]:
                self.kernel.schedule(to_ms(w.start_s), EventKind.OPERATOR_ACTION,
                                     f"ce/{ce_id}", {"action": "ce_down"},
                                     action=lambda ev, c=ce_id: self._ce_down(c))
                self.kernel.schedule(to_ms(w.end_s), EventKind.OPERATOR_ACTION,
                                     f"ce/{ce_id}", {"action": "ce_up"},
                                     action=lambda ev, c=ce_id: self._ce_up(c))
        for w in self.cfg.failure_model.license_outages:
            self.kernel.schedule(to_ms(w.start_s), EventKind.LICENSE_OUTAGE_START, "license")
            self.kernel.schedule(to_ms(w.end_s), EventKind.LICENSE_OUTAGE_END, "license")

    def _schedule_publish(self, at_ms: int) -> None:
        def fire(ev):
            self.fabric.publish_snapshot(ev.fire_at_ms)
            if not self._finished:
                self._schedule_publish(ev.fire_at_ms + self.fabric.infosys.publish_interval_ms)

        self.kernel.schedule(at_ms, EventKind.SNAPSHOT_PUBLISH, "is",
                             {"interval_ms": self.fabric.infosys.publish_interval_ms},
                             action=fire)

    # ------------------------------------------------------------- submission

    def _queue_submission(self, job_id: int, resubmission: bool) -> None:
        rb = self.fabric.rbs[self._rb_index % len(self.fabric.rbs)]
        self._rb_index += 1
        self.live[job_id].rb_id = rb.rb_id
        self.live[job_id].resubmission = resubmission
        self._pending_submissions.setdefault(rb.rb_id, []).append(job_id)
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
            job_id = pending.pop(0)
            self._accept_job(rb, job_id, now)

    def _retry_submissions(self, rb) -> None:
        self._retry_scheduled[rb.rb_id] = False
        self._drain_submissions(rb)

    def _accept_job(self, rb, job_id: int, now: int) -> None:
        entry = self.live[job_id]
        entry.job = transition(entry.job, JobState.SUBMITTED, now)
        self._cumulative_jobs += 1
        self.kernel.schedule(now, EventKind.JOB_SUBMISSION, f"job/{job_id}",
                             {"rb": rb.rb_id, "resubmission": entry.resubmission})
        overhead_ms = max(0, to_ms(self.cfg.fabric.sched_overhead.sample(self._rng_overhead)))
        self.kernel.schedule(now + overhead_ms, EventKind.JOB_DISPATCH, f"job/{job_id}",
                             {"rb": rb.rb_id}, action=lambda ev: self._dispatch(job_id, ev),
                             log=False)

    # --------------------------------------------------------------- dispatch

    def _eligible_ces(self) -> dict[str, ComputingElementSim]:
        banned = self.excluded_ces | self.blacklisted_ces
        return {ce_id: ce for ce_id, ce in self.fabric.ces.items() if ce_id not in banned}

    def _dispatch(self, job_id: int, ev) -> None:
        if self._finished:
            return
        entry = self.live[job_id]
        now = ev.fire_at_ms
        entry.outcome = self.cfg.failure_model.draw(self._rng_outcomes.random())
        if entry.outcome is not None and FAILURE_TIMING[entry.outcome] == "pre" \
                and entry.outcome is not FailureClass.LICENSE_SERVER:
            # scheduling-time failure: never reaches a computing element
            self._abort(job_id, now, entry.outcome, cpu_ms=0, ce_id=None)
            return
        rb = next(r for r in self.fabric.rbs if r.rb_id == entry.rb_id)
        snapshot = self.fabric.advertised()
        try:
            ce_id = rb.match(snapshot, entry.job, self._eligible_ces())
        except NoMatch:
            self._abort(job_id, now, FailureClass.WORKLOAD_MANAGEMENT, cpu_ms=0, ce_id=None)
            return
        entry.job = transition(entry.job, JobState.SCHEDULED, now, target_ce=ce_id)
        self.kernel.schedule(now, EventKind.JOB_DISPATCH, f"job/{job_id}",
                             {"rb": rb.rb_id, "ce": ce_id,
                              "resubmission": entry.resubmission})
        ce = self.fabric.ces[ce_id]
        if not ce.up:
            self._abort(job_id, now, FailureClass.SITE, cpu_ms=0, ce_id=ce_id)
            return
        if ce.queue_full():
            self._abort(job_id, now, FailureClass.SITE, cpu_ms=0, ce_id=ce_id)
            return
        entry.job = transition(entry.job, JobState.QUEUED, now)
        ce.enqueue(job_id)
        self._start_ready(ce, now)

    # -------------------------------------------------------------- execution

    def _start_ready(self, ce: ComputingElementSim, now: int) -> None:
        while True:
            job_id = ce.start_next()
            if job_id is None:
                return
            self._start_job(job_id, ce, now)

    def _start_job(self, job_id: int, ce: ComputingElementSim, now: int) -> None:
        entry = self.live[job_id]
        if entry.outcome is FailureClass.LICENSE_SERVER:
            ce.release(job_id)
            self._abort(job_id, now, FailureClass.LICENSE_SERVER, cpu_ms=0, ce_id=ce.ce_id)
            return
        if self.fabric.license.capacity is not None:
            if not self.fabric.license.acquire(now):
                ce.release(job_id)
                self._abort(job_id, now, FailureClass.LICENSE_SERVER, cpu_ms=0, ce_id=ce.ce_id)
                return
            entry.holds_token = True
        outcome = entry.outcome
        if outcome is None and ce.spec.fail_rate > 0:
            if self.kernel.streams.get(f"ce-fail/{ce.ce_id}").random() < ce.spec.fail_rate:
                outcome = entry.outcome = FailureClass.SITE
        entry.job = transition(entry.job, JobState.RUNNING, now)
        entry.start_ms = now
        self._ces_used.add(ce.ce_id)
        for tid in entry.job.task_ids:
            task = self.tasks[tid]
            task.advance(TaskState.ASSIGNED)
            task.advance(TaskState.RUNNING)
        self.kernel.schedule(now, EventKind.JOB_START, f"job/{job_id}", {"ce": ce.ce_id})
        total_cost = sum(self.tasks[tid].cpu_cost_ms for tid in entry.job.task_ids)
        run_ms = ce.run_ms(total_cost)
        if outcome is not None and FAILURE_TIMING[outcome] == "mid":
            run_ms = max(1, int(round(run_ms * self._rng_timing.random())))
        entry.end_event = self.kernel.schedule(
            now + run_ms, EventKind.JOB_END, f"job/{job_id}",
            action=lambda ev: self._end_job(job_id, ce, ev), log=False)

    def _end_job(self, job_id: int, ce: ComputingElementSim, ev) -> None:
        entry = self.live[job_id]
        now = ev.fire_at_ms
        entry.end_event = None
        ce.release(job_id)
        self._release_token(entry)
        outcome = entry.outcome
        cpu_ms = now - entry.start_ms
        if outcome is not None and FAILURE_TIMING[outcome] == "mid":
            self._abort(job_id, now, outcome, cpu_ms=cpu_ms, ce_id=ce.ce_id, started=True)
        else:
            entry.job = transition(entry.job, JobState.DONE, now)
            self.kernel.schedule(now, EventKind.JOB_END, f"job/{job_id}",
                                 {"outcome": "done", "class": None,
                                  "cpu_ms": cpu_ms, "ce": ce.ce_id})
            self._attempts.append({"executor": ce.ce_id, "start_ms": entry.start_ms,
                                   "end_ms": now, "cpu_ms": cpu_ms,
                                   "success": outcome is None})
            self._record_task_attempts(entry, now, cpu_ms, failure=outcome)
            self._consecutive_site_failures[ce.ce_id] = 0
            self._schedule_transfer(job_id, ce, now)
        self._start_ready(ce, now)

    def _schedule_transfer(self, job_id: int, ce: ComputingElementSim, now: int) -> None:
        entry = self.live[job_id]
        se = self.fabric.se_for(self._se_index)
        entry.se_index = self._se_index
        self._se_index += 1
        nbytes = sum(self.tasks[tid].output_bytes for tid in entry.job.task_ids)
        t_end = now + se.transfer_ms(nbytes)
        fails = entry.outcome is FailureClass.OUTPUT_TRANSFER_LAST_MINUTE
        if not fails and se.transfer_failure_rate > 0:
            fails = self.kernel.streams.get(f"transfer/{se.se_id}").random() \
                < se.transfer_failure_rate
        self.kernel.schedule(t_end, EventKind.TRANSFER_END, f"job/{job_id}",
                             {"se": se.se_id, "bytes": nbytes, "failed": fails},
                             action=lambda ev: self._finish_transfer(job_id, fails, nbytes, ev))

    def _finish_transfer(self, job_id: int, failed: bool, nbytes: int, ev) -> None:
        entry = self.live[job_id]
        now = ev.fire_at_ms
        if failed:
            # the expensive failure: full CPU spent, results gone from the node
            entry.job = replace(entry.job, output_corrupted=True)
            for tid in entry.job.task_ids:
                self.tasks[tid].advance(TaskState.FAILED)
            self._resubmit_tasks(entry, now)
        else:
            self._bytes_produced += nbytes
            self.fabric.ses[entry.se_index % len(self.fabric.ses)].bytes_stored += nbytes
            for tid in entry.job.task_ids:
                self.tasks[tid].advance(TaskState.COMPLETED)
            self._completed_tasks += len(entry.job.task_ids)
            if self._completed_tasks >= self.cfg.task_count:
                self._finish(now)

    # ----------------------------------------------------------------- aborts

    def _abort(self, job_id: int, now: int, cls: FailureClass, cpu_ms: int,
               ce_id: Optional[str], started: bool = False) -> None:
        entry = self.live[job_id]
        entry.job = transition(entry.job, JobState.ABORTED, now, failure_class=cls)
        self.kernel.schedule(now, EventKind.JOB_END, f"job/{job_id}",
                             {"outcome": "aborted", "class": cls.value,
                              "cpu_ms": cpu_ms, "ce": ce_id})
        if started:
            self._attempts.append({"executor": ce_id, "start_ms": entry.start_ms,
                                   "end_ms": now, "cpu_ms": cpu_ms, "success": False})
            self._record_task_attempts(entry, now, cpu_ms, failure=cls)
            for tid in entry.job.task_ids:
                self.tasks[tid].advance(TaskState.FAILED)
        if ce_id is not None and cls is FailureClass.SITE:
            n = self._consecutive_site_failures.get(ce_id, 0) + 1
            self._consecutive_site_failures[ce_id] = n
        self._resubmit_tasks(entry, now, failed_ce=ce_id, failure_class=cls)

    def _release_token(self, entry: _LiveJob) -> None:
        if entry.holds_token:
            self.fabric.license.release()
            entry.holds_token = False

    def _record_task_attempts(self, entry: _LiveJob, end_ms: int, cpu_ms: int,
                              failure: Optional[FailureClass]) -> None:
        n = len(entry.job.task_ids)
        for tid in entry.job.task_ids:
            task = self.tasks[tid]
            per_task_cpu = task.cpu_cost_ms if failure is None else cpu_ms // n
            task.attempts.append(AttemptRecord(
                executor_id=entry.job.target_ce or "",
                start_ms=entry.start_ms, end_ms=end_ms,
                cpu_ms=min(per_task_cpu, end_ms - entry.start_ms),
                failure=failure))

    # ----------------------------------------------------------- resubmission

    def _resubmit_tasks(self, entry: _LiveJob, now: int,
                        failed_ce: Optional[str] = None,
                        failure_class: Optional[FailureClass] = None) -> None:
        if self._finished:
            return
        for tid in entry.job.task_ids:
            task = self.tasks[tid]
            if task.state is TaskState.FAILED:
                task.advance(TaskState.PENDING)
        policy = self.cfg.resubmission_policy
        new_id = self._next_job_id
        self._next_job_id += 1
        self.live[new_id] = _LiveJob(job=GridJob(job_id=new_id, task_ids=entry.job.task_ids))
        self._resubmissions += 1
        if policy.mode is ResubmissionMode.AUTOMATIC:
            self._queue_submission(new_id, resubmission=True)
            return
        delay_ms = to_ms(policy.manual_delay_s)

        def operator_acts(ev, jid=new_id, ce=failed_ce, cls=failure_class):
            if self._finished:
                return
            if ce is not None and cls is FailureClass.SITE \
                    and ce not in self.blacklisted_ces \
                    and self._consecutive_site_failures.get(ce, 0) >= policy.blacklist_threshold:
                self.blacklisted_ces.add(ce)
                self.kernel.schedule(ev.fire_at_ms, EventKind.OPERATOR_ACTION, f"ce/{ce}",
                                     {"action": "blacklist"})
            self._queue_submission(jid, resubmission=True)

        self.kernel.schedule(now + delay_ms, EventKind.OPERATOR_ACTION,
                             f"job/{entry.job.job_id}", {"action": "resubmit"},
                             action=operator_acts)

    # ------------------------------------------------------------ CE outages

    def _ce_down(self, ce_id: str) -> None:
        ce = self.fabric.ces.get(ce_id)
        if ce is None or not ce.up:
            return
        ce.up = False
        now = self.kernel.now()
        running, waiting = ce.evict_all()
        for job_id in running:
            entry = self.live[job_id]
            if entry.end_event is not None:
                self.kernel.cancel(entry.end_event)
                entry.end_event = None
            self._release_token(entry)
            cpu_ms = now - entry.start_ms
            self._abort(job_id, now, FailureClass.SITE, cpu_ms=cpu_ms,
                        ce_id=ce_id, started=True)
        for job_id in waiting:
            self._abort(job_id, now, FailureClass.SITE, cpu_ms=0, ce_id=ce_id)

    def _ce_up(self, ce_id: str) -> None:
        ce = self.fabric.ces.get(ce_id)
        if ce is not None:
            ce.up = True

    # -------------------------------------------------------------- wrap-up

    def _finish(self, now: int) -> None:
        self._finished = True
        self._end_ms = now

    def collect_outputs(self) -> list[dict]:
        """Register every completed job's output and a backup replica."""
        if self.registration_ledger:
            return self.registration_ledger
        ses = [se.se_id for se in self.fabric.ses]
        for job_id in sorted(self.live):
            entry = self.live[job_id]
            if entry.job.state is not JobState.DONE or entry.job.output_corrupted:
                continue
            primary = ses[entry.se_index % len(ses)]
            backup = None
            for step in range(1, len(ses) + REGISTRATION_RETRIES):
                candidate = ses[(entry.se_index + step) % len(ses)]
                if candidate == primary and len(ses) > 1:
                    continue
                se = self.fabric.ses[(entry.se_index + step) % len(ses)]
                if self._rng_registration.random() >= se.transfer_failure_rate:
                    backup = candidate
                    break
            for tid in entry.job.task_ids:
                self.registration_ledger.append({
                    "task_id": tid,
                    "job_id": job_id,
                    "ce_id": entry.job.target_ce,
                    "primary_se": primary,
                    "backup_se": backup if backup is not None else "UNREGISTERED",
                    "bytes": self.tasks[tid].output_bytes,
                })
        return self.registration_ledger

    def _result(self, completed: bool) -> CampaignResult:
        return CampaignResult(
            scheduler_mode="push",
            seed=self.cfg.seed,
            task_count=self.cfg.task_count,
            events=self.kernel.log,
            decisions=[],
            attempts=self._attempts,
            tasks_completed=self._completed_tasks,
            cumulative_jobs=self._cumulative_jobs,
            ces_used=len(self._ces_used),
            bytes_produced=self._bytes_produced,
            wall_ms=self._end_ms if completed else self.kernel.now(),
            completed=completed,
            resubmissions=self._resubmissions,
            registration_ledger=self.registration_ledger,
        )


def run_push_campaign(cfg: CampaignConfig, with_phases: bool = True) -> CampaignResult:
    """Convenience runner: install + test + production with one call."""
    campaign = PushCampaign(cfg)
    if with_phases:
        campaign.run_install_phase()
        campaign.run_test_phase()
    return campaign.run_production()
