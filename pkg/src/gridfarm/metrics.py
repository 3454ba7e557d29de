"""Campaign figures of merit and report emission.

Everything here is a pure function over immutable logs and attempt lists, so
report generation can run in parallel with anything.  Plotting is not done
here; reports are data.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .constants import SECONDS_PER_DAY, SECONDS_PER_WEEK, SECONDS_PER_YEAR
from .errors import SchemaMismatch, UnknownFormat, ZeroWallClock, ZeroWorkers
from .model import FailureClass

REPORT_VERSION = 1

CSV_COLUMNS = [
    "report_version", "scheduler_mode", "seed", "task_count",
    "total_tasks_completed", "total_cpu_years", "wall_clock_seconds",
    "cumulative_grid_jobs", "max_concurrent_cpus", "ce_count_used",
    "crunching_factor", "distribution_efficiency",
    "throughput_tasks_per_second", "seconds_per_task",
    "success_rate_logged", "success_rate_after_output_check",
    "bytes_produced", "completed",
] + [f"failure_{cls.value}" for cls in FailureClass]


def crunching_factor(total_cpu_seconds: float, wall_seconds: float) -> float:
    """Sequential CPU time delivered over campaign wall time: effective speedup."""
    if wall_seconds <= 0:
        raise ZeroWallClock(f"wall_seconds={wall_seconds}")
    return total_cpu_seconds / wall_seconds

def distribution_efficiency(cf: float, max_concurrent: int) -> float:
    """Crunching factor over the concurrency peak; in [0, 1] for log-derived inputs."""
    if max_concurrent < 1:
        raise ZeroWorkers(f"max_concurrent={max_concurrent}")
    return cf / max_concurrent


def throughput(completed_tasks: int, wall_seconds: float) -> tuple[float, float]:
    """(tasks per second, seconds per task)."""
    if wall_seconds <= 0:
        raise ZeroWallClock(f"wall_seconds={wall_seconds}")
    per_second = completed_tasks / wall_seconds
    return per_second, (wall_seconds / completed_tasks if completed_tasks else float("inf"))


@dataclass(frozen=True)
class CampaignReport:
    scheduler_mode: str
    seed: int
    task_count: int
    total_tasks_completed: int
    total_cpu_years: float
    wall_clock_seconds: float
    cumulative_grid_jobs: int
    max_concurrent_cpus: int
    ce_count_used: int
    crunching_factor: float
    distribution_efficiency: float
    throughput_tasks_per_second: float
    seconds_per_task: float
    success_rate_logged: float
    success_rate_after_output_check: float
    failure_attribution: dict = field(default_factory=dict)  # class value -> rate
    bytes_produced: int = 0
    completed: bool = True
    report_version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        d = {col: getattr(self, col) for col in (
            "report_version", "scheduler_mode", "seed", "task_count",
            "total_tasks_completed", "total_cpu_years", "wall_clock_seconds",
            "cumulative_grid_jobs", "max_concurrent_cpus", "ce_count_used",
            "crunching_factor", "distribution_efficiency",
            "throughput_tasks_per_second", "seconds_per_task",
            "success_rate_logged", "success_rate_after_output_check",
            "bytes_produced", "completed")}
        d["failure_attribution"] = dict(sorted(self.failure_attribution.items()))
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignReport":
        if data.get("report_version") != REPORT_VERSION:
            raise SchemaMismatch(
                f"report_version {data.get('report_version')!r}, expected {REPORT_VERSION}")
        try:
            return cls(
                scheduler_mode=data["scheduler_mode"],
                seed=data["seed"],
                task_count=data["task_count"],
                total_tasks_completed=data["total_tasks_completed"],
                total_cpu_years=data["total_cpu_years"],
                wall_clock_seconds=data["wall_clock_seconds"],
                cumulative_grid_jobs=data["cumulative_grid_jobs"],
                max_concurrent_cpus=data["max_concurrent_cpus"],
                ce_count_used=data["ce_count_used"],
                crunching_factor=data["crunching_factor"],
                distribution_efficiency=data["distribution_efficiency"],
                throughput_tasks_per_second=data["throughput_tasks_per_second"],
                seconds_per_task=data["seconds_per_task"],
                success_rate_logged=data["success_rate_logged"],
                success_rate_after_output_check=data["success_rate_after_output_check"],
                failure_attribution=dict(data["failure_attribution"]),
                bytes_produced=data["bytes_produced"],
                completed=data["completed"],
            )
        except KeyError as exc:
            raise SchemaMismatch(f"report is missing field {exc.args[0]!r}") from None


def validate_report(report: CampaignReport) -> list[str]:
    """Identity checks every emitted report must satisfy."""
    v = []
    cpu_s = report.total_cpu_years * SECONDS_PER_YEAR
    if report.wall_clock_seconds > 0:
        cf = cpu_s / report.wall_clock_seconds
        if abs(cf - report.crunching_factor) > 1e-9 * max(1.0, cf):
            v.append(f"crunching_factor {report.crunching_factor} != cpu/wall {cf}")
        de = report.crunching_factor / max(report.max_concurrent_cpus, 1)
        if abs(de - report.distribution_efficiency) > 1e-12:
            v.append(f"distribution_efficiency {report.distribution_efficiency} != cf/max {de}")
    if report.success_rate_after_output_check > report.success_rate_logged + 1e-12:
        v.append("success_rate_after_output_check exceeds success_rate_logged")
    total = report.success_rate_after_output_check + sum(report.failure_attribution.values())
    if report.cumulative_grid_jobs and abs(total - 1.0) > 1e-9:
        v.append(f"attribution rates plus success sum to {total}, expected 1.0")
    return v


def success_decomposition(events: Iterable[dict]) -> tuple[float, float, dict]:
    """(logged success rate, after-output-check rate, attribution) from an event log.

    The logged rate counts terminal jobs that reached Done; the checked rate
    additionally drops Done jobs whose output transfer failed at the last
    minute (those are logged as finished although the results are gone).
    Attribution maps each first-failure class to its share of all terminal
    jobs, with lost outputs attributed to the transfer class, so the map plus
    the checked rate sums to one.  Probe jobs are not production work and are
    skipped.
    """
    events = list(events)
    lost_output = {rec["subject_id"] for rec in events
                   if rec["kind"] == "transfer_end" and rec["detail"].get("failed")}
    done = 0
    corrupted = 0
    aborted: dict[str, int] = {}
    for rec in events:
        if rec["kind"] != "job_end" or rec["detail"].get("probe"):
            continue
        detail = rec["detail"]
        if detail["outcome"] == "done":
            done += 1
            if rec["subject_id"] in lost_output:
                corrupted += 1
        else:
            cls = detail["class"]
            aborted[cls] = aborted.get(cls, 0) + 1
    terminal = done + sum(aborted.values())
    if terminal == 0:
        return 1.0, 1.0, {}
    attribution = {cls: n / terminal for cls, n in sorted(aborted.items())}
    if corrupted:
        attribution[FailureClass.OUTPUT_TRANSFER_LAST_MINUTE.value] = (
            attribution.get(FailureClass.OUTPUT_TRANSFER_LAST_MINUTE.value, 0.0)
            + corrupted / terminal)
    logged = done / terminal
    checked = (done - corrupted) / terminal
    return logged, checked, attribution


@dataclass
class CampaignResult:
    """Everything a finished (or cut-short) campaign leaves behind."""

    scheduler_mode: str
    seed: int
    task_count: int
    events: list                      # kernel event log records
    decisions: list = field(default_factory=list)   # master decision log (pull)
    attempts: list = field(default_factory=list)    # job/worker busy intervals
    tasks_completed: int = 0
    cumulative_jobs: int = 0
    ces_used: int = 0
    bytes_produced: int = 0
    wall_ms: int = 0
    completed: bool = True
    resubmissions: int = 0
    registration_ledger: list = field(default_factory=list)


def build_report(result: CampaignResult) -> CampaignReport:
    """Fold a campaign result into the report; identities hold by construction."""
    total_cpu_ms = sum(a["cpu_ms"] for a in result.attempts if a["success"])
    wall_s = result.wall_ms / 1000.0
    cpu_s = total_cpu_ms / 1000.0
    cf = crunching_factor(cpu_s, wall_s) if wall_s > 0 else 0.0
    max_conc = max_concurrency((a["start_ms"], a["end_ms"]) for a in result.attempts)
    de = distribution_efficiency(cf, max_conc) if max_conc >= 1 else 0.0
    if wall_s > 0:
        per_s, s_per = throughput(result.tasks_completed, wall_s)
    else:
        per_s, s_per = 0.0, float("inf")
    logged, checked, attribution = success_decomposition(result.events)
    return CampaignReport(
        scheduler_mode=result.scheduler_mode,
        seed=result.seed,
        task_count=result.task_count,
        total_tasks_completed=result.tasks_completed,
        total_cpu_years=cpu_s / SECONDS_PER_YEAR,
        wall_clock_seconds=wall_s,
        cumulative_grid_jobs=result.cumulative_jobs,
        max_concurrent_cpus=max_conc,
        ce_count_used=result.ces_used,
        crunching_factor=cf,
        distribution_efficiency=de,
        throughput_tasks_per_second=per_s,
        seconds_per_task=s_per,
        success_rate_logged=logged,
        success_rate_after_output_check=checked,
        failure_attribution=attribution,
        bytes_produced=result.bytes_produced,
        completed=result.completed,
    )


def max_concurrency(intervals: Iterable[tuple[int, int]]) -> int:
    """Peak overlap of half-open [start, end) intervals."""
    deltas: list[tuple[int, int]] = []
    for start, end in intervals:
        if end <= start:
            continue
        deltas.append((start, 1))
        deltas.append((end, -1))
    deltas.sort()
    peak = cur = 0
    for _, d in deltas:
        cur += d
        peak = max(peak, cur)
    return peak


def emit_report(report: CampaignReport, fmt: str) -> bytes:
    """Serialize a report: ``json`` (full fidelity), ``csv`` (flat, fixed
    columns), ``table`` (human-readable summary)."""
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_COLUMNS)
        writer.writerow(_csv_row(report))
        return buf.getvalue().encode()
    if fmt == "table":
        return render_table([report]).encode()
    raise UnknownFormat(f"unknown report format {fmt!r}")


def _csv_row(report: CampaignReport) -> list:
    d = report.to_dict()
    attribution = d.pop("failure_attribution")
    row = [d[col] for col in CSV_COLUMNS if not col.startswith("failure_")]
    row += [attribution.get(cls.value, 0.0) for cls in FailureClass]
    return row


TABLE_ROWS = [
    ("Total number of completed dockings", lambda r: f"{r.total_tasks_completed:,}"),
    ("Estimated duration on 1 CPU", lambda r: _format_cpu_years(r.total_cpu_years)),
    ("Duration of the experience", lambda r: _format_wall(r.wall_clock_seconds)),
    ("Cumulative number of Grid jobs", lambda r: f"{r.cumulative_grid_jobs:,}"),
    ("Maximum number of concurrent CPUs", lambda r: f"{r.max_concurrent_cpus:,}"),
    ("Number of used Computing Elements", lambda r: f"{r.ce_count_used:,}"),
    ("Crunching factor", lambda r: f"{r.crunching_factor:.1f}"),
    ("Approximated distribution efficiency", lambda r: f"{r.distribution_efficiency:.0%}"),
    ("Throughput (dockings/s)", lambda r: f"{r.throughput_tasks_per_second:.2f}"),
    ("Seconds per docking", lambda r: f"{r.seconds_per_task:.2f}"),
    ("Success rate (logged)", lambda r: f"{r.success_rate_logged:.0%}"),
    ("Success rate (after output check)", lambda r: f"{r.success_rate_after_output_check:.0%}"),
]


def _format_cpu_years(years: float) -> str:
    if years >= 0.1:
        return f"{years:.1f} years"
    days = years * 365.25
    if days >= 1:
        return f"{days:.1f} days"
    return f"{days * 24:.1f} hours"


def _format_wall(seconds: float) -> str:
    if seconds >= 2 * SECONDS_PER_WEEK:
        return f"{seconds / SECONDS_PER_WEEK:.0f} weeks"
    if seconds >= SECONDS_PER_DAY:
        return f"{seconds / SECONDS_PER_DAY:.0f} days"
    if seconds >= 3600:
        return f"{seconds / 3600:.1f} hours"
    return f"{seconds:.0f} s"


def render_table(reports: list[CampaignReport],
                 titles: Optional[list[str]] = None,
                 deltas: bool = False) -> str:
    """Fixed-row summary table, one column per campaign, mirroring the
    classic side-by-side layout."""
    if titles is None:
        titles = [r.scheduler_mode for r in reports]
    label_w = max(len(label) for label, _ in TABLE_ROWS)
    cells = [[fmt(r) for r in reports] for _, fmt in TABLE_ROWS]
    col_w = [max(len(t), max((len(row[i]) for row in cells), default=0))
             for i, t in enumerate(titles)]
    lines = [" " * label_w + "  " + "  ".join(t.rjust(col_w[i]) for i, t in enumerate(titles))]
    for (label, _), row in zip(TABLE_ROWS, cells):
        lines.append(label.ljust(label_w) + "  "
                     + "  ".join(cell.rjust(col_w[i]) for i, cell in enumerate(row)))
    return "\n".join(lines) + "\n"


COMPARE_FIELDS = [
    ("total_tasks_completed", "{:,}"),
    ("total_cpu_years", "{:.3f}"),
    ("wall_clock_seconds", "{:,.0f}"),
    ("cumulative_grid_jobs", "{:,}"),
    ("max_concurrent_cpus", "{:,}"),
    ("ce_count_used", "{:,}"),
    ("crunching_factor", "{:.2f}"),
    ("distribution_efficiency", "{:.4f}"),
    ("throughput_tasks_per_second", "{:.3f}"),
    ("seconds_per_task", "{:.3f}"),
    ("success_rate_logged", "{:.4f}"),
    ("success_rate_after_output_check", "{:.4f}"),
]


def render_comparison(a: CampaignReport, b: CampaignReport,
                      title_a: str = "A", title_b: str = "B") -> str:
    """Two-column comparison with numeric deltas (B minus A)."""
    if a.report_version != b.report_version:
        raise SchemaMismatch("reports carry different versions")
    out = [render_table([a, b], [title_a, title_b]).rstrip("\n"), "", "Deltas (B - A):"]
    for name, fmt in COMPARE_FIELDS:
        va, vb = getattr(a, name), getattr(b, name)
        delta = vb - va
        out.append(f"  {name:<34} {fmt.format(va):>14} -> {fmt.format(vb):>14}"
                   f"  ({delta:+.4g})")
    return "\n".join(out) + "\n"
