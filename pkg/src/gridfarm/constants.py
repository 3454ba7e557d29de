"""Campaign aggregates the presets are calibrated against.

Per-task means are derived from published campaign totals before the build:
mean task CPU = (CPU-years on one processor) / (completed dockings), with a
365.25-day year.  Per-task output sizes likewise come from total bytes over
total dockings, because only totals were recorded.
"""

SECONDS_PER_YEAR = 365.25 * 86_400  # 31,557,600
SECONDS_PER_WEEK = 7 * 86_400
SECONDS_PER_DAY = 86_400

# 2005 malaria screening: 46M dockings, ~80 CPU-years, 6 weeks,
# peak 1,700 concurrent CPUs, ~72,000 jobs, ~1 TB of output.
MALARIA_TASKS = 46_000_000
MALARIA_CPU_YEARS = 80.0
MALARIA_WALL_S = 6 * SECONDS_PER_WEEK
MALARIA_MAX_CONCURRENT = 1_700
MALARIA_JOBS = 72_000
MALARIA_GRANULARITY = 639          # ceil(46e6 / 639) = 71,987 jobs ~ 72,000
MALARIA_MEAN_TASK_S = MALARIA_CPU_YEARS * SECONDS_PER_YEAR / MALARIA_TASKS   # ~54.9 s
MALARIA_OUTPUT_BYTES_TOTAL = 10 ** 12
MALARIA_TASK_OUTPUT_BYTES = MALARIA_OUTPUT_BYTES_TOTAL // MALARIA_TASKS      # ~21.7 kB

# 2006 avian-flu screening, push half: 2,160,095 dockings, 88.3 CPU-years,
# 6 weeks, 54,000 jobs on 69 CEs, peak 1,700 CPUs.
AVIANFLU_WISDOM_TASKS = 2_160_095
AVIANFLU_WISDOM_CPU_YEARS = 88.3
AVIANFLU_WISDOM_WALL_S = 6 * SECONDS_PER_WEEK
AVIANFLU_WISDOM_MAX_CONCURRENT = 1_700
AVIANFLU_WISDOM_CES = 69
AVIANFLU_WISDOM_GRANULARITY = 40   # ceil(2,160,095 / 40) = 54,003 jobs ~ 54,000
AVIANFLU_WISDOM_MEAN_TASK_S = (
    AVIANFLU_WISDOM_CPU_YEARS * SECONDS_PER_YEAR / AVIANFLU_WISDOM_TASKS)    # ~1290 s

# 2006 avian-flu screening, pull half: 308,585 dockings, 16.7 CPU-years,
# 30 days, 2,585 worker jobs on 36 CEs, 240 concurrent workers.
AVIANFLU_DIANE_TASKS = 308_585
AVIANFLU_DIANE_CPU_YEARS = 16.7
AVIANFLU_DIANE_WALL_S = 30 * SECONDS_PER_DAY
AVIANFLU_DIANE_WORKERS = 240
AVIANFLU_DIANE_CES = 36
AVIANFLU_DIANE_WORKER_JOBS = 2_585
AVIANFLU_DIANE_MEAN_TASK_S = (
    AVIANFLU_DIANE_CPU_YEARS * SECONDS_PER_YEAR / AVIANFLU_DIANE_TASKS)      # ~1708 s

# ~750 GB produced across the avian-flu challenge (both halves).
AVIANFLU_OUTPUT_BYTES_TOTAL = 750 * 10 ** 9
AVIANFLU_TASK_OUTPUT_BYTES = AVIANFLU_OUTPUT_BYTES_TOTAL // (
    AVIANFLU_WISDOM_TASKS + AVIANFLU_DIANE_TASKS)                            # ~304 kB

# Failure-class shares observed in the 2005 deployment (success 46%).
WISDOM_2005_SUCCESS = 0.46
WISDOM_2005_RATES = {
    "workload_management": 0.10,
    "data_management": 0.04,
    "site": 0.09,
    "unclassified": 0.04,
    "license_server": 0.23,
    "application": 0.04,
}
