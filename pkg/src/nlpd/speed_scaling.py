"""Speed scaling as load balancing over unit time slots.

Each slot is a machine with unit load coefficient, so the speed in a slot is
the total work placed there and energy is the sum of speed^alpha.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .model import JobOption, JobSpec, OnGapInstance

CostFn = Callable[["SpeedScalingJob", int], Union[float, None]]


@dataclass(frozen=True)
class SpeedScalingJob:
    release: int
    work: float
    deadline: int | None = None
    weight: float = 1.0

    def to_dict(self) -> dict:
        d = {"release": self.release, "work": self.work, "weight": self.weight}
        if self.deadline is not None:
            d["deadline"] = self.deadline
        return d


def load_jobs(data: dict) -> tuple[list[SpeedScalingJob], int, float, float]:
    """Parse ``{"alpha", "horizon", "beta"?, "jobs": [...]}``."""
    jobs = [
        SpeedScalingJob(int(j["release"]), float(j["work"]), j.get("deadline"), float(j.get("weight", 1.0)))
        for j in data["jobs"]
    ]
    return jobs, int(data["horizon"]), float(data["alpha"]), float(data.get("beta", 1.0))


def kernel_cost(kernel, job: SpeedScalingJob, t: int) -> float | None:
    """Per-unit scheduling cost of running ``job`` in slot ``t``; None if forbidden.

    Flow kernels charge the job's weight per unit of work (weight / work
    times the delay), so that a job's total charge is its fractional flow.
    """
    if t < job.release:
        return None
    if callable(kernel):
        return kernel(job, t)
    name, power = (kernel, 1) if isinstance(kernel, str) else kernel
    if name == "deadline":
        return 0.0 if t < job.deadline else None
    density = job.weight / job.work
    if name == "flow":
        return density * (t - job.release)
    if name in ("flow_power", "flow2"):
        k = 2 if name == "flow2" else power
        return density * (t - job.release) ** k
    raise ValueError(f"unknown kernel {kernel!r}")


def build_instance(jobs, kernel, horizon: int, alpha: float, beta: float = 1.0) -> OnGapInstance:
    """One machine per slot 0..horizon-1; job j may use slot t iff its kernel
    allows it, at cost kernel/beta per unit of work.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    out = []
    for j, job in enumerate(jobs):
        if job.release < 0:
            raise ValueError(f"job {j}: negative release")
        if kernel == "deadline":
            if job.deadline is None or job.deadline <= job.release:
                raise ValueError(f"job {j}: deadline must exceed release")
            if job.deadline > horizon:
                raise ValueError(f"job {j}: deadline {job.deadline} beyond horizon {horizon}")
        opts = []
        for t in range(job.release, horizon):
            c = kernel_cost(kernel, job, t)
            if c is not None:
                opts.append(JobOption(t, 1.0, c / beta))
        if not opts:
            raise ValueError(f"job {j} has no allowed slot")
        out.append(JobSpec(tuple(opts), job.work))
    return OnGapInstance(alpha, horizon, tuple(out))


@dataclass(frozen=True)
class ScheduleTrace:
    horizon: int
    speed: np.ndarray
    work: np.ndarray  # jobs x slots

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "speed": self.speed.tolist(), "work": self.work.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def trace_from_run(run, horizon: int | None = None) -> ScheduleTrace:
    x = run.state.x
    T = x.shape[1] if horizon is None else horizon
    return ScheduleTrace(T, x.sum(axis=0), x.copy())


def _yds(windows: list[tuple[int, int, float]], horizon: int) -> np.ndarray:
    """Energy-optimal slotted speeds for (release, deadline, work) windows by
    repeatedly peeling off the densest interval.
    """
    speed = np.zeros(horizon)
    alive = list(range(horizon))
    jobs = [list(w) for w in windows if w[2] > 0]
    while jobs:
        points = sorted({p for r, d, _ in jobs for p in (r, d)})
        best, best_iv = -1.0, None
        for i, a in enumerate(points):
            for b in points[i + 1 :]:
                w = sum(wk for r, d, wk in jobs if a <= r and d <= b)
                dens = w / (b - a)
                if dens > best * (1 + 1e-15):
                    best, best_iv = dens, (a, b)
        a, b = best_iv
        for s in alive[a:b]:
            speed[s] = best
        del alive[a:b]
        span = b - a

        def squeeze(p):
            return p if p <= a else (a if p <= b else p - span)

        jobs = [[squeeze(r), squeeze(d), wk] for r, d, wk in jobs if not (a <= r and d <= b)]
    return speed


def oa_speed_profile(jobs, horizon: int) -> ScheduleTrace:
    """Optimal Available: at every release time, replan all remaining work
    optimally as if nothing else will arrive, then run the plan in earliest
    deadline order until the next release.
    """
    n = len(jobs)
    remaining = np.array([j.work for j in jobs], dtype=float)
    speed = np.zeros(horizon)
    work = np.zeros((n, horizon))
    releases = sorted({j.release for j in jobs})
    for k, now in enumerate(releases):
        until = releases[k + 1] if k + 1 < len(releases) else horizon
        active = [
            i for i, j in enumerate(jobs) if j.release <= now < j.deadline and remaining[i] > 1e-15
        ]
        plan = _yds([(0, jobs[i].deadline - now, remaining[i]) for i in active], horizon - now)
        order = sorted(active, key=lambda i: (jobs[i].deadline, i))
        for t in range(now, until):
            cap = plan[t - now]
            speed[t] = cap
            for i in order:
                if cap <= 0:
                    break
                if remaining[i] <= 0 or jobs[i].deadline <= t:
                    continue
                run = min(cap, remaining[i])
                work[i, t] += run
                remaining[i] -= run
                cap -= run
    return ScheduleTrace(horizon, speed, work)


def compare_profiles(a: ScheduleTrace, b: ScheduleTrace) -> float:
    if a.horizon != b.horizon:
        raise ValueError(f"horizon mismatch: {a.horizon} vs {b.horizon}")
    if a.horizon == 0:
        return 0.0
    return float(np.max(np.abs(np.asarray(a.speed) - np.asarray(b.speed))))
