"""Online fractional greedy: water-filling on discounted marginal rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AssignmentState, JobSpec, OnGapInstance, Parameters, require_valid

BISECTION_RTOL = 1e-12
MAX_BISECTIONS = 200


class WaterfillError(ArithmeticError):
    """The threshold search failed to bracket or converge."""


def marginal_rate(load, ell, cost, alpha, delta):
    """Rate at which the discounted objective grows per unit of work added."""
    return delta * alpha * ell * np.power(load, alpha - 1) + cost


@dataclass(frozen=True)
class WaterfillResult:
    allocation: np.ndarray  # indexed by machine
    threshold: float
    support: tuple[int, ...]


def _fill(theta, ell, cost, loads, alpha, delta):
    # invert the marginal rate: the load at which machine e reaches theta
    head = np.maximum(theta - cost, 0.0) / (delta * alpha * ell)
    target = np.power(head, 1.0 / (alpha - 1))
    return np.maximum(target - loads, 0.0) / ell


def waterfill_allocate(job: JobSpec, loads: np.ndarray, alpha: float, delta: float) -> WaterfillResult:
    """Spread ``job.demand`` over its allowed machines so that every machine
    receiving work ends at the same marginal rate (the returned threshold),
    and no unused machine starts below it.
    """
    if not job.options:
        raise WaterfillError("job has no allowed machine")
    loads = np.asarray(loads, dtype=float)
    idx = np.array([o.machine for o in job.options])
    ell = np.array([o.load for o in job.options])
    cost = np.array([o.cost for o in job.options])
    cur = loads[idx]
    demand = job.demand

    lo = float(np.min(marginal_rate(cur, ell, cost, alpha, delta)))
    step = max(abs(lo), 1.0)
    hi = lo + step
    for _ in range(MAX_BISECTIONS):
        if _fill(hi, ell, cost, cur, alpha, delta).sum() >= demand:
            break
        step *= 2.0
        hi = lo + step
    else:
        raise WaterfillError(f"could not bracket threshold (lo={lo}, hi={hi}, demand={demand})")

    for it in range(MAX_BISECTIONS):
        if hi - lo <= BISECTION_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if _fill(mid, ell, cost, cur, alpha, delta).sum() >= demand:
            hi = mid
        else:
            lo = mid
    else:
        raise WaterfillError(
            f"bisection did not converge after {MAX_BISECTIONS} steps (lo={lo!r}, hi={hi!r})"
        )

    part = _fill(hi, ell, cost, cur, alpha, delta)
    # hi overshoots by at most the bisection tolerance; trim to the exact demand
    part *= demand / part.sum()
    allocation = np.zeros(loads.shape[0])
    allocation[idx] = part
    support = tuple(int(e) for e in idx[part > 0])
    return WaterfillResult(allocation, hi, support)


@dataclass(frozen=True)
class WaterfillEvent:
    job: int
    theta: float
    support: tuple[int, ...]
    allocation: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "job": self.job,
            "theta": self.theta,
            "support": list(self.support),
            "allocation": list(self.allocation),
        }


@dataclass(frozen=True)
class FractionalRun:
    state: AssignmentState
    lam: np.ndarray
    events: tuple[WaterfillEvent, ...]
    last_job: tuple[int | None, ...]  # per machine, the last job given positive work
    delta: float

    @property
    def online_cost(self) -> float:
        return self.state.objective


def run_online_fractional(inst: OnGapInstance, params: Parameters | None = None) -> FractionalRun:
    require_valid(inst)
    params = params or Parameters()
    delta = params.resolve_delta(inst.alpha)
    n, m = inst.num_jobs, inst.num_machines
    x = np.zeros((n, m))
    loads = np.zeros(m)
    lam = np.zeros(n)
    last: list[int | None] = [None] * m
    events = []
    for j, job in enumerate(inst.jobs):
        try:
            res = waterfill_allocate(job, loads, inst.alpha, delta)
        except WaterfillError as exc:
            raise WaterfillError(f"job {j}: {exc}") from exc
        x[j] = res.allocation
        for o in job.options:
            loads[o.machine] += o.load * res.allocation[o.machine]
        for e in res.support:
            last[e] = j
        lam[j] = res.threshold
        events.append(
            WaterfillEvent(j, res.threshold, res.support, tuple(float(res.allocation[e]) for e in res.support))
        )
    return FractionalRun(AssignmentState.from_matrix(inst, x), lam, tuple(events), tuple(last), delta)
