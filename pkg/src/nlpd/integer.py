"""Integral online assignment on the cost-augmented program."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dual import CertificateReport, build_report, dual_value
from .model import (
    AssignmentState,
    JobOption,
    JobSpec,
    OnGapInstance,
    Parameters,
    effective_delta,
    require_valid,
)
from .waterfill import marginal_rate

KEY_INEQUALITY_RTOL = 1e-12


def augmented_instance(inst: OnGapInstance, add_to_existing: bool = False) -> OnGapInstance:
    """Charge every option a fixed cost of ``load ** alpha``.

    Pure load-balancing instances are expected; pass ``add_to_existing`` to
    stack the augmentation on top of nonzero costs.
    """
    if not add_to_existing and any(o.cost != 0 for job in inst.jobs for o in job.options):
        raise ValueError("instance already has assignment costs; pass add_to_existing=True")
    jobs = tuple(
        JobSpec(
            tuple(JobOption(o.machine, o.load, o.cost + o.load**inst.alpha) for o in job.options),
            job.demand,
        )
        for job in inst.jobs
    )
    return OnGapInstance(inst.alpha, inst.num_machines, jobs)


def integer_bound(alpha: float) -> float:
    """Competitive ratio e * (e(alpha+1))^alpha proved for the integral greedy."""
    return math.e * (math.e * (alpha + 1)) ** alpha


@dataclass(frozen=True)
class IntegerRun:
    state: AssignmentState
    lam: np.ndarray
    choice: tuple[int, ...]
    seen_load: tuple[float, ...]  # load on the chosen machine just before placement
    last_job: tuple[int | None, ...]
    delta: float

    @property
    def online_cost(self) -> float:
        return self.state.objective


def _require_unit(inst: OnGapInstance) -> None:
    bad = [j for j, job in enumerate(inst.jobs) if job.demand != 1.0]
    if bad:
        raise ValueError(f"integral assignment needs unit demands; jobs {bad} differ")


def greedy_assign_integer(inst: OnGapInstance, params: Parameters | None = None) -> IntegerRun:
    """Place each arriving job whole on the machine with the least discounted
    marginal, evaluated at the load before the job. Ties go to the lowest
    machine index.
    """
    require_valid(inst)
    _require_unit(inst)
    params = params or Parameters(mode="integer")
    delta = params.resolve_delta(inst.alpha)
    n, m = inst.num_jobs, inst.num_machines
    x = np.zeros((n, m))
    loads = np.zeros(m)
    lam = np.zeros(n)
    choice, seen = [], []
    last: list[int | None] = [None] * m
    for j, job in enumerate(inst.jobs):
        best, best_opt = math.inf, None
        for o in sorted(job.options, key=lambda o: o.machine):
            rate = float(marginal_rate(loads[o.machine], o.load, o.cost, inst.alpha, delta))
            if rate < best:
                best, best_opt = rate, o
        e = best_opt.machine
        seen.append(float(loads[e]))
        x[j, e] = 1.0
        loads[e] += best_opt.load
        lam[j] = best
        choice.append(e)
        last[e] = j
    state = AssignmentState.from_matrix(inst, x, integral=True)
    return IntegerRun(state, lam, tuple(choice), tuple(seen), tuple(last), delta)


def integer_dual_bound(run: IntegerRun, inst: OnGapInstance) -> CertificateReport:
    """Certify ON <= e(e(alpha+1))^alpha * g(lam) on the augmented instance."""
    g = dual_value(run.lam, inst)
    return build_report(run.online_cost, g, integer_bound(inst.alpha))


@dataclass(frozen=True)
class KeyInequality:
    lhs: float
    rhs: float
    holds: bool


def check_key_inequality(a, alpha: float, delta: float | None = None) -> KeyInequality:
    """Evaluate both sides of the per-machine inequality behind the integral
    greedy's bound, for nonnegative ``a`` taken in the given order.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("sequence entries must be nonnegative")
    if delta is None:
        delta = effective_delta(alpha, "integer")
    prefix = np.concatenate(([0.0], np.cumsum(a)[:-1])) if a.size else a
    total = float(a.sum())
    lhs = (
        alpha * delta * float(np.sum(a * prefix ** (alpha - 1)))
        + float(np.sum(a**alpha))
        + (1 - alpha) * delta ** (alpha / (alpha - 1)) * total**alpha
    )
    rhs = total**alpha / integer_bound(alpha)
    holds = lhs >= rhs - KEY_INEQUALITY_RTOL * max(1.0, abs(rhs))
    return KeyInequality(lhs, rhs, bool(holds))
