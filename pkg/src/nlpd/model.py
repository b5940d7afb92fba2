"""Domain types shared by every algorithm in the package.

An OnGAP instance is a sequence of jobs arriving online. Each job carries a
demand and a sparse list of allowed machines, each with a per-unit load
coefficient and a per-unit assignment cost. Machines missing from a job's
option list are forbidden for that job.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

MODES = ("fractional", "integer", "rounding")


class InvalidInstanceError(ValueError):
    """Raised when an algorithm is handed an instance that fails validation."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid instance: " + "; ".join(self.violations))


@dataclass(frozen=True)
class JobOption:
    machine: int
    load: float
    cost: float = 0.0


@dataclass(frozen=True)
class JobSpec:
    options: tuple[JobOption, ...]
    demand: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))

    def machines(self) -> list[int]:
        return [o.machine for o in self.options]


@dataclass(frozen=True)
class OnGapInstance:
    alpha: float
    num_machines: int
    jobs: tuple[JobSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))

    @property
    def num_jobs(self) -> int:
        return len(self.jobs)

    @cached_property
    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(load, cost, allowed) as n x m arrays; forbidden entries hold 0."""
        n, m = self.num_jobs, self.num_machines
        ell = np.zeros((n, m))
        cost = np.zeros((n, m))
        allowed = np.zeros((n, m), dtype=bool)
        for j, job in enumerate(self.jobs):
            for o in job.options:
                ell[j, o.machine] = o.load
                cost[j, o.machine] = o.cost
                allowed[j, o.machine] = True
        return ell, cost, allowed

    @property
    def demands(self) -> np.ndarray:
        return np.array([job.demand for job in self.jobs], dtype=float)

    # -- JSON -------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "machines": self.num_machines,
            "jobs": [
                {
                    "demand": job.demand,
                    "options": [
                        {"m": o.machine, "load": o.load, "cost": o.cost}
                        for o in job.options
                    ],
                }
                for job in self.jobs
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OnGapInstance":
        _check_keys(data, {"alpha", "machines", "jobs"}, "instance")
        jobs = []
        for j, raw in enumerate(data["jobs"]):
            _check_keys(raw, {"demand", "options"}, f"job {j}")
            options = []
            for raw_opt in raw["options"]:
                _check_keys(raw_opt, {"m", "load", "cost"}, f"job {j} option")
                options.append(
                    JobOption(int(raw_opt["m"]), float(raw_opt["load"]), float(raw_opt["cost"]))
                )
            jobs.append(JobSpec(tuple(options), float(raw["demand"])))
        return cls(float(data["alpha"]), int(data["machines"]), tuple(jobs))

    @classmethod
    def from_json(cls, text: str) -> "OnGapInstance":
        return cls.from_dict(json.loads(text))


def _check_keys(obj: dict, expected: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ValueError(f"{where}: expected an object")
    keys = set(obj)
    unknown = keys - expected
    missing = expected - keys
    if unknown:
        raise ValueError(f"{where}: unknown fields {sorted(unknown)}")
    if missing:
        raise ValueError(f"{where}: missing fields {sorted(missing)}")


def make_instance(
    alpha: float,
    load: np.ndarray | Sequence[Sequence[float]],
    cost: np.ndarray | Sequence[Sequence[float]] | None = None,
    demands: Iterable[float] | None = None,
    allowed: np.ndarray | None = None,
) -> OnGapInstance:
    """Build an instance from dense n x m matrices.

    Entries with ``allowed`` False (default: every entry) are dropped from the
    option lists.
    """
    load = np.asarray(load, dtype=float)
    n, m = load.shape
    cost = np.zeros((n, m)) if cost is None else np.asarray(cost, dtype=float)
    allowed = np.ones((n, m), dtype=bool) if allowed is None else np.asarray(allowed, dtype=bool)
    demands = [1.0] * n if demands is None else list(demands)
    jobs = []
    for j in range(n):
        opts = tuple(
            JobOption(e, float(load[j, e]), float(cost[j, e])) for e in range(m) if allowed[j, e]
        )
        jobs.append(JobSpec(opts, float(demands[j])))
    return OnGapInstance(float(alpha), m, tuple(jobs))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_instance(inst: OnGapInstance) -> ValidationReport:
    """Check every structural invariant and report all violations found."""
    out: list[str] = []
    if not (isinstance(inst.alpha, (int, float)) and math.isfinite(inst.alpha) and inst.alpha > 1):
        out.append(f"alpha must be > 1 (got {inst.alpha})")
    if inst.num_machines < 0:
        out.append(f"machine count must be nonnegative (got {inst.num_machines})")
    for j, job in enumerate(inst.jobs):
        if not (math.isfinite(job.demand) and job.demand > 0):
            out.append(f"job {j}: demand must be positive (got {job.demand})")
        if not job.options:
            out.append(f"job {j} has no allowed machine")
        seen: set[int] = set()
        for o in job.options:
            if not 0 <= o.machine < inst.num_machines:
                out.append(f"job {j}: machine {o.machine} out of range")
            if o.machine in seen:
                out.append(f"job {j}: machine {o.machine} listed twice")
            seen.add(o.machine)
            if not (math.isfinite(o.load) and o.load > 0):
                out.append(
                    f"job {j}, machine {o.machine}: load coefficient must be positive (got {o.load})"
                )
            if not (math.isfinite(o.cost) and o.cost >= 0):
                out.append(
                    f"job {j}, machine {o.machine}: cost must be finite and nonnegative (got {o.cost})"
                )
    return ValidationReport(tuple(out))


def require_valid(inst: OnGapInstance) -> None:
    report = validate_instance(inst)
    if not report.ok:
        raise InvalidInstanceError(report.violations)


def effective_delta(alpha: float, mode: str = "fractional") -> float:
    """Default discount on load marginals for the given algorithm mode."""
    if not alpha > 1:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "integer":
        return (math.e * (alpha + 1)) ** (1 - alpha)
    # the rounding pipeline rounds a fractional run, so it shares that discount
    return alpha ** (1 - alpha)


@dataclass(frozen=True)
class Parameters:
    delta: float | None = None
    mode: str = "fractional"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.delta is not None and not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")

    def resolve_delta(self, alpha: float) -> float:
        return effective_delta(alpha, self.mode) if self.delta is None else self.delta


@dataclass(frozen=True)
class AssignmentState:
    """A primal solution: the assignment matrix plus derived load and cost."""

    x: np.ndarray
    loads: np.ndarray
    load_cost: float
    assign_cost: float
    integral: bool = False

    @property
    def objective(self) -> float:
        return self.load_cost + self.assign_cost

    @classmethod
    def from_matrix(cls, inst: OnGapInstance, x: np.ndarray, integral: bool = False) -> "AssignmentState":
        ell, cost, _ = inst.dense
        x = np.asarray(x, dtype=float)
        loads = (ell * x).sum(axis=0) if x.size else np.zeros(inst.num_machines)
        load_cost = float(np.sum(loads**inst.alpha))
        assign_cost = float(np.sum(cost * x))
        return cls(x, loads, load_cost, assign_cost, integral)


@dataclass(frozen=True)
class MachineWitness:
    job: int | None
    dual_load: float


@dataclass(frozen=True)
class DualCertificate:
    lam: np.ndarray
    dual_value: float
    witness: tuple[MachineWitness, ...] = field(default=())
