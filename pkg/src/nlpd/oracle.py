"""Offline reference solvers used to check the online algorithms.

Fractional OnGAP is solved twice by unrelated methods (exact block
coordinate descent and accelerated projected gradient) so the two can be
cross-checked. Fractional routing uses pairwise Frank-Wolfe over path flows.
Integral optima come from exhaustive enumeration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .graphs import shortest_path
from .model import OnGapInstance, require_valid
from .routing import RoutingInstance, validate_routing
from .waterfill import waterfill_allocate

DEFAULT_TOL = 1e-8
MAX_CYCLES = 100_000
BRUTE_FORCE_CAP = 2_000_000


class OracleError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OracleResult:
    x: object
    objective: float
    iterations: int = 0
    gap: float = 0.0


def _objective(inst: OnGapInstance, x: np.ndarray) -> float:
    ell, cost, _ = inst.dense
    loads = (ell * x).sum(axis=0)
    return float(np.sum(loads**inst.alpha) + np.sum(cost * x))


def fractional_opt_ongap(inst: OnGapInstance, tol: float = DEFAULT_TOL, max_cycles: int = MAX_CYCLES) -> OracleResult:
    """Cyclic block coordinate descent: each job in turn is pulled out and
    water-filled back with the undiscounted marginal, which is its exact
    block minimizer.
    """
    require_valid(inst)
    ell, _, _ = inst.dense
    n, m = inst.num_jobs, inst.num_machines
    x = np.zeros((n, m))
    loads = np.zeros(m)
    if n == 0:
        return OracleResult(x, 0.0)
    obj = math.inf
    for cycle in range(1, max_cycles + 1):
        for j, job in enumerate(inst.jobs):
            loads -= ell[j] * x[j]
            np.maximum(loads, 0.0, out=loads)
            x[j] = waterfill_allocate(job, loads, inst.alpha, 1.0).allocation
            loads += ell[j] * x[j]
        new_obj = _objective(inst, x)
        # a full cycle's gain bounds every single job's gain from above
        gain = obj - new_obj if math.isfinite(obj) else math.inf
        obj = new_obj
        # recompute loads from scratch to stop drift
        loads = (ell * x).sum(axis=0)
        if gain < tol * (1 + obj):
            return OracleResult(x, obj, cycle)
    raise OracleError(f"block coordinate descent hit {max_cycles} cycles (objective {obj})")


def _project_rows(v: np.ndarray, allowed: np.ndarray, demands: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto {x >= 0, sum x = d, x = 0 off allowed}."""
    out = np.zeros_like(v)
    for j in range(v.shape[0]):
        idx = np.flatnonzero(allowed[j])
        y = v[j, idx]
        u = np.sort(y)[::-1]
        css = np.cumsum(u) - demands[j]
        k = np.arange(1, u.size + 1)
        rho = np.flatnonzero(u - css / k > 0)[-1]
        out[j, idx] = np.maximum(y - css[rho] / (rho + 1), 0.0)
    return out


def fractional_opt_ongap_pgd(inst: OnGapInstance, tol: float = 1e-9, max_iter: int = 200_000) -> OracleResult:
    """Accelerated projected gradient with backtracking and adaptive restart."""
    require_valid(inst)
    ell, cost, allowed = inst.dense
    a = inst.alpha
    d = inst.demands
    n, m = ell.shape
    if n == 0:
        return OracleResult(np.zeros((n, m)), 0.0)

    # extrapolated points may leave the feasible set; clipping loads at zero
    # keeps the objective convex and finite there
    def f(x):
        L = np.maximum((ell * x).sum(axis=0), 0.0)
        return float(np.sum(L**a) + np.sum(cost * x))

    def grad(x):
        L = np.maximum((ell * x).sum(axis=0), 0.0)
        return a * ell * L ** (a - 1) + cost

    x = _project_rows(np.where(allowed, 1.0, 0.0), allowed, d)
    y, t, step = x.copy(), 1.0, 1.0
    fx = f(x)
    restarted = False
    for it in range(1, max_iter + 1):
        gy, fy = grad(y), f(y)
        while True:
            z = _project_rows(y - step * gy, allowed, d)
            diff = z - y
            fz = f(z)
            if fz <= fy + np.sum(gy * diff) + np.sum(diff * diff) / (2 * step) + 1e-15 * abs(fy):
                break
            step *= 0.5
            if step < 1e-20:
                raise OracleError("projected gradient step collapsed")
        if fz > fx:
            if restarted:
                # no descent even from x itself: floating-point floor reached
                return OracleResult(x, fx, it, _pg_gap(x, grad(x), allowed))
            y, t, restarted = x.copy(), 1.0, True
            continue
        restarted = False
        t_next = (1 + math.sqrt(1 + 4 * t * t)) / 2
        y = z + ((t - 1) / t_next) * (z - x)
        x, fx, t = z, fz, t_next
        step *= 1.5
        gap = _pg_gap(x, grad(x), allowed)
        if gap <= tol * (1 + abs(fx)):
            return OracleResult(x, fx, it, gap)
    raise OracleError(f"projected gradient hit {max_iter} iterations (objective {fx})")


def _pg_gap(x, g, allowed):
    """Frank-Wolfe gap: sum_j (<g_j, x_j> - d_j min_e g_je)."""
    masked = np.where(allowed, g, np.inf)
    d = x.sum(axis=1)
    return float(np.sum(g * x) - np.sum(d * masked.min(axis=1)))


def _line_search(loads, plus, minus, amount, alpha, iters=100):
    """Best shift t in [0, amount] of flow from the ``minus`` edges to the ``plus`` edges."""
    plus = np.asarray(plus, dtype=int)
    minus = np.asarray(minus, dtype=int)

    def slope(t):
        up = alpha * np.sum((loads[plus] + t) ** (alpha - 1)) if plus.size else 0.0
        down = alpha * np.sum(np.maximum(loads[minus] - t, 0.0) ** (alpha - 1)) if minus.size else 0.0
        return up - down

    if slope(0.0) >= 0:
        return 0.0
    if slope(amount) <= 0:
        return amount
    lo, hi = 0.0, amount
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * amount:
            break
    return 0.5 * (lo + hi)


def fractional_opt_routing(inst: RoutingInstance, tol: float = 1e-8, max_iter: int = 20_000) -> OracleResult:
    """Pairwise Frank-Wolfe on path flows.

    Per request and sweep, flow moves from the costliest used path to the
    current shortest path under marginal edge costs, with an exact line
    search. Stops when the Frank-Wolfe gap falls below ``tol * (1 + obj)``.
    """
    problems = validate_routing(inst)
    if problems:
        raise ValueError("invalid routing instance: " + "; ".join(problems))
    a = inst.alpha
    graph = inst.graph
    E = graph.num_edges
    loads = np.zeros(E)
    flows: list[dict[tuple[int, ...], float]] = []
    for r in inst.requests:
        _, p = shortest_path(graph, [1.0] * E, r.s, r.t)
        flows.append({p: r.f})
        loads[list(p)] += r.f

    def gap_and_obj():
        h = (a * loads ** (a - 1)).tolist()
        gap = 0.0
        for r, paths in zip(inst.requests, flows):
            best, _ = shortest_path(graph, h, r.s, r.t)
            gap += sum(fl * sum(h[k] for k in p) for p, fl in paths.items()) - r.f * best
        return gap, float(np.sum(loads**a))

    for it in range(1, max_iter + 1):
        for r, paths in zip(inst.requests, flows):
            h = (a * loads ** (a - 1)).tolist()
            _, target = shortest_path(graph, h, r.s, r.t)
            away = max(paths, key=lambda p: (sum(h[k] for k in p), p))
            if away == target:
                continue
            ts, aw = set(target), set(away)
            plus = sorted(ts - aw)
            minus = sorted(aw - ts)
            t = _line_search(loads, plus, minus, paths[away], a)
            if t <= 0:
                continue
            loads[plus] += t
            loads[minus] -= t
            np.maximum(loads, 0.0, out=loads)
            paths[target] = paths.get(target, 0.0) + t
            paths[away] -= t
            if paths[away] <= 1e-15 * r.f:
                del paths[away]
        gap, obj = gap_and_obj()
        if gap <= tol * (1 + obj):
            return OracleResult(flows, obj, it, gap)
    gap, obj = gap_and_obj()
    raise OracleError(f"Frank-Wolfe hit {max_iter} iterations (objective {obj}, gap {gap})")


def integer_opt_bruteforce(inst: OnGapInstance, chunk: int = 1 << 16) -> OracleResult:
    """Minimum of loads^alpha + costs over all integral assignments (unit jobs).

    Pass an augmented instance to optimize the augmented objective.
    """
    require_valid(inst)
    sizes = [len(job.options) for job in inst.jobs]
    total = math.prod(sizes)
    if total > BRUTE_FORCE_CAP:
        raise ValueError(f"{total} assignments exceed the brute-force cap of {BRUTE_FORCE_CAP}")
    n, m = inst.num_jobs, inst.num_machines
    if n == 0:
        return OracleResult(np.zeros((0, m)), 0.0)
    a = inst.alpha
    mach = [np.array([o.machine for o in job.options]) for job in inst.jobs]
    lo = [np.array([o.load for o in job.options]) for job in inst.jobs]
    co = [np.array([o.cost for o in job.options]) for job in inst.jobs]
    # mixed-radix digits of the assignment index, job 0 least significant
    radix = np.cumprod([1] + sizes[:-1])
    best, best_idx = math.inf, 0
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total))
        loads = np.zeros((ids.size, m))
        extra = np.zeros(ids.size)
        for j in range(n):
            digit = (ids // radix[j]) % sizes[j]
            np.add.at(loads, (np.arange(ids.size), mach[j][digit]), lo[j][digit])
            extra += co[j][digit]
        vals = np.sum(loads**a, axis=1) + extra
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, best_idx = float(vals[k]), int(ids[k])
    X = np.zeros((n, m))
    for j in range(n):
        X[j, mach[j][(best_idx // radix[j]) % sizes[j]]] = 1.0
    return OracleResult(X, best)


def integer_opt_bruteforce_naive(inst: OnGapInstance) -> float:
    """Plain itertools enumeration; slow, kept as a cross-check for tiny inputs."""
    best = math.inf
    for combo in itertools.product(*(job.options for job in inst.jobs)):
        loads = np.zeros(inst.num_machines)
        extra = 0.0
        for o in combo:
            loads[o.machine] += o.load
            extra += o.cost
        best = min(best, float(np.sum(loads**inst.alpha)) + extra)
    return 0.0 if not inst.jobs else best
