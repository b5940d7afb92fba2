"""Independent randomized rounding of a fractional assignment."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import AssignmentState, OnGapInstance

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-6


def _stream(seed: int, index: int | None = None) -> np.random.Generator:
    return np.random.default_rng(seed if index is None else [seed, index])


def _row_cdf(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sums = x.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise ValueError(f"rows {bad.tolist()} do not sum to 1 (rounding needs unit demands)")
    cdf = np.cumsum(np.clip(x, 0.0, None), axis=1)
    return cdf / cdf[:, -1:]


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(cdf.shape[0])
    picks = (cdf <= u[:, None]).sum(axis=1)
    # guards round-off in the final cdf entry
    return np.minimum(picks, cdf.shape[1] - 1)


def round_assignment(x, inst: OnGapInstance, seed: int) -> AssignmentState:
    """Send each job to one machine, drawn from its fractional row."""
    if isinstance(x, AssignmentState):
        x = x.x
    cdf = _row_cdf(x)
    n, m = cdf.shape
    X = np.zeros((n, m))
    if n:
        X[np.arange(n), _draw(cdf, _stream(seed))] = 1.0
    return AssignmentState.from_matrix(inst, X, integral=True)


def sample_loads(x, inst: OnGapInstance, samples: int, seed: int) -> np.ndarray:
    """Machine loads of ``samples`` independent roundings, one row each.

    Sample ``i`` uses its own stream seeded by ``(seed, i)``.
    """
    if isinstance(x, AssignmentState):
        x = x.x
    cdf = _row_cdf(x)
    ell, _, _ = inst.dense
    n, m = cdf.shape
    out = np.zeros((samples, m))
    rows = np.arange(n)
    for i in range(samples):
        picks = _draw(cdf, _stream(seed, i))
        np.add.at(out[i], picks, ell[rows, picks])
    return out


def rosenthal_constant(alpha: float) -> float:
    return alpha / max(math.log(alpha), 1.0)


@dataclass(frozen=True)
class MonteCarloCost:
    mean: float
    stderr: float
    ratio: float
    monitor_threshold: float
    exceeds_monitor: bool


def monte_carlo_cost(
    x, inst: OnGapInstance, samples: int, seed: int, k_const: float | None = None
) -> MonteCarloCost:
    """Estimate the expected rounded load cost and compare it with the
    fractional objective (assignment costs included).
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if isinstance(x, AssignmentState):
        x = x.x
    loads = sample_loads(x, inst, samples, seed)
    costs = np.sum(loads**inst.alpha, axis=1)
    mean = float(costs.mean())
    stderr = float(costs.std(ddof=1) / math.sqrt(samples))
    frac = AssignmentState.from_matrix(inst, x).objective
    ratio = mean / frac if frac > 0 else (0.0 if mean == 0 else math.inf)
    k = rosenthal_constant(inst.alpha) if k_const is None else k_const
    threshold = (2 * k) ** inst.alpha
    exceeds = ratio > threshold
    if exceeds:
        log.warning("rounded cost ratio %.6g exceeds monitoring threshold %.6g", ratio, threshold)
    return MonteCarloCost(mean, stderr, ratio, threshold, bool(exceeds))
