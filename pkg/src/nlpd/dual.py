"""Closed-form evaluation of the Lagrangian dual and run certificates.

For multipliers ``lam`` the dual decouples per machine: at most one job is
worth placing on a machine in the inner minimization, namely the one with
the largest profit-per-load ratio ``(lam_j - c_je) / l_je``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import DualCertificate, MachineWitness, OnGapInstance

PSI_RTOL = 1e-7
CERT_RTOL = 1e-9  # float guard on the ratio comparison


def _profit_ratio(lam, inst: OnGapInstance, e: int):
    """(job, ratio) pairs for jobs allowed on machine e."""
    ell, cost, allowed = inst.dense
    jobs = np.flatnonzero(allowed[:, e])
    return jobs, (lam[jobs] - cost[jobs, e]) / ell[jobs, e]


def machine_dual_contribution(
    e: int, lam, inst: OnGapInstance, alpha: float | None = None, prefer: int | None = None
) -> tuple[int | None, float]:
    """Return the dual's chosen job on machine ``e`` and that machine's
    (nonpositive) contribution to the dual value.

    ``prefer`` names a job to pick when it ties the maximum within 1e-7.
    """
    alpha = inst.alpha if alpha is None else alpha
    lam = np.asarray(lam, dtype=float)
    jobs, ratio = _profit_ratio(lam, inst, e)
    if jobs.size == 0:
        return None, 0.0
    k = int(np.argmax(ratio))
    best = ratio[k]
    if best <= 0:
        return None, 0.0
    phi = int(jobs[k])
    if prefer is not None and prefer != phi:
        hit = np.flatnonzero(jobs == prefer)
        if hit.size and ratio[hit[0]] >= best - PSI_RTOL * abs(best):
            phi = prefer
    # contribution depends only on the max ratio, so tie choice does not matter
    contribution = (1 - alpha) * (best / alpha) ** (alpha / (alpha - 1))
    return phi, float(contribution)


def dual_load(lam_j: float, ell: float, cost: float, alpha: float) -> float:
    """Minimizing amount of the chosen job on its machine in the inner problem."""
    return (max(lam_j - cost, 0.0) / (alpha * ell)) ** (1 / (alpha - 1)) / ell


def dual_value(lam, inst: OnGapInstance, alpha: float | None = None) -> float:
    alpha = inst.alpha if alpha is None else alpha
    lam = np.asarray(lam, dtype=float)
    total = float(np.dot(lam, inst.demands)) if lam.size else 0.0
    for e in range(inst.num_machines):
        total += machine_dual_contribution(e, lam, inst, alpha)[1]
    return total


def dual_certificate(lam, inst: OnGapInstance, prefer=None) -> DualCertificate:
    """Evaluate the dual at ``lam`` and record the per-machine minimizer."""
    lam = np.asarray(lam, dtype=float)
    ell, cost, _ = inst.dense
    value = float(np.dot(lam, inst.demands)) if lam.size else 0.0
    witness = []
    for e in range(inst.num_machines):
        phi, contrib = machine_dual_contribution(e, lam, inst, prefer=None if prefer is None else prefer[e])
        value += contrib
        if phi is None:
            witness.append(MachineWitness(None, 0.0))
        else:
            witness.append(MachineWitness(phi, dual_load(lam[phi], ell[phi, e], cost[phi, e], inst.alpha)))
    return DualCertificate(lam, value, tuple(witness))


@dataclass(frozen=True)
class CertificateReport:
    on: float
    dual: float
    ratio: float
    bound: float
    certified: bool
    psi_check: bool
    status: str = "ok"  # "ok" | "uninformative"

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["status"]
        if self.status != "ok":
            d["status"] = self.status
        return d


def _ratio(on: float, dual: float) -> float:
    if on == 0:
        return 0.0 if dual >= 0 else math.inf
    return on / dual if dual > 0 else math.inf


def build_report(on: float, dual: float, bound: float, psi_check: bool = True, slack: float = 0.0) -> CertificateReport:
    if on > 0 and dual <= 0:
        return CertificateReport(on, dual, math.inf, bound, False, psi_check, "uninformative")
    certified = on <= bound * dual * (1 + slack + CERT_RTOL)
    return CertificateReport(on, dual, _ratio(on, dual), bound, bool(certified), psi_check)


def psi_check(lam, inst: OnGapInstance, last_job) -> bool:
    """The last job placed on each machine attains the maximal profit ratio."""
    lam = np.asarray(lam, dtype=float)
    ell, cost, _ = inst.dense
    for e, psi in enumerate(last_job):
        if psi is None:
            continue
        _, ratio = _profit_ratio(lam, inst, e)
        best = float(ratio.max())
        mine = (lam[psi] - cost[psi, e]) / ell[psi, e]
        if mine < best - PSI_RTOL * abs(best):
            return False
    return True


def certify_run(run, inst: OnGapInstance) -> CertificateReport:
    """Check ON <= alpha^alpha * g(lam) for a fractional greedy run."""
    alpha = inst.alpha
    g = dual_value(run.lam, inst)
    ok_psi = psi_check(run.lam, inst, run.last_job)
    return build_report(run.online_cost, g, alpha**alpha, ok_psi)
