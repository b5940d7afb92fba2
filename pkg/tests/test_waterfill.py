import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from nlpd.model import JobOption, JobSpec, OnGapInstance, Parameters, make_instance
from nlpd.waterfill import marginal_rate, run_online_fractional, waterfill_allocate

from .conftest import ongap_instances


def test_marginal_rate_examples():
    assert marginal_rate(0.0, 1.0, 0.0, 2.0, 0.5) == 0.0
    assert marginal_rate(3.0, 2.0, 5.0, 3.0, 1 / 9) == pytest.approx(11.0, rel=1e-14)
    assert marginal_rate(0.5, 1.0, 0.0, 2.0, 0.5) == 0.5


def _job(*opts, demand=1.0):
    return JobSpec(tuple(JobOption(*o) for o in opts), demand)


def test_even_split_on_identical_machines():
    res = waterfill_allocate(_job((0, 1.0, 0.0), (1, 1.0, 0.0)), np.zeros(2), 2.0, 0.5)
    np.testing.assert_allclose(res.allocation, [0.5, 0.5], rtol=1e-12)
    assert res.threshold == pytest.approx(0.5, rel=1e-10)
    assert res.threshold == pytest.approx(marginal_rate(0.5, 1, 0, 2, 0.5), rel=1e-10)
    assert res.support == (0, 1)


def test_single_machine_closed_form():
    res = waterfill_allocate(_job((0, 1.0, 0.0)), np.array([1.0]), 2.0, 0.5)
    assert res.allocation.tolist() == [1.0]
    assert res.threshold == pytest.approx(marginal_rate(2.0, 1, 0, 2, 0.5), rel=1e-10)
    assert res.threshold == pytest.approx(2.0, rel=1e-10)


def test_expensive_machine_excluded():
    res = waterfill_allocate(_job((0, 1.0, 10.0), (1, 1.0, 0.0)), np.zeros(2), 2.0, 0.5)
    np.testing.assert_allclose(res.allocation, [0.0, 1.0])
    assert res.threshold == pytest.approx(1.0, rel=1e-10)
    assert res.support == (1,)


def _scipy_block(job, loads, alpha, delta):
    """Minimize the discounted block objective directly with SLSQP."""
    mach = np.array(job.machines())
    ell = np.array([o.load for o in job.options])
    c = np.array([o.cost for o in job.options])
    L = loads[mach]

    def f(t):
        return np.sum(delta * (L + ell * t) ** alpha + c * t)

    def g(t):
        return delta * alpha * ell * (L + ell * t) ** (alpha - 1) + c

    t0 = np.full(mach.size, job.demand / mach.size)
    res = minimize(
        f, t0, jac=g, method="SLSQP", bounds=[(0, None)] * mach.size,
        constraints=[{"type": "eq", "fun": lambda t: t.sum() - job.demand, "jac": lambda t: np.ones_like(t)}],
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    return mach, res


@given(ongap_instances(max_jobs=1, max_machines=5), st.lists(st.floats(0, 5), min_size=5, max_size=5))
def test_allocation_matches_scipy_block_minimizer(inst, raw_loads):
    if not inst.jobs:
        return
    job = inst.jobs[0]
    loads = np.array(raw_loads[: inst.num_machines])
    delta = 0.5
    ours = waterfill_allocate(job, loads, inst.alpha, delta)
    mach, ref = _scipy_block(job, loads, inst.alpha, delta)
    ours_obj = np.sum(
        [delta * (loads[o.machine] + o.load * ours.allocation[o.machine]) ** inst.alpha + o.cost * ours.allocation[o.machine]
         for o in job.options]
    )
    # ours is the exact minimizer, so it can only beat SLSQP up to its tolerance
    assert ours_obj <= ref.fun + 1e-7 * max(1.0, abs(ref.fun))


def _kkt_violation(job, loads_before, res, alpha, delta):
    worst = 0.0
    theta = res.threshold
    for o in job.options:
        t = res.allocation[o.machine]
        rate = marginal_rate(loads_before[o.machine] + o.load * t, o.load, o.cost, alpha, delta)
        if o.machine in res.support:
            worst = max(worst, abs(rate - theta) / theta)
        else:
            worst = max(worst, (theta - rate) / theta)
    return worst


@given(ongap_instances(max_jobs=8, max_machines=6))
def test_kkt_invariant_on_runs(inst):
    run = run_online_fractional(inst)
    ell, _, _ = inst.dense
    loads = np.zeros(inst.num_machines)
    for j, job in enumerate(inst.jobs):
        res = waterfill_allocate(job, loads, inst.alpha, run.delta)
        assert res.threshold == run.lam[j]
        assert _kkt_violation(job, loads, res, inst.alpha, run.delta) <= 1e-7
        assert res.allocation.sum() == pytest.approx(job.demand, rel=1e-9)
        assert np.all(res.allocation >= 0)
        new = loads + ell[j] * run.state.x[j]
        assert np.all(new >= loads)
        loads = new
    np.testing.assert_allclose(run.state.loads, loads, rtol=1e-9, atol=1e-12)


@given(ongap_instances(costs=False), st.floats(0.05, 1.0))
def test_delta_scaling_covariance(inst, kappa):
    base = run_online_fractional(inst, Parameters(0.9))
    scaled = run_online_fractional(inst, Parameters(0.9 * kappa))
    np.testing.assert_allclose(scaled.lam, kappa * base.lam, rtol=1e-9)
    np.testing.assert_allclose(scaled.state.x, base.state.x, rtol=1e-9, atol=1e-12)


@given(ongap_instances())
def test_run_is_deterministic(inst):
    a, b = run_online_fractional(inst), run_online_fractional(inst)
    assert a.lam.tobytes() == b.lam.tobytes()
    assert a.state.x.tobytes() == b.state.x.tobytes()
    assert [e.to_dict() for e in a.events] == [e.to_dict() for e in b.events]


def test_two_jobs_one_machine():
    run = run_online_fractional(make_instance(2.0, [[1.0], [1.0]]))
    np.testing.assert_allclose(run.lam, [1.0, 2.0], rtol=1e-10)
    assert run.online_cost == pytest.approx(4.0, rel=1e-12)
    assert run.lam[0] == pytest.approx(marginal_rate(1.0, 1, 0, 2, 0.5), rel=1e-10)


@pytest.mark.parametrize("m", [2, 3, 4, 8])
@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_single_job_splits_evenly(m, alpha):
    run = run_online_fractional(make_instance(alpha, np.ones((1, m))))
    np.testing.assert_allclose(run.state.x[0], np.full(m, 1 / m), rtol=1e-10)
    assert run.online_cost == pytest.approx(m ** (1 - alpha), rel=1e-10)


def test_empty_run():
    run = run_online_fractional(OnGapInstance(2.0, 3, ()))
    assert run.online_cost == 0.0
    assert run.lam.size == 0


def test_event_log_serializes():
    run = run_online_fractional(make_instance(2.0, [[1.0, 1.0]]))
    d = run.events[0].to_dict()
    assert set(d) == {"job", "theta", "support", "allocation"}
    assert d["support"] == [0, 1]


def test_invalid_instance_rejected():
    with pytest.raises(ValueError):
        run_online_fractional(OnGapInstance(2.0, 1, (JobSpec((), 1.0),)))
