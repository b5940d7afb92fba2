import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from nlpd.dual import certify_run
from nlpd.experiments import random_speed_scaling
from nlpd.model import validate_instance
from nlpd.oracle import fractional_opt_ongap_pgd
from nlpd.speed_scaling import (
    ScheduleTrace,
    SpeedScalingJob,
    build_instance,
    compare_profiles,
    kernel_cost,
    load_jobs,
    oa_speed_profile,
    trace_from_run,
)
from nlpd.waterfill import run_online_fractional


def _costs(inst, j=0):
    return {o.machine: o.cost for o in inst.jobs[j].options}


def test_deadline_kernel_options():
    inst = build_instance([SpeedScalingJob(0, 1.0, 2)], "deadline", 4, 2.0)
    assert _costs(inst) == {0: 0.0, 1: 0.0}
    assert inst.jobs[0].demand == 1.0


def test_flow_kernel_costs():
    inst = build_instance([SpeedScalingJob(0, 1.0)], "flow", 3, 2.0)
    assert _costs(inst) == {0: 0.0, 1: 1.0, 2: 2.0}


@pytest.mark.parametrize("kernel", [("flow_power", 2), "flow2"])
def test_flow_squared_costs(kernel):
    inst = build_instance([SpeedScalingJob(1, 1.0)], kernel, 4, 2.0)
    assert _costs(inst) == {1: 0.0, 2: 1.0, 3: 4.0}


def test_flow_cost_is_per_unit_of_work():
    job = SpeedScalingJob(0, 4.0, weight=2.0)
    assert kernel_cost("flow", job, 3) == pytest.approx(1.5)


def test_beta_scales_costs_down():
    inst = build_instance([SpeedScalingJob(0, 1.0)], "flow", 3, 2.0, beta=2.0)
    assert _costs(inst) == {0: 0.0, 1: 0.5, 2: 1.0}


def test_custom_kernel():
    inst = build_instance([SpeedScalingJob(0, 1.0)], lambda job, t: None if t == 1 else 3.0 * t, 3, 2.0)
    assert _costs(inst) == {0: 0.0, 2: 6.0}


def test_build_errors():
    with pytest.raises(ValueError, match="beyond horizon"):
        build_instance([SpeedScalingJob(0, 1.0, 5)], "deadline", 4, 2.0)
    with pytest.raises(ValueError, match="no allowed slot"):
        build_instance([SpeedScalingJob(4, 1.0)], "flow", 4, 2.0)
    with pytest.raises(ValueError):
        build_instance([SpeedScalingJob(0, 1.0)], "flow", 4, 2.0, beta=0)


def test_generated_instance_validates():
    data = random_speed_scaling(5, 10, 2.0, 0)
    jobs, T, alpha, beta = load_jobs(data)
    assert validate_instance(build_instance(jobs, "deadline", T, alpha, beta)).ok


def test_oa_single_job():
    trace = oa_speed_profile([SpeedScalingJob(0, 1.0, 2)], 2)
    np.testing.assert_allclose(trace.speed, [0.5, 0.5])


def _slot_energy_min(jobs, T, alpha):
    """Direct SLSQP solve of the slotted energy problem."""
    pairs = [(i, t) for i, j in enumerate(jobs) for t in range(j.release, j.deadline)]

    def speeds(v):
        s = np.zeros(T)
        for (i, t), val in zip(pairs, v):
            s[t] += val
        return s

    cons = [
        {"type": "eq", "fun": (lambda v, i=i: sum(val for (k, _), val in zip(pairs, v) if k == i) - jobs[i].work)}
        for i in range(len(jobs))
    ]
    v0 = np.array([jobs[i].work / (jobs[i].deadline - jobs[i].release) for i, _ in pairs])
    res = minimize(lambda v: np.sum(speeds(v) ** alpha), v0, method="SLSQP", bounds=[(0, None)] * len(pairs),
                   constraints=cons, options={"ftol": 1e-14, "maxiter": 500})
    return speeds(res.x)


def test_oa_two_jobs_common_release():
    jobs = [SpeedScalingJob(0, 1.0, 1), SpeedScalingJob(0, 1.0, 2)]
    trace = oa_speed_profile(jobs, 2)
    # slot 0 must carry the first job; the second job is cheapest in slot 1
    np.testing.assert_allclose(trace.speed, [1.0, 1.0])
    np.testing.assert_allclose(_slot_energy_min(jobs, 2, 2.0), [1.0, 1.0], atol=1e-6)


def test_oa_disjoint_windows_concatenate():
    a = [SpeedScalingJob(0, 1.0, 2)]
    b = [SpeedScalingJob(0, 3.0, 3)]
    both = oa_speed_profile(a + [SpeedScalingJob(2, 3.0, 5)], 5)
    np.testing.assert_allclose(both.speed[:2], oa_speed_profile(a, 2).speed)
    np.testing.assert_allclose(both.speed[2:], oa_speed_profile(b, 3).speed)


@st.composite
def deadline_jobs(draw, common_release=False, agreeable=False, max_n=8, max_T=12):
    T = draw(st.integers(2, max_T))
    n = draw(st.integers(1, max_n))
    releases = sorted(0 if common_release else draw(st.integers(0, T - 1)) for _ in range(n))
    deadlines = [draw(st.integers(r + 1, T)) for r in releases]
    if agreeable:
        for i in range(1, n):
            deadlines[i] = max(deadlines[i], deadlines[i - 1])
    works = [draw(st.floats(0.1, 3.0)) for _ in range(n)]
    return [SpeedScalingJob(r, w, d) for r, w, d in zip(releases, works, deadlines)], T


@given(deadline_jobs(common_release=True), st.sampled_from([1.5, 2.0, 3.0]))
def test_oa_matches_offline_optimum_for_common_release(case, alpha):
    jobs, T = case
    oa = oa_speed_profile(jobs, T)
    ref = fractional_opt_ongap_pgd(build_instance(jobs, "deadline", T, alpha), tol=1e-12)
    energy = float(np.sum(oa.speed**alpha))
    assert energy <= ref.objective * (1 + 1e-9)
    assert energy == pytest.approx(ref.objective, rel=1e-7)


@given(deadline_jobs())
def test_oa_schedule_is_feasible(case):
    jobs, T = case
    oa = oa_speed_profile(jobs, T)
    np.testing.assert_allclose(oa.work.sum(axis=1), [j.work for j in jobs], rtol=1e-9)
    np.testing.assert_allclose(oa.work.sum(axis=0), oa.speed, rtol=1e-9, atol=1e-12)
    for i, j in enumerate(jobs):
        assert np.all(oa.work[i, : j.release] == 0)
        assert np.all(oa.work[i, j.deadline :] == 0)


@given(deadline_jobs(agreeable=True), st.sampled_from([1.5, 2.0, 3.0]))
def test_greedy_matches_oa_on_agreeable_deadlines(case, alpha):
    jobs, T = case
    run = run_online_fractional(build_instance(jobs, "deadline", T, alpha))
    assert compare_profiles(trace_from_run(run, T), oa_speed_profile(jobs, T)) <= 1e-6


def test_greedy_and_oa_diverge_on_nested_window():
    # a short job released into the middle of a long job's window
    jobs = [SpeedScalingJob(0, 2.0, 1), SpeedScalingJob(0, 2.0, 3), SpeedScalingJob(1, 1.5, 2)]
    greedy = trace_from_run(run_online_fractional(build_instance(jobs, "deadline", 3, 2.0)), 3)
    oa = oa_speed_profile(jobs, 3)
    np.testing.assert_allclose(greedy.speed, [2.0, 2.5, 1.0], rtol=1e-9)
    np.testing.assert_allclose(oa.speed, [2.0, 1.75, 1.75], rtol=1e-12)
    assert compare_profiles(greedy, oa) == pytest.approx(0.75, rel=1e-9)
    # OA is also the cheaper schedule here
    assert np.sum(oa.speed**2) < np.sum(greedy.speed**2)


@given(deadline_jobs(), st.sampled_from(["deadline", "flow", "flow2"]), st.sampled_from([1.5, 2.0, 3.0]))
def test_trace_invariants_and_certificate(case, kernel, alpha):
    jobs, T = case
    inst = build_instance(jobs, kernel, T, alpha)
    run = run_online_fractional(inst)
    trace = trace_from_run(run, T)
    np.testing.assert_allclose(trace.work.sum(axis=1), [j.work for j in jobs], rtol=1e-9)
    for i, j in enumerate(jobs):
        assert np.all(trace.work[i, : j.release] == 0)
        if kernel == "deadline":
            assert np.all(trace.work[i, j.deadline :] == 0)
    assert certify_run(run, inst).certified


def test_compare_profiles_basics():
    t = ScheduleTrace(3, np.array([1.0, 2.0, 0.0]), np.zeros((0, 3)))
    assert compare_profiles(t, t) == 0.0
    with pytest.raises(ValueError, match="horizon"):
        compare_profiles(t, ScheduleTrace(2, np.zeros(2), np.zeros((0, 2))))


def test_flow_kernel_profile_differs_from_oa():
    jobs = [SpeedScalingJob(0, 1.0, 3), SpeedScalingJob(1, 1.0, 3)]
    greedy = trace_from_run(run_online_fractional(build_instance(jobs, "flow", 3, 2.0)), 3)
    assert compare_profiles(greedy, oa_speed_profile(jobs, 3)) > 0


def test_trace_json_shape():
    trace = oa_speed_profile([SpeedScalingJob(0, 1.0, 2)], 2)
    d = trace.to_dict()
    assert set(d) == {"horizon", "speed", "work"}
    assert d["work"] == [[0.5, 0.5]]


def test_load_jobs_defaults():
    jobs, T, alpha, beta = load_jobs({"alpha": 3, "horizon": 4, "jobs": [{"release": 1, "work": 2}]})
    assert jobs == [SpeedScalingJob(1, 2.0, None, 1.0)]
    assert (T, alpha, beta) == (4, 3.0, 1.0)
