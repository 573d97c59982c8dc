import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvstream.client import best_chain_dp
from mvstream.model import (ModelError, NavigationModel, NavigationWindow, Representation,
                            RepresentationSet, make_video)
from mvstream.population import start_view_distribution
from mvstream.simulate import (ChannelProcess, SessionTrace, SessionUser, SlotRecord,
                               TraceExhausted, aggregate, channel_step, default_markov,
                               initial_state, make_users, navigation_step, paired_difference,
                               run_population, run_session, staircase)


@pytest.fixture(scope="module")
def hall():
    return make_video("hall", q_ticks=2)


def _levels(process, n, seed=0):
    rng = np.random.default_rng(seed)
    state, out = initial_state(process), []
    for _ in range(n):
        kbps, state = channel_step(process, state, rng)
        out.append(kbps)
    return out


# -- channel -------------------------------------------------------------------

def test_staircase_slot_seven():
    assert _levels(staircase((2000, 4000, 6000), 5), 8)[7] == 4000
    assert _levels(staircase((2000, 4000, 6000), 5), 16)[15] == 2000  # wraps around


def test_markov_identity_is_constant():
    p = ChannelProcess("markov", (1000, 3000), transition=((1, 0), (0, 1)), initial=1)
    assert set(_levels(p, 50)) == {3000.0}


def test_default_markov_rows():
    p = default_markov()
    assert np.allclose(np.sum(p.transition, axis=1), 1.0)
    assert p.transition[1] == pytest.approx((0.1, 0.8, 0.1))
    assert set(_levels(p, 200, seed=3)) <= set(p.levels)


def test_trace_exhausted():
    p = ChannelProcess("trace", (1500, 2500))
    assert _levels(p, 2) == [1500, 2500]
    with pytest.raises(TraceExhausted):
        _levels(p, 4)


def test_channel_validation():
    with pytest.raises(ModelError):
        ChannelProcess("markov", (1000, 2000), transition=((0.5, 0.4), (0, 1)))
    with pytest.raises(ModelError):
        ChannelProcess("staircase", (0, 1000))
    with pytest.raises(ModelError):
        ChannelProcess("bursty", (1000,))


# -- navigation ----------------------------------------------------------------

def test_zero_speed_stays(hall):
    focus = start_view_distribution(hall)
    nav = NavigationModel(rho=0.0)
    rng = np.random.default_rng(0)
    assert all(navigation_step(7, NavigationWindow(7, 7), nav, hall, focus, rng) == 7
               for _ in range(50))


def test_unbiased_walk_is_symmetric(hall):
    focus = start_view_distribution(hall)
    nav = NavigationModel()
    rng = np.random.default_rng(1)
    u, w = 9, NavigationWindow(5, 13)
    steps = [navigation_step(u, w, nav, hall, focus, rng, bias=0.0) - u for _ in range(20000)]
    assert abs(np.mean(steps)) < 0.05


def test_biased_walk_moves_toward_focus(hall):
    focus = start_view_distribution(hall, 2.0)  # sharp focus at the middle tick
    nav = NavigationModel()
    rng = np.random.default_rng(2)
    u, w = 2, NavigationWindow(0, 6)
    steps = np.array([navigation_step(u, w, nav, hall, focus, rng, bias=5.0) - u
                      for _ in range(10000)])
    assert (steps > 0).mean() > 0.5


def test_walk_stays_in_window(hall):
    focus = start_view_distribution(hall)
    rng = np.random.default_rng(4)
    w = NavigationWindow(6, 9)
    for _ in range(500):
        assert 6 <= navigation_step(7, w, NavigationModel(), hall, focus, rng) <= 9
    with pytest.raises(ModelError):
        navigation_step(99, w, NavigationModel(), hall, focus, rng)


# -- sessions ------------------------------------------------------------------

def _two_view(hall):
    return RepresentationSet.build([Representation("hall", 0, 1000),
                                    Representation("hall", 18, 1000)], {"hall": hall})


def test_single_slot_unique_chain(hall):
    stored = _two_view(hall)
    user = SessionUser(0, "hall", start=8)
    trace = run_session(user, stored, {"hall": hall}, 1, 0, staircase((6000,)))
    (rec,) = trace.records
    expect = best_chain_dp(NavigationWindow(4, 12), stored, 12000, hall)
    assert rec.status == "ok" and rec.cost == 2000
    assert rec.satisfaction == pytest.approx(expect.satisfaction, abs=1e-12)


def test_starved_channel_gives_zero(hall):
    trace = run_session(SessionUser(0, "hall"), _two_view(hall), {"hall": hall}, 10, 0,
                        staircase((500,)))
    assert [r.satisfaction for r in trace.records] == [0.0] * 10
    assert trace.stalls == 10 and {r.status for r in trace.records} == {"infeasible"}


def test_unspannable_flagged(hall):
    stored = RepresentationSet.build([Representation("hall", 0, 300),
                                      Representation("hall", 2, 300)], {"hall": hall})
    trace = run_session(SessionUser(0, "hall", start=12), stored, {"hall": hall}, 3, 0,
                        staircase((6000,)))
    assert {r.status for r in trace.records} == {"unspannable"} and trace.mean == 0.0


def test_session_deterministic(hall):
    stored = RepresentationSet.build([Representation("hall", c, r) for c in hall.cameras
                                      for r in (300, 1000)], {"hall": hall})
    a = run_session(SessionUser(0, "hall"), stored, {"hall": hall}, 20, 42, default_markov())
    b = run_session(SessionUser(0, "hall"), stored, {"hall": hall}, 20, 42, default_markov())
    assert a.records == b.records
    c = run_session(SessionUser(0, "hall"), stored, {"hall": hall}, 20, 43, default_markov())
    assert a.records != c.records


def test_region_confines_user(hall):
    stored = RepresentationSet.build([Representation("hall", c, 1000) for c in hall.cameras],
                                     {"hall": hall})
    region = NavigationWindow(4, 13)
    for seed in range(5):
        t = run_session(SessionUser(0, "hall"), stored, {"hall": hall}, 15, seed,
                        staircase((6000,)), region=region)
        assert all(region.lo <= r.lo <= r.u <= r.hi <= region.hi for r in t.records)
    with pytest.raises(ModelError):
        run_session(SessionUser(0, "hall"), stored, {"hall": hall}, 1, 0, staircase((6000,)),
                    region=NavigationWindow(40, 50))
    with pytest.raises(ModelError):
        run_session(SessionUser(0, "hall"), stored, {"hall": hall}, 0, 0, staircase((6000,)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cost_within_slot_budget(seed):
    rng = np.random.default_rng(seed)
    video = make_video(str(rng.choice(["dancer", "shark", "hall"])), q_ticks=2)
    reps = [Representation(video.id, c, r) for c in video.cameras for r in (300, 1000, 4000)
            if rng.random() < 0.5]
    stored = RepresentationSet.build(reps, {video.id: video})
    t = run_session(SessionUser(0, video.id), stored, {video.id: video}, 12, seed, default_markov())
    for r in t.records:
        assert r.cost <= r.budget + 1e-9 and 0 <= r.satisfaction <= 1
        assert r.budget == r.channel_kbps * 2.0


# -- aggregation ---------------------------------------------------------------

def _trace(uid, values, rep=0, label="x"):
    t = SessionTrace(SessionUser(uid, "hall", label=label), rep)
    t.records = [SlotRecord(k, 0, 0, 0, 1.0, 1.0, 0.0, v, "ok") for k, v in enumerate(values)]
    return t


def test_aggregate_constant():
    agg = aggregate([_trace(0, [0.7] * 5)])
    assert agg.population == 0.7 and agg.per_user == {0: 0.7} and agg.per_class == {"x": 0.7}
    assert agg.per_slot == pytest.approx([0.7] * 5) and agg.population_ci == 0.0


def test_aggregate_two_users():
    agg = aggregate([_trace(0, [0.4, 0.4]), _trace(1, [0.8, 0.8], label="y")])
    assert agg.population == pytest.approx(0.6) and agg.per_class == pytest.approx({"x": 0.4, "y": 0.8})
    with pytest.raises(ModelError):
        aggregate([])


def test_paired_difference():
    a = [_trace(0, [0.8], rep=r) for r in range(4)]
    b = [_trace(0, [0.5 + 0.01 * r], rep=r) for r in range(4)]
    mean, half = paired_difference(a, b)
    assert mean == pytest.approx(0.285) and half > 0


def test_make_users_and_population(hall):
    videos = {"hall": hall, "shark": make_video("shark", q_ticks=2)}
    users = make_users(videos, 6, seed=1)
    assert [u.user_id for u in users] == list(range(6))
    assert [u.video for u in users] == sorted(u.video for u in users)
    assert users == make_users(videos, 6, seed=1)
    stored = RepresentationSet.build([Representation(v, c, 1000) for v in videos
                                      for c in videos[v].cameras], videos)
    traces = run_population(users, stored, videos, 4, 3, 9, staircase())
    assert len(traces) == 18 and {t.repetition for t in traces} == {0, 1, 2}
    again = run_population(users, stored, videos, 4, 3, 9, staircase())
    assert [t.records for t in traces] == [t.records for t in again]
