import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmsim.engine import PS_PER_S
from nmsim.fabric import (
    Adversary,
    DeadlockError,
    DelayModel,
    Fabric,
    Sink,
    decode,
    encode,
    pipeline_description,
    qdi_conformance,
    throughput,
)
from nmsim.fabric.system import conformance_trial

RANDOM = dict(jitter=0.9, mode=Adversary.RANDOMIZED)


def _pipe(n_stages, values, delays=None):
    fab = Fabric.from_description(pipeline_description(n_stages), delays=delays)
    for v in values:
        fab.processes["src"].push(v, 0)
    fab.run()
    return fab


def _received(fab, sink="snk"):
    return [v for _, v in fab.processes[sink].received]


def test_dual_rail_round_trip_all_words():
    for v in range(1 << 10):
        t, f = encode(v, 10)
        assert t & f == 0 and t | f == 1023
        assert decode(t, f, 10) == v
    with pytest.raises(ValueError):
        decode(1, 1, 10)
    with pytest.raises(ValueError):
        decode(0, 0, 10)
    with pytest.raises(ValueError):
        encode(1024, 10)


def test_steady_cycle_is_ten_nominal_transitions():
    fab = _pipe(1, range(5))
    times = [t for t, _ in fab.processes["snk"].received]
    assert {b - a for a, b in zip(times, times[1:])} == {550}
    assert DelayModel().cycle_ps == 550


@settings(max_examples=30)
@given(st.lists(st.integers(0, 1023), min_size=1, max_size=20), st.integers(0, 2**16))
def test_pipeline_order_under_random_delays(vals, seed):
    fab = _pipe(3, vals, DelayModel(seed=seed, **RANDOM))
    assert _received(fab) == vals
    assert fab.violations == []


@pytest.mark.slow
def test_long_stream_keeps_order():
    rng = random.Random(1)
    vals = [rng.getrandbits(10) for _ in range(10_000)]
    fab = _pipe(3, vals, DelayModel(seed=2, **RANDOM))
    assert _received(fab) == vals
    assert fab.violations == []


@settings(max_examples=20)
@given(st.integers(0, 2**16))
def test_split_tree_steers_on_low_bits(seed):
    outcome = conformance_trial("split", DelayModel(seed=seed, **RANDOM))
    assert outcome.passed, outcome.reasons


@settings(max_examples=10)
@given(st.integers(0, 2**16))
def test_merge_tree_preserves_multiset_and_per_source_order(seed):
    outcome = conformance_trial("merge", DelayModel(seed=seed, **RANDOM))
    assert outcome.passed, outcome.reasons


def test_bandwidth_near_published_rate():
    assert throughput(1, 2000) == pytest.approx(1.8e9, rel=0.02)
    assert throughput(1, 2000) == pytest.approx(PS_PER_S / 550, rel=1e-3)


def test_throughput_independent_of_depth():
    assert throughput(8, 1000) == pytest.approx(throughput(1, 1000), rel=0.05)


def test_doubling_delay_halves_throughput():
    slow = throughput(1, 1000, DelayModel(nominal=110))
    assert slow == pytest.approx(throughput(1, 1000) / 2, rel=1e-3)


def test_zero_jitter_equals_nominal():
    vals = list(range(50))
    a = _pipe(2, vals, DelayModel(jitter=0.0, mode=Adversary.RANDOMIZED, seed=5))
    b = _pipe(2, vals)
    assert a.processes["snk"].received == b.processes["snk"].received


def test_worst_case_corners_only():
    d = DelayModel(nominal=100, jitter=0.5, mode=Adversary.WORST_CASE_SAMPLED, seed=1)
    assert {d.sample() for _ in range(200)} == {50, 150}
    r = DelayModel(nominal=100, jitter=0.5, mode="RANDOMIZED", seed=1)
    assert all(50 <= r.sample() <= 150 for _ in range(200))
    with pytest.raises(ValueError):
        DelayModel(jitter=1.0)


@pytest.mark.parametrize("topology", ["pipeline", "split", "merge"])
def test_conformance_short_campaign(topology):
    report = qdi_conformance(topology, n_trials=20, seed=3)
    assert report.ok and report.passed == 20


def test_early_ack_fault_is_detected():
    report = qdi_conformance("pipeline", n_trials=20, seed=3, fault="early_ack")
    assert report.failed > 0
    assert report.first_failure.reasons and report.first_failure.trace


def test_deadlock_is_reported(monkeypatch):
    monkeypatch.setattr(Sink, "evaluate", lambda self, now: None)
    fab = Fabric.from_description(pipeline_description(2))
    fab.processes["src"].push(7, 0)
    with pytest.raises(DeadlockError) as exc:
        fab.run()
    assert exc.value.pending == 1 and exc.value.stuck


def test_token_counts_feed_energy_accounting():
    fab = _pipe(3, range(40))
    assert [fab.token_counts()[f"buf{i}"] for i in range(3)] == [40, 40, 40]
    trace = fab.token_trace()
    assert len(trace) == 4 * 40
    assert fab.token_trace_csv().splitlines()[0] == "time_ps,process_id,port,value"


def test_wiring_errors():
    with pytest.raises(ValueError):
        Fabric.from_description([{"kind": "BUFFER", "id": "b", "in": ["x"], "out": ["y"]}])
    with pytest.raises(ValueError):
        conformance_trial("split", DelayModel(), fault="early_ack")
