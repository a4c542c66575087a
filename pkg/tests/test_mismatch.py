from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmsim.mismatch import (
    MC_DURATION,
    MC_WARMUP,
    MismatchSpec,
    RateStats,
    calibrated_defaults,
    histogram,
    monte_carlo_rates,
    sample_params,
    standard_normal,
)
from nmsim.neuron import NeuronParams, Stimulus

NOMINAL, SPEC = calibrated_defaults(n_runs=200)


def _mc(spec, runs=None, T=0.6):
    return monte_carlo_rates(NOMINAL, spec, Stimulus.dc(), T, warmup=MC_WARMUP, runs=runs)


def test_zero_sigma_reproduces_nominal():
    spec = replace(SPEC, scale=0.0)
    assert all(sample_params(NOMINAL, spec, r) == NOMINAL for r in range(20))
    stats = _mc(replace(spec, n_runs=5))
    assert stats.std_dev == 0.0


def test_lognormal_spread_of_draws():
    spec = MismatchSpec(sigma_map={"g_L": 0.3}, n_runs=100_000)
    logs = np.array([np.log(sample_params(NOMINAL, spec, r).g_L / NOMINAL.g_L) for r in range(spec.n_runs)])
    assert logs.std(ddof=1) == pytest.approx(0.3, rel=0.02)
    assert abs(logs.mean()) < 0.01


def test_draws_depend_only_on_seed_run_and_parameter():
    assert standard_normal(7, 3, 2) == standard_normal(7, 3, 2)
    assert standard_normal(7, 3, 2) != standard_normal(8, 3, 2)
    assert standard_normal(7, 3, 2) != standard_normal(7, 4, 2)
    assert standard_normal(7, 3, 2) != standard_normal(7, 3, 1)


@settings(max_examples=5)
@given(st.permutations(list(range(12))))
def test_statistics_do_not_depend_on_run_order(order):
    base = _mc(replace(SPEC, n_runs=12), runs=range(12), T=0.3)
    perm = _mc(replace(SPEC, n_runs=12), runs=order, T=0.3)
    assert (perm.mean, perm.std_dev) == (base.mean, base.std_dev)


def test_same_seed_same_result():
    a, b = _mc(replace(SPEC, n_runs=30)), _mc(replace(SPEC, n_runs=30))
    assert a == b


def test_spread_grows_with_sigma():
    rels = [_mc(replace(SPEC, scale=SPEC.scale * k)).relative_error for k in (0.25, 0.5, 1.0, 2.0)]
    assert all(x < y for x, y in zip(rels, rels[1:]))
    assert rels[3] / rels[2] == pytest.approx(2.0, rel=0.2)
    assert rels[2] / rels[1] == pytest.approx(2.0, rel=0.2)


def test_calibrated_defaults_hit_the_target():
    stats = monte_carlo_rates(NOMINAL, replace(SPEC, n_runs=500), Stimulus.dc(), MC_DURATION, warmup=MC_WARMUP)
    assert stats.mean == pytest.approx(92.74, rel=0.02)
    assert stats.relative_error == pytest.approx(0.0586, rel=0.05)
    assert stats.silent_runs == ()


def test_sample_std_uses_n_minus_one():
    s = RateStats.from_samples([1.0, 2.0, 3.0, 4.0])
    assert s.std_dev == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert RateStats.from_samples([5.0]).std_dev == 0.0


def test_histogram_accounts_for_every_run():
    stats = RateStats.from_samples([80.1, 81.9, 82.0, 95.5, 100.0])
    rows = histogram(stats, 2.0)
    assert sum(c for _, _, c in rows) == 5
    assert rows[0][0] == 80.0 and rows[-1][1] == 102.0
    assert all(b - a == pytest.approx(2.0) for a, b, _ in rows)


def test_spec_validation():
    with pytest.raises(ValueError):
        MismatchSpec(sigma_map={"nope": 1.0})
    with pytest.raises(ValueError):
        MismatchSpec(n_runs=0)
    with pytest.raises(ValueError):
        MismatchSpec(scale=-1)
    with pytest.raises(ValueError):
        monte_carlo_rates(NeuronParams(), MismatchSpec(n_runs=1), Stimulus.dc(), 0.5)
