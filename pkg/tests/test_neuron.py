import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmsim import panels
from nmsim.neuron import (
    Kernel,
    NeuronParams,
    NeuronState,
    StabilityError,
    Stimulus,
    SynapseParams,
    integrate_to,
    lif_rate,
    nmda_gate,
    simulate_population,
    step,
    synaptic_current,
    synaptic_input,
)

SYN = SynapseParams()


def test_rest_is_a_fixed_point():
    p = NeuronParams()
    s = NeuronState.at_rest(p)
    assert integrate_to(s, p, SYN, 0.5, 20e-6) == []
    # the exponential term shifts the rest point by g_L-scaled exp(-10) of Delta_T
    assert s.V == pytest.approx(p.E_L, abs=1e-6)
    v = s.V
    integrate_to(s, p, SYN, 1.0, 20e-6)
    assert s.V == pytest.approx(v, abs=1e-12)
    lif = NeuronParams(Delta_T=0.0)
    s = NeuronState.at_rest(lif)
    integrate_to(s, lif, SYN, 0.5, 20e-6)
    assert s.V == lif.E_L


@pytest.mark.parametrize("I", [0.6e-12, 1.0e-12, 3e-12])
def test_lif_limit_matches_closed_form(I):
    p = NeuronParams(Delta_T=0.0, V_reset=-0.070, I_dc=I)
    (spikes,) = simulate_population([p], Stimulus.dc(), 1.0, dt=10e-6)
    isi = np.diff(spikes[spikes > 0.1])
    assert 1.0 / isi.mean() == pytest.approx(lif_rate(p, I), rel=0.01)


def test_refractory_clamp_holds_reset():
    p = NeuronParams(I_dc=1e-9, t_rfr=5e-3)
    s = NeuronState.at_rest(p)
    trace = []
    (t0, *_) = integrate_to(s, p, SYN, 0.05, 20e-6, trace)
    held = [V for t, V in trace if t0 < t <= t0 + p.t_rfr and V != p.V_peak]
    assert held and all(V == p.V_reset for V in held)


@pytest.mark.parametrize("k", list(Kernel))
def test_kernel_decays_to_one_over_e(k):
    p = NeuronParams(V_T=-0.01, V_peak=0.05)
    s = NeuronState.at_rest(p)
    synaptic_input(s, p, SYN, k)
    assert synaptic_current(s, SYN, SYN.tau[k], k) == pytest.approx(SYN.weight[k] / math.e, rel=1e-12)
    integrate_to(s, p, SYN, SYN.tau[k], 20e-6)
    assert s.I[k] == pytest.approx(SYN.weight[k] / math.e, rel=1e-9)


def test_steady_state_mean_current():
    # time average of a regular train of jumps is weight * rate * tau
    p = NeuronParams(V_T=-0.01, V_peak=0.05)
    rate, T = 500.0, 0.5
    s = NeuronState.at_rest(p)
    samples = []
    for t in Stimulus.regular(rate, T).times:
        integrate_to(s, p, SYN, t, 20e-6)
        if t > 0.1:
            samples.append((s.I[0] + SYN.weight[0]) * SYN.tau[0] * rate * (1 - math.exp(-1 / (rate * SYN.tau[0]))))
        synaptic_input(s, p, SYN, Kernel.FEPSC)
    assert np.mean(samples) == pytest.approx(SYN.weight[0] * rate * SYN.tau[0], rel=0.05)


def test_input_at_wrong_time_rejected():
    p = NeuronParams()
    with pytest.raises(ValueError):
        synaptic_input(NeuronState.at_rest(p), p, SYN, "FEPSC", t=1e-3)


@given(st.floats(-0.2, 0.2))
def test_nmda_gate_bounded_and_monotone(V):
    g = nmda_gate(V, -0.05, 0.01)
    assert 0.0 <= g <= 1.0
    assert nmda_gate(V + 1e-3, -0.05, 0.01) >= g


def test_nmda_gate_midpoint_and_tail():
    assert nmda_gate(-0.05, -0.05, 0.01) == 0.5
    assert nmda_gate(-0.05 - 0.1, -0.05, 0.01) < 1e-4


def test_nmda_gate_blocks_slow_kernel_at_rest():
    p = NeuronParams()
    fast = NeuronState.at_rest(p)
    slow = NeuronState.at_rest(p)
    synaptic_input(fast, p, SYN, "FEPSC", weight=2e-12)
    synaptic_input(slow, p, SYN, "SEPSC", weight=2e-12)
    integrate_to(fast, p, SYN, 2e-3, 20e-6)
    integrate_to(slow, p, SYN, 2e-3, 20e-6)
    assert fast.V > slow.V


def test_coarse_step_rejected():
    p = NeuronParams()
    with pytest.raises(StabilityError):
        step(NeuronState.at_rest(p), p, p.tau_m / 5)
    with pytest.raises(StabilityError):
        integrate_to(NeuronState.at_rest(p), p, SYN, 1.0, 0.0)


def _panel_configs():
    leak_syn = SynapseParams().with_weight(Kernel.FEPSC, 2e-12)
    yield [NeuronParams.from_biases(I, I_rfr=0.1e-9) for I in panels.LEAK_I_TAU], \
        Stimulus.regular(200.0, 0.5), leak_syn
    yield [NeuronParams(V_T=v, I_dc=1.35e-12) for v in panels.THRESHOLDS], Stimulus.dc(), None
    yield [NeuronParams(t_rfr=t, I_dc=1e-9) for t in panels.REFRACTORY], Stimulus.dc(), None
    yield [NeuronParams(I_dc=panels.ADAPT_I_DC, b=panels.ADAPT_B)], Stimulus.dc(), None


@pytest.mark.parametrize("cfg", list(_panel_configs()), ids=["leak", "threshold", "refractory", "adaptation"])
def test_step_refinement_changes_counts_by_at_most_one(cfg):
    params, stim, syn = cfg
    coarse = simulate_population(params, stim, 0.5, syn=syn, dt=20e-6, vectorize=False)
    fine = simulate_population(params, stim, 0.5, syn=syn, dt=2e-6, vectorize=False)
    for c, f in zip(coarse, fine):
        assert abs(len(c) - len(f)) <= 1


def test_rate_monotone_over_grid():
    I_dc = np.linspace(1.0e-12, 3e-12, 5)
    V_T = np.linspace(-0.054, -0.046, 5)
    t_rfr = np.linspace(1e-3, 9e-3, 5)
    params = [NeuronParams(I_dc=i, V_T=v, t_rfr=r) for i in I_dc for v in V_T for r in t_rfr]
    counts = np.array([len(s) for s in simulate_population(params, Stimulus.dc(), 0.5)]).reshape(5, 5, 5)
    assert np.all(np.diff(counts, axis=0) >= 0)
    assert np.all(np.diff(counts, axis=1) <= 0)
    assert np.all(np.diff(counts, axis=2) <= 0)
    assert counts[-1, 0, 0] > counts[0, -1, -1]


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(1)
    params = [replace(NeuronParams(b=0.1e-12), I_dc=float(i), V_T=float(v))
              for i, v in zip(rng.uniform(0.8e-12, 3e-12, 12), rng.uniform(-0.054, -0.046, 12))]
    stim = Stimulus.poisson(80.0, 0.5, seed=4)
    a = simulate_population(params, stim, 0.5, vectorize=True)
    b = simulate_population(params, stim, 0.5, vectorize=False)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


def test_lif_rate_zero_below_rheobase():
    p = NeuronParams()
    assert lif_rate(p, 0.4e-12) == 0.0
