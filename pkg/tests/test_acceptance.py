"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed together at the end of the pytest run.
"""

import random
from collections import Counter

import numpy as np
import pytest

from nmsim import panels
from nmsim.cam import CamArray, search
from nmsim.fabric import decode, encode, qdi_conformance, throughput
from nmsim.mismatch import MC_DURATION, MC_WARMUP, calibrated_defaults, monte_carlo_rates
from nmsim.network import ChipConfig, Network, NetworkSpec, connect
from nmsim.neuron import Kernel, NeuronParams, Stimulus, SynapseParams, lif_rate, simulate_population
from nmsim.power import (
    BUFFER_E_DYN,
    BUFFER_STATIC_W,
    EnergyLedger,
    ReportConfig,
    buffer_ledger,
    chip_report,
    system_routing_estimate,
)


@pytest.fixture
def verdict(record_property):
    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        record_property("acceptance", line)
        assert ok, line

    return record


def test_criterion_1_monte_carlo_mismatch(verdict):
    nominal, spec = calibrated_defaults(n_runs=500)
    stats = monte_carlo_rates(nominal, spec, Stimulus.dc(), MC_DURATION, warmup=MC_WARMUP)
    ok = abs(stats.mean - 92.7) <= 2.0 and abs(100 * stats.relative_error - 5.86) <= 0.5
    verdict(1, ok, f"mean {stats.mean:.2f} Hz, std {stats.std_dev:.3f} Hz, relative error "
                   f"{100 * stats.relative_error:.3f}%")


def test_criterion_2_buffer_bandwidth(verdict):
    rate = throughput(1, 2000)
    verdict(2, abs(rate - 1.8e9) <= 0.02 * 1.8e9, f"{rate / 1e9:.4f} G events/s")


def test_criterion_3_power_curve(verdict):
    top = buffer_ledger(1.8e9, n_tokens=400)
    idle = buffer_ledger(100.0)
    rates = np.logspace(3, 9, 7)
    dyn = [(buffer_ledger(r).watts - BUFFER_STATIC_W) / (BUFFER_E_DYN * r) - 1 for r in rates]
    worst = max(abs(d) for d in dyn)
    ok = (abs(top.watts - 250e-6) <= 0.02 * 250e-6 and abs(idle.watts - 9.84e-9) <= 0.05 * 9.84e-9
          and worst <= 0.03 and not top.saturated)
    verdict(3, ok, f"P(1.8G) {top.watts * 1e6:.2f} uW, P(100) {idle.watts * 1e9:.4f} nW, "
                   f"worst linearity deviation {100 * worst:.3f}% over 1e3..1e9")


def test_criterion_4_system_routing(verdict):
    est = system_routing_estimate(600, 1e5)
    ok = abs(est.watts - 14.7e-6) <= 0.1 * 14.7e-6 and abs(est.joules_per_event - 147e-12) <= 0.1 * 147e-12
    verdict(4, ok, f"{est.watts * 1e6:.3f} uW, {est.joules_per_event * 1e12:.2f} pJ/event")


def test_criterion_5_area_roll_up(verdict):
    led = EnergyLedger(window=1.0)
    led.charge("neuron_spike", 100, 50e-12)
    led.measurements.update(router_bandwidth_events_per_s=throughput(1, 2000),
                            routing_energy_per_event_J=system_routing_estimate().joules_per_event)
    rep = chip_report(ReportConfig(), led)
    r = rep.rows
    table = rep.matches_table()
    ok = (r["cam_per_neuron_um2"] == 192.0 and r["synapse_area_um2"] == 3.0
          and r["capacitor_area_um2"] == 50.0 and all(table.values()))
    verdict(5, ok, f"CAM {r['cam_per_neuron_um2']} um^2, synapse {r['synapse_area_um2']} um^2, "
                   f"capacitor {r['capacitor_area_um2']} um^2, fields matched {sum(table.values())}/{len(table)}")


def test_criterion_6_qdi_conformance(verdict):
    reports = {t: qdi_conformance(t, n_trials=1000, seed=0) for t in ("pipeline", "split", "merge")}
    fault = qdi_conformance("pipeline", n_trials=50, seed=0, fault="early_ack")
    ok = all(r.ok for r in reports.values()) and fault.failed > 0
    summary = ", ".join(f"{t} {r.passed}/{r.trials}" for t, r in reports.items())
    verdict(6, ok, f"{summary}; injected fault caught in {fault.failed}/{fault.trials} trials")


def test_criterion_7_neuron_behaviour(verdict):
    leak = panels.leak_panel()
    thr = panels.threshold_panel()
    rfr = panels.refractory_panel()
    adapt = panels.adaptation_panel()
    isi = adapt.isis(1)
    lif_err = 0.0
    for I in (0.6e-12, 1e-12, 3e-12):
        p = NeuronParams(Delta_T=0.0, V_reset=-0.070, I_dc=I)
        (s,) = simulate_population([p], Stimulus.dc(), 1.0, dt=10e-6)
        lif_err = max(lif_err, abs(1 / np.diff(s[s > 0.1]).mean() / lif_rate(p, I) - 1))
    checks = {
        "a": len(set(leak.rates)) == 3 and leak.rates == sorted(leak.rates, reverse=True),
        "b": all(x > y for x, y in zip(thr.rates, thr.rates[1:])),
        "c": all(abs(r * t - 1) <= 0.05 for r, t in zip(rfr.rates, rfr.values)),
        "d": bool(np.all(np.diff(isi) >= 0)) and abs(isi[-1] - isi[-2]) <= 1e-3 * isi[-1],
        "lif": lif_err <= 0.01,
    }
    verdict(7, all(checks.values()),
            " ".join(f"({k}) {'ok' if v else 'no'}" for k, v in checks.items())
            + f"; leak {['%.1f' % r for r in leak.rates]} Hz, LIF error {100 * lif_err:.3f}%")


def test_criterion_8_oracle_equivalence(verdict):
    rng = np.random.default_rng(8)
    words = rng.integers(0, 1 << 12, 64)
    words[::7] = words[3]
    cam = CamArray(words=words.tolist())
    cam_ok = all(search(cam, int(q)) == {i for i, w in enumerate(words) if w == q}
                 for q in rng.integers(0, 1 << 12, 10_000))

    prng = random.Random(8)
    cfg = ChipConfig(n_cores=4, neurons_per_core=64, synapse=SynapseParams(weight=(0.0,) * 4))
    spec = NetworkSpec(cfg, T=0.02)
    for dst in range(cfg.n_neurons):
        for src in prng.sample(range(cfg.n_neurons), prng.randint(0, 8)):
            connect(spec, src, dst, prng.choice(list(Kernel)))
    net = Network(spec)
    spikes = [(prng.uniform(0, 0.019), prng.randrange(cfg.n_neurons)) for _ in range(1000)]
    net.inject(spikes)
    res = net.run()
    table = spec.connectivity()
    want = Counter((g, d, k) for _, g in spikes for d, k in table.get(g, []))
    fan_ok = Counter((tag, d, k) for _, tag, d, k in res.deliveries) == want

    rail_ok = all(decode(*encode(v, 10), 10) == v for v in range(1 << 10))
    verdict(8, cam_ok and fan_ok and rail_ok,
            f"CAM scan {'exact' if cam_ok else 'differs'}, fan-out {'exact' if fan_ok else 'differs'} "
            f"({sum(want.values())} deliveries), dual-rail {'exact' if rail_ok else 'differs'}")
