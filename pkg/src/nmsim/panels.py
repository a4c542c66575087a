"""The four single-neuron behaviour panels: leak, threshold, refractory, adaptation.

Each panel sweeps one knob, records membrane traces and firing rates, and
is what ``neuron-demo`` writes out as CSV.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .neuron import (
    Kernel,
    NeuronParams,
    Stimulus,
    SynapseParams,
    firing_rates,
    simulate_population,
    simulate_trace,
)

LEAK_I_TAU = (0.5e-12, 1e-12, 2e-12)
THRESHOLDS = (-0.054, -0.052, -0.050, -0.048, -0.046)
REFRACTORY = (2e-3, 5e-3, 10e-3)
ADAPT_B = 0.1e-12
ADAPT_I_DC = 2e-12


@dataclass
class Panel:
    name: str
    knob: str
    values: list[float]
    rates: list[float]
    spikes: list[list[float]] = field(repr=False)
    traces: list[list[tuple[float, float]]] = field(repr=False)

    def isis(self, i: int = 0) -> np.ndarray:
        return np.diff(np.asarray(self.spikes[i]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("panel", "knob", "value", "rate_hz", "t_s", "V_V"))
        for v, r, tr in zip(self.values, self.rates, self.traces):
            for t, V in tr:
                w.writerow((self.name, self.knob, repr(v), f"{r:.6g}", f"{t:.9g}", f"{V:.9g}"))
        return buf.getvalue()


def _run(name: str, knob: str, values: Sequence[float], params: Sequence[NeuronParams], stim: Stimulus,
         T: float, syn: SynapseParams | None, dt: float, warmup: float, trace_T: float) -> Panel:
    rates = [r.rate_hz for r in firing_rates(list(params), stim, T, syn=syn, dt=dt, warmup=warmup)]
    spikes, traces = [], []
    for p in params:
        s, tr = simulate_trace(p, stim, trace_T, syn, dt)
        spikes.append(s)
        traces.append(tr)
    return Panel(name, knob, list(values), rates, spikes, traces)


def leak_panel(I_tau: Sequence[float] = LEAK_I_TAU, rate: float = 200.0, weight: float = 2e-12,
               T: float = 1.0, dt: float = 20e-6, warmup: float = 0.1, trace_T: float = 0.2) -> Panel:
    """Regular FEPSC train onto neurons whose leak comes from the I_tau bias."""
    params = [NeuronParams.from_biases(I, I_rfr=NeuronParams().C_R / 2e-3) for I in I_tau]
    syn = SynapseParams().with_weight(Kernel.FEPSC, weight)
    stim = Stimulus.regular(rate, T, Kernel.FEPSC)
    return _run("leak", "I_tau_A", I_tau, params, stim, T, syn, dt, warmup, trace_T)


def threshold_panel(V_T: Sequence[float] = THRESHOLDS, I_dc: float = 1.35e-12, T: float = 1.0,
                    dt: float = 20e-6, warmup: float = 0.1, trace_T: float = 0.2) -> Panel:
    params = [NeuronParams(V_T=v, I_dc=I_dc) for v in V_T]
    return _run("threshold", "V_T_V", V_T, params, Stimulus.dc(), T, None, dt, warmup, trace_T)


def refractory_panel(t_rfr: Sequence[float] = REFRACTORY, I_dc: float = 1e-9, T: float = 0.5,
                     dt: float = 20e-6, warmup: float = 0.05, trace_T: float = 0.05) -> Panel:
    """Saturating DC drive: the rate approaches 1 / t_rfr."""
    params = [NeuronParams(t_rfr=t, I_dc=I_dc) for t in t_rfr]
    return _run("refractory", "t_rfr_s", t_rfr, params, Stimulus.dc(), T, None, dt, warmup, trace_T)


def adaptation_panel(b: float = ADAPT_B, I_dc: float = ADAPT_I_DC, tau_w: float = 0.1, T: float = 2.0,
                     dt: float = 20e-6, trace_T: float = 0.5) -> Panel:
    """Adapting neuron next to its non-adapting twin under the same DC step."""
    params = [NeuronParams(I_dc=I_dc, b=0.0, tau_w=tau_w), NeuronParams(I_dc=I_dc, b=b, tau_w=tau_w)]
    panel = _run("adaptation", "b_A", [0.0, b], params, Stimulus.dc(), T, None, dt, 0.0, trace_T)
    # ISIs come from the full run, not the shorter trace window
    panel.spikes = [list(map(float, s)) for s in simulate_population(params, Stimulus.dc(), T, dt=dt)]
    return panel


def all_panels() -> dict[str, Panel]:
    return {
        "leak": leak_panel(),
        "threshold": threshold_panel(),
        "refractory": refractory_panel(),
        "adaptation": adaptation_panel(),
    }

