"""Adaptive-exponential integrate-and-fire neuron with four synaptic kernels.

Membrane and adaptation follow the AdExp voltage form

    C_M dV/dt   = -g_L (V - E_L) + g_L Delta_T exp((V - V_T) / Delta_T) + I_syn - w
    tau_w dw/dt = a (V - E_L) - w

integrated with explicit Euler.  A spike is registered when V crosses V_peak
(or V_T when Delta_T == 0, the LIF limit); the crossing time is linearly
interpolated inside the step.  After a spike V is clamped at V_reset for
t_rfr, w jumps by b, and the Euler grid restarts at the end of the hold.

Synaptic kernels (FEPSC, SEPSC, FIPSC, SIPSC) are first-order linear filters and
are advanced with their exact exponential decay.  The slow excitatory branch is
gated by a sigmoid NMDA nonlinearity of the membrane potential.

Two integrators share these rules: the scalar :func:`step` /
:func:`integrate_to` pair (used event by event in the network) and the
vectorised :func:`simulate_population`, which runs many independent neurons
against one shared input train (used for rate sweeps and Monte Carlo).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .device import THERMAL_VOLTAGE_300K, tau_from_bias

SUPPLY_SWING = 1.0
_EXP_CAP = 700.0
# below this many neurons the scalar loop beats numpy's per-call overhead
_VECTOR_MIN = 8


class Kernel(IntEnum):
    FEPSC = 0
    SEPSC = 1
    FIPSC = 2
    SIPSC = 3

    @classmethod
    def parse(cls, value: "Kernel | str | int") -> "Kernel":
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown synapse kernel {value!r}") from None
        return cls(value)


KERNEL_SIGN = (1.0, 1.0, -1.0, -1.0)


class StabilityError(ValueError):
    """The integration step is too coarse for the membrane time constant."""


@dataclass(frozen=True)
class SynapseParams:
    """Per-kernel time constants (s) and per-spike current increments (A)."""

    tau: tuple[float, float, float, float] = (5e-3, 50e-3, 5e-3, 50e-3)
    weight: tuple[float, float, float, float] = (2e-12, 2e-12, 2e-12, 2e-12)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau", tuple(float(x) for x in self.tau))
        object.__setattr__(self, "weight", tuple(float(x) for x in self.weight))
        if len(self.tau) != 4 or len(self.weight) != 4:
            raise ValueError("SynapseParams needs exactly four kernels")
        if any(t <= 0 for t in self.tau):
            raise ValueError("synaptic time constants must be positive")
        if any(w < 0 for w in self.weight):
            raise ValueError("synaptic weights must be nonnegative")
        if not (self.tau[Kernel.FEPSC] < self.tau[Kernel.SEPSC]
                and self.tau[Kernel.FIPSC] < self.tau[Kernel.SIPSC]):
            raise ValueError("fast kernels need shorter time constants than slow kernels")

    @property
    def sign(self) -> tuple[float, ...]:
        return KERNEL_SIGN

    def with_weight(self, kernel: Kernel | str, weight: float) -> "SynapseParams":
        w = list(self.weight)
        w[Kernel.parse(kernel)] = weight
        return replace(self, weight=tuple(w))


@dataclass(frozen=True)
class NeuronParams:
    C_M: float = 0.5e-12
    C_A: float = 0.2e-12
    C_R: float = 0.2e-12
    g_L: float = 25e-12
    E_L: float = -0.070
    V_T: float = -0.050
    Delta_T: float = 0.002
    V_reset: float = -0.060
    V_peak: float = 0.0
    t_rfr: float = 2e-3
    a: float = 0.0
    b: float = 0.0
    tau_w: float = 0.1
    I_dc: float = 0.0
    V_nmda: float = -0.050
    V_gate_width: float = 0.010

    def __post_init__(self) -> None:
        for name in ("C_M", "C_A", "C_R", "g_L", "tau_w", "V_gate_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.t_rfr < 0:
            raise ValueError("t_rfr must be nonnegative")
        if self.Delta_T < 0:
            raise ValueError("Delta_T must be nonnegative")
        if not self.V_reset < self.V_T < self.V_peak:
            raise ValueError(
                f"need V_reset < V_T < V_peak, got {self.V_reset}, {self.V_T}, {self.V_peak}"
            )

    @property
    def tau_m(self) -> float:
        return self.C_M / self.g_L

    @property
    def spike_level(self) -> float:
        return self.V_peak if self.Delta_T > 0 else self.V_T

    @classmethod
    def from_biases(
        cls,
        I_tau: float,
        I_rfr: float,
        I_tau_ahp: float | None = None,
        kappa: float = 0.7,
        UT: float = THERMAL_VOLTAGE_300K,
        **overrides,
    ) -> "NeuronParams":
        """Build parameters from subthreshold bias currents.

        The leak conductance follows from the DPI relation (g_L = C_M / tau),
        the refractory period from t_rfr = C_R * V_swing / I_rfr, and the
        adaptation time constant from the AHP bias on C_A.
        """
        base = cls(**overrides)
        tau_m = tau_from_bias(base.C_M, I_tau, kappa, UT)
        kw = {"g_L": base.C_M / tau_m, "t_rfr": refractory_from_bias(base.C_R, I_rfr)}
        if I_tau_ahp is not None:
            kw["tau_w"] = tau_from_bias(base.C_A, I_tau_ahp, kappa, UT)
        return replace(base, **kw)


def refractory_from_bias(C_R: float, I_rfr: float, v_swing: float = SUPPLY_SWING) -> float:
    if C_R <= 0 or I_rfr <= 0:
        raise ValueError("C_R and I_rfr must be positive")
    return C_R * v_swing / I_rfr


@dataclass
class NeuronState:
    V: float
    w: float = 0.0
    I: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    t: float = 0.0
    refractory_until: float = -math.inf
    spike_count: int = 0

    @classmethod
    def at_rest(cls, params: NeuronParams, t: float = 0.0) -> "NeuronState":
        return cls(V=params.E_L, t=t)

    def copy(self) -> "NeuronState":
        return NeuronState(self.V, self.w, list(self.I), self.t, self.refractory_until, self.spike_count)


# -- scalar path -------------------------------------------------------------


def nmda_gate(V, V_nmda: float, width: float):
    """Sigmoid voltage gate in [0, 1]; exactly 1/2 at V == V_nmda."""
    x = -(np.asarray(V, dtype=float) - V_nmda) / width
    g = 0.5 * (1.0 - np.tanh(0.5 * x))
    return float(g) if g.ndim == 0 else g


def synaptic_current(state: NeuronState, syn: SynapseParams, t: float, kernel: Kernel | str) -> float:
    """Kernel current read out at time t >= state.t (decay only, no integration)."""
    k = Kernel.parse(kernel)
    return state.I[k] * math.exp(-(t - state.t) / syn.tau[k])


def _decay_synapses(state: NeuronState, syn: SynapseParams, dt: float) -> None:
    if dt > 0:
        I = state.I
        for k in range(4):
            if I[k]:
                I[k] *= math.exp(-dt / syn.tau[k])


def synaptic_input(
    state: NeuronState,
    params: NeuronParams,
    syn: SynapseParams,
    kernel: Kernel | str,
    t: float | None = None,
    weight: float | None = None,
) -> NeuronState:
    """Decay-then-jump update of one kernel at time t (defaults to state.t).

    Kernel currents are kept current up to ``state.t`` by the integrators, so
    the decay part is already applied; bring the neuron to t with
    :func:`integrate_to` before delivering the input.
    """
    k = Kernel.parse(kernel)
    if t is not None and t != state.t:
        raise ValueError(f"synaptic input at t={t} but neuron is at t={state.t}; integrate first")
    state.I[k] += syn.weight[k] if weight is None else weight
    return state


def total_input_current(state: NeuronState, params: NeuronParams) -> float:
    I = state.I
    gate = nmda_gate(state.V, params.V_nmda, params.V_gate_width)
    return params.I_dc + I[0] + gate * I[1] - I[2] - I[3]


def _check_dt(params: NeuronParams, dt: float) -> None:
    if not dt > 0:
        raise StabilityError(f"dt must be positive, got {dt}")
    if dt > params.tau_m / 10 * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt:g} s exceeds tau_m/10={params.tau_m / 10:g} s; the exponential term would blow up"
        )


def _hold(state: NeuronState, p: NeuronParams, syn: SynapseParams, t_end: float) -> None:
    """Refractory clamp from state.t to t_end: V pinned, w and synapses relax exactly."""
    d = t_end - state.t
    state.V = p.V_reset
    w_inf = p.a * (p.V_reset - p.E_L)
    state.w = w_inf + (state.w - w_inf) * math.exp(-d / p.tau_w)
    _decay_synapses(state, syn, d)
    state.t = t_end


def _euler(state: NeuronState, p: NeuronParams, syn: SynapseParams, t_new: float) -> float | None:
    t0 = state.t
    h = t_new - t0
    V, w = state.V, state.w
    I_tot = total_input_current(state, p)
    if p.Delta_T > 0:
        spike_term = p.g_L * p.Delta_T * math.exp(min((V - p.V_T) / p.Delta_T, _EXP_CAP))
    else:
        spike_term = 0.0
    dV = (-p.g_L * (V - p.E_L) + spike_term + I_tot - w) / p.C_M
    dw = (p.a * (V - p.E_L) - w) / p.tau_w
    V1 = V + h * dV
    w1 = w + h * dw
    _decay_synapses(state, syn, h)
    state.t = t_new
    level = p.spike_level
    if V1 >= level:
        frac = (level - V) / (V1 - V) if V1 > V else 0.0
        t_spike = t0 + h * max(frac, 0.0)
        state.V = p.V_reset
        state.w = w1 + p.b
        state.refractory_until = t_spike + p.t_rfr
        state.spike_count += 1
        return t_spike
    state.V, state.w = V1, w1
    return None


def step(state: NeuronState, params: NeuronParams, dt: float, syn: SynapseParams | None = None) -> float | None:
    """Advance one step of length dt in place; return the spike time if one fired.

    The part of the step that falls inside a refractory hold keeps V at
    V_reset; the remainder is a single Euler update.
    """
    _check_dt(params, dt)
    syn = syn or SynapseParams()
    t1 = state.t + dt
    if state.refractory_until > state.t:
        _hold(state, params, syn, min(state.refractory_until, t1))
    if state.t < t1:
        return _euler(state, params, syn, t1)
    return None


def integrate_to(
    state: NeuronState,
    params: NeuronParams,
    syn: SynapseParams,
    t_end: float,
    dt: float,
    trace: list | None = None,
) -> list[float]:
    """Integrate in place up to t_end; returns spike times in the interval.

    Steps are ``min(dt, t_end - t)`` with the grid restarted at the end of
    every refractory hold.  When ``trace`` is a list, ``(t, V)`` samples are
    appended after every update (spikes add a point at V_peak).
    """
    _check_dt(params, dt)
    if t_end < state.t:
        raise ValueError(f"t_end={t_end} precedes neuron time {state.t}")
    spikes = []
    while state.t < t_end:
        if state.refractory_until > state.t:
            _hold(state, params, syn, min(state.refractory_until, t_end))
        else:
            target = min(state.t + dt, t_end)
            s = _euler(state, params, syn, target)
            if s is not None:
                spikes.append(s)
                if trace is not None:
                    trace.append((s, params.V_peak))
        if trace is not None:
            trace.append((state.t, state.V))
    return spikes


def advance_to_spike(state: NeuronState, params: NeuronParams, syn: SynapseParams, t_end: float,
                     dt: float) -> float | None:
    """Like :func:`integrate_to` but stop right after the first spike.

    Follows the same step grid, so integrating a copy with this and then the
    original with integrate_to up to an earlier time gives identical states.
    """
    _check_dt(params, dt)
    while state.t < t_end:
        if state.refractory_until > state.t:
            _hold(state, params, syn, min(state.refractory_until, t_end))
        else:
            s = _euler(state, params, syn, min(state.t + dt, t_end))
            if s is not None:
                return s
    return None


def relax(state: NeuronState, params: NeuronParams, syn: SynapseParams, t_end: float) -> None:
    """Jump a settled neuron to t_end: V held, w and synapses decay exactly."""
    d = t_end - state.t
    if d < 0:
        raise ValueError(f"t_end={t_end} precedes neuron time {state.t}")
    w_inf = params.a * (state.V - params.E_L)
    state.w = w_inf + (state.w - w_inf) * math.exp(-d / params.tau_w)
    _decay_synapses(state, syn, d)
    state.t = t_end


# -- stimulus and rate measurement ------------------------------------------


@dataclass(frozen=True)
class Stimulus:
    """Input spike times (s) onto one kernel, plus an optional DC override."""

    times: tuple[float, ...] = ()
    kernel: Kernel = Kernel.FEPSC
    I_dc: float | None = None

    @classmethod
    def dc(cls, amplitude: float | None = None) -> "Stimulus":
        return cls(I_dc=amplitude)

    @classmethod
    def regular(cls, rate_hz: float, T: float, kernel: Kernel | str = Kernel.FEPSC, start: float = 0.0) -> "Stimulus":
        n = int(math.floor((T - start) * rate_hz + 1e-9))
        times = tuple(start + i / rate_hz for i in range(n) if start + i / rate_hz < T)
        return cls(times=times, kernel=Kernel.parse(kernel))

    @classmethod
    def poisson(cls, rate_hz: float, T: float, seed: int, kernel: Kernel | str = Kernel.FEPSC) -> "Stimulus":
        rng = np.random.default_rng(seed)
        n = rng.poisson(rate_hz * T)
        times = np.sort(rng.uniform(0.0, T, size=n))
        return cls(times=tuple(float(x) for x in times), kernel=Kernel.parse(kernel))

    def apply(self, params: NeuronParams) -> NeuronParams:
        return params if self.I_dc is None else replace(params, I_dc=self.I_dc)


@dataclass(frozen=True)
class RateResult:
    rate_hz: float
    spike_count: int
    window: float
    silent: bool


def _param_arrays(params: Sequence[NeuronParams]) -> dict[str, np.ndarray]:
    return {f.name: np.array([getattr(p, f.name) for p in params], dtype=float) for f in fields(NeuronParams)}


def simulate_population(
    params: Sequence[NeuronParams],
    stimulus: Stimulus,
    T: float,
    syn: SynapseParams | None = None,
    dt: float = 20e-6,
    vectorize: bool | None = None,
) -> list[np.ndarray]:
    """Run independent neurons against one shared input train; return spike times.

    Each neuron keeps its own clock, so Euler steps, refractory holds and input
    arrivals are segmented exactly as :func:`integrate_to` would segment them.
    """
    syn = syn or SynapseParams()
    params = [stimulus.apply(p) for p in params]
    for p in params:
        _check_dt(p, dt)
    if vectorize is None:
        vectorize = len(params) >= _VECTOR_MIN
    if not vectorize:
        return [np.array(_simulate_one(p, stimulus, T, syn, dt)) for p in params]
    P = _param_arrays(params)
    N = len(params)
    taus = np.array(syn.tau)
    in_times = np.array(sorted(stimulus.times), dtype=float)
    uniq, counts = np.unique(in_times, return_counts=True)
    jumps = np.zeros((len(uniq) + 1, 4))
    jumps[:-1, int(stimulus.kernel)] = counts * syn.weight[int(stimulus.kernel)]
    next_times = np.append(uniq, np.inf)

    t = np.zeros(N)
    V = P["E_L"].copy()
    w = np.zeros(N)
    I = np.zeros((N, 4))
    refr = np.full(N, -np.inf)
    idx = np.zeros(N, dtype=np.int64)
    level = np.where(P["Delta_T"] > 0, P["V_peak"], P["V_T"])
    expo = P["Delta_T"] > 0
    safe_dT = np.where(expo, P["Delta_T"], 1.0)
    w_inf = P["a"] * (P["V_reset"] - P["E_L"])
    spike_t: list[list[float]] = [[] for _ in range(N)]

    while True:
        active = t < T
        if not active.any():
            break
        nxt = next_times[idx]
        hold = active & (refr > t)
        integ = active & ~hold

        if hold.any():
            m = np.flatnonzero(hold)
            target = np.minimum(np.minimum(refr[m], nxt[m]), T)
            d = target - t[m]
            V[m] = P["V_reset"][m]
            w[m] = w_inf[m] + (w[m] - w_inf[m]) * np.exp(-d / P["tau_w"][m])
            I[m] *= np.exp(-d[:, None] / taus)
            t[m] = target

        if integ.any():
            m = np.flatnonzero(integ)
            target = np.minimum(np.minimum(t[m] + dt, nxt[m]), T)
            h = target - t[m]
            Vm, wm, Im = V[m], w[m], I[m]
            gate = nmda_gate(Vm, P["V_nmda"][m], P["V_gate_width"][m])
            I_tot = P["I_dc"][m] + Im[:, 0] + gate * Im[:, 1] - Im[:, 2] - Im[:, 3]
            g_L = P["g_L"][m]
            arg = np.minimum((Vm - P["V_T"][m]) / safe_dT[m], _EXP_CAP)
            spike_term = np.where(expo[m], g_L * P["Delta_T"][m] * np.exp(arg), 0.0)
            dV = (-g_L * (Vm - P["E_L"][m]) + spike_term + I_tot - wm) / P["C_M"][m]
            dw = (P["a"][m] * (Vm - P["E_L"][m]) - wm) / P["tau_w"][m]
            V1 = Vm + h * dV
            w1 = wm + h * dw
            I[m] = Im * np.exp(-h[:, None] / taus)
            fired = V1 >= level[m]
            if fired.any():
                f = np.flatnonzero(fired)
                lv, v0, v1 = level[m][f], Vm[f], V1[f]
                with np.errstate(divide="ignore", invalid="ignore"):
                    frac = np.where(v1 > v0, (lv - v0) / (v1 - v0), 0.0)
                ts = t[m][f] + h[f] * np.maximum(frac, 0.0)
                mf = m[f]
                refr[mf] = ts + P["t_rfr"][mf]
                V1[f] = P["V_reset"][mf]
                w1[f] += P["b"][mf]
                for i, s in zip(mf.tolist(), ts.tolist()):
                    spike_t[i].append(s)
            V[m] = V1
            w[m] = w1
            t[m] = target

        hit = active & (t == nxt)
        if hit.any():
            hm = np.flatnonzero(hit)
            I[hm] += jumps[idx[hm]]
            idx[hm] += 1

    return [np.array(s) for s in spike_t]


def _simulate_one(p: NeuronParams, stimulus: Stimulus, T: float, syn: SynapseParams, dt: float,
                  trace: list | None = None) -> list[float]:
    state = NeuronState.at_rest(p)
    k = int(stimulus.kernel)
    times, counts = np.unique(np.asarray(stimulus.times, dtype=float), return_counts=True)
    spikes: list[float] = []
    for t_in, c in zip(times.tolist(), counts.tolist()):
        if t_in >= T:
            break
        spikes += integrate_to(state, p, syn, t_in, dt, trace)
        state.I[k] += c * syn.weight[k]
    spikes += integrate_to(state, p, syn, T, dt, trace)
    return spikes


def simulate_trace(p: NeuronParams, stimulus: Stimulus, T: float, syn: SynapseParams | None = None,
                   dt: float = 20e-6) -> tuple[list[float], list[tuple[float, float]]]:
    """One neuron with its membrane trace: (spike times, [(t, V), ...])."""
    trace = [(0.0, stimulus.apply(p).E_L)]
    spikes = _simulate_one(stimulus.apply(p), stimulus, T, syn or SynapseParams(), dt, trace)
    return spikes, trace


def rates_from_spikes(spikes: Iterable[np.ndarray], T: float, warmup: float) -> list[RateResult]:
    window = T - warmup
    out = []
    for s in spikes:
        n = int(np.count_nonzero(np.asarray(s) >= warmup))
        out.append(RateResult(n / window, n, window, n == 0))
    return out


def firing_rates(
    params: Sequence[NeuronParams],
    stimulus: Stimulus,
    T: float,
    syn: SynapseParams | None = None,
    dt: float = 20e-6,
    warmup: float = 0.1,
) -> list[RateResult]:
    if not 0 <= warmup < T:
        raise ValueError("need 0 <= warmup < T")
    spikes = simulate_population(params, stimulus, T, syn=syn, dt=dt)
    return rates_from_spikes(spikes, T, warmup)


def firing_rate(
    params: NeuronParams,
    stimulus: Stimulus,
    T: float,
    syn: SynapseParams | None = None,
    dt: float = 20e-6,
    warmup: float = 0.1,
) -> RateResult:
    """Spike count over ``T - warmup`` seconds after discarding the warm-up.

    A neuron that never fires yields rate 0 with ``silent=True``.
    """
    return firing_rates([params], stimulus, T, syn=syn, dt=dt, warmup=warmup)[0]


def lif_rate(params: NeuronParams, I: float) -> float:
    """Closed-form LIF rate (Delta_T -> 0, no adaptation) for constant drive I."""
    I_th = params.g_L * (params.V_T - params.E_L)
    I_0 = params.g_L * (params.V_reset - params.E_L)
    if I <= I_th:
        return 0.0
    return 1.0 / (params.t_rfr + params.tau_m * math.log((I - I_0) / (I - I_th)))
