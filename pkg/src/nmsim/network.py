"""Multi-core AER system: neurons, router fabric and CAM synapses on one engine.

A spiking neuron's global id is its tag.  The core output encoder looks the
tag up in the routing table (derived from CAM contents), and pushes one token
``dest << tag_bits | tag`` per destination core into the router: core sources
feed a merge tree, optional buffer stages, then a split tree that steers on
the destination bits.  At the destination the tag is broadcast to every
neuron's CAM; each matching word delivers one synaptic input of the kernel
stored in the word's high bits.

Neurons are integrated lazily.  Each one keeps a committed state and a
prediction computed on a copy, at most ``chunk`` seconds ahead; an incoming
input cancels the prediction, syncs the committed state to the input time and
predicts again.  Neurons that have settled (no synaptic current, subthreshold
drive, at their fixed point) sleep until their next input.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ._toml import ConfigError, check_keys, load_toml, parse_toml
from .cam import CamBank
from .engine import PS_PER_S, EventHandle, Simulator
from .fabric import Adversary, DelayModel, Fabric, NOMINAL_DELAY_PS, ProcessKind, throughput
from .neuron import (
    Kernel,
    NeuronParams,
    NeuronState,
    SynapseParams,
    advance_to_spike,
    integrate_to,
    relax,
    synaptic_input,
)
from .power import (
    BUFFER_E_DYN,
    BUFFER_STATIC_W,
    NEURON_E_SPIKE,
    SYSTEM_BUFFER_EQUIVALENTS,
    SYSTEM_RATE,
    EnergyLedger,
    system_routing_estimate,
)

N_KERNELS = len(Kernel)


class NetworkError(ValueError):
    category = "network"


@dataclass(frozen=True)
class ChipConfig:
    n_cores: int = 4
    neurons_per_core: int = 256
    cam_words: int = 64
    word_bits: int = 12
    tag_bits: int = 10
    cell_area: float = 0.25
    buffer_stages: int = 1
    delay_ps: int = NOMINAL_DELAY_PS
    jitter: float = 0.0
    delay_mode: str = "NOMINAL"
    delay_seed: int = 0
    dt: float = 20e-6
    chunk: float = 1e-3
    e_spike: float = NEURON_E_SPIKE
    e_precharge: float = 0.0
    e_discharge: float = 0.0
    neuron: NeuronParams = field(default_factory=NeuronParams)
    synapse: SynapseParams = field(default_factory=SynapseParams)

    def __post_init__(self) -> None:
        if self.n_cores < 1 or self.n_cores & (self.n_cores - 1):
            raise NetworkError(f"n_cores={self.n_cores} must be a power of two")
        if self.neurons_per_core < 1:
            raise NetworkError("neurons_per_core must be positive")
        if self.n_neurons > 1 << self.tag_bits:
            raise NetworkError(
                f"{self.n_neurons} neurons do not fit in a {self.tag_bits}-bit tag space"
            )
        if self.word_bits - self.tag_bits < 2:
            raise NetworkError(
                f"CAM words of {self.word_bits} bits leave no room for a 2-bit kernel field "
                f"next to {self.tag_bits} tag bits"
            )
        if self.cam_words < 1:
            raise NetworkError("cam_words must be positive")
        if self.buffer_stages < 0:
            raise NetworkError("buffer_stages must be nonnegative")
        if self.chunk <= 0 or self.dt <= 0:
            raise NetworkError("dt and chunk must be positive")

    @property
    def n_neurons(self) -> int:
        return self.n_cores * self.neurons_per_core

    @property
    def dest_bits(self) -> int:
        return self.n_cores.bit_length() - 1

    @property
    def token_width(self) -> int:
        return self.tag_bits + max(self.dest_bits, 1)

    @property
    def delays(self) -> DelayModel:
        return DelayModel(self.delay_ps, self.jitter, Adversary(self.delay_mode.upper()), self.delay_seed)

    def word(self, src: int, kernel: Kernel | str) -> int:
        """CAM word subscribing to ``src`` with the given kernel."""
        if not 0 <= src < self.n_neurons:
            raise NetworkError(f"source neuron {src} outside 0..{self.n_neurons - 1}")
        return int(Kernel.parse(kernel)) << self.tag_bits | src


@dataclass
class AddressEvent:
    tag: int
    timestamp: int
    src_core: int
    dest_core: int | None
    accepted: int | None = None
    delivered: int | None = None
    matches: int = 0
    dropped: str | None = None
    route: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ExternalStimulus:
    target: int
    times: tuple[float, ...]
    kernel: Kernel = Kernel.FEPSC
    weight: float | None = None

    @classmethod
    def regular(cls, target: int, rate: float, stop: float, start: float = 0.0, **kw) -> "ExternalStimulus":
        if rate <= 0:
            raise NetworkError("stimulus rate must be positive")
        n = int(math.floor((stop - start) * rate + 1e-9))
        return cls(target, tuple(start + k / rate for k in range(n)), **kw)

    @classmethod
    def poisson(cls, target: int, rate: float, stop: float, seed: int, start: float = 0.0, **kw) -> "ExternalStimulus":
        if rate <= 0:
            raise NetworkError("stimulus rate must be positive")
        rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 1, target]))
        t, out = start, []
        while True:
            t += rng.exponential(1.0 / rate)
            if t >= stop:
                break
            out.append(float(t))
        return cls(target, tuple(out), **kw)


@dataclass
class NetworkSpec:
    config: ChipConfig = field(default_factory=ChipConfig)
    params: dict[int, NeuronParams] = field(default_factory=dict)
    cam: list[tuple[int, int, int]] = field(default_factory=list)
    stimuli: list[ExternalStimulus] = field(default_factory=list)
    T: float = 1.0
    name: str = "network"

    def neuron_params(self, gid: int) -> NeuronParams:
        return self.params.get(gid, self.config.neuron)

    def connectivity(self) -> dict[int, list[tuple[int, Kernel]]]:
        """Brute-force table: source tag -> [(destination neuron, kernel)] per CAM word."""
        table: dict[int, list[tuple[int, Kernel]]] = defaultdict(list)
        cfg = self.config
        for gid, _, word in sorted(self.cam):
            table[word & ((1 << cfg.tag_bits) - 1)].append((gid, Kernel(word >> cfg.tag_bits)))
        return table


def connect(spec: NetworkSpec, src: int, dst: int, kernel: Kernel | str = Kernel.FEPSC) -> None:
    """Append a CAM word on ``dst`` subscribing to ``src``."""
    cfg = spec.config
    if not 0 <= dst < cfg.n_neurons:
        raise NetworkError(f"destination neuron {dst} outside 0..{cfg.n_neurons - 1}")
    used = sum(1 for g, _, _ in spec.cam if g == dst)
    if used >= cfg.cam_words:
        raise NetworkError(f"neuron {dst} needs more than the {cfg.cam_words} CAM words its array holds")
    spec.cam.append((dst, used, cfg.word(src, kernel)))


def router_description(cfg: ChipConfig) -> list[dict]:
    """Core sources -> merge tree -> buffers -> split tree on the dest bits -> core sinks."""
    desc = [{"kind": "SOURCE", "id": f"src{c}", "out": [f"s{c}"]} for c in range(cfg.n_cores)]
    chans, level = [f"s{c}" for c in range(cfg.n_cores)], 0
    while len(chans) > 1:
        nxt = []
        for j in range(0, len(chans), 2):
            node = f"merge_l{level}_{j // 2}"
            desc.append({"kind": "MERGE", "id": node, "in": [chans[j], chans[j + 1]], "out": [f"{node}_o"]})
            nxt.append(f"{node}_o")
        chans, level = nxt, level + 1
    last = chans[0]
    for j in range(cfg.buffer_stages):
        desc.append({"kind": "BUFFER", "id": f"buf{j}", "in": [last], "out": [f"b{j}"]})
        last = f"b{j}"
    frontier = [(last, 0)]
    for lvl in range(cfg.dest_bits):
        nxt = []
        for ch, addr in frontier:
            node = f"split_l{lvl}_{addr}"
            outs = [f"{node}_o{b}" for b in range(2)]
            desc.append({"kind": "SPLIT", "id": node, "in": [ch], "out": outs,
                         "select_bit": cfg.tag_bits + lvl})
            nxt += [(o, addr | b << lvl) for b, o in enumerate(outs)]
        frontier = nxt
    for ch, addr in frontier:
        desc.append({"kind": "SINK", "id": f"snk{addr}", "in": [ch]})
    return desc


@dataclass
class Audit:
    emitted: int = 0
    delivered: int = 0
    dropped: dict[str, int] = field(default_factory=dict)
    inputs: int = 0
    acausal: list[int] = field(default_factory=list)

    @property
    def conserved(self) -> bool:
        return self.emitted == self.delivered + sum(self.dropped.values())


@dataclass
class NetworkResult:
    raster: list[tuple[float, int]]
    events: list[AddressEvent]
    deliveries: list[tuple[int, int, int, Kernel]]
    ledger: EnergyLedger
    audit: Audit
    spec: NetworkSpec

    def raster_csv(self) -> str:
        npc = self.spec.config.neurons_per_core
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("time_s", "core", "neuron", "gid"))
        for t, gid in self.raster:
            w.writerow((repr(t), gid // npc, gid % npc, gid))
        return buf.getvalue()

    def events_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("tag", "emitted_ps", "src_core", "dest_core", "accepted_ps", "delivered_ps",
                    "matches", "dropped", "route"))
        for e in self.events:
            w.writerow((e.tag, e.timestamp, e.src_core, "" if e.dest_core is None else e.dest_core,
                        "" if e.accepted is None else e.accepted, "" if e.delivered is None else e.delivered,
                        e.matches, e.dropped or "", ">".join(e.route)))
        return buf.getvalue()

    @property
    def raster_hash(self) -> str:
        return hashlib.sha256(self.raster_csv().encode()).hexdigest()


class _Slot:
    __slots__ = ("state", "params", "pred", "spike", "handle", "asleep")

    def __init__(self, params: NeuronParams):
        self.params = params
        self.state = NeuronState.at_rest(params)
        self.pred: NeuronState | None = None
        self.spike: float | None = None
        self.handle: EventHandle | None = None
        self.asleep = False


class Network:
    """One simulation instance of a programmed chip."""

    def __init__(self, spec: NetworkSpec, program: str = "direct"):
        self.spec = spec
        cfg = self.cfg = spec.config
        self.sim = Simulator()
        self.fabric = Fabric.from_description(router_description(cfg), delays=cfg.delays,
                                              width=cfg.token_width, sim=self.sim, history=0)
        self.banks = [
            CamBank(cfg.neurons_per_core, cfg.cam_words, cfg.word_bits, cfg.tag_bits, cfg.cell_area,
                    cfg.e_precharge, cfg.e_discharge)
            for _ in range(cfg.n_cores)
        ]
        if program == "direct":
            program_direct(self.banks, cfg, spec.cam)
        elif program == "aer":
            program_via_aer(self.banks, cfg, spec.cam)
        else:
            raise NetworkError(f"unknown programming path {program!r}")
        self.routes = route_table(self.banks, cfg)
        self.slots = [_Slot(spec.neuron_params(g)) for g in range(cfg.n_neurons)]
        self.T_end = spec.T
        self.raster: list[tuple[float, int]] = []
        self.events: list[AddressEvent] = []
        self.deliveries: list[tuple[int, int, int, Kernel]] = []
        self.audit = Audit()
        self._outbox = [deque() for _ in range(cfg.n_cores)]
        self._inflight: dict[tuple[int, int], deque] = defaultdict(deque)
        self._last_accept: dict[int, int] = {}
        for c in range(cfg.n_cores):
            src = self.fabric.processes[f"src{c}"]
            src.on_accept = lambda now, v, c=c: self._accepted(c, now, v)
            snk = self.fabric.processes[f"snk{c}"]
            snk.on_token = lambda now, v, c=c: self.deliver(c, now, v)
        self.sim.register("neuron", self._neuron_event)

    # -- AER output -------------------------------------------------------------
    def emit_spike(self, gid: int, now: int) -> list[AddressEvent]:
        cfg = self.cfg
        if not 0 <= gid < cfg.n_neurons:
            raise NetworkError(f"neuron {gid} does not exist")
        core = gid // cfg.neurons_per_core
        dests = self.routes.get(gid, ())
        out = []
        if not dests:
            ev = AddressEvent(gid, now, core, None, dropped="no-route")
            self.audit.dropped["no-route"] = self.audit.dropped.get("no-route", 0) + 1
            out.append(ev)
        src = self.fabric.processes[f"src{core}"]
        for d in dests:
            ev = AddressEvent(gid, now, core, d)
            src.push(d << cfg.tag_bits | gid, now)
            self._outbox[core].append(ev)
            out.append(ev)
        self.events.extend(out)
        self.audit.emitted += len(out)
        return out

    def _accepted(self, core: int, now: int, value: int) -> None:
        ev = self._outbox[core].popleft()
        ev.accepted = now
        self._inflight[(ev.dest_core, value)].append(ev)
        self._last_accept[ev.tag] = now

    # -- AER input --------------------------------------------------------------
    def deliver(self, core: int, now: int, value: int) -> int:
        cfg = self.cfg
        ev = self._inflight[(core, value)].popleft()
        tag = value & ((1 << cfg.tag_bits) - 1)
        ev.delivered = now
        if now <= ev.timestamp:
            self.audit.acausal.append(len(self.events))
        matches = self.banks[core].search(tag)
        ev.matches = len(matches)
        self.audit.delivered += 1
        base = core * cfg.neurons_per_core
        for local, _, word in matches:
            kernel = Kernel(word >> cfg.tag_bits)
            self.deliveries.append((now, tag, base + local, kernel))
            self.audit.inputs += 1
            self._input(base + local, now, kernel, None)
        return len(matches)

    # -- neuron scheduling ----------------------------------------------------------
    def _settled(self, s: NeuronState, p: NeuronParams) -> bool:
        if s.refractory_until > s.t or p.a != 0 or s.w < 0 or s.w > 1e-15:
            return False
        if sum(abs(x) for x in s.I) > 1e-16:
            return False
        rheobase = p.g_L * (p.V_T - p.E_L - p.Delta_T)
        if p.I_dc >= rheobase or s.V >= p.V_T:
            return False
        spike_term = p.g_L * p.Delta_T * math.exp((s.V - p.V_T) / p.Delta_T) if p.Delta_T > 0 else 0.0
        dV = (-p.g_L * (s.V - p.E_L) + spike_term + p.I_dc - s.w) / p.C_M
        return abs(dV) * p.tau_m < 1e-6

    def _predict(self, gid: int) -> None:
        slot = self.slots[gid]
        s = slot.state
        slot.pred, slot.spike, slot.handle = None, None, None
        if s.t >= self.T_end:
            return
        if self._settled(s, slot.params):
            slot.asleep = True
            return
        copy = s.copy()
        horizon = min(s.t + self.cfg.chunk, self.T_end)
        t_s = advance_to_spike(copy, slot.params, self.cfg.synapse, horizon, self.cfg.dt)
        slot.pred, slot.spike = copy, t_s
        when = t_s if t_s is not None else copy.t
        at = max(self.sim.now, round(when * PS_PER_S))
        slot.handle = self.sim.schedule(at, "neuron", ("spike" if t_s is not None else "chunk", gid))

    def _neuron_event(self, ev: EventHandle) -> None:
        op, gid, *rest = ev.payload
        if op == "ext":
            self._input(gid, ev.time, *rest)
            return
        if op == "inject":
            self.raster.append((ev.time / PS_PER_S, gid))
            self.emit_spike(gid, ev.time)
            return
        slot = self.slots[gid]
        slot.state = slot.pred
        if op == "spike":
            self._fire(gid, slot.spike, ev.time)
        self._predict(gid)

    def _fire(self, gid: int, t_s: float, now: int) -> None:
        self.raster.append((t_s, gid))
        self.emit_spike(gid, now)

    def _input(self, gid: int, now: int, kernel: Kernel, weight: float | None) -> None:
        t = now / PS_PER_S
        if t > self.T_end:
            return
        slot = self.slots[gid]
        if slot.handle is not None:
            slot.handle.cancel()
        s, p, syn = slot.state, slot.params, self.cfg.synapse
        if slot.asleep:
            relax(s, p, syn, max(t, s.t))
            slot.asleep = False
        elif s.t < t:
            for t_s in integrate_to(s, p, syn, t, self.cfg.dt):
                self._fire(gid, t_s, now)
        w = syn.weight[kernel] if weight is None else weight
        if s.t > t:
            # input landed inside the step that produced the last spike
            w *= math.exp(-(s.t - t) / syn.tau[kernel])
        synaptic_input(s, p, syn, kernel, weight=w)
        self._predict(gid)

    def inject(self, spikes: Iterable[tuple[float, int]]) -> None:
        """Force spikes (time in s, neuron) regardless of neuron dynamics."""
        for t, gid in spikes:
            if not 0 <= gid < self.cfg.n_neurons:
                raise NetworkError(f"neuron {gid} does not exist")
            self.sim.schedule(round(t * PS_PER_S), "neuron", ("inject", gid))

    # -- run ------------------------------------------------------------------------
    def run(self, measure: bool = False) -> NetworkResult:
        cfg = self.cfg
        T_ps = round(self.T_end * PS_PER_S)
        for stim in self.spec.stimuli:
            if not 0 <= stim.target < cfg.n_neurons:
                raise NetworkError(f"stimulus target {stim.target} does not exist")
            for t in stim.times:
                if 0 <= t <= self.T_end:
                    self.sim.schedule(round(t * PS_PER_S), "neuron", ("ext", stim.target, stim.kernel, stim.weight))
        for gid in range(cfg.n_neurons):
            self._predict(gid)
        self.fabric.run(until=T_ps)
        self.fabric.run()
        self._trace_routes()
        self.raster.sort()
        return NetworkResult(self.raster, self.events, self.deliveries, self.ledger(measure), self.audit, self.spec)

    def _trace_routes(self) -> None:
        """Rebuild each token's path from the per-channel token logs (FIFO per value)."""
        cursors: dict[tuple[str, int], int] = defaultdict(int)
        index: dict[tuple[str, int], list[int]] = {}
        for ch in self.fabric.channels.values():
            for pos, (_, v) in enumerate(ch.tokens):
                index.setdefault((ch.name, v), []).append(pos)
        routed = sorted((e for e in self.events if e.accepted is not None), key=lambda e: e.accepted)
        for ev in routed:
            value = ev.dest_core << self.cfg.tag_bits | ev.tag
            proc = self.fabric.processes[f"src{ev.src_core}"]
            route = [proc.pid]
            while proc.kind is not ProcessKind.SINK:
                if proc.kind is ProcessKind.SPLIT:
                    ch = proc.outs[value >> proc.select_bit & 1]
                else:
                    ch = proc.outs[0]
                key = (ch.name, value)
                pos = index.get(key, [])
                if cursors[key] >= len(pos):
                    break
                cursors[key] += 1
                proc = ch.receiver
                route.append(proc.pid)
            ev.route = route

    def ledger(self, measure: bool = False) -> EnergyLedger:
        led = EnergyLedger(window=self.T_end)
        for pid, proc in sorted(self.fabric.processes.items()):
            if proc.kind in (ProcessKind.BUFFER, ProcessKind.SPLIT, ProcessKind.MERGE):
                led.add_static(f"fabric/{pid}", BUFFER_STATIC_W)
        for kind in (ProcessKind.BUFFER, ProcessKind.SPLIT, ProcessKind.MERGE):
            n = sum(p.tokens for p in self.fabric.of_kind(kind))
            led.charge(f"fabric_{kind.value.lower()}", n, BUFFER_E_DYN)
        led.charge("neuron_spike", len(self.raster), self.cfg.e_spike)
        led.charge("cam_precharge", sum(b.counters.precharges for b in self.banks), self.cfg.e_precharge)
        led.charge("cam_discharge", sum(b.counters.discharges for b in self.banks), self.cfg.e_discharge)
        if measure:
            led.measurements.update(chip_measurements(self.cfg))
        return led


def chip_measurements(cfg: ChipConfig) -> dict[str, float]:
    """Router bandwidth and routing-energy figures measured by simulation."""
    est = system_routing_estimate(SYSTEM_BUFFER_EQUIVALENTS, SYSTEM_RATE)
    return {
        "router_bandwidth_events_per_s": throughput(1, 2000, delays=cfg.delays, width=cfg.tag_bits),
        "routing_energy_per_event_J": est.joules_per_event,
        "routing_power_W": est.watts,
    }


# -- programming -------------------------------------------------------------


def _check_entry(cfg: ChipConfig, gid: int, index: int, word: int) -> None:
    if not 0 <= gid < cfg.n_neurons:
        raise NetworkError(f"CAM entry for neuron {gid} outside 0..{cfg.n_neurons - 1}")
    if not 0 <= index < cfg.cam_words:
        raise NetworkError(f"neuron {gid}: CAM word index {index} outside 0..{cfg.cam_words - 1}")
    if not 0 <= word < 1 << cfg.word_bits:
        raise NetworkError(f"neuron {gid}: CAM word {word:#x} does not fit in {cfg.word_bits} bits")
    if word >> cfg.tag_bits >= N_KERNELS:
        raise NetworkError(f"neuron {gid}: kernel field {word >> cfg.tag_bits} of word {word:#x} is not a kernel")
    if word & ((1 << cfg.tag_bits) - 1) >= cfg.n_neurons:
        raise NetworkError(f"neuron {gid}: CAM word {word:#x} names a source outside the chip")


def program_direct(banks: Sequence[CamBank], cfg: ChipConfig, entries: Iterable[tuple[int, int, int]]) -> None:
    for gid, index, word in entries:
        _check_entry(cfg, gid, index, word)
        core, local = divmod(gid, cfg.neurons_per_core)
        banks[core].arrays[local].program(index, word)


def write_flits(cfg: ChipConfig, gid: int, index: int, word: int) -> list[int]:
    """Tokens of one CAM write transaction: neuron, word index, low and high word bits."""
    core, local = divmod(gid, cfg.neurons_per_core)
    mask = (1 << cfg.tag_bits) - 1
    payload = [local, index, word & mask, word >> cfg.tag_bits]
    return [core << cfg.tag_bits | x for x in payload]


def program_via_aer(banks: Sequence[CamBank], cfg: ChipConfig, entries: Iterable[tuple[int, int, int]],
                    host_core: int = 0) -> int:
    """Program the CAMs with write transactions sent over a router of the same topology.

    Returns the simulated time (ps) taken.  Each core's input decoder
    assembles four flits per write; per-source FIFO order through the tree
    keeps the flits of one transaction together at the sink.
    """
    fab = Fabric.from_description(router_description(cfg), delays=cfg.delays, width=cfg.token_width, history=0)
    mask = (1 << cfg.tag_bits) - 1
    partial: dict[int, list[int]] = defaultdict(list)

    def decode(core: int, now: int, value: int) -> None:
        buf = partial[core]
        buf.append(value & mask)
        if len(buf) == 4:
            local, index, lo, hi = buf
            buf.clear()
            banks[core].arrays[local].program(index, hi << cfg.tag_bits | lo)

    for c in range(cfg.n_cores):
        fab.processes[f"snk{c}"].on_token = lambda now, v, c=c: decode(c, now, v)
    src = fab.processes[f"src{host_core}"]
    for gid, index, word in entries:
        _check_entry(cfg, gid, index, word)
        for flit in write_flits(cfg, gid, index, word):
            src.push(flit, 0)
    fab.run()
    if any(partial.values()):
        raise NetworkError("incomplete CAM write transaction at a core decoder")
    return fab.sim.now


def route_table(banks: Sequence[CamBank], cfg: ChipConfig) -> dict[int, tuple[int, ...]]:
    """Source tag -> destination cores holding at least one word for it."""
    mask = (1 << cfg.tag_bits) - 1
    routes: dict[int, set[int]] = defaultdict(set)
    for core, bank in enumerate(banks):
        for tag in np.unique(bank.words[bank.valid] & mask):
            routes[int(tag)].add(core)
    return {tag: tuple(sorted(cores)) for tag, cores in sorted(routes.items())}


def run_network(spec: NetworkSpec, measure: bool = False, program: str = "direct") -> NetworkResult:
    return Network(spec, program=program).run(measure=measure)


def cam_csv(spec: NetworkSpec) -> str:
    npc = spec.config.neurons_per_core
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("core", "neuron", "word_index", "tag_hex"))
    for gid, index, word in sorted(spec.cam):
        w.writerow((gid // npc, gid % npc, index, f"{word:03x}"))
    return buf.getvalue()


# -- description files ----------------------------------------------------------------

_CHIP_KEYS = {f.name for f in fields(ChipConfig)} - {"neuron", "synapse"}
_NEURON_KEYS = {f.name for f in fields(NeuronParams)}
_STIM_KEYS = {"target", "kind", "rate", "start", "stop", "times", "kernel", "weight", "seed"}
_TOP_KEYS = {"name", "T", "chip", "neuron", "synapse", "group", "connection", "cam", "stimulus"}


def _int_list(value: Any, what: str, source: str) -> list[int]:
    if isinstance(value, int):
        return [value]
    if isinstance(value, list) and all(isinstance(v, int) for v in value):
        return value
    if isinstance(value, dict) and set(value) <= {"start", "stop"}:
        return list(range(value["start"], value["stop"]))
    raise ConfigError(f"{what} must be an integer, a list of integers or {{start, stop}}", source)


def parse_network(data: dict[str, Any], text: str = "", source: str = "<network>",
                  overrides: dict[str, Any] | None = None) -> NetworkSpec:
    """Build a NetworkSpec from a parsed description (see the bundled examples)."""
    check_keys(data, _TOP_KEYS, "", text, source)
    chip = dict(data.get("chip", {}))
    check_keys(chip, _CHIP_KEYS, "chip", text, source)
    neuron = dict(data.get("neuron", {}))
    check_keys(neuron, _NEURON_KEYS, "neuron", text, source)
    synapse = dict(data.get("synapse", {}))
    check_keys(synapse, {"tau", "weight"}, "synapse", text, source)
    chip.update(overrides or {})
    try:
        cfg = ChipConfig(neuron=NeuronParams(**neuron), synapse=SynapseParams(**synapse), **chip)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), source) from None
    spec = NetworkSpec(cfg, T=float(data.get("T", 1.0)), name=str(data.get("name", Path(source).stem)))
    for grp in data.get("group", []):
        check_keys(grp, _NEURON_KEYS | {"ids"}, "group", text, source)
        grp = dict(grp)
        ids = _int_list(grp.pop("ids", None), "group.ids", source)
        for gid in ids:
            if not 0 <= gid < cfg.n_neurons:
                raise ConfigError(f"group neuron {gid} outside 0..{cfg.n_neurons - 1}", source)
            try:
                spec.params[gid] = replace(spec.neuron_params(gid), **grp)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), source) from None
    for con in data.get("connection", []):
        check_keys(con, {"src", "dst", "kernel"}, "connection", text, source)
        for s in _int_list(con["src"], "connection.src", source):
            for d in _int_list(con["dst"], "connection.dst", source):
                connect(spec, s, d, con.get("kernel", "FEPSC"))
    for rec in data.get("cam", []):
        check_keys(rec, {"neuron", "words", "start"}, "cam", text, source)
        start = rec.get("start", sum(1 for g, _, _ in spec.cam if g == rec["neuron"]))
        for k, word in enumerate(rec["words"]):
            if start + k >= cfg.cam_words:
                raise NetworkError(f"neuron {rec['neuron']} has more than {cfg.cam_words} CAM words")
            spec.cam.append((rec["neuron"], start + k, word))
    for st in data.get("stimulus", []):
        check_keys(st, _STIM_KEYS, "stimulus", text, source)
        kind = st.get("kind", "regular")
        kw = {"kernel": Kernel.parse(st.get("kernel", "FEPSC")), "weight": st.get("weight")}
        stop = float(st.get("stop", spec.T))
        for target in _int_list(st["target"], "stimulus.target", source):
            if kind == "regular":
                stim = ExternalStimulus.regular(target, st["rate"], stop, st.get("start", 0.0), **kw)
            elif kind == "poisson":
                stim = ExternalStimulus.poisson(target, st["rate"], stop, st.get("seed", 0), st.get("start", 0.0), **kw)
            elif kind == "explicit":
                stim = ExternalStimulus(target, tuple(float(t) for t in st["times"]), **kw)
            else:
                raise ConfigError(f"unknown stimulus kind {kind!r}", source, *_loc(text, kind))
            spec.stimuli.append(stim)
    seen = set()
    for gid, index, word in spec.cam:
        _check_entry(cfg, gid, index, word)
        if (gid, index) in seen:
            raise NetworkError(f"neuron {gid}: CAM word {index} programmed twice")
        seen.add((gid, index))
    return spec


def _loc(text: str, needle: str) -> tuple[int | None, int | None]:
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i, line.index(needle) + 1
    return None, None


def load_network(path: str | Path, overrides: dict[str, Any] | None = None) -> NetworkSpec:
    data, text = load_toml(path)
    return parse_network(data, text, str(path), overrides)


def loads_network(text: str, source: str = "<network>") -> NetworkSpec:
    return parse_network(parse_toml(text, source), text, source)


def bundled_networks() -> dict[str, Path]:
    root = Path(__file__).parent / "data" / "networks"
    return {p.stem: p for p in sorted(root.glob("*.toml"))}
