"""Fabric assembly, topology builders, throughput and QDI conformance runs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from ..engine import PS_PER_S, Simulator
from .channel import DualRailChannel, Violation
from .processes import Buffer, Merge, Process, ProcessKind, Sink, Source, Split

# The handshake loop between neighbouring PCHB stages spans 10 sequenced
# transitions; 55 ps per transition gives a 550 ps cycle (~1.82 G events/s).
NOMINAL_DELAY_PS = 55
TRANSITIONS_PER_CYCLE = 10
DEADLOCK_CYCLES = 100


class Adversary(str, Enum):
    NOMINAL = "NOMINAL"
    RANDOMIZED = "RANDOMIZED"
    WORST_CASE_SAMPLED = "WORST_CASE_SAMPLED"


@dataclass
class DelayModel:
    """Per-transition delay in picoseconds.

    RANDOMIZED draws uniformly from nominal * (1 +/- jitter); WORST_CASE_SAMPLED
    picks one of the two corners of that interval at random.  All draws are
    at least 1 ps.
    """

    nominal: int = NOMINAL_DELAY_PS
    jitter: float = 0.0
    mode: Adversary = Adversary.NOMINAL
    seed: int = 0
    _rng: random.Random = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.mode = Adversary(self.mode)
        if self.nominal < 1:
            raise ValueError("nominal delay must be >= 1 ps")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")
        self._rng = random.Random(self.seed)

    @property
    def lo(self) -> int:
        return max(1, round(self.nominal * (1 - self.jitter)))

    @property
    def hi(self) -> int:
        return max(1, round(self.nominal * (1 + self.jitter)))

    def sample(self) -> int:
        if self.mode is Adversary.NOMINAL or self.jitter == 0.0:
            return self.nominal
        if self.mode is Adversary.RANDOMIZED:
            return self._rng.randint(self.lo, self.hi)
        return self.hi if self._rng.random() < 0.5 else self.lo

    @property
    def cycle_ps(self) -> int:
        return TRANSITIONS_PER_CYCLE * self.nominal


class DeadlockError(RuntimeError):
    def __init__(self, now: int, stuck: list[str], pending: int):
        self.now = now
        self.stuck = stuck
        self.pending = pending
        super().__init__(f"fabric deadlock at t={now} ps with {pending} token(s) outstanding; stuck: {stuck}")


PROCESS_CLASSES = {
    ProcessKind.BUFFER: Buffer,
    ProcessKind.SPLIT: Split,
    ProcessKind.MERGE: Merge,
    ProcessKind.SOURCE: Source,
    ProcessKind.SINK: Sink,
}


class Fabric:
    """A set of PCHB processes wired by dual-rail channels on one event engine."""

    def __init__(self, delays: DelayModel | None = None, width: int = 10,
                 sim: Simulator | None = None, history: int | None = 256):
        self.delays = delays or DelayModel()
        self.width = width
        self.sim = sim or Simulator()
        self.history = history
        self.channels: dict[str, DualRailChannel] = {}
        self.processes: dict[str, Process] = {}
        self.in_flight = 0
        self.last_transition = 0
        self.transitions = 0

    def channel(self, name: str) -> DualRailChannel:
        if name not in self.channels:
            self.channels[name] = DualRailChannel(name, self.width, self.history)
        return self.channels[name]

    def add(self, kind: ProcessKind | str, pid: str, ins: Sequence[str] = (), outs: Sequence[str] = (), **kw) -> Process:
        kind = ProcessKind(kind)
        if pid in self.processes:
            raise ValueError(f"duplicate process id {pid!r}")
        proc = PROCESS_CLASSES[kind](pid, self, [self.channel(c) for c in ins], [self.channel(c) for c in outs], **kw)
        self.processes[pid] = proc
        return proc

    @classmethod
    def from_description(cls, description: Iterable[dict], **kw) -> "Fabric":
        """Build from ``{"kind", "id", "in", "out", ...}`` records (extra keys go to the process)."""
        fab = cls(**kw)
        for rec in description:
            rec = dict(rec)
            kind, pid = rec.pop("kind"), rec.pop("id")
            fab.add(kind, pid, rec.pop("in", ()), rec.pop("out", ()), **rec)
        fab.check_wiring()
        return fab

    def check_wiring(self) -> None:
        for ch in self.channels.values():
            if ch.sender is None or ch.receiver is None:
                raise ValueError(f"channel {ch.name} is not connected at both ends")

    def note_transition(self, now: int) -> None:
        self.last_transition = now
        self.transitions += 1

    # -- queries -----------------------------------------------------------
    def of_kind(self, kind: ProcessKind) -> list[Process]:
        return [p for p in self.processes.values() if p.kind is kind]

    @property
    def violations(self) -> list[Violation]:
        out = [v for ch in self.channels.values() for v in ch.violations]
        return sorted(out, key=lambda v: v.time)

    def transition_log(self) -> list[tuple]:
        return sorted((h for ch in self.channels.values() for h in ch.history), key=lambda h: h[0])

    def token_trace(self) -> list[tuple[int, str, str, int]]:
        """(time_ps, receiving process, channel, value) for every token, time ordered."""
        rows = [(t, ch.receiver.pid, ch.name, v) for ch in self.channels.values() for t, v in ch.tokens]
        return sorted(rows)

    def token_trace_csv(self) -> str:
        lines = ["time_ps,process_id,port,value"]
        lines += [f"{t},{pid},{port},{v}" for t, pid, port, v in self.token_trace()]
        return "\n".join(lines) + "\n"

    def token_counts(self) -> dict[str, int]:
        return {pid: p.tokens for pid, p in self.processes.items()}

    def stuck(self) -> list[str]:
        return sorted(pid for pid, p in self.processes.items() if p.busy or (p.kind is ProcessKind.SOURCE and p.ready))

    def _waiting_on_release(self) -> bool:
        now = self.sim.now
        return any(
            s.head < len(s.queue) and s.queue[s.head][0] > now for s in self.of_kind(ProcessKind.SOURCE)
        )

    def check_deadlock(self) -> None:
        if self.in_flight > 0:
            raise DeadlockError(self.sim.now, self.stuck(), self.in_flight)

    def run(self, until: int | None = None) -> int:
        """Run the engine until drained (or ``until``), watching for deadlock.

        A deadlock is reported when tokens are outstanding and either the queue
        drains or no transition fires for DEADLOCK_CYCLES nominal cycles while
        no source is merely waiting for a later release time.
        """
        sim = self.sim
        limit = DEADLOCK_CYCLES * self.delays.cycle_ps
        n = 0
        while True:
            t = sim.queue.peek_time()
            if t is None or (until is not None and t > until):
                break
            if self.in_flight > 0 and t - self.last_transition > limit and not self._waiting_on_release():
                raise DeadlockError(self.last_transition, self.stuck(), self.in_flight)
            sim.step()
            n += 1
        if until is None:
            self.check_deadlock()
        return n


# -- topology builders ---------------------------------------------------------


def pipeline_description(n_stages: int) -> list[dict]:
    if n_stages < 1:
        raise ValueError("pipeline needs at least one stage")
    desc = [{"kind": "SOURCE", "id": "src", "out": ["c0"]}]
    for i in range(n_stages):
        desc.append({"kind": "BUFFER", "id": f"buf{i}", "in": [f"c{i}"], "out": [f"c{i + 1}"]})
    desc.append({"kind": "SINK", "id": "snk", "in": [f"c{n_stages}"]})
    return desc


def split_tree_description(levels: int = 2, buffers: int = 0) -> list[dict]:
    """Binary split tree steering on bits 0..levels-1; sink k gets address k."""
    desc = [{"kind": "SOURCE", "id": "src", "out": ["in"]}]
    frontier = [("in", 0, 0)]
    for lvl in range(levels):
        nxt = []
        for ch, addr, depth in frontier:
            node = f"split_l{lvl}_{addr}"
            outs = [f"{node}_o{b}" for b in range(2)]
            desc.append({"kind": "SPLIT", "id": node, "in": [ch], "out": outs, "select_bit": lvl})
            for b, o in enumerate(outs):
                nxt.append((o, addr | (b << lvl), depth + 1))
        frontier = nxt
    for ch, addr, _ in frontier:
        last = ch
        for j in range(buffers):
            desc.append({"kind": "BUFFER", "id": f"buf_{addr}_{j}", "in": [last], "out": [f"{ch}_b{j}"]})
            last = f"{ch}_b{j}"
        desc.append({"kind": "SINK", "id": f"snk{addr}", "in": [last]})
    return desc


def merge_tree_description(n_inputs: int = 4) -> list[dict]:
    if n_inputs < 2 or n_inputs & (n_inputs - 1):
        raise ValueError("merge tree needs a power-of-two input count >= 2")
    desc = [{"kind": "SOURCE", "id": f"src{i}", "out": [f"s{i}"]} for i in range(n_inputs)]
    level, chans = 0, [f"s{i}" for i in range(n_inputs)]
    while len(chans) > 1:
        nxt = []
        for j in range(0, len(chans), 2):
            node = f"merge_l{level}_{j // 2}"
            desc.append({"kind": "MERGE", "id": node, "in": [chans[j], chans[j + 1]], "out": [f"{node}_o"]})
            nxt.append(f"{node}_o")
        chans, level = nxt, level + 1
    desc.append({"kind": "SINK", "id": "snk", "in": [chans[0]]})
    return desc


# -- measurements ----------------------------------------------------------------


def throughput(n_stages: int = 1, n_tokens: int = 2000, delays: DelayModel | None = None,
               width: int = 10, warmup_fraction: float = 0.1, seed: int = 0) -> float:
    """Steady-state events/s of a saturated pipeline, measured at the sink."""
    if n_tokens < 1000:
        raise ValueError("need at least 1000 tokens for a steady-state estimate")
    fab = Fabric.from_description(pipeline_description(n_stages), delays=delays, width=width, history=0)
    src = fab.processes["src"]
    rng = random.Random(seed)
    for _ in range(n_tokens):
        src.push(rng.getrandbits(width), 0)
    fab.run()
    times = [t for t, _ in fab.processes["snk"].received]
    k = int(len(times) * warmup_fraction)
    span = times[-1] - times[k]
    return (len(times) - 1 - k) * PS_PER_S / span


@dataclass
class TrialOutcome:
    passed: bool
    reasons: list[str]
    trace: list[tuple]


@dataclass
class ConformanceReport:
    topology: str
    trials: int
    passed: int
    failed: int
    first_failure: TrialOutcome | None = None

    @property
    def ok(self) -> bool:
        return self.failed == 0


def _check_trial(fab: Fabric, topology: str, sent: dict[str, list[int]], deadlock: DeadlockError | None) -> TrialOutcome:
    reasons = []
    if deadlock is not None:
        reasons.append(str(deadlock))
    for v in fab.violations:
        reasons.append(f"{v.rule} on {v.channel} at {v.time} ps: {v.detail}")
    sinks = {p.pid: [v for _, v in p.received] for p in fab.of_kind(ProcessKind.SINK)}
    if topology == "pipeline":
        if sinks["snk"] != sent["src"]:
            reasons.append("output sequence differs from input sequence")
    elif topology == "split":
        n_sinks = len(sinks)
        levels = n_sinks.bit_length() - 1
        for addr in range(n_sinks):
            want = [v for v in sent["src"] if v & (n_sinks - 1) == addr]
            if sinks[f"snk{addr}"] != want:
                reasons.append(f"sink {addr} received {sinks[f'snk{addr}']} expected {want}")
    elif topology == "merge":
        out = sinks["snk"]
        if sorted(out) != sorted(v for seq in sent.values() for v in seq):
            reasons.append("output multiset differs from union of inputs (loss or duplication)")
        shift = fab.width - (len(sent) - 1).bit_length()
        for i, (pid, seq) in enumerate(sorted(sent.items(), key=lambda kv: int(kv[0][3:]))):
            if [v for v in out if v >> shift == i] != seq:
                reasons.append(f"per-source order of {pid} not preserved")
    return TrialOutcome(not reasons, reasons, fab.transition_log() if reasons else [])


def conformance_trial(topology: str, delays: DelayModel, tokens: int = 12, width: int = 10,
                      rng: random.Random | None = None, fault: str | None = None, stages: int = 3) -> TrialOutcome:
    rng = rng or random.Random(delays.seed)
    if fault and topology != "pipeline":
        raise ValueError("fault injection is only wired into the buffer pipeline")
    if topology == "pipeline":
        desc = pipeline_description(stages)
        if fault:
            desc[2] = {**desc[2], "fault": fault}
    elif topology == "split":
        desc = split_tree_description(2)
    elif topology == "merge":
        desc = merge_tree_description(4)
    else:
        raise ValueError(f"unknown topology {topology!r}")
    fab = Fabric.from_description(desc, delays=delays, width=width, history=None)
    sent: dict[str, list[int]] = {}
    for src in fab.of_kind(ProcessKind.SOURCE):
        vals = []
        for seq in range(tokens):
            v = rng.getrandbits(width)
            if topology == "merge":
                n_src = len(fab.of_kind(ProcessKind.SOURCE))
                shift = width - (n_src - 1).bit_length()
                v = (int(src.pid[3:]) << shift) | (v & ((1 << shift) - 1))
            vals.append(v)
            src.push(v, 0)
        sent[src.pid] = vals
    deadlock = None
    try:
        fab.run()
    except DeadlockError as exc:
        deadlock = exc
    return _check_trial(fab, topology, sent, deadlock)


def qdi_conformance(topology: str, n_trials: int = 1000, seed: int = 0, jitter: float = 0.9,
                    nominal: int = NOMINAL_DELAY_PS, mode: Adversary = Adversary.RANDOMIZED,
                    tokens: int = 12, width: int = 10, fault: str | None = None,
                    stages: int = 3) -> ConformanceReport:
    """Repeat a topology under freshly sampled delay assignments.

    Each trial checks dual-rail exclusivity and the 4-phase protocol on every
    channel, token order / routing / multiset contracts, and liveness.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    report = ConformanceReport(topology, n_trials, 0, 0)
    for trial in range(n_trials):
        trial_seed = (seed << 20) ^ trial
        delays = DelayModel(nominal=nominal, jitter=jitter, mode=mode, seed=trial_seed)
        outcome = conformance_trial(topology, delays, tokens=tokens, width=width,
                                    rng=random.Random(trial_seed + 1), fault=fault, stages=stages)
        if outcome.passed:
            report.passed += 1
        else:
            report.failed += 1
            if report.first_failure is None:
                report.first_failure = outcome
    return report
