"""PCHB processes as event-driven state machines.

Every process follows the pre-charge half-buffer template:

* a *validity* detector per input (``lv``) and output (``rv``) channel that
  rises when all bits are valid and falls when all are neutral (C-element
  tree semantics, so it holds in between);
* a *function* block that, while ``en`` is high and the output ack is low,
  drives each output bit as soon as the corresponding input bit is valid, and
  precharges the outputs back to neutral once ``en`` is low and the output is
  acknowledged;
* a *handshake* block raising the input ack when input and output are both
  valid, lowering it when both are neutral, and driving
  ``en = C(not in.a, not out.a)``.

Each transition is scheduled on the shared event engine after a delay drawn
from the fabric's delay model; the process re-evaluates its guards after every
transition that touches one of its signals.
"""

from __future__ import annotations

from enum import Enum
from typing import TYPE_CHECKING, Callable

from .channel import DualRailChannel, Rail

if TYPE_CHECKING:
    from .system import Fabric


class ProcessKind(str, Enum):
    BUFFER = "BUFFER"
    SPLIT = "SPLIT"
    MERGE = "MERGE"
    SOURCE = "SOURCE"
    SINK = "SINK"


class Process:
    kind: ProcessKind
    n_in = 1
    n_out = 1

    def __init__(self, pid: str, fabric: "Fabric", ins: list[DualRailChannel], outs: list[DualRailChannel]):
        if len(ins) != self.n_in or len(outs) != self.n_out:
            raise ValueError(
                f"{self.kind.value} {pid} needs {self.n_in} input(s) and {self.n_out} output(s), "
                f"got {len(ins)} and {len(outs)}"
            )
        self.pid = pid
        self.fabric = fabric
        self.ins = ins
        self.outs = outs
        for ch in ins:
            if ch.receiver is not None:
                raise ValueError(f"channel {ch.name} already has a receiver")
            ch.receiver = self
        for ch in outs:
            if ch.sender is not None:
                raise ValueError(f"channel {ch.name} already has a sender")
            ch.sender = self
        self.sig: dict[str, object] = {}
        self.pending: dict[str, object] = {}
        self.pend_up = {ch.name: 0 for ch in outs}
        self.pend_down = {ch.name: 0 for ch in outs}
        self.tokens = 0
        fabric.sim.register(pid, self.handle)

    # -- scheduling helpers ---------------------------------------------
    def _after(self, payload) -> None:
        self.fabric.sim.schedule_in(self.fabric.delays.sample(), self.pid, payload)

    def drive(self, name: str, value) -> None:
        """Schedule an internal signal or ack transition unless already under way."""
        cur = self.sig.get(name)
        if cur == value or self.pending.get(name, cur) == value:
            return
        self.pending[name] = value
        self._after(("sig", name, value))

    def drive_ack(self, ch: DualRailChannel, level: bool) -> None:
        key = "ack:" + ch.name
        if ch.ack == level or self.pending.get(key, ch.ack) == level:
            return
        self.pending[key] = level
        self._after(("ack", ch.name, level))

    def drive_bits(self, ch: DualRailChannel, true_mask: int, false_mask: int) -> None:
        todo = (true_mask | false_mask) & ~ch.present & ~self.pend_up[ch.name]
        if not todo:
            return
        self.pend_up[ch.name] |= todo
        i = 0
        while todo:
            if todo & 1:
                rail = Rail.TRUE if (true_mask >> i) & 1 else Rail.FALSE
                self._after(("up", ch.name, i, int(rail)))
            todo >>= 1
            i += 1

    def precharge(self, ch: DualRailChannel) -> None:
        todo = ch.present & ~self.pend_down[ch.name]
        if not todo:
            return
        self.pend_down[ch.name] |= todo
        i = 0
        while todo:
            if todo & 1:
                self._after(("down", ch.name, i))
            todo >>= 1
            i += 1

    # -- event handling ---------------------------------------------------
    def handle(self, ev) -> None:
        now = ev.time
        p = ev.payload
        op = p[0]
        fab = self.fabric
        fab.note_transition(now)
        if op == "sig":
            _, name, value = p
            self.sig[name] = value
            self.pending.pop(name, None)
            self.on_signal(name, value, now)
            self.evaluate(now)
        elif op == "ack":
            _, cname, level = p
            ch = fab.channels[cname]
            self.pending.pop("ack:" + cname, None)
            ch.set_ack(now, level)
            self.on_ack(ch, level, now)
            self.evaluate(now)
            if ch.sender is not None:
                ch.sender.evaluate(now)
        elif op == "up":
            _, cname, bit, rail = p
            ch = fab.channels[cname]
            self.pend_up[cname] &= ~(1 << bit)
            ch.raise_rail(now, bit, Rail(rail))
            self.evaluate(now)
            if ch.receiver is not None:
                ch.receiver.evaluate(now)
        elif op == "down":
            _, cname, bit = p
            ch = fab.channels[cname]
            self.pend_down[cname] &= ~(1 << bit)
            ch.lower_rail(now, bit)
            self.evaluate(now)
            if ch.receiver is not None:
                ch.receiver.evaluate(now)
        else:
            self.on_other(p, now)

    def on_signal(self, name: str, value, now: int) -> None:
        pass

    def on_ack(self, ch: DualRailChannel, level: bool, now: int) -> None:
        pass

    def on_other(self, payload, now: int) -> None:
        raise ValueError(f"{self.pid}: unknown event {payload!r}")

    def evaluate(self, now: int) -> None:
        raise NotImplementedError

    # -- shared pieces -------------------------------------------------------
    def _validity(self, name: str, ch: DualRailChannel) -> None:
        if ch.valid:
            self.drive(name, True)
        elif ch.neutral:
            self.drive(name, False)

    def charge(self) -> None:
        self.tokens += 1

    @property
    def busy(self) -> bool:
        """True when the process holds a token or has transitions in flight."""
        return bool(
            self.pending
            or any(self.pend_up.values())
            or any(self.pend_down.values())
            or any(not ch.neutral for ch in self.outs)
            or any(ch.ack for ch in self.ins)
        )


class Buffer(Process):
    kind = ProcessKind.BUFFER

    def __init__(self, pid, fabric, ins, outs, fault: str | None = None):
        super().__init__(pid, fabric, ins, outs)
        self.sig.update(lv=False, rv=False, en=True)
        self.fault = fault

    def evaluate(self, now: int) -> None:
        L, R = self.ins[0], self.outs[0]
        s = self.sig
        self._validity("lv", L)
        self._validity("rv", R)
        if s["en"] and not R.ack:
            self.drive_bits(R, L.t, L.f)
        elif not s["en"] and R.ack:
            self.precharge(R)
        if self.fault == "early_ack" and L.present and not L.ack and not s["rv"]:
            # negative control: acknowledge on the first valid bit
            self.drive_ack(L, True)
        elif s["lv"] and s["rv"]:
            self.drive_ack(L, True)
        elif not s["lv"] and not s["rv"]:
            self.drive_ack(L, False)
        if L.ack and R.ack:
            self.drive("en", False)
        elif not L.ack and not R.ack:
            self.drive("en", True)

    def on_ack(self, ch, level, now):
        if level and ch is self.ins[0]:
            self.charge()


class Split(Process):
    """Steers each token to output ``bit(select_bit)`` of its value."""

    kind = ProcessKind.SPLIT
    n_out = 2

    def __init__(self, pid, fabric, ins, outs, select_bit: int = 0):
        super().__init__(pid, fabric, ins, outs)
        if not 0 <= select_bit < ins[0].width:
            raise ValueError(f"select bit {select_bit} outside channel width")
        self.select_bit = select_bit
        self.sig.update(lv=False, rv=False, en=True)

    def evaluate(self, now: int) -> None:
        L = self.ins[0]
        s = self.sig
        self._validity("lv", L)
        sel_rail = L.bit(self.select_bit)
        sel = None if sel_rail is Rail.NEUTRAL else int(sel_rail is Rail.TRUE)
        R0, R1 = self.outs
        if any(R.valid for R in self.outs):
            self.drive("rv", True)
        elif R0.neutral and R1.neutral:
            self.drive("rv", False)
        if s["en"] and sel is not None and not self.outs[sel].ack:
            self.drive_bits(self.outs[sel], L.t, L.f)
        if not s["en"]:
            for R in self.outs:
                if R.ack:
                    self.precharge(R)
        if s["lv"] and s["rv"]:
            self.drive_ack(L, True)
        elif not s["lv"] and not s["rv"]:
            self.drive_ack(L, False)
        out_ack = R0.ack or R1.ack
        if L.ack and out_ack:
            self.drive("en", False)
        elif not L.ack and not R0.ack and not R1.ack:
            self.drive("en", True)

    def on_ack(self, ch, level, now):
        if level and ch is self.ins[0]:
            self.charge()


class Merge(Process):
    """Two-input merge with an arbiter.

    The arbiter grants the input whose validity detector rose first; a tie on
    the same picosecond goes to input 0.
    """

    kind = ProcessKind.MERGE
    n_in = 2

    def __init__(self, pid, fabric, ins, outs):
        super().__init__(pid, fabric, ins, outs)
        self.sig.update(lv0=False, lv1=False, rv=False, en=True, grant=None)
        self.lv_time = [None, None]
        self.arbitrating = False
        self.served = False

    def on_signal(self, name, value, now):
        if name in ("lv0", "lv1"):
            self.lv_time[int(name[-1])] = now if value else None

    def on_other(self, payload, now):
        if payload[0] != "arbitrate":
            super().on_other(payload, now)
        self.arbitrating = False
        if self.sig["grant"] is None:
            ready = [(t, i) for i, t in enumerate(self.lv_time) if t is not None]
            if ready:
                self.sig["grant"] = min(ready)[1]
                self.served = False
        self.evaluate(now)

    def evaluate(self, now: int) -> None:
        s = self.sig
        L0, L1 = self.ins
        R = self.outs[0]
        self._validity("lv0", L0)
        self._validity("lv1", L1)
        self._validity("rv", R)
        g = s["grant"]
        if g is None:
            if (s["lv0"] or s["lv1"]) and not self.arbitrating:
                self.arbitrating = True
                self._after(("arbitrate",))
            if not s["en"] and R.ack:
                self.precharge(R)
            if not R.ack and not L0.ack and not L1.ack:
                self.drive("en", True)
            return
        L = self.ins[g]
        lv = s["lv0"] if g == 0 else s["lv1"]
        if s["en"] and not R.ack and not self.served:
            self.drive_bits(R, L.t, L.f)
        elif not s["en"] and R.ack:
            self.precharge(R)
        if lv and s["rv"]:
            self.drive_ack(L, True)
        elif not lv and not s["rv"] and L.ack:
            self.drive_ack(L, False)
        if L.ack and R.ack:
            self.drive("en", False)
        elif not L.ack and not R.ack and not s["en"]:
            self.drive("en", True)
        if self.served and not L.ack and not lv:
            self.drive("grant", None)

    def on_ack(self, ch, level, now):
        if ch in self.ins and level:
            self.served = True
            self.charge()


class Source(Process):
    """Environment process feeding a token list into its output channel.

    It behaves like a PCHB stage whose input is always valid once the next
    token's release time has passed.
    """

    kind = ProcessKind.SOURCE
    n_in = 0

    def __init__(self, pid, fabric, ins, outs):
        super().__init__(pid, fabric, ins, outs)
        self.sig.update(rv=False, la=False, en=True)
        self.queue: list[tuple[int, int]] = []
        self.head = 0
        self.sent: list[tuple[int, int]] = []
        self.on_accept: Callable[[int, int], None] | None = None
        self._wake = None

    def push(self, value: int, release: int | None = None) -> None:
        release = self.fabric.sim.now if release is None else release
        if self.queue and release < self.queue[-1][0]:
            raise ValueError("token release times must be nondecreasing")
        self.queue.append((release, value))
        if self.fabric.in_flight == 0:
            # the deadlock watchdog measures idle gaps from the first outstanding token
            self.fabric.last_transition = max(self.fabric.last_transition, self.fabric.sim.now)
        self.fabric.in_flight += 1
        self._arm(self.fabric.sim.now)

    def _arm(self, now: int) -> None:
        if self.head < len(self.queue) and self._wake is None:
            release = self.queue[self.head][0]
            self._wake = self.fabric.sim.schedule(max(release, now), self.pid, ("wake",))

    def on_other(self, payload, now):
        if payload[0] != "wake":
            super().on_other(payload, now)
        self._wake = None
        self.evaluate(now)

    @property
    def ready(self) -> bool:
        return self.head < len(self.queue) and self.queue[self.head][0] <= self.fabric.sim.now

    def evaluate(self, now: int) -> None:
        R = self.outs[0]
        s = self.sig
        self._validity("rv", R)
        if s["en"] and not R.ack and self.ready:
            value = self.queue[self.head][1]
            t, f = R.full & value, R.full & ~value
            self.drive_bits(R, t, f)
        elif not s["en"] and R.ack:
            self.precharge(R)
        # "la" stands in for the ack a PCHB stage would return to its own left side
        if s["rv"]:
            self.drive("la", True)
        else:
            self.drive("la", False)
        if s["la"] and R.ack:
            self.drive("en", False)
        elif not s["la"] and not R.ack:
            self.drive("en", True)

    def on_signal(self, name, value, now):
        if name == "en" and value is False:
            t_release, v = self.queue[self.head]
            self.sent.append((now, v))
            self.head += 1
            if self.on_accept is not None:
                self.on_accept(now, v)
        elif name == "en" and value is True:
            self._arm(now)


class Sink(Process):
    """Environment process that acknowledges every token it sees."""

    kind = ProcessKind.SINK
    n_out = 0

    def __init__(self, pid, fabric, ins, outs):
        super().__init__(pid, fabric, ins, outs)
        self.sig.update(lv=False, latch=False)
        self.received: list[tuple[int, int]] = []
        self.on_token: Callable[[int, int], None] | None = None

    def on_signal(self, name, value, now):
        if name == "lv" and value:
            v = self.ins[0].value()
            self.received.append((now, v))
            self.fabric.in_flight -= 1
            if self.on_token is not None:
                self.on_token(now, v)

    def evaluate(self, now: int) -> None:
        L = self.ins[0]
        self._validity("lv", L)
        # latch stage stands in for the output evaluation of a PCHB neighbour
        self.drive("latch", bool(self.sig["lv"]))
        self.drive_ack(L, bool(self.sig["latch"]))
