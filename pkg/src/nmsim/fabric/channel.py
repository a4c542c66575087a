"""Dual-rail channels with a 4-phase handshake monitor.

Each logical bit is a pair of rails; a bit is NEUTRAL (0, 0), FALSE (0, 1) or
TRUE (1, 0).  The rails of a ``width``-bit channel are kept as two bitmasks.
The request is implicit in the data: the channel is valid when every bit has
exactly one rail up.  The receiver answers on a single active-high ack wire.

Every rail and ack transition is checked against the protocol; violations are
recorded on the channel together with its transition history.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum


class Rail(IntEnum):
    NEUTRAL = 0
    FALSE = 1
    TRUE = 2


class Phase(str, Enum):
    IDLE = "IDLE"
    DATA_VALID = "DATA_VALID"
    ACKED = "ACKED"
    RETURNING = "RETURNING"


def encode(value: int, width: int) -> tuple[int, int]:
    """Return (true_rails, false_rails) masks for a valid code word."""
    full = (1 << width) - 1
    if not 0 <= value <= full:
        raise ValueError(f"value {value} does not fit in {width} bits")
    return value, full & ~value


def decode(true_rails: int, false_rails: int, width: int) -> int:
    full = (1 << width) - 1
    if true_rails & false_rails:
        raise ValueError("dual-rail exclusivity violated")
    if (true_rails | false_rails) != full:
        raise ValueError("code word is not complete")
    return true_rails


@dataclass(frozen=True)
class Violation:
    time: int
    channel: str
    rule: str
    detail: str


class DualRailChannel:
    """One point-to-point dual-rail link plus its acknowledge wire."""

    def __init__(self, name: str, width: int = 10, history: int | None = 256):
        if width < 1:
            raise ValueError("channel width must be >= 1")
        self.name = name
        self.width = width
        self.full = (1 << width) - 1
        self.t = 0
        self.f = 0
        self.ack = False
        self.phase = Phase.IDLE
        self.sender = None
        self.receiver = None
        self.cycles = 0
        self.tokens: list[tuple[int, int]] = []
        self.violations: list[Violation] = []
        self.history: deque = deque(maxlen=history)

    # -- state queries ---------------------------------------------------
    @property
    def present(self) -> int:
        return self.t | self.f

    @property
    def valid(self) -> bool:
        return self.present == self.full and not (self.t & self.f)

    @property
    def neutral(self) -> bool:
        return self.present == 0

    def bit(self, i: int) -> Rail:
        m = 1 << i
        if self.t & m:
            return Rail.TRUE
        if self.f & m:
            return Rail.FALSE
        return Rail.NEUTRAL

    def value(self) -> int:
        return decode(self.t, self.f, self.width)

    # -- transitions -----------------------------------------------------
    def _violate(self, now: int, rule: str, detail: str) -> None:
        self.violations.append(Violation(now, self.name, rule, detail))

    def raise_rail(self, now: int, bit: int, rail: Rail) -> None:
        m = 1 << bit
        self.history.append((now, self.name, f"d{bit}.{'t' if rail is Rail.TRUE else 'f'}", 1))
        if self.ack:
            self._violate(now, "data-before-ack-reset", f"bit {bit} rose while ack high")
        if self.present & m:
            rule = "dual-rail-exclusivity" if ((self.t if rail is Rail.FALSE else self.f) & m) else "double-drive"
            self._violate(now, rule, f"bit {bit} already valid")
        if rail is Rail.TRUE:
            self.t |= m
        else:
            self.f |= m
        if self.phase is Phase.IDLE and self.valid:
            self.phase = Phase.DATA_VALID
            self.tokens.append((now, self.t))

    def lower_rail(self, now: int, bit: int) -> None:
        m = 1 << bit
        self.history.append((now, self.name, f"d{bit}", 0))
        if not self.present & m:
            self._violate(now, "spurious-reset", f"bit {bit} already neutral")
        if not self.ack:
            self._violate(now, "data-withdrawn-before-ack", f"bit {bit} fell while ack low")
        self.t &= ~m
        self.f &= ~m
        if self.phase is Phase.ACKED:
            self.phase = Phase.RETURNING

    def set_ack(self, now: int, level: bool) -> None:
        self.history.append((now, self.name, "ack", int(level)))
        if level == self.ack:
            self._violate(now, "ack-glitch", f"ack driven to {int(level)} twice")
            return
        self.ack = level
        if level:
            if self.phase is not Phase.DATA_VALID:
                self._violate(now, "ack-before-validity", f"ack rose in phase {self.phase.value}")
            self.phase = Phase.ACKED if self.valid else Phase.RETURNING
        else:
            if not self.neutral:
                self._violate(now, "ack-reset-before-neutral", "ack fell while data not neutral")
            elif self.phase is Phase.RETURNING:
                self.cycles += 1
            self.phase = Phase.IDLE
