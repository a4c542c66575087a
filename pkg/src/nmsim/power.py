"""Energy, power and area accounting.

Dynamic energy is booked as event counts per component class and converted
to joules only when read, so the ledger audit (joules equal to the sum of
count x per-event energy) holds exactly.  The buffer constants reproduce a
10-bit PCHB buffer at 28 nm: 9.84 nW static, 250 uW total at 1.8 G events/s,
which fixes the per-token energy at (250 uW - 9.84 nW) / 1.8e9.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .engine import PS_PER_S
from .fabric import DelayModel, Fabric, ProcessKind, pipeline_description, throughput

BUFFER_STATIC_W = 9.84e-9
BUFFER_BANDWIDTH = 1.8e9
BUFFER_POWER_AT_BANDWIDTH = 250e-6
BUFFER_E_DYN = (BUFFER_POWER_AT_BANDWIDTH - BUFFER_STATIC_W) / BUFFER_BANDWIDTH

NEURON_E_SPIKE = 50e-12
NEURON_LOGIC_AREA_UM2 = 20.0
MIM_DENSITY_F_PER_UM2 = 18e-15
SUPPLY_V = 1.0
SYSTEM_BUFFER_EQUIVALENTS = 600
SYSTEM_RATE = 1e5


@dataclass
class EnergyLedger:
    window: float = 0.0
    static: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    energy_per_event: dict[str, float] = field(default_factory=dict)
    measurements: dict[str, float] = field(default_factory=dict)

    def add_static(self, component: str, watts: float) -> None:
        if watts < 0:
            raise ValueError("static power must be nonnegative")
        self.static[component] = self.static.get(component, 0.0) + watts

    def charge(self, cls: str, count: int, energy: float) -> None:
        if count < 0 or energy < 0:
            raise ValueError("counts and energies must be nonnegative")
        known = self.energy_per_event.setdefault(cls, energy)
        if known != energy:
            raise ValueError(f"class {cls!r} already booked at {known} J/event")
        self.counts[cls] = self.counts.get(cls, 0) + int(count)

    def joules(self, cls: str) -> float:
        return self.counts.get(cls, 0) * self.energy_per_event.get(cls, 0.0)

    @property
    def dynamic_joules(self) -> float:
        return math.fsum(self.joules(c) for c in sorted(self.counts))

    @property
    def static_watts(self) -> float:
        return math.fsum(self.static[k] for k in sorted(self.static))

    @property
    def mean_power(self) -> float:
        if self.window <= 0:
            raise ValueError("ledger window must be positive to report mean power")
        return self.static_watts + self.dynamic_joules / self.window

    def scaled(self, n: int, prefix: str = "") -> "EnergyLedger":
        """n identical copies over the same window (e.g. buffer equivalents)."""
        out = EnergyLedger(window=self.window)
        for i in range(n):
            for k, w in self.static.items():
                out.add_static(f"{prefix}{i}/{k}", w)
        for k, c in self.counts.items():
            out.charge(k, c * n, self.energy_per_event[k])
        return out

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        if self.window and other.window and self.window != other.window:
            raise ValueError("cannot merge ledgers over different windows")
        out = EnergyLedger(window=self.window or other.window)
        for led in (self, other):
            for k, w in led.static.items():
                out.add_static(k, w)
            for k, c in led.counts.items():
                out.charge(k, c, led.energy_per_event[k])
            out.measurements.update(led.measurements)
        return out

    # -- serialisation ---------------------------------------------------
    def to_rows(self) -> list[tuple[str, str, str]]:
        rows = [("window", "", repr(self.window))]
        rows += [("static_w", k, repr(self.static[k])) for k in sorted(self.static)]
        rows += [("count", k, str(self.counts[k])) for k in sorted(self.counts)]
        rows += [("energy_per_event_j", k, repr(self.energy_per_event[k])) for k in sorted(self.energy_per_event)]
        rows += [("measurement", k, repr(self.measurements[k])) for k in sorted(self.measurements)]
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("record", "key", "value"))
        w.writerows(self.to_rows())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EnergyLedger":
        led = cls()
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != ["record", "key", "value"]:
            raise ValueError(f"not a ledger CSV (header {header})")
        per_event, counts = {}, {}
        for rec, key, value in reader:
            if rec == "window":
                led.window = float(value)
            elif rec == "static_w":
                led.static[key] = float(value)
            elif rec == "count":
                counts[key] = int(value)
            elif rec == "energy_per_event_j":
                per_event[key] = float(value)
            elif rec == "measurement":
                led.measurements[key] = float(value)
            else:
                raise ValueError(f"unknown ledger record {rec!r}")
        for k, c in counts.items():
            led.charge(k, c, per_event[k])
        return led


# -- buffer power curve ------------------------------------------------------


@dataclass(frozen=True)
class PowerPoint:
    rate: float
    watts: float
    saturated: bool
    measured_rate: float
    ledger: EnergyLedger = field(repr=False, compare=False)


def buffer_ledger(rate: float, n_tokens: int = 200, delays: DelayModel | None = None,
                  e_dyn: float = BUFFER_E_DYN, p_static: float = BUFFER_STATIC_W,
                  width: int = 10, seed: int = 0) -> PowerPoint:
    """Stream ``n_tokens`` through one buffer at ``rate`` and book its energy.

    The window is n_tokens source periods, stretched to the measured token
    spacing when the buffer cannot keep up (reported as saturated).
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if n_tokens < 2:
        raise ValueError("need at least two tokens")
    period = max(1, round(PS_PER_S / rate))
    fab = Fabric.from_description(pipeline_description(1), delays=delays, width=width, history=0)
    src = fab.processes["src"]
    mask = (1 << width) - 1
    for i in range(n_tokens):
        # alternate complementary codes so every rail toggles each token
        src.push(mask if i % 2 else 0, i * period)
    fab.run()
    times = [t for t, _ in fab.processes["snk"].received]
    spacing = (times[-1] - times[0]) / (len(times) - 1)
    saturated = spacing > 1.01 * period
    window_ps = n_tokens * (spacing if saturated else period)
    led = EnergyLedger(window=window_ps / PS_PER_S)
    led.add_static("buf0", p_static)
    led.charge("buffer", fab.processes["buf0"].tokens, e_dyn)
    measured = PS_PER_S / max(spacing, period)
    return PowerPoint(rate, led.mean_power, saturated, measured, led)


def buffer_power_curve(rates: Sequence[float], n_tokens: int = 200, delays: DelayModel | None = None) -> list[PowerPoint]:
    """Simulated mean power of one 10-bit buffer at each input event rate."""
    return [buffer_ledger(r, n_tokens=n_tokens, delays=delays) for r in rates]


def closed_form_power(rate: float) -> float:
    return BUFFER_STATIC_W + BUFFER_E_DYN * rate


@dataclass(frozen=True)
class RoutingEstimate:
    watts: float
    joules_per_event: float
    ledger: EnergyLedger = field(repr=False, compare=False)


def system_routing_estimate(n_buffer_equivalents: int = SYSTEM_BUFFER_EQUIVALENTS, rate: float = SYSTEM_RATE,
                            n_tokens: int = 50, delays: DelayModel | None = None) -> RoutingEstimate:
    """Routing system built from n buffer equivalents, every event crossing all of them."""
    if n_buffer_equivalents <= 0 or rate <= 0:
        raise ValueError("arguments must be positive")
    point = buffer_ledger(rate, n_tokens=n_tokens, delays=delays)
    led = point.ledger.scaled(n_buffer_equivalents, prefix="beq")
    watts = led.mean_power
    return RoutingEstimate(watts, watts / point.measured_rate, led)


# -- area -------------------------------------------------------------------------


def capacitor_area(total_capacitance: float, density: float = MIM_DENSITY_F_PER_UM2) -> float:
    if total_capacitance < 0 or density <= 0:
        raise ValueError("capacitance must be nonnegative and density positive")
    return total_capacitance / density


@dataclass(frozen=True)
class AreaReport:
    neuron_logic: float
    capacitor: float
    cam: float
    synapse: float
    neurons_per_core: int
    n_cores: int
    fabric: float | None = None

    @property
    def per_neuron(self) -> float:
        return self.neuron_logic + self.capacitor + self.cam

    @property
    def per_core(self) -> float:
        return self.per_neuron * self.neurons_per_core

    @property
    def chip(self) -> float:
        return self.per_core * self.n_cores


def area_report(neuron_logic: float, total_capacitance: float, cam_words: int, word_bits: int,
                cell_area: float, neurons_per_core: int, n_cores: int,
                density: float = MIM_DENSITY_F_PER_UM2) -> AreaReport:
    cam = cam_words * word_bits * cell_area
    return AreaReport(
        neuron_logic=neuron_logic,
        capacitor=capacitor_area(total_capacitance, density),
        cam=cam,
        synapse=cam / cam_words,
        neurons_per_core=neurons_per_core,
        n_cores=n_cores,
    )


# -- chip feature report ---------------------------------------------------------

# published feature values of the 28 nm design
PUBLISHED = {
    "technology": "28nm FD-SOI",
    "supply_voltage_V": 1.0,
    "energy_per_spike_J": 50e-12,
    "energy_per_routing_J": 147e-12,
    "router_bandwidth_events_per_s": 1.8e9,
    "neuron_area_um2": 20.0,
    "synapse_area_um2": 3.0,
}

# relative tolerance per simulated field; None means exact equality
PUBLISHED_TOLERANCE = {
    "technology": None,
    "supply_voltage_V": None,
    "energy_per_spike_J": None,
    "energy_per_routing_J": 0.10,
    "router_bandwidth_events_per_s": 0.02,
    "neuron_area_um2": None,
    "synapse_area_um2": None,
}

UNITS = {
    "supply_voltage_V": "V",
    "energy_per_spike_J": "J",
    "energy_per_routing_J": "J",
    "router_bandwidth_events_per_s": "events/s",
    "neuron_area_um2": "um^2",
    "synapse_area_um2": "um^2",
    "capacitor_area_um2": "um^2",
    "cam_per_neuron_um2": "um^2",
    "neuron_total_area_um2": "um^2",
    "core_area_um2": "um^2",
    "chip_area_um2": "um^2",
    "spike_count": "",
    "static_power_W": "W",
    "mean_power_W": "W",
}


@dataclass
class ChipReport:
    rows: dict[str, object]
    notes: dict[str, str] = field(default_factory=dict)

    def matches_table(self) -> dict[str, bool]:
        out = {}
        for key, ref in PUBLISHED.items():
            got = self.rows.get(key)
            tol = PUBLISHED_TOLERANCE[key]
            if got is None or isinstance(got, str) and got == "N/A":
                out[key] = False
            elif tol is None:
                out[key] = got == ref if isinstance(ref, str) else math.isclose(got, ref, rel_tol=1e-12)
            else:
                out[key] = abs(got - ref) <= tol * ref
        return out

    def to_csv(self, units: str = "si") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("field", "value", "unit", "published", "note"))
        for key, val in self.rows.items():
            ref = PUBLISHED.get(key, "")
            w.writerow((key, _fmt(val, units), UNITS.get(key, ""), _fmt(ref, units) if ref != "" else "", self.notes.get(key, "")))
        return buf.getvalue()

    def to_text(self, units: str = "si") -> str:
        header = ("field", "value", "unit", "published", "note")
        body = [
            (k, _fmt(v, units), UNITS.get(k, ""), _fmt(PUBLISHED[k], units) if k in PUBLISHED else "", self.notes.get(k, ""))
            for k, v in self.rows.items()
        ]
        widths = [max(len(str(r[i])) for r in [header, *body]) for i in range(len(header))]
        lines = ["  ".join(str(c).ljust(wd) for c, wd in zip(r, widths)).rstrip() for r in [header, *body]]
        lines.insert(1, "  ".join("-" * wd for wd in widths))
        return "\n".join(lines) + "\n"


_ENG = [(1e-15, "f"), (1e-12, "p"), (1e-9, "n"), (1e-6, "u"), (1e-3, "m"), (1.0, ""), (1e3, "k"), (1e6, "M"), (1e9, "G")]


def _fmt(value, units: str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if units == "eng" and value != 0:
        mag = abs(value)
        scale, prefix = _ENG[0]
        for s, p in _ENG:
            if mag >= s:
                scale, prefix = s, p
        return f"{value / scale:.4g} {prefix}".rstrip()
    return f"{value:.6g}"


@dataclass(frozen=True)
class ReportConfig:
    supply_voltage: float = SUPPLY_V
    technology: str = "28nm FD-SOI"
    neuron_logic_area: float = NEURON_LOGIC_AREA_UM2
    total_capacitance: float = 0.9e-12
    mim_density: float = MIM_DENSITY_F_PER_UM2
    cam_words: int = 64
    word_bits: int = 12
    cell_area: float = 0.25
    neurons_per_core: int = 256
    n_cores: int = 4


def chip_report(cfg: ReportConfig, ledger: EnergyLedger) -> ChipReport:
    """Chip feature table plus the area roll-up, from config and ledger only."""
    area = area_report(cfg.neuron_logic_area, cfg.total_capacitance, cfg.cam_words, cfg.word_bits,
                       cfg.cell_area, cfg.neurons_per_core, cfg.n_cores, cfg.mim_density)
    spikes = ledger.counts.get("neuron_spike", 0)
    rows: dict[str, object] = {
        "technology": cfg.technology,
        "supply_voltage_V": cfg.supply_voltage,
        "energy_per_spike_J": ledger.joules("neuron_spike") / spikes if spikes else "N/A",
        "energy_per_routing_J": ledger.measurements.get("routing_energy_per_event_J", "N/A"),
        "router_bandwidth_events_per_s": ledger.measurements.get("router_bandwidth_events_per_s", "N/A"),
        "neuron_area_um2": area.neuron_logic,
        "synapse_area_um2": area.synapse,
        "capacitor_area_um2": area.capacitor,
        "cam_per_neuron_um2": area.cam,
        "neuron_total_area_um2": area.per_neuron,
        "core_area_um2": area.per_core,
        "chip_area_um2": area.chip,
        "fabric_area_um2": "not specified",
        "spike_count": spikes,
    }
    if ledger.window > 0:
        rows["static_power_W"] = ledger.static_watts
        rows["mean_power_W"] = ledger.mean_power
    notes = {
        "energy_per_spike_J": "@ 30Hz operating point" if spikes else "no spikes in run",
        "energy_per_routing_J": f"{SYSTEM_BUFFER_EQUIVALENTS} buffer equivalents at {SYSTEM_RATE:g} events/s",
        "neuron_area_um2": "excluding capacitor",
        "capacitor_area_um2": "MIM overlay",
        "chip_area_um2": "excluding fabric",
    }
    return ChipReport(rows, notes)


def report_config_to_json(cfg: ReportConfig) -> str:
    return json.dumps(asdict(cfg), sort_keys=True)
