"""Command-line entry point: ``nmsim <subcommand> [--config F] [--seed N] [--out DIR] [--set k=v]``.

Every subcommand writes CSV files into the output directory and prints a
short summary.  Failures print one line ``error: <category>: <message>`` to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from ._toml import ConfigError
from .config import RunConfig, load_config
from .device import MosParams, Polarity, RailError, subthreshold_swing, sweep
from .fabric import Adversary, DeadlockError, qdi_conformance
from .mismatch import MismatchSpec, histogram, monte_carlo_rates
from .network import NetworkError, bundled_networks, cam_csv, load_network, run_network
from .neuron import NeuronParams, Stimulus, SynapseParams
from .panels import adaptation_panel, leak_panel, refractory_panel, threshold_panel
from .power import (
    EnergyLedger,
    ReportConfig,
    buffer_power_curve,
    chip_report,
    closed_form_power,
    system_routing_estimate,
)

EXIT_CODES = {"config": 2, "network": 3, "deadlock": 4, "io": 5, "qdi": 6, "value": 7}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        self.category = category
        super().__init__(message)


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _neuron_params(cfg: RunConfig, **extra) -> NeuronParams:
    names = {f.name for f in fields(NeuronParams)}
    base = {k: v for k, v in cfg["neuron"].items() if k in names}
    return NeuronParams(**{**base, **extra})


def _synapse(cfg: RunConfig) -> SynapseParams:
    s = cfg["neuron"]["synapse"]
    return SynapseParams(tuple(s["tau"]), tuple(s["weight"]))


# -- subcommands ------------------------------------------------------------------


def cmd_device_sweep(cfg: RunConfig, args) -> list[Path]:
    d = cfg["device"]
    p = MosParams(Polarity(d["polarity"].upper()), I0=d["I0"], kappa=d["kappa"], UT=d["UT"], W=d["W"],
                  I_leak0=d["I_leak0"], L_min=d["L_min"], L_leak=d["L_leak"])
    v = np.linspace(d["v_gs_start"], d["v_gs_stop"], d["v_gs_points"])
    rows = []
    for L, vg, i in sweep(p, v, d["V_DS"], tuple(d["lengths"])):
        rows += [(repr(L), f"{a:.6g}", f"{b:.9g}") for a, b in zip(vg, i)]
    print(f"subthreshold swing {1e3 / subthreshold_swing(p):.2f} mV/decade")
    return [_write(cfg.out_dir(), "device_sweep.csv", _csv(rows, ("L_m", "V_GS_V", "I_D_A")))]


def cmd_neuron_demo(cfg: RunConfig, args) -> list[Path]:
    dt = cfg["neuron"]["dt"]
    panels = [leak_panel(dt=dt), threshold_panel(dt=dt), refractory_panel(dt=dt), adaptation_panel(dt=dt)]
    paths = []
    for panel in panels:
        rates = ", ".join(f"{v:g}: {r:.4g} Hz" for v, r in zip(panel.values, panel.rates))
        print(f"{panel.name:<11} {panel.knob} -> {rates}")
        paths.append(_write(cfg.out_dir(), f"neuron_{panel.name}.csv", panel.to_csv()))
    return paths


def cmd_monte_carlo(cfg: RunConfig, args) -> list[Path]:
    m = cfg["mismatch"]
    runs = args.runs if args.runs is not None else m["n_runs"]
    spec = MismatchSpec(dict(m["sigma_map"]), n_runs=runs, seed=cfg.seed, scale=m["scale"])
    nominal = _neuron_params(cfg, I_dc=m["I_dc"])
    stats = monte_carlo_rates(nominal, spec, Stimulus.dc(), m["T"], syn=_synapse(cfg), dt=m["dt"],
                              warmup=m["warmup"])
    out = cfg.out_dir()
    rates = _csv([(i, f"{r:.9g}") for i, r in enumerate(stats.samples)], ("run", "rate_hz"))
    hist = _csv([(f"{a:g}", f"{b:g}", c) for a, b, c in histogram(stats, m["bin_width"])],
                ("bin_lo_hz", "bin_hi_hz", "count"))
    summary = _csv([(runs, cfg.seed, f"{stats.mean:.9g}", f"{stats.std_dev:.9g}",
                     f"{stats.relative_error:.9g}", len(stats.silent_runs))],
                   ("runs", "seed", "mean_hz", "std_hz", "relative_error", "silent_runs"))
    print(f"mean {stats.mean:.3f} Hz  std {stats.std_dev:.3f} Hz  relative error {100 * stats.relative_error:.3f}%")
    return [_write(out, "mc_rates.csv", rates), _write(out, "mc_histogram.csv", hist),
            _write(out, "mc_summary.csv", summary)]


def _rates_arg(text: str) -> list[float]:
    try:
        rates = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError("config", f"--rates {text!r} is not a comma-separated list of numbers") from None
    if not rates or any(r <= 0 for r in rates):
        raise CliError("config", "--rates needs positive event rates")
    return rates


def cmd_buffer_power(cfg: RunConfig, args) -> list[Path]:
    pw = cfg["power"]
    rates = _rates_arg(args.rates) if args.rates else pw["rates"]
    points = buffer_power_curve(rates, n_tokens=pw["n_tokens"])
    rows = [(f"{p.rate:g}", f"{p.watts:.9g}", f"{closed_form_power(p.rate):.9g}", int(p.saturated),
             f"{p.measured_rate:.9g}") for p in points]
    for p in points:
        flag = "  (saturated)" if p.saturated else ""
        print(f"{p.rate:>10.3g} events/s  {p.watts:.4e} W{flag}")
    est = system_routing_estimate(pw["n_buffer_equivalents"], pw["system_rate"])
    print(f"system: {pw['n_buffer_equivalents']} buffers at {pw['system_rate']:g} events/s -> "
          f"{est.watts:.4e} W, {est.joules_per_event:.4e} J/event")
    out = cfg.out_dir()
    return [
        _write(out, "buffer_power.csv", _csv(rows, ("rate_events_per_s", "power_w", "closed_form_w",
                                                     "saturated", "measured_rate"))),
        _write(out, "system_routing.csv", _csv(
            [(pw["n_buffer_equivalents"], f"{pw['system_rate']:g}", f"{est.watts:.9g}", f"{est.joules_per_event:.9g}")],
            ("buffer_equivalents", "rate_events_per_s", "power_w", "energy_per_event_j"))),
    ]


def cmd_qdi_check(cfg: RunConfig, args) -> list[Path]:
    f = cfg["fabric"]
    trials = args.trials if args.trials is not None else f["trials"]
    fault = f["fault"] or None
    rows, bad = [], []
    for topo in f["topologies"]:
        rep = qdi_conformance(topo, trials, seed=cfg.seed, jitter=f["jitter"], nominal=f["delay_ps"],
                              mode=Adversary(f["mode"].upper()), tokens=f["tokens"], width=f["width"],
                              fault=fault, stages=f["stages"])
        first = "; ".join(rep.first_failure.reasons[:3]) if rep.first_failure else ""
        rows.append((topo, rep.trials, rep.passed, rep.failed, first))
        print(f"{topo:<9} {rep.passed}/{rep.trials} passed" + (f"  first failure: {first}" if first else ""))
        if (fault is None) != rep.ok:
            bad.append(topo)
    path = _write(cfg.out_dir(), "qdi.csv", _csv(rows, ("topology", "trials", "passed", "failed", "first_failure")))
    if bad:
        what = "fault not detected" if fault else "protocol violations"
        raise CliError("qdi", f"{what} on {', '.join(bad)} (see {path})")
    return [path]


def _network_path(name: str) -> Path:
    bundled = bundled_networks()
    if name in bundled:
        return bundled[name]
    path = Path(name)
    if not path.exists():
        raise CliError("io", f"no network description {name!r} (bundled: {', '.join(bundled)})")
    return path


def cmd_run_network(cfg: RunConfig, args) -> list[Path]:
    n = cfg["network"]
    path = _network_path(args.network or n["file"])
    spec = load_network(path)
    if n["T"] > 0:
        spec.T = n["T"]
    result = run_network(spec, measure=n["measure"])
    a = result.audit
    print(f"{spec.name}: {len(result.raster)} spikes, {a.emitted} events, {a.delivered} delivered, "
          f"{sum(a.dropped.values())} dropped, {a.inputs} synaptic inputs")
    if not a.conserved or a.acausal:
        raise CliError("network", "event audit failed (conservation or causality)")
    out = cfg.out_dir()
    paths = [_write(out, "raster.csv", result.raster_csv()), _write(out, "ledger.csv", result.ledger.to_csv()),
             _write(out, "cam.csv", cam_csv(spec))]
    if n["route_log"]:
        paths.append(_write(out, "events.csv", result.events_csv()))
    return paths


def report_config(cfg: RunConfig) -> ReportConfig:
    c, pw, nr = cfg["cam"], cfg["power"], cfg["neuron"]
    return ReportConfig(
        supply_voltage=pw["supply_voltage"],
        neuron_logic_area=pw["neuron_logic_area"],
        total_capacitance=nr["C_M"] + nr["C_A"] + nr["C_R"],
        mim_density=pw["mim_density"],
        cam_words=c["n_words"],
        word_bits=c["word_bits"],
        cell_area=c["cell_area"],
    )


def cmd_report(cfg: RunConfig, args) -> list[Path]:
    out = cfg.out_dir()
    path = Path(args.ledger or cfg["power"]["ledger"] or out / "ledger.csv")
    try:
        ledger = EnergyLedger.from_csv(path.read_text())
    except OSError as exc:
        raise CliError("io", f"cannot read ledger {path}: {exc.strerror} (run `run-network` first)") from None
    units = args.units or cfg["power"]["units"]
    rep = chip_report(report_config(cfg), ledger)
    text = rep.to_text(units)
    print(text, end="")
    bad = [k for k, ok in rep.matches_table().items() if not ok]
    print("published values matched: " + ("all fields" if not bad else "differs in " + ", ".join(bad)))
    return [_write(out, "report.txt", text), _write(out, "report.csv", rep.to_csv(units))]


COMMANDS: dict[str, tuple[Callable, str]] = {
    "device-sweep": (cmd_device_sweep, "I_D versus V_GS for several channel lengths"),
    "neuron-demo": (cmd_neuron_demo, "leak, threshold, refractory and adaptation panels"),
    "monte-carlo": (cmd_monte_carlo, "firing-rate spread under device mismatch"),
    "buffer-power": (cmd_buffer_power, "simulated power of one buffer versus event rate"),
    "qdi-check": (cmd_qdi_check, "randomized-delay protocol conformance of fabric topologies"),
    "run-network": (cmd_run_network, "simulate a multi-core network description"),
    "report": (cmd_report, "chip feature table from a stored ledger"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nmsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--seed", type=int, help="seed for every random draw")
    common.add_argument("--out", help="output directory (default $NMSIM_OUT or ./out)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. mismatch.n_runs=100")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name == "monte-carlo":
            p.add_argument("--runs", type=int)
        elif name == "buffer-power":
            p.add_argument("--rates", help="comma-separated events/s, e.g. 1e3,1e6,1.8e9")
        elif name == "qdi-check":
            p.add_argument("--trials", type=int)
        elif name == "run-network":
            p.add_argument("--network", help="bundled example name or description file")
        elif name == "report":
            p.add_argument("--ledger", help="ledger CSV written by run-network")
            p.add_argument("--units", choices=("si", "eng"))
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set, seed=args.seed, out=args.out)
        fn, _ = COMMANDS[args.command]
        for path in fn(cfg, args):
            print(f"wrote {path}")
        return 0
    except CliError as exc:
        category, msg = exc.category, str(exc)
    except ConfigError as exc:
        category, msg = "config", str(exc)
    except DeadlockError as exc:
        category, msg = "deadlock", str(exc)
    except NetworkError as exc:
        category, msg = "network", str(exc)
    except RailError as exc:
        category, msg = "value", str(exc)
    except OSError as exc:
        category, msg = "io", f"{exc.filename or ''}: {exc.strerror}"
    except ValueError as exc:
        category, msg = "value", str(exc)
    print(f"error: {category}: {msg}", file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
