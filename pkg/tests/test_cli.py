import csv

import pytest

from nmsim._toml import ConfigError
from nmsim.cli import EXIT_CODES, main
from nmsim.config import defaults, load_config, parse_override


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_unknown_key_reports_its_line(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[run]\nseed = 3\n\n[fabric]\njiter = 0.5\n")
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert exc.value.line == 5 and "fabric.jiter" in str(exc.value)


def test_type_mismatch_and_syntax_error(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[run]\nseed = \"x\"\n")
    with pytest.raises(ConfigError, match="expects int"):
        load_config(cfg)
    cfg.write_text("[run]\nseed = = 3\n")
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert exc.value.line == 2


def test_overrides_and_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[run]\nseed = 3\n[fabric]\njitter = 0.5\n")
    rc = load_config(cfg, ["fabric.jitter=0.25", "fabric.mode=NOMINAL"], seed=9)
    assert rc["fabric"]["jitter"] == 0.25 and rc["fabric"]["mode"] == "NOMINAL" and rc.seed == 9
    assert load_config()["fabric"] == defaults()["fabric"]
    assert parse_override("power.rates=[1, 2.5]") == (["power", "rates"], [1, 2.5])
    with pytest.raises(ConfigError):
        parse_override("novalue")
    with pytest.raises(ConfigError):
        load_config(overrides=["nope.x=1"])


def test_out_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("NMSIM_OUT", str(tmp_path / "env"))
    assert load_config().out_dir() == tmp_path / "env"
    assert load_config(out="x").out_dir().name == "x"


def test_monte_carlo_is_reproducible(out, tmp_path):
    assert main(["monte-carlo", "--runs", "20", "--out", str(out)]) == 0
    first = (out / "mc_rates.csv").read_text()
    other = tmp_path / "again"
    assert main(["monte-carlo", "--runs", "20", "--out", str(other)]) == 0
    assert (other / "mc_rates.csv").read_text() == first
    assert (other / "mc_summary.csv").read_text() == (out / "mc_summary.csv").read_text()
    assert main(["monte-carlo", "--runs", "20", "--seed", "8", "--out", str(other)]) == 0
    assert (other / "mc_rates.csv").read_text() != first


def test_buffer_power_rows(out):
    assert main(["buffer-power", "--rates", "1e3,1e6,1.8e9", "--out", str(out)]) == 0
    rows = _rows(out / "buffer_power.csv")
    assert rows[0][0] == "rate_events_per_s" and len(rows) == 4
    assert len(_rows(out / "system_routing.csv")) == 2


def test_device_sweep(out):
    assert main(["device-sweep", "--out", str(out)]) == 0
    assert len(_rows(out / "device_sweep.csv")) > 10


def test_qdi_check_passes_and_catches_fault(out, capsys):
    assert main(["qdi-check", "--trials", "3", "--out", str(out)]) == 0
    assert len(_rows(out / "qdi.csv")) == 4
    code = main(["qdi-check", "--trials", "3", "--out", str(out), "--set", "fabric.fault=\"early_ack\"",
                 "--set", "fabric.topologies=[\"pipeline\"]"])
    assert code == 0  # a detected fault is the expected outcome
    code = main(["qdi-check", "--trials", "1", "--out", str(out), "--set", "fabric.fault=\"early_ack\"",
                 "--set", "fabric.topologies=[\"split\"]"])
    assert code == EXIT_CODES["value"]


def test_run_network_then_report(out, capsys):
    assert main(["run-network", "--network", "two_neuron", "--out", str(out), "--set", "network.route_log=true"]) == 0
    for name in ("raster.csv", "ledger.csv", "cam.csv", "events.csv"):
        assert (out / name).exists()
    assert main(["report", "--out", str(out)]) == 0
    text = (out / "report.txt").read_text()
    assert "published values matched: all fields" in capsys.readouterr().out
    assert main(["report", "--out", str(out)]) == 0
    assert (out / "report.txt").read_text() == text


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[nope]\n")
    assert main(["device-sweep", "--config", str(bad)]) == EXIT_CODES["config"]
    assert "error: config:" in capsys.readouterr().err
    assert main(["run-network", "--network", "missing_net", "--out", str(tmp_path)]) == EXIT_CODES["io"]
    assert main(["report", "--ledger", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == EXIT_CODES["io"]
    net = tmp_path / "n.toml"
    net.write_text("T = 0.01\n[chip]\nn_cores = 3\n")
    assert main(["run-network", "--network", str(net), "--out", str(tmp_path)]) == EXIT_CODES["config"]
    net.write_text("T = 0.01\n[chip]\nneurons_per_core = 128\n[[cam]]\nneuron = 0\nwords = [600]\n")
    assert main(["run-network", "--network", str(net), "--out", str(tmp_path)]) == EXIT_CODES["network"]
    assert main(["buffer-power", "--rates", "abc", "--out", str(tmp_path)]) == EXIT_CODES["config"]
