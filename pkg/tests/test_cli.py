import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from spikesoc.cli import main
from spikesoc.configdoc import nominal_document, parse, serialize
from spikesoc.params import bias_for_current


@pytest.fixture
def runner():
    return CliRunner()


def write_dc_config(path: Path) -> None:
    doc = nominal_document()
    core = doc.chips[0].cores[0]
    core.biases["SOIF_DC"] = bias_for_current(1e-9)
    core.biases["SOIF_LEAK"] = bias_for_current(100e-12)
    core.biases["SOIF_SPKTHR"] = bias_for_current(40e-12)
    core.neuron(7).latches["SO_DC"] = True
    from spikesoc.configdoc import VmemTapDoc

    doc.monitors.vmem.append(VmemTapDoc(neuron=7, interval_us=100_000))
    path.write_text(serialize(doc))


NETWORK_SPEC = {
    "populations": [
        {"name": "pre", "size": 4},
        {"name": "post", "size": 4, "first_neuron": 16},
    ],
    "projections": [{"pre": "pre", "post": "post", "rule": "all_to_all", "r": 2}],
}


class TestRun:
    def test_run_writes_deterministic_report(self, runner, tmp_path):
        cfg = tmp_path / "c.cfg"
        write_dc_config(cfg)
        for out in ("r1", "r2"):
            result = runner.invoke(
                main,
                ["run", "--config", str(cfg), "--until", "3s", "--out", str(tmp_path / out)],
            )
            assert result.exit_code == 0, result.output
        h1 = (tmp_path / "r1" / "report_hash.txt").read_text()
        h2 = (tmp_path / "r2" / "report_hash.txt").read_text()
        assert h1 == h2
        spikes = (tmp_path / "r1" / "spikes.txt").read_text().splitlines()
        assert len(spikes) == 2  # 3 s at ~1.58 s refractory

    def test_run_with_event_file(self, runner, tmp_path):
        cfg = tmp_path / "c.cfg"
        spec = tmp_path / "net.json"
        spec.write_text(json.dumps(NETWORK_SPEC))
        assert runner.invoke(main, ["compile", str(spec), "--out", str(cfg)]).exit_code == 0
        events = tmp_path / "in.evt"
        events.write_text("1000.000 000001\n")  # tag 0, cores 0b0001
        result = runner.invoke(
            main,
            [
                "run", "--config", str(cfg), "--events", str(events),
                "--until", "100ms", "--out", str(tmp_path / "rep"),
            ],
        )
        assert result.exit_code == 0, result.output
        counters = (tmp_path / "rep" / "counters.txt").read_text()
        assert "cam_matches 8" in counters

    def test_missing_config_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(
            main, ["run", "--config", str(tmp_path / "nope.cfg"), "--until", "1s", "--out", str(tmp_path / "r")]
        )
        assert result.exit_code != 0
        assert not (tmp_path / "r").exists()


class TestValidateCompile:
    def test_compile_then_validate_clean(self, runner, tmp_path):
        spec = tmp_path / "net.json"
        spec.write_text(json.dumps(NETWORK_SPEC))
        cfg = tmp_path / "net.cfg"
        assert runner.invoke(main, ["compile", str(spec), "--out", str(cfg)]).exit_code == 0
        result = runner.invoke(main, ["validate", str(cfg)])
        assert result.exit_code == 0, result.output
        assert "ok" in result.output

    def test_validate_bad_config_exits_nonzero(self, runner, tmp_path):
        cfg = tmp_path / "bad.cfg"
        doc = nominal_document()
        text = serialize(doc).replace('"SOIF_DC":[0,0]', '"SOIF_DC":[9,0]')
        cfg.write_text(text)
        result = runner.invoke(main, ["validate", str(cfg)])
        assert result.exit_code == 1

    def test_compile_resource_error(self, runner, tmp_path):
        spec = tmp_path / "net.json"
        bad = dict(NETWORK_SPEC)
        bad["projections"] = [{"pre": "pre", "post": "post", "rule": "all_to_all", "r": 65}]
        spec.write_text(json.dumps(bad))
        result = runner.invoke(main, ["compile", str(spec), "--out", str(tmp_path / "x.cfg")])
        assert result.exit_code != 0


class TestTrace:
    def test_trace_extraction(self, runner, tmp_path):
        cfg = tmp_path / "c.cfg"
        write_dc_config(cfg)
        out = tmp_path / "rep"
        assert (
            runner.invoke(
                main, ["run", "--config", str(cfg), "--until", "1s", "--out", str(out)]
            ).exit_code
            == 0
        )
        result = runner.invoke(main, ["trace", "--report", str(out)])
        assert "vmem_0_0_c0_n7" in result.output
        result = runner.invoke(
            main, ["trace", "--report", str(out), "--channel", "vmem_0_0_c0_n7"]
        )
        assert result.exit_code == 0
        assert len(result.output.splitlines()) > 5


class TestDemo:
    def test_stp_demo_produces_report(self, runner, tmp_path):
        out = tmp_path / "demo"
        result = runner.invoke(main, ["demo", "stp", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "traces" / "sadc_00.txt").exists()

    def test_order_demo_forward_and_reversed(self, runner, tmp_path):
        fwd = runner.invoke(main, ["demo", "order-nmda", "--out", str(tmp_path / "f")])
        rev = runner.invoke(main, ["demo", "order-nmda", "--out", str(tmp_path / "r"), "--reversed"])
        assert fwd.exit_code == 0 and rev.exit_code == 0
        assert "1 spikes" in fwd.output
        assert "0 spikes" in rev.output


class TestInitConfig:
    def test_init_writes_parseable_config(self, runner, tmp_path):
        cfg = tmp_path / "n.cfg"
        assert runner.invoke(main, ["init-config", "--out", str(cfg)]).exit_code == 0
        doc = parse(cfg.read_text())
        assert doc.chips[0].cores[0].bias("SOIF_LEAK").fine > 0
