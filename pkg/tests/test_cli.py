import csv
import io
import json
import math

import numpy as np
import pytest

from srdp import __version__, cli
from srdp.info import binary_entropy


def call(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def table(text):
    header = [ln[2:] for ln in text.splitlines() if ln.startswith("#")]
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))
    return header, list(csv.DictReader(io.StringIO(body)))


class TestBinarySurface:
    def test_grid(self, tmp_path):
        code, text = call(tmp_path, "binary-surface")
        assert code == 0
        header, rows = table(text)
        assert len(rows) == 2500
        assert f"srdp {__version__}" in header and "d_steps: 50" in header
        row = next(r for r in rows if float(r["R0"]) == 1.0 and float(r["D"]) == 0.0)
        assert float(row["R_min"]) == pytest.approx(1.0, abs=1e-12)
        assert any(r["R_min"] == "inf" for r in rows)

    def test_tradeoff_band(self, tmp_path):
        code, text = call(tmp_path, "binary-surface", "--tradeoff", "true")
        _, rows = table(text)
        saving = [float(r["R_saving_fraction"]) for r in rows if float(r["D"]) == 0.1]
        assert max(saving) >= 0.45 and min(saving) <= 0.52

    def test_invalid_grid(self, tmp_path, capsys):
        code, _ = call(tmp_path, "binary-surface", "--d-min", "0.4", "--d-max", "0.1")
        assert code == 2
        assert "range is empty" in capsys.readouterr().err


class TestGaussian:
    def test_canonical_row(self, tmp_path):
        code, text = call(tmp_path, "gaussian-family", "--nu", "0.5")
        _, rows = table(text)
        assert code == 0
        assert [float(rows[0][k]) for k in ("R_G1", "R_G2", "R_G3")] == pytest.approx([0.5] * 3, abs=1e-12)

    def test_threshold_header(self, tmp_path):
        _, text = call(tmp_path, "gaussian-family", "--eta", "0.5", "--delta", "0.6")
        header, rows = table(text)
        assert "zero_rate_threshold: 1" in header
        assert len(rows) == 20

    def test_divergent_flag(self, tmp_path):
        _, text = call(tmp_path, "gaussian-family", "--nu", "0.25,0.2500000000001")
        _, rows = table(text)
        assert all(r["R_G3"] == "inf" and "R_G3 divergent" in r["flag"] for r in rows)

    def test_domain_violation(self, tmp_path, capsys):
        code, _ = call(tmp_path, "gaussian-family", "--eta", "0.5", "--delta", "1.2")
        assert code == 2
        assert "2 - 2|eta|" in capsys.readouterr().err


class TestRegionSearch:
    def test_verdicts(self, tmp_path):
        code, text = call(tmp_path, "region-search", "--targets", "1,1,0;0.1,0.1,0.05", "--starts", "4")
        _, rows = table(text)
        assert code == 0
        assert [r["status"] for r in rows] == ["certified", "not_found"]
        w = json.loads(rows[0]["witness"])
        assert set(w) == {"u_channel", "y_channel"}

    def test_si_constant_z_matches(self, tmp_path):
        targets = "1,1,0;0.1,0.1,0.05;0.6,0.6,0.3"
        _, a = call(tmp_path, "region-search", "--targets", targets, "--starts", "4", name="a.csv")
        _, b = call(tmp_path, "region-search", "--targets", targets, "--starts", "4",
                    "--mode", "dec", "--side-info", "0.5;0.5", name="b.csv")
        assert [r["status"] for r in table(a)[1]] == [r["status"] for r in table(b)[1]]

    def test_malformed(self, tmp_path):
        assert call(tmp_path, "region-search", "--targets", "1,1")[0] == 2
        assert call(tmp_path, "region-search", "--targets", "1,1,0", "--source", "0.5,0.6")[0] == 2


class TestBcTools:
    def values(self, text):
        return {r["quantity"]: r["value"] for r in table(text)[1]}

    def test_capacity_and_degraded(self, tmp_path):
        code, text = call(tmp_path, "bc-tools", "--y-bsc", "0.11", "--z-bsc", "0.2")
        v = self.values(text)
        assert code == 0
        assert float(v["C_unsecure"]) == pytest.approx(1 - binary_entropy(0.11), abs=1e-6)
        assert float(v["C_unsecure"]) == pytest.approx(0.50014, abs=1e-4)
        assert v["more_capable_status"] == "certified_degraded"

    def test_boundary_feasible(self, tmp_path):
        c = 1 - binary_entropy(0.11)
        _, text = call(tmp_path, "bc-tools", "--y-bsc", "0.11", "--z-bsc", "0.2",
                       "--kappa", "1", "--rate", repr(c - 1e-10))
        assert self.values(text)["separation_feasible"] == "true"

    def test_witness_point(self, tmp_path):
        _, text = call(tmp_path, "bc-tools", "--y-bsc", "0.1", "--z-bsc", "0.2", "--source", "0.5,0.5",
                       "--u-channel", "0.8,0.2;0.2,0.8", "--recon-channel", "0.8,0.2;0.2,0.8")
        v = self.values(text)
        assert float(v["D"]) == pytest.approx(0.32)
        assert float(v["R_hi"]) == pytest.approx(1 - binary_entropy(0.1), abs=1e-6)

    def test_violated_refuses_point(self, tmp_path):
        _, text = call(tmp_path, "bc-tools", "--y-bsc", "0.3", "--z-bsc", "0.1", "--source", "0.5,0.5",
                       "--u-channel", "1,0;0,1", "--recon-channel", "1,0;0,1")
        v = self.values(text)
        assert v["more_capable_status"] == "violated"
        assert v["region_point"].startswith("refused")
        assert sum(json.loads(v["violating_input"])) == pytest.approx(1.0)

    def test_malformed_channel(self, tmp_path):
        assert call(tmp_path, "bc-tools", "--y-channel", "0.5,0.6;0.5,0.5", "--z-bsc", "0.1")[0] == 2


class TestOsrb:
    def test_rows_and_determinism(self, tmp_path):
        code, a = call(tmp_path, "osrb", name="a.csv")
        _, b = call(tmp_path, "osrb", name="b.csv")
        assert code == 0
        assert a == b
        assert len(table(a)[1]) == 80

    def test_no_message_rate(self, tmp_path):
        _, text = call(tmp_path, "osrb", "--rate", "0", "--seeds", "3")
        assert all(float(r["leakage_bits"]) == 0.0 for r in table(text)[1])

    def test_median_leakage_nonincreasing(self, tmp_path):
        _, text = call(tmp_path, "osrb")
        rows = table(text)[1]
        med = [np.median([float(r["leakage_bits"]) for r in rows if r["n"] == str(n)]) for n in (2, 4, 6, 8)]
        assert all(b <= a + 1e-12 for a, b in zip(med, med[1:])), med

    def test_cap_exit(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("SRDP_ENUM_CAP", "100")
        code, _ = call(tmp_path, "osrb", "--n-list", "8", "--seeds", "1")
        assert code == 3
        assert "MiB" in capsys.readouterr().err

    def test_json(self, tmp_path):
        code, text = call(tmp_path, "osrb", "--n-list", "2", "--seeds", "2", "--format", "json", name="o.json")
        doc = json.loads(text)
        assert code == 0 and doc["version"] == __version__
        assert doc["columns"][0] == "n" and len(doc["rows"]) == 2


class TestConfig:
    def test_config_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("command = osrb\nn_list = 2,4\nseeds = 3\n")
        _, text = call(tmp_path, "osrb", "--config", str(cfg), "--seeds", "2")
        header, rows = table(text)
        assert len(rows) == 4 and "seeds: 2" in header

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_lsit = 2,4\n")
        assert call(tmp_path, "osrb", "--config", str(cfg))[0] == 2
        assert "n_lsit" in capsys.readouterr().err

    def test_wrong_command_and_sections(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("command = bc-tools\n")
        assert call(tmp_path, "osrb", "--config", str(cfg))[0] == 2
        cfg.write_text("[extra]\nseeds = 2\n")
        assert call(tmp_path, "osrb", "--config", str(cfg))[0] == 2

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["osrb", "--bogus", "1"])
        assert e.value.code == 2

    def test_number_format(self):
        assert cli._num(1 / 3) == "0.333333333333"
        assert cli._num(math.inf) == "inf"
