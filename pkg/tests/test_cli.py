import json
import subprocess
import sys

import numpy as np
import pytest

from wienerbla import bla, experiments as ex, ingest, sequences as sq
from wienerbla.cli import main
from wienerbla.sequences import SignalClass
from wienerbla.wiener import G3, WienerModel, simulate


class TestGenerate:
    def test_rcs(self, tmp_path):
        out = tmp_path / "rcs.csv"
        assert main(["generate", "--class", "rcs", "--n", "762", "--seed", "1", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 763
        meta = json.loads(out.with_suffix(".json").read_text())
        assert meta["seed"] == 1 and meta["class"] == "rcs"
        np.testing.assert_array_equal(sq.read_signal_csv(out), sq.rcs(762, 1).samples)

    def test_mlbs(self, tmp_path):
        out = tmp_path / "m.csv"
        assert main(["generate", "--class", "mlbs", "--order", "9", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 512

    @pytest.mark.parametrize("args", [["--class", "rcs", "--n", "100"], ["--class", "mlbs"],
                                      ["--class", "irmlbs", "--n", "511"], ["--class", "mlbs", "--order", "4",
                                                                             "--taps", "4,2"]])
    def test_validation_exit_2(self, tmp_path, args, capsys):
        out = tmp_path / "bad.csv"
        assert main(["generate", *args, "--out", str(out)]) == 2
        assert not out.exists()
        assert "error" in capsys.readouterr().err

    @pytest.mark.parametrize("kind,flag,value,rows", [("ds", "--n", "762", 762), ("irmlbs", "--order", "8", 510),
                                                      ("wgn", "--n", "100", 100)])
    def test_other_classes(self, tmp_path, kind, flag, value, rows):
        out = tmp_path / "s.csv"
        assert main(["generate", "--class", kind, flag, value, "--out", str(out)]) == 0
        assert sq.read_signal_csv(out).size == rows

    def test_rms_option(self, tmp_path):
        out = tmp_path / "s.csv"
        main(["generate", "--class", "rcs", "--n", "60", "--rms", "1", "--out", str(out)])
        assert np.sqrt(np.mean(sq.read_signal_csv(out) ** 2)) == pytest.approx(1.0)


class TestReproduce:
    def test_unknown_figure(self, tmp_path):
        assert main(["reproduce", "fig9", "--out-dir", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()

    def test_fig4(self, tmp_path):
        assert main(["reproduce", "fig4", "--seed", "7", "--out-dir", str(tmp_path)]) == 0
        lines = (tmp_path / "fig4.csv").read_text().splitlines()
        assert lines[0] == "lag,closed_form_eq3,closed_form_eq4,monte_carlo"
        lag0 = [float(v) for v in lines[1].split(",")]
        assert lag0[1] == lag0[2] == pytest.approx(1.44, abs=1e-12)
        assert abs(lag0[3] - 1.44) < 0.01

    def test_fig2_bundle(self, tmp_path):
        assert main(["reproduce", "fig2", "--seed", "7", "--out-dir", str(tmp_path)]) == 0
        files = sorted(p.name for p in tmp_path.glob("fig2_system*_*.csv"))
        assert len(files) == 20
        summary = (tmp_path / "fig2_summary.csv").read_text().splitlines()
        ds = [r for r in summary if ",ds," in r]
        assert all(r.split(",")[2:4] == ["16", "4"] for r in ds)
        header = (tmp_path / "fig2_system1_rcs.csv").read_text().splitlines()[0]
        assert header == ",".join(bla.CSV_COLUMNS)

    def test_fig5_two_levels(self, tmp_path, monkeypatch):
        small = dict(ex.CLIPPER_COUNTS)
        small[SignalClass.RCS] = small[SignalClass.WGN] = 8
        monkeypatch.setattr(ex, "CLIPPER_COUNTS", small)
        assert main(["reproduce", "fig5", "--seed", "1", "--rms", "1.0", "--rms", "2.0",
                     "--out-dir", str(tmp_path)]) == 0
        assert len(list(tmp_path.glob("fig5_rms1_*.csv"))) == 5
        assert len(list(tmp_path.glob("fig5_rms2_*.csv"))) == 5

    def test_table2(self, tmp_path):
        assert main(["reproduce", "table2", "--seed", "7", "--out-dir", str(tmp_path)]) == 0
        rows = dict(r.split(",") for r in (tmp_path / "table2.csv").read_text().splitlines()[1:])
        assert set(rows) == {c.value for c in SignalClass}

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 7, "instances": 50}))
        assert main(["reproduce", "fig4", "--config", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
        assert main(["reproduce", "fig4", "--seed", "7", "--instances", "50", "--out-dir", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "fig4.csv").read_bytes() == (tmp_path / "b" / "fig4.csv").read_bytes()

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sede": 7}))
        assert main(["reproduce", "fig4", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


class TestEstimate:
    def _records(self, tmp_path, model, n_rec=8, n=60):
        paths = []
        for i, s in enumerate(sq.realizations("rcs", n_rec, n=n, rng=3)):
            paths.append(str(ingest.write_record(simulate(model, s), tmp_path / f"r{i}.csv")))
        return paths

    def test_identity_ratio_zero(self, tmp_path):
        paths = self._records(tmp_path, WienerModel(fir=G3))
        f = np.linspace(0, 0.5, 301)
        h = np.polyval(np.array(G3)[::-1], np.exp(-2j * np.pi * f))
        ingest.write_stepped_sine(tmp_path / "ref.csv", f, h)
        out = tmp_path / "bla.csv"
        assert main(["estimate", *paths, "--class", "rcs", "--reference", str(tmp_path / "ref.csv"),
                     "--out", str(out)]) == 0
        ratio = np.array([float(r.split(",")[4]) for r in out.read_text().splitlines()[1:]])
        assert ratio.size == 10
        assert np.max(np.abs(ratio)) < 1e-3

    def test_without_reference(self, tmp_path):
        paths = self._records(tmp_path, WienerModel(fir=G3))
        out = tmp_path / "bla.csv"
        assert main(["estimate", *paths, "--class", "rcs", "--out", str(out)]) == 0
        assert out.read_text().splitlines()[1].endswith("nan,nan,nan")

    def test_too_few_records(self, tmp_path):
        paths = self._records(tmp_path, WienerModel(fir=G3), n_rec=3)
        assert main(["estimate", *paths, "--class", "rcs", "--out", str(tmp_path / "o.csv")]) == 2
        assert not (tmp_path / "o.csv").exists()

    def test_mismatched_periods(self, tmp_path):
        a = self._records(tmp_path / "", WienerModel(fir=G3), n_rec=2, n=60)
        d = tmp_path / "b"
        d.mkdir()
        b = self._records(d, WienerModel(fir=G3), n_rec=2, n=66)
        assert main(["estimate", *a, *b, "--class", "rcs", "--out", str(tmp_path / "o.csv")]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["estimate", str(tmp_path / "nope.csv"), "--group-size", "1"]) == 2

    def test_roundtrip_matches_reproduce(self, tmp_path):
        args = ["reproduce", "fig6-sim", "--seed", "3", "--rms", "2.0", "--classes", "rcs", "irmlbs",
                "--random-count", "8", "--out-dir", str(tmp_path)]
        assert main(args) == 0
        for kind in ("rcs", "irmlbs"):
            recs = sorted(str(p) for p in (tmp_path / "records_rms2" / kind).glob("*.csv"))
            out = tmp_path / f"est_{kind}.csv"
            assert main(["estimate", *recs, "--reference", str(tmp_path / "reference_frf.csv"),
                         "--out", str(out)]) == 0
            assert out.read_bytes() == (tmp_path / f"fig6sim_rms2_{kind}.csv").read_bytes()
        first = (tmp_path / "records_rms2" / "rcs" / "rec_0000.csv").read_text().splitlines()
        assert first[0] == "# fs=200000.0"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wienerbla", "generate", "--class", "rcs", "--n", "100",
                           "--out", str(tmp_path / "x.csv")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "multiple of 6" in proc.stderr


class TestExperimentConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = ex.ExperimentConfig(system=2, excitation="ds", count=16, seed=4)
        p = tmp_path / "c.json"
        p.write_text(cfg.to_json())
        assert ex.ExperimentConfig.from_json(p) == cfg
        assert cfg.model.fir == (1.0, 0.7, 0.3, 0.2, 0.1, 0.05)

    @pytest.mark.parametrize("kw", [{"count": 3}, {"system": 9}, {"excitation": "rcs", "n": 100},
                                    {"system": None}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ex.ExperimentConfig(**kw)

    def test_custom_fir(self):
        cfg = ex.ExperimentConfig(system=None, fir=(1.0, 0.5), nonlinearity="square")
        assert cfg.model.g.tolist() == [1.0, 0.5]
