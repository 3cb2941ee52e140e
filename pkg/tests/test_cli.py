import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cpo.cli import EXIT_CONFIG, EXIT_FIT, EXIT_NUMERIC, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def cfg(tmp_path):
    return write_json(tmp_path / "c.json", {
        "gamma": 1.0, "epsilon": 0.5, "Gamma": 50.0, "omega0": 0.0, "omega2": 0.0,
        "delta": 2.0, "Omega": 3.0, "n1_eq": 0.8, "n0_eq": 0.2})


@pytest.fixture
def fig4():
    return str(CONFIGS / "fig4_demo.json")


class TestSimulate:
    @pytest.mark.parametrize("tier", ["full", "reduced", "dressed", "harmonic"])
    def test_tiers(self, tmp_path, cfg, tier):
        out = tmp_path / f"{tier}.csv"
        assert main(["simulate", "--config", cfg, "--tier", tier, "--t-end", "3",
                     "--out", str(out)]) == EXIT_OK
        rows = read_rows(out)
        assert len(rows) > 2 and all(np.isfinite(float(v)) for v in rows[1])

    def test_full_header(self, tmp_path, cfg):
        out = tmp_path / "full.csv"
        main(["simulate", "--config", cfg, "--t-end", "1", "--out", str(out)])
        assert read_rows(out)[0] == ["t", "rho11", "rho00", "Re(rho10)", "Im(rho10)", "trace",
                                     "trace_flux"]

    def test_shipped_config(self, tmp_path):
        out = tmp_path / "h.csv"
        assert main(["simulate", "--config", str(CONFIGS / "cross_tier.json"), "--tier",
                     "harmonic", "--out", str(out)]) == EXIT_OK

    def test_degenerate_frame_is_numeric_failure(self, tmp_path):
        c = write_json(tmp_path / "c.json", {"gamma": 1.0, "epsilon": 0.0, "Gamma": 10.0})
        assert main(["simulate", "--config", c, "--tier", "dressed", "--t-end", "1",
                     "--out", str(tmp_path / "o.csv")]) == EXIT_NUMERIC


class TestConfigErrors:
    def test_missing_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_unknown_key(self, tmp_path):
        c = write_json(tmp_path / "c.json", {"gamma": 1, "epsilon": 0, "Gamma": 5, "foo": 1})
        assert main(["scan", "--config", c, "--delta-min", "0.1", "--delta-max", "1",
                     "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_out_of_range(self, tmp_path):
        c = write_json(tmp_path / "c.json", {"gamma": 1, "epsilon": 1.5, "Gamma": 5})
        assert main(["analytic", "--config", c, "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_bad_grid(self, tmp_path, cfg):
        assert main(["scan", "--config", cfg, "--delta-min", "1", "--delta-max", "0.5",
                     "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_bad_thread_count(self, tmp_path, cfg, monkeypatch):
        monkeypatch.setenv("CPO_THREADS", "many")
        assert main(["scan", "--config", cfg, "--delta-min", "0.1", "--delta-max", "1",
                     "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_stiff_configuration(self, tmp_path):
        c = write_json(tmp_path / "c.json", {"gamma": 1, "epsilon": 0, "Gamma": 1e6,
                                             "Omega": 10, "delta": 1})
        assert main(["simulate", "--config", c, "--t-end", "1",
                     "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG

    def test_argparse_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["scan"])
        assert info.value.code == 2


class TestScan:
    def test_analytic_scan(self, tmp_path, fig4):
        out = tmp_path / "s.csv"
        assert main(["scan", "--config", fig4, "--delta-min", "-1", "--delta-max", "1",
                     "--points", "21", "--out", str(out)]) == EXIT_OK
        rows = read_rows(out)
        assert rows[0] == ["delta", "signal"] and len(rows) == 22

    def test_noise_is_reproducible(self, tmp_path, fig4):
        outs = [tmp_path / f"{i}.csv" for i in range(2)]
        for o in outs:
            main(["scan", "--config", fig4, "--delta-min", "-1", "--delta-max", "1",
                  "--noise", "0.01", "--seed", "4", "--out", str(o)])
        assert outs[0].read_text() == outs[1].read_text()


class TestAnalytic:
    def test_table_and_lineshape(self, tmp_path, fig4):
        out, shape = tmp_path / "a.csv", tmp_path / "l.csv"
        assert main(["analytic", "--config", fig4, "--s-min", "0.1", "--s-max", "10",
                     "--points", "5", "--lineshape-out", str(shape), "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["S", "A0", "A1", "w0", "w1"] and len(rows) == 6
        assert float(rows[1][0]) == pytest.approx(0.1)
        assert read_rows(shape)[0] == ["delta", "I"]

    def test_bad_range(self, tmp_path, fig4):
        assert main(["analytic", "--config", fig4, "--s-min", "0", "--out",
                     str(tmp_path / "a.csv")]) == EXIT_CONFIG


class TestFit:
    @pytest.fixture
    def spectrum(self, tmp_path, fig4):
        # the fixed-drive lineshape is exactly two Lorentzians on a flat background
        path = tmp_path / "s.csv"
        main(["analytic", "--config", fig4, "--lineshape-out", str(path), "--delta-points",
              "401", "--out", str(tmp_path / "a.csv")])
        return path

    def test_converges(self, tmp_path, spectrum):
        out = tmp_path / "f.json"
        assert main(["fit", "--data", str(spectrum), "--components", "2", "--background",
                     "flat", "--fixed-center", "--out", str(out)]) == EXIT_OK
        fit = json.loads(out.read_text())
        assert fit["converged"]
        assert sorted(fit["widths"]) == pytest.approx([0.067624, 0.319428], rel=1e-4)

    def test_guess_file(self, tmp_path, spectrum):
        guess = write_json(tmp_path / "g.json", {"amplitudes": [0.04, 0.04],
                                                 "widths": [0.05, 0.4], "offset": 0.12,
                                                 "background": "flat"})
        out = tmp_path / "f.json"
        assert main(["fit", "--data", str(spectrum), "--guess", guess, "--components", "2",
                     "--background", "flat", "--out", str(out)]) == EXIT_OK

    def test_bad_guess_file(self, tmp_path, spectrum):
        bad = tmp_path / "g.json"
        bad.write_text("{not json")
        assert main(["fit", "--data", str(spectrum), "--guess", str(bad),
                     "--out", str(tmp_path / "f.json")]) == EXIT_CONFIG

    def test_iteration_cap_is_fit_failure(self, tmp_path, spectrum):
        out = tmp_path / "f.json"
        assert main(["fit", "--data", str(spectrum), "--max-iter", "2",
                     "--out", str(out)]) == EXIT_FIT
        assert json.loads(out.read_text())["converged"] is False

    def test_featureless_data_is_fit_failure(self, tmp_path):
        flat = tmp_path / "flat.csv"
        flat.write_text("delta,signal\n" + "".join(f"{d},1.0\n" for d in range(-20, 21)))
        assert main(["fit", "--data", str(flat), "--out", str(tmp_path / "f.json")]) == EXIT_FIT

    def test_missing_data(self, tmp_path):
        assert main(["fit", "--data", str(tmp_path / "x.csv"),
                     "--out", str(tmp_path / "f.json")]) == EXIT_CONFIG


class TestSweep:
    def test_closed(self, tmp_path, fig4):
        out = tmp_path / "w.csv"
        assert main(["sweep", "--config", fig4, "--s-values", "0.5, 1, 5",
                     "--out", str(out)]) == EXIT_OK
        rows = read_rows(out)
        assert rows[0] == ["S", "A0", "A1", "w0", "w1", "ok"]
        assert [r[-1] for r in rows[1:]] == ["1", "1", "1"]

    def test_failures_keep_going(self, tmp_path):
        c = write_json(tmp_path / "c.json", {"gamma": 1.0, "epsilon": 0.0, "Gamma": 10.0})
        out = tmp_path / "w.csv"
        assert main(["sweep", "--config", c, "--method", "fit", "--s-values", "1 2",
                     "--out", str(out)]) == EXIT_OK
        assert [r[-1] for r in read_rows(out)[1:]] == ["0", "0"]

    def test_bad_list(self, tmp_path, fig4):
        assert main(["sweep", "--config", fig4, "--s-values", "1, two",
                     "--out", str(tmp_path / "w.csv")]) == EXIT_CONFIG


def test_plot_script(tmp_path, fig4):
    table = tmp_path / "a.csv"
    main(["analytic", "--config", fig4, "--points", "4", "--out", str(table)])
    script = tmp_path / "plot.py"
    assert main(["plot", "--in", str(table), "--emit", str(script)]) == EXIT_OK
    text = script.read_text()
    compile(text, str(script), "exec")
    assert "set_xscale('log')" in text


def test_console_entry_point(tmp_path, fig4):
    out = tmp_path / "a.csv"
    ok = subprocess.run([sys.executable, "-m", "cpo.cli", "analytic", "--config", fig4,
                         "--points", "3", "--out", str(out)], capture_output=True)
    assert ok.returncode == 0 and out.exists()
    bad = subprocess.run([sys.executable, "-m", "cpo.cli", "analytic", "--config",
                          str(tmp_path / "missing.json"), "--out", str(out)],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and "configuration error" in bad.stderr
