import numpy as np
import pytest
from click.testing import CliRunner
from hypothesis import given, settings
from hypothesis import strategies as st

from noisytb import csvio
from noisytb.cli import build_spec, main, parse_config
from noisytb.errors import ConfigurationError
from noisytb.observables import EnsembleSummary


@pytest.fixture
def runner():
    return CliRunner()


def _write_config(path, body):
    path.write_text(body)
    return str(path)


def _synthetic_summary(t, **series):
    t = np.asarray(t, dtype=np.float64)
    z = np.zeros_like(t)
    cols = dict(mean_x2=z, mean_x_sq=z, mean_var=z, mean_pn=z + 1.0)
    cols.update({k: np.asarray(v, dtype=np.float64) for k, v in series.items()})
    return EnsembleSummary(
        grid=t,
        mean_x2=cols["mean_x2"], stderr_mean_x2=z,
        mean_x_sq=cols["mean_x_sq"], stderr_mean_x_sq=z,
        mean_var=cols["mean_var"], stderr_mean_var=z,
        mean_pn=cols["mean_pn"], stderr_mean_pn=z,
        n_trajectories=10,
        meta={"gamma": 1.0, "n_trajectories": 10},
    )


class TestConfigParsing:
    def test_valid_config(self, tmp_path):
        cfg = _write_config(tmp_path / "run.ini", """
[model]
gamma = 5.0
sites = 64
seed = 3

[run]
unravelling = qsd
trajectories = 7
""")
        spec, _ = build_spec(cfg, None)
        assert spec.params.gamma == 5.0
        assert spec.params.n_sites == 64
        assert spec.params.dt == 1e-4  # documented default
        assert spec.params.boundary == "open"  # documented default
        assert spec.grid.kind == "log"  # documented default
        assert spec.unravelling.tag == "qsd"
        assert spec.n_trajectories == 7

    def test_misspelled_key_suggests(self, tmp_path):
        cfg = _write_config(tmp_path / "run.ini", "[model]\ngama = 5\n")
        with pytest.raises(ConfigurationError, match="did you mean 'gamma'"):
            parse_config(cfg)

    def test_unknown_section(self, tmp_path):
        cfg = _write_config(tmp_path / "run.ini", "[modle]\ngamma = 5\n")
        with pytest.raises(ConfigurationError, match="unknown section"):
            parse_config(cfg)

    def test_missing_file(self):
        with pytest.raises(ConfigurationError):
            parse_config("/nonexistent/run.ini")

    def test_cli_flag_overrides_config(self, tmp_path):
        cfg = _write_config(tmp_path / "run.ini", "[model]\ngamma = 5.0\n")
        spec, _ = build_spec(cfg, None, gamma=9.0, trajectories=3)
        assert spec.params.gamma == 9.0
        assert spec.n_trajectories == 3


class TestRunCommand:
    def test_free_particle_variance(self, runner, tmp_path):
        out = tmp_path / "free.csv"
        result = runner.invoke(main, [
            "run", "--gamma", "0", "--sites", "151", "--trajectories", "1",
            "--t-max", "4", "--initial", "delta_site", "--seed", "3",
            "--out", str(out)])
        assert result.exit_code == 0, result.output
        s = csvio.read_summary(out)
        t = s.grid[1:]
        assert np.max(np.abs(s.mean_var[1:] - 2 * t ** 2) / (2 * t ** 2)) < 1e-3

    def test_exit_code_2_on_bad_config(self, runner, tmp_path):
        cfg = _write_config(tmp_path / "bad.ini", "[model]\ngama = 5\n")
        result = runner.invoke(main, ["run", "--config", cfg, "--out",
                                      str(tmp_path / "x.csv")])
        assert result.exit_code == 2
        assert "did you mean" in result.output

    def test_exit_code_3_on_numerical_abort(self, runner, tmp_path):
        result = runner.invoke(main, [
            "run", "--gamma", "3000", "--dt", "1e-2", "--sites", "16",
            "--trajectories", "2", "--t-max", "0.5",
            "--out", str(tmp_path / "x.csv")])
        assert result.exit_code == 3
        assert "trajectory" in result.output

    def test_requires_out_path(self, runner):
        result = runner.invoke(main, ["run", "--gamma", "1", "--trajectories", "1"])
        assert result.exit_code == 2

    def test_records_persisted_on_request(self, runner, tmp_path):
        out = tmp_path / "r.csv"
        rec = tmp_path / "r.npz"
        result = runner.invoke(main, [
            "run", "--gamma", "2", "--sites", "48", "--trajectories", "5",
            "--t-max", "0.05", "--out", str(out), "--records", str(rec)])
        assert result.exit_code == 0, result.output
        data = np.load(rec)
        assert data["var_x"].shape[0] == 5
        assert data["grid"].shape == data["mean_x2"].shape[1:]

    def test_preset_with_overrides(self, runner, tmp_path):
        out = tmp_path / "p.csv"
        result = runner.invoke(main, [
            "run", "--preset", "fig1-gamma10", "--trajectories", "2",
            "--t-max", "0.02", "--out", str(out)])
        assert result.exit_code == 0, result.output
        s = csvio.read_summary(out)
        assert s.meta["gamma"] == 10.0
        assert s.meta["n_sites"] == 1000
        assert s.n_trajectories == 2

    def test_worker_count_bit_identical_csv(self, runner, tmp_path, monkeypatch):
        outputs = []
        for workers, name in ((1, "a.csv"), (3, "b.csv")):
            monkeypatch.setenv("NOISYTB_WORKERS", str(workers))
            out = tmp_path / name
            result = runner.invoke(main, [
                "run", "--gamma", "4", "--sites", "48", "--trajectories", "70",
                "--t-max", "0.05", "--seed", "11", "--out", str(out)])
            assert result.exit_code == 0, result.output
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestCsvRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        t = np.geomspace(0.01, 10, 37)
        rng = np.random.default_rng(0)
        s = _synthetic_summary(t, mean_x2=rng.random(37), mean_var=rng.random(37))
        path = tmp_path / "rt.csv"
        csvio.write_summary(s, path)
        back = csvio.read_summary(path)
        assert np.array_equal(back.grid, s.grid)
        assert np.array_equal(back.mean_x2, s.mean_x2)
        assert np.array_equal(back.mean_var, s.mean_var)
        assert back.meta["gamma"] == 1.0

    @given(st.lists(st.floats(min_value=-1e12, max_value=1e12,
                              allow_nan=False).map(float),
                    min_size=3, max_size=8))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_any_floats(self, values):
        import tempfile
        from pathlib import Path
        t = np.arange(1.0, len(values) + 1.0)
        s = _synthetic_summary(t, mean_x2=np.asarray(values))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "x.csv"
            csvio.write_summary(s, path)
            back = csvio.read_summary(path)
        assert np.array_equal(back.mean_x2, np.asarray(values))

    def test_schema_violation_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,wrong\n0.0,1.0\n")
        with pytest.raises(ConfigurationError, match="columns"):
            csvio.read_summary(path)

    def test_nonnumeric_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        header = ",".join(csvio.COLUMNS)
        path.write_text(f"{header}\n0.0,oops,0,0,0,0,0,0,0\n")
        with pytest.raises(ConfigurationError, match="non-numeric"):
            csvio.read_summary(path)


class TestFitCommand:
    def test_synthetic_slope_exact(self, runner, tmp_path):
        t = np.linspace(0, 100, 300)
        s = _synthetic_summary(t, mean_x2=t.copy())
        path = tmp_path / "lin.csv"
        csvio.write_summary(s, path)
        result = runner.invoke(main, ["fit", str(path), "--kind", "diffusion",
                                      "--window", "10:100", "--no-append"])
        assert result.exit_code == 0, result.output
        assert "slope=1.0 " in result.output or "slope=0.999999" in result.output

    def test_power_fit_and_append(self, runner, tmp_path):
        t = np.geomspace(0.1, 100, 200)
        s = _synthetic_summary(np.concatenate(([0], t)),
                               mean_x_sq=np.concatenate(([0], 2 * t ** 0.5)))
        path = tmp_path / "pw.csv"
        csvio.write_summary(s, path)
        result = runner.invoke(main, ["fit", str(path), "--kind", "power",
                                      "--column", "mean_x_sq"])
        assert result.exit_code == 0, result.output
        assert "exponent=0.5" in result.output
        assert "# FIT" in path.read_text() or "FIT kind=power" in path.read_text()
        # the appended analysis line must not break re-parsing
        csvio.read_summary(path)


class TestCompareCommand:
    def test_pass_and_report(self, runner, tmp_path):
        out = tmp_path / "report.csv"
        result = runner.invoke(main, [
            "compare", "--gamma", "2", "--sites", "7", "--dt", "1e-4",
            "--trajectories", "1500", "--checkpoints", "0.3", "--seed", "2",
            "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output
        assert out.read_text().count("\n") >= 4

    def test_gamma0_control_passes(self, runner):
        result = runner.invoke(main, [
            "compare", "--gamma", "0", "--sites", "7", "--dt", "1e-3",
            "--trajectories", "10", "--checkpoints", "0.3"])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output

    def test_negative_control_exit_4(self, runner):
        result = runner.invoke(main, [
            "compare", "--gamma", "2", "--oracle-gamma", "8", "--sites", "7",
            "--dt", "1e-4", "--trajectories", "300", "--checkpoints", "0.3"])
        assert result.exit_code == 4
        assert "FAIL" in result.output


class TestLindbladCommand:
    def test_writes_diagnostics(self, runner, tmp_path):
        out = tmp_path / "lb.csv"
        result = runner.invoke(main, [
            "lindblad", "--gamma", "4", "--sites", "33", "--t-max", "0.5",
            "--points", "10", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0].startswith("t,mean_x2,")
        assert len(lines) == 12  # header + 11 rows


class TestPresets:
    def test_figure_presets_exist(self, runner):
        result = runner.invoke(main, ["presets"])
        assert result.exit_code == 0
        for name in ("fig1-gamma5", "fig1-gamma10", "fig1-gamma20", "fig2",
                     "fig3-gamma1", "fig3-gamma64", "fig4-gamma8", "fig5"):
            assert name in result.output

    def test_presets_encode_caption_parameters(self):
        from noisytb.presets import PRESETS
        assert PRESETS["fig1-gamma5"].params.gamma == 5
        assert PRESETS["fig1-gamma5"].initial.variance == 4.0
        assert PRESETS["fig1-gamma5"].n_trajectories == 10_000
        assert PRESETS["fig2"].n_trajectories == 4_000
        assert PRESETS["fig3-gamma4"].n_trajectories == 5_000
        assert PRESETS["fig3-gamma8"].n_trajectories == 10_000
        assert PRESETS["fig3-gamma8"].initial.variance == 25.0
        assert PRESETS["fig5"].unravelling.tag == "qsd_wide_open"
        assert PRESETS["fig5"].n_trajectories == 1_000

    def test_unknown_preset_exit_2(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--preset", "fig9",
                                      "--out", str(tmp_path / "x.csv")])
        assert result.exit_code == 2
