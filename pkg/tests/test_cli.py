import json

import numpy as np
import pytest

from sshlab.cli import (
    RunConfig,
    default_config,
    load_config_file,
    main,
    read_embedded_config,
    run_experiment,
)


def data_section(path):
    """Everything after the # header lines."""
    lines = path.read_text().splitlines()
    return "\n".join(l for l in lines if not l.startswith("#"))


def tiny(experiment, tmp_path, **overrides):
    from dataclasses import replace

    base = dict(
        n=8,
        realizations=12,
        master_seed=3,
        gamma_grid=(0.1, 0.4),
        out=str(tmp_path / f"{experiment}.csv"),
    )
    base.update(overrides)
    return replace(default_config(experiment), **base)


class TestConfigParsing:
    def test_flat_file_roundtrip(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            "# comment line\n"
            "experiment = gap-scan\n"
            "n = 20\n"
            "u = 1.0\n"
            "w = 0.8\n"
            "bc = periodic\n"
            "gamma_grid = 0:0.6:4\n"
            "realizations = 5\n"
            "master_seed = 17\n"
        )
        entries = load_config_file(cfg_file)
        assert entries["n"] == 20
        assert entries["bc"] == "periodic"
        assert entries["gamma_grid"] == tuple(np.linspace(0.0, 0.6, 4))

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("tempo = 7\n")
        with pytest.raises(ValueError, match="unknown config key"):
            load_config_file(cfg_file)

    def test_grid_must_increase(self):
        cfg = RunConfig(experiment="mean-nu", gamma_grid=(0.5, 0.2))
        with pytest.raises(ValueError, match="strictly increasing"):
            cfg.validate()

    def test_comma_grid(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("gamma_grid = 0.1, 0.2, 0.35\n")
        assert load_config_file(cfg_file)["gamma_grid"] == (0.1, 0.2, 0.35)


class TestRunners:
    def test_mean_nu_file_layout(self, tmp_path):
        cfg = tiny("mean-nu", tmp_path)
        path = run_experiment(cfg)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# config: ")
        assert lines[1].startswith("# version: sshlab")
        assert lines[2] == "# columns: gamma,mc_mean_nu,mc_stderr,analytic_mean_nu,n_excluded"
        assert len(lines) == 3 + 2  # one row per gamma point
        assert path.with_suffix(".csv.meta.json").exists()

    def test_single_point_grid(self, tmp_path):
        cfg = tiny("mean-nu", tmp_path, gamma_grid=(0.3,))
        path = run_experiment(cfg)
        rows = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert len(rows) == 1

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = tiny("mean-nu", tmp_path)
        first = run_experiment(cfg).read_bytes()
        second = run_experiment(cfg).read_bytes()
        assert first == second

    def test_threads_do_not_change_data(self, tmp_path):
        from dataclasses import replace

        cfg = tiny("gap-scan", tmp_path, n=10, realizations=6)
        one = data_section(run_experiment(replace(cfg, threads=1)))
        two = data_section(run_experiment(replace(cfg, threads=2)))
        assert one == two

    def test_embedded_config_reproduces_data(self, tmp_path):
        from dataclasses import replace

        cfg = tiny("gap-scan", tmp_path, n=10, realizations=6)
        path = run_experiment(cfg)
        recovered = read_embedded_config(path)
        rerun = run_experiment(
            replace(recovered, out=str(tmp_path / "rerun.csv"), threads=2)
        )
        assert data_section(path) == data_section(rerun)

    def test_seventeen_digit_serialization(self, tmp_path):
        cfg = tiny("mean-nu", tmp_path, gamma_grid=(0.1,))
        path = run_experiment(cfg)
        row = data_section(path).splitlines()[0]
        first = row.split(",")[0]
        assert first == "%.17g" % 0.1
        assert float(first) == 0.1

    def test_json_format(self, tmp_path):
        cfg = tiny("mean-nu", tmp_path, format="json", out=str(tmp_path / "mn.json"))
        path = run_experiment(cfg)
        doc = json.loads(path.read_text())
        assert doc["columns"][0] == "gamma"
        assert len(doc["data"]) == 2
        assert read_embedded_config(path).gamma_grid == cfg.gamma_grid

    def test_edge_modes_columns(self, tmp_path):
        cfg = tiny("edge-modes", tmp_path, n=10, realizations=4, gamma_grid=(0.0, 0.4))
        path = run_experiment(cfg)
        header = [l for l in path.read_text().splitlines() if l.startswith("# columns")][0]
        cols = header.split(": ")[1].split(",")
        assert cols[:3] == ["gamma", "mean_nu", "nu_stderr"]
        assert len(cols) == 3 + 10

    def test_phase_diagram_runs(self, tmp_path):
        cfg = tiny(
            "phase-diagram",
            tmp_path,
            n=8,
            gamma_grid=(0.0, 0.3),
            w_grid=(0.8, 1.0, 1.2),
        )
        path = run_experiment(cfg)
        rows = data_section(path).splitlines()
        assert len(rows) == 6
        # gamma = 0 rows: boundary column sits exactly at w = u
        first = rows[0].split(",")
        assert float(first[4]) == 1.0

    def test_phase_diagram_flips_track_boundary(self, tmp_path):
        # single-realization index flips along gamma stay within the
        # finite-size fluctuation width of the analytic boundary
        from sshlab.analytic import critical_gamma, fluctuation_width

        n, w = 300, 0.9
        cfg = tiny(
            "phase-diagram",
            tmp_path,
            n=n,
            master_seed=12,
            gamma_grid=tuple(np.linspace(0.3, 0.75, 19)),
            w_grid=(w,),
        )
        path = run_experiment(cfg)
        rows = [r.split(",") for r in data_section(path).splitlines()]
        gammas = np.array([float(r[0]) for r in rows])
        nus = np.array([float(r[3]) for r in rows])
        flips = [
            0.5 * (gammas[i] + gammas[i + 1])
            for i in range(len(nus) - 1)
            if nus[i] != nus[i + 1]
        ]
        boundary = critical_gamma(1.0, w)
        width = fluctuation_width(1.0, n)
        assert flips, "no topological transition found along the gamma column"
        assert all(abs(f - boundary) <= 2.0 * width for f in flips)

    def test_born_runs(self, tmp_path):
        cfg = tiny(
            "born",
            tmp_path,
            gamma_grid=(0.1, 0.2),
            w_grid=(0.99,),
        )
        path = run_experiment(cfg)
        rows = data_section(path).splitlines()
        assert len(rows) == 2
        cols = rows[0].split(",")
        assert len(cols) == 12

    def test_invariant_runs(self, tmp_path):
        cfg = tiny("invariant", tmp_path, gamma_grid=(0.0, 0.5))
        path = run_experiment(cfg)
        rows = data_section(path).splitlines()
        assert len(rows) == 2


class TestMainEntry:
    def test_selftest_exit_code(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "ok" in out and "FAIL" not in out

    def test_cli_overrides_config_file(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            "n = 8\nrealizations = 10\ngamma_grid = 0.1,0.3\nmaster_seed = 1\n"
        )
        out = tmp_path / "a.csv"
        code = main(
            [
                "mean-nu",
                "--config",
                str(cfg_file),
                "--seed",
                "99",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert read_embedded_config(out).master_seed == 99

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        code = main(
            ["mean-nu", "--gamma-grid", "0.5,0.1", "--out", str(tmp_path / "x.csv")]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_reports_output_path(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        code = main(
            [
                "mean-nu",
                "--n",
                "8",
                "--realizations",
                "8",
                "--gamma-grid",
                "0.2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert str(out) in capsys.readouterr().out
