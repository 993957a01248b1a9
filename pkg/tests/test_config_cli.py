import json

import pytest

from qndsim.cli import build_figure, compare, main, run
from qndsim.config import (
    default_config,
    parse_config,
    parse_config_text,
    serialize_config,
)
from qndsim.errors import ConfigError


class TestParseConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        config = parse_config(str(path))
        assert config == default_config()
        assert config.node1.cqed.g == 7.6
        assert config.node2.cqed.kappa == 2.8
        assert config.channel.transmission == 0.53
        assert config.detection_efficiency == 0.5
        assert config.detector_a.efficiency == 0.9
        assert config.detector_a.dark_rate == 40.0
        assert config.node1.imperfections.dark_count == 0.014
        assert config.node2.imperfections.dark_count == 0.004
        assert config.node1.imperfections.t_coherence == 420.0
        assert config.node2.imperfections.t_coherence == 470.0

    def test_out_of_range_value_names_key(self):
        with pytest.raises(ConfigError, match="channel.transmission"):
            parse_config_text("channel.transmission = 1.2\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("channel.bogus = 1\n")

    def test_parse_error_reports_line_number(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("# comment\nchannel.transmission == 0.5\n")

    def test_sweep_list(self):
        config = parse_config_text("sweep.mu = 0.04, 0.084, 0.45, 3.11\n")
        assert config.mean_photon_sweep == (0.04, 0.084, 0.45, 3.11)

    def test_truncation_infeasible_sweep_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("sweep.mu = 80.0\n")

    def test_round_trip(self):
        config = parse_config_text("node1.g = 8.0\nrun.mode = monte_carlo\nrun.trials = 777\n")
        assert parse_config_text(serialize_config(config)) == config

    def test_round_trip_defaults(self):
        config = default_config()
        assert parse_config_text(serialize_config(config)) == config


class TestFigureBuilders:
    def test_fig2_columns_and_anchor(self, base_config):
        header, rows = build_figure("fig2", base_config)
        assert header[:5] == ["mu", "p_up1", "p_up1_stderr", "p_up2", "p_up2_stderr"]
        assert "p_up1_given_up2" in header
        col = header.index("p_up1_given_up2")
        values = [float(r[col]) for r in rows if r[col]]
        assert max(values) == pytest.approx(0.684, abs=0.05)

    def test_table1_rows(self, base_config):
        header, rows = build_figure("table1", base_config)
        assert [r[0] for r in rows] == ["none", "up1", "up2", "up1_and_up2"]

    def test_sorter_rows(self, base_config):
        header, rows = build_figure("sorter", base_config)
        assert [r[0] for r in rows] == ["0", "1", "2", "3"]
        probs = [float(r[1]) for r in rows]
        assert sum(probs) == pytest.approx(1.0, abs=1e-10)


class TestRunAndCompare:
    def test_run_writes_csv_and_manifest(self, tmp_path, base_config):
        manifest = run("fig4", base_config, str(tmp_path))
        assert (tmp_path / "fig4.csv").exists()
        assert (tmp_path / "manifest.json").exists()
        payload = json.loads((tmp_path / "manifest.json").read_text())
        assert payload["files"][0]["name"] == "fig4.csv"
        assert payload["seed"] == base_config.seed

    def test_exact_mode_rerun_byte_identical(self, tmp_path, base_config):
        run("fig2", base_config, str(tmp_path / "a"))
        run("fig2", base_config, str(tmp_path / "b"))
        csv_a = (tmp_path / "a" / "fig2.csv").read_bytes()
        csv_b = (tmp_path / "b" / "fig2.csv").read_bytes()
        assert csv_a == csv_b

    def test_compare_identical_runs(self, tmp_path, base_config):
        run("fig2", base_config, str(tmp_path / "a"))
        run("fig2", base_config, str(tmp_path / "b"))
        report = compare(str(tmp_path / "a" / "manifest.json"), str(tmp_path / "b" / "manifest.json"))
        assert report["pass"]
        assert report["max_abs_diff"] == 0.0

    def test_compare_exact_vs_monte_carlo_within_3_sigma(self, tmp_path, base_config):
        from dataclasses import replace

        small = replace(base_config, mean_photon_sweep=(0.04, 0.2, 0.9))
        run("fig3", small, str(tmp_path / "exact"))
        run("fig3", small, str(tmp_path / "mc"), mode="monte_carlo", trials=100_000)
        report = compare(
            str(tmp_path / "exact" / "manifest.json"), str(tmp_path / "mc" / "manifest.json")
        )
        assert report["pass"], report

    def test_compare_flags_perturbed_transmission(self, tmp_path, base_config):
        from dataclasses import replace

        small = replace(base_config, mean_photon_sweep=(0.084,))
        perturbed = replace(small, channel=replace(small.channel, transmission=0.54))
        run("fig2", small, str(tmp_path / "a"))
        run("fig2", perturbed, str(tmp_path / "b"))
        report = compare(str(tmp_path / "a" / "manifest.json"), str(tmp_path / "b" / "manifest.json"))
        assert not report["pass"]
        assert report["max_abs_diff"] > 0
        # the sweep axis itself is untouched
        header, rows_a = build_figure("fig2", small)
        _, rows_b = build_figure("fig2", perturbed)
        assert rows_a[0][0] == rows_b[0][0]


class TestCliMain:
    def test_full_cli_run(self, tmp_path):
        rc = main(["figS1", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "figS1.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("channel.transmission = 2.0\n")
        rc = main(["fig2", "--config", str(bad), "--out", str(tmp_path)])
        assert rc == 2

    def test_compare_cli_identical(self, tmp_path, base_config):
        from dataclasses import replace

        small = replace(base_config, mean_photon_sweep=(0.084,))
        run("fig2", small, str(tmp_path / "a"))
        run("fig2", small, str(tmp_path / "b"))
        rc = main(
            ["compare", str(tmp_path / "a" / "manifest.json"), str(tmp_path / "b" / "manifest.json")]
        )
        assert rc == 0

    def test_mc_figure_deterministic(self, tmp_path, base_config):
        from dataclasses import replace

        small = replace(base_config, mean_photon_sweep=(0.084,))
        run("fig3", small, str(tmp_path / "a"), mode="mc", trials=20_000, seed=99)
        run("fig3", small, str(tmp_path / "b"), mode="mc", trials=20_000, seed=99)
        assert (tmp_path / "a" / "fig3.csv").read_bytes() == (tmp_path / "b" / "fig3.csv").read_bytes()

    def test_default_figure_within_time_budget(self, tmp_path):
        import time

        start = time.time()
        rc = main(["fig3", "--out", str(tmp_path)])  # heaviest: two full sweeps
        assert rc == 0
        assert time.time() - start < 60

    def test_thread_cap_does_not_change_output(self, tmp_path, base_config, monkeypatch):
        from dataclasses import replace

        small = replace(base_config, mean_photon_sweep=(0.04, 0.2, 0.9))
        run("fig2", small, str(tmp_path / "serial"))
        monkeypatch.setenv("QNDSIM_THREADS", "3")
        run("fig2", small, str(tmp_path / "threaded"))
        assert (tmp_path / "serial" / "fig2.csv").read_bytes() == (
            tmp_path / "threaded" / "fig2.csv"
        ).read_bytes()
