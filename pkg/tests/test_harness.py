"""End-to-end scenario runs: determinism, config files, degenerate inputs,
planner/preset timing equivalence, re-analysis consistency, figures, CLI."""

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from gestkin import cli, planner, plots, stats
from gestkin.harness import (
    NoiseModel,
    ScenarioConfig,
    SpeakerVariation,
    analyze_tokens,
    config_from_dict,
    config_to_dict,
    planned_eccentric_delay_ms,
    run_scenario,
    validate_config,
)

SILENT = ScenarioConfig(
    n_speakers=2,
    tokens_per_condition=20,
    conditions=("UNDERLYING",),
    speaker_variation=SpeakerVariation(0.0, 0.0, 0.0),
    noise=NoiseModel(0.0, 0.0, 0.0, 0.0),
)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """One 2-speaker, 24-token run of all three conditions, reused read-only."""
    out = tmp_path_factory.mktemp("small")
    config = ScenarioConfig(n_speakers=2, tokens_per_condition=24, seed=5)
    report = run_scenario(config, out, n_perm=200, write_trajectories=False)
    return config, out, report


@pytest.fixture(scope="module")
def silent_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("silent")
    report = run_scenario(SILENT, out, n_perm=50, write_trajectories=False)
    return out, report


class TestConfig:
    def test_dict_round_trip_through_json(self):
        config = ScenarioConfig(n_speakers=3, seed=11, noise=NoiseModel(0.1, 0.05, 2.0, 0.5))
        recovered = config_from_dict(json.loads(json.dumps(config_to_dict(config))))
        assert recovered == config

    def test_unknown_top_level_key_rejected(self):
        data = config_to_dict(ScenarioConfig())
        data["bogus"] = 1
        with pytest.raises(ValueError, match=r"unknown config keys: \['bogus'\]"):
            config_from_dict(data)

    def test_unknown_noise_key_rejected(self):
        data = config_to_dict(ScenarioConfig())
        data["noise"]["hiss"] = 1
        with pytest.raises(ValueError, match=r"unknown noise keys: \['hiss'\]"):
            config_from_dict(data)

    def test_unknown_variation_key_rejected(self):
        data = config_to_dict(ScenarioConfig())
        data["speaker_variation"]["wobble"] = 1
        with pytest.raises(ValueError, match="unknown speaker_variation keys"):
            config_from_dict(data)

    def test_validate_flags_bad_fields(self):
        assert validate_config(ScenarioConfig()) == []
        assert any(
            "tokens_per_condition" in p
            for p in validate_config(ScenarioConfig(tokens_per_condition=5))
        )
        assert validate_config(ScenarioConfig(conditions=())) == ["conditions must be nonempty"]
        assert validate_config(ScenarioConfig(conditions=("UNDERLYING", "BOGUS"))) == [
            "unknown condition 'BOGUS'"
        ]
        assert any("eccentric" in p for p in validate_config(ScenarioConfig(eccentric_delay_ms=-1)))


class TestZeroNoise:
    """All-zero noise sds make every token of a cell bit-identical; the
    pipeline must still measure them and report the flat cells as degenerate
    rather than failing to parse or inventing a slope."""

    def test_every_token_measured(self, silent_run):
        _, report = silent_run
        analysis = report["analysis"]
        assert analysis["n_tokens"] == 40
        assert analysis["n_measured"] == 40
        assert analysis["exclusions"]["parse_failure"]["count"] == 0

    def test_tokens_identical_within_cell(self, silent_run):
        _, report = silent_run
        tokens = stats.read_token_csv(report["files"]["tokens"])
        for speaker in ("S1", "S2"):
            cell = {
                (t.g1_duration_ms, t.lag_ms, t.tb_pos_mm)
                for t in tokens
                if t.speaker == speaker
            }
            assert len(cell) == 1

    def test_flat_cell_reported_degenerate(self, silent_run):
        _, report = silent_run
        analysis = report["analysis"]
        assert analysis["classification"]["UNDERLYING"]["label"] == "DEGENERATE"
        assert analysis["degenerate"]

    def test_summary_slope_undefined(self, silent_run):
        _, report = silent_run
        lines = Path(report["files"]["summary"]).read_text().splitlines()
        for row in lines[1:]:
            assert row.split(",")[3] == "nan"

    def test_identical_lags_still_render(self, silent_run, tmp_path):
        _, report = silent_run
        figures = plots.emit_plots(report["files"]["tokens"], tmp_path / "figs")
        assert sorted(figures) == [
            "lag_by_condition",
            "lag_vs_duration",
            "tb_by_condition",
            "tb_by_speaker",
        ]


class TestDeterminism:
    def test_same_seed_same_bytes(self, small_run, tmp_path):
        config, _, report = small_run
        again = run_scenario(config, tmp_path, n_perm=200, write_trajectories=False)
        for name in ("tokens", "summary"):
            first = Path(report["files"][name]).read_bytes()
            second = Path(again["files"][name]).read_bytes()
            assert first == second

    def test_different_seed_different_tokens(self, small_run, tmp_path):
        config, _, report = small_run
        other = run_scenario(
            replace(config, seed=6), tmp_path, n_perm=200, write_trajectories=False
        )
        assert (
            Path(report["files"]["tokens"]).read_bytes()
            != Path(other["files"]["tokens"]).read_bytes()
        )


class TestReanalysis:
    def test_report_recomputable_from_token_csv(self, small_run):
        _, _, report = small_run
        tokens = stats.read_token_csv(report["files"]["tokens"])
        _, _, analysis = analyze_tokens(
            tokens, n_perm=report["analysis"]["n_perm"], seed=report["analysis"]["stat_seed"]
        )
        assert analysis == report["analysis"]


class TestPlannerEquivalence:
    def test_preset_delay_passes_through(self):
        assert planned_eccentric_delay_ms(ScenarioConfig()) == 25.0
        assert planned_eccentric_delay_ms(ScenarioConfig(eccentric_delay_ms=40.0)) == 40.0

    def test_planner_reproduces_delay(self):
        for delay in (25.0, 40.0):
            config = ScenarioConfig(use_coupling_planner=True, eccentric_delay_ms=delay)
            assert planned_eccentric_delay_ms(config) == pytest.approx(delay, abs=1e-9)

    def test_mean_lag_agrees_between_modes(self, tmp_path):
        base = ScenarioConfig(
            n_speakers=2, tokens_per_condition=24, conditions=("ASSIMILATORY",), seed=3
        )
        means = []
        for planner_mode in (False, True):
            config = replace(base, use_coupling_planner=planner_mode)
            out = tmp_path / ("planner" if planner_mode else "preset")
            report = run_scenario(config, out, n_perm=50, write_trajectories=False)
            tokens = stats.read_token_csv(report["files"]["tokens"])
            means.append(np.mean([t.lag_ms for t in tokens if not t.excluded]))
        assert abs(means[0] - means[1]) < 2.0


class TestParseFailureAbort:
    def test_heavy_target_jitter_aborts_with_cell_counts(self, tmp_path):
        config = ScenarioConfig(
            n_speakers=1,
            tokens_per_condition=20,
            conditions=("UNDERLYING",),
            noise=NoiseModel(target_jitter_sd_mm=50.0),
            seed=0,
        )
        with pytest.raises(RuntimeError, match="tokens failed to parse; failures by cell"):
            run_scenario(config, tmp_path, n_perm=20, write_trajectories=False)


class TestPlots:
    def test_four_figures(self, small_run):
        _, out, report = small_run
        figures = plots.emit_plots(report["files"]["tokens"], out / "figs")
        assert sorted(figures) == [
            "lag_by_condition",
            "lag_vs_duration",
            "tb_by_condition",
            "tb_by_speaker",
        ]
        for path in figures.values():
            assert Path(path).stat().st_size > 0

    def test_scatter_has_speaker_by_condition_panels(self, small_run):
        _, out, report = small_run
        figures = plots.emit_plots(report["files"]["tokens"], out / "figs")
        svg = Path(figures["lag_vs_duration"]).read_text()
        assert svg.count('<g id="axes_') == 2 * 3

    def test_slope_annotations_match_summary(self, small_run):
        _, out, report = small_run
        figures = plots.emit_plots(report["files"]["tokens"], out / "figs")
        svg = Path(figures["lag_vs_duration"]).read_text()
        import re

        annotated = re.findall(r"slope=(-?\d+\.\d{3})", svg)
        summary = Path(report["files"]["summary"]).read_text().splitlines()[1:]
        expected = [row.split(",")[3] for row in summary]
        assert annotated == expected

    def test_empty_table_rejected(self, tmp_path):
        path = tmp_path / "tokens.csv"
        path.write_text(",".join(stats.TOKEN_FIELDS) + "\n")
        with pytest.raises(ValueError):
            plots.emit_plots(path, tmp_path / "figs")


@pytest.fixture(scope="module")
def silent_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "config.json"
    path.write_text(json.dumps(config_to_dict(SILENT)))
    return path


@pytest.fixture(scope="module")
def cli_run(silent_config_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_run")
    rc = cli.main(
        ["simulate", "--config", str(silent_config_file), "--out", str(out), "--n-perm", "50"]
    )
    assert rc == 0
    return out


class TestCli:
    def test_simulate_writes_report(self, cli_run, capsys):
        report = json.loads((cli_run / "report.json").read_text())
        assert Path(report["files"]["tokens"]).exists()
        assert Path(report["files"]["summary"]).exists()

    def test_simulate_rejects_unknown_config_key(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({**config_to_dict(ScenarioConfig()), "bogus": 1}))
        rc = cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "unknown config keys" in capsys.readouterr().err

    def test_analyze_round_trips_simulate_output(self, cli_run, tmp_path, capsys):
        rc = cli.main(
            [
                "analyze",
                "--tokens",
                str(cli_run / "tokens.csv"),
                "--out",
                str(tmp_path / "reanalysis"),
                "--n-perm",
                "50",
            ]
        )
        assert rc == 0
        assert (tmp_path / "reanalysis" / "summary.csv").exists()
        assert "parse failures: 0" in capsys.readouterr().out

    def test_analyze_rejects_foreign_header(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        rc = cli.main(["analyze", "--tokens", str(bad), "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "header" in capsys.readouterr().err

    def test_parse_labels_a_simulated_trajectory(self, cli_run, capsys):
        trajectory = sorted((cli_run / "trajectories").glob("*.csv"))[0]
        rc = cli.main(
            [
                "parse",
                str(trajectory),
                "--channel",
                "LA",
                "--window-ms",
                "50:1000",
                "--direction",
                "dec",
            ]
        )
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "channel,onset_ms,target_ms,release_ms,offset_ms,pv_to,pv_away"
        fields = lines[1].split(",")
        assert fields[0] == "LA"
        onset, offset = float(fields[1]), float(fields[4])
        assert 150.0 < onset < offset < 800.0

    def test_parse_missing_file_is_data_error(self, tmp_path, capsys):
        rc = cli.main(
            [
                "parse",
                str(tmp_path / "absent.csv"),
                "--channel",
                "LA",
                "--window-ms",
                "0:100",
                "--direction",
                "dec",
            ]
        )
        assert rc == 3

    @pytest.mark.parametrize("method", ["ls", "osc"])
    def test_plan_prints_c_center_onsets(self, method, tmp_path, capsys):
        graph_path = tmp_path / "graph.json"
        planner.save_graph(planner.c_center_graph(), graph_path)
        rc = cli.main(["plan", "--graph", str(graph_path), "--method", method])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "node,psi_rad,onset_ms"
        onsets = {row.split(",")[0]: float(row.split(",")[2]) for row in lines[1:]}
        # consonants straddle the vowel onset by a sixth of the 400 ms cycle
        assert onsets["C1"] == pytest.approx(-400.0 / 6.0, abs=0.1)
        assert onsets["C2"] == pytest.approx(400.0 / 6.0, abs=0.1)
        assert onsets["V"] == pytest.approx(0.0, abs=0.1)

    def test_plan_rejects_malformed_graph(self, tmp_path, capsys):
        bad = tmp_path / "graph.json"
        bad.write_text("{not json")
        rc = cli.main(["plan", "--graph", str(bad)])
        assert rc == 3

    def test_exp54_rejects_unknown_parts(self, tmp_path, capsys):
        rc = cli.main(["exp54", "--parts", "XYZ", "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "parts" in capsys.readouterr().err
