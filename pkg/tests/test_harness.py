import csv
import json

import numpy as np
import pytest

from risleo.harness.config import ParseError, ScenarioConfig, ValidationError, load_scenario, parse_text, save_scenario
from risleo.harness.cli import EXIT_INVALID, EXIT_OK, main
from risleo.harness.experiments import ExperimentReport, expand, run_experiment
from risleo.harness.output import CSV_HEADER, ManifestMismatch, check_manifest, emit_csv, load_report, write_report
from risleo.harness.scenario import build_scenario
from risleo.trajectory import propulsion_power

# a two-slot frame with the closed-form baseline finishes in well under a second
QUICK = ["--mode", "two_stage_stub", "--set", "frame.slots=2", "--set", "frame.duration=2"]


class TestConfig:
    def test_table_values(self):
        cfg = ScenarioConfig.from_values()
        assert cfg.S == 3 and cfg.K == 6 and cfg.n_slots == 60
        assert cfg.slot_duration == 1.0
        assert cfg.constellation.num_planes * cfg.constellation.sats_per_plane == 792
        assert cfg.ris_array.size == 100 and cfg.sat_array.size == 16
        assert cfg.p_max == pytest.approx(np.full(3, 10.0))
        uav = cfg.uav
        assert propulsion_power(0.0, uav) == pytest.approx(79.86 + 88.63)

    def test_round_trip(self, tmp_path):
        cfg = ScenarioConfig.from_values({"ue.count": 2, "run.seed": 7}, "desk")
        again = load_scenario(save_scenario(cfg, tmp_path / "c.txt"))
        assert again == cfg and again.config_hash() == cfg.config_hash()

    def test_hash_tracks_values(self):
        a = ScenarioConfig.from_values(None, "desk")
        assert a.config_hash() != a.with_overrides({"run.seed": 1}).config_hash()

    def test_too_many_users(self):
        with pytest.raises(ValidationError, match="ue.count"):
            ScenarioConfig.from_values({"ue.count": 100})

    @pytest.mark.parametrize(
        "overrides, key",
        [
            ({"arrays.ris_elements": 0}, "arrays.ris_elements"),
            ({"run.mode": "best"}, "run.mode"),
            ({"link.bandwidth": -1.0}, "link.bandwidth"),
            ({"frame.slots": 2.5}, "frame.slots"),
            ({"no.such": 1}, "no.such"),
            ({"ue.positions": [[0, 1]]}, "ue.positions"),
        ],
    )
    def test_rejections(self, overrides, key):
        with pytest.raises(ValidationError) as err:
            ScenarioConfig.from_values(overrides, "desk")
        assert err.value.path.startswith(key)

    def test_parse_errors(self):
        assert parse_text("# comment\na = 1  # trailing\nb = [1, 2]\n") == {"a": 1, "b": [1, 2]}
        for text in ("a 1", "a = 1\na = 2", "a = nope", "= 3"):
            with pytest.raises(ParseError):
                parse_text(text)


class TestScenario:
    def test_seeded_layout(self):
        cfg = ScenarioConfig.from_values({"run.seed": 3}, "desk")
        a, b = build_scenario(cfg), build_scenario(cfg)
        np.testing.assert_array_equal(a.scene.ue_positions(0), b.scene.ue_positions(0))
        other = build_scenario(cfg.with_overrides({"run.seed": 4}))
        assert not np.array_equal(a.scene.ue_positions(0), other.scene.ue_positions(0))

    def test_explicit_positions(self):
        cfg = ScenarioConfig.from_values({"ue.count": 2, "ue.positions": [[0, 300], [10, 280]]}, "desk")
        np.testing.assert_array_equal(build_scenario(cfg).scene.ue_positions(0)[:, :2], [[0, 300], [10, 280]])


class TestOutput:
    def test_empty_report_writes_headers(self, tmp_path):
        report = ExperimentReport("convergence", 0, ScenarioConfig.from_values(None, "desk"), [])
        paths = emit_csv(report, tmp_path)
        assert [p.name for p in paths] == ["convergence.csv"]
        assert paths[0].read_text() == ",".join(CSV_HEADER) + "\n"

    def test_manifest_guard(self, tmp_path):
        check_manifest(tmp_path, "abc")  # nothing there yet
        (tmp_path / "manifest.json").write_text(json.dumps({"config_hash": "abc"}))
        check_manifest(tmp_path, "abc")
        with pytest.raises(ManifestMismatch):
            check_manifest(tmp_path, "def")

    def test_expand_covers_every_preset(self):
        base = ScenarioConfig.from_values(None, "desk")
        figures = {
            "convergence": 3,
            "schemes_vs_time": 6,
            "trajectory_plot": 4,
            "speed_altitude_sweep": 6,
            "ris_elements_sweep": 4,
            "connection_strategies": 4,
            "constellation_density": 3,
        }
        for preset, n in figures.items():
            assert len(expand(preset, base)) == n
        with pytest.raises(ValueError):
            expand("fig99", base)


@pytest.fixture(scope="module")
def quick():
    cfg = ScenarioConfig.from_values({"frame.slots": 2, "frame.duration": 2.0}, "desk")
    return run_experiment("schemes_vs_time", mode="two_stage_stub", base=cfg)


class TestRun:
    def test_rows(self, quick):
        assert quick.ok and quick.figures == ["schemes_vs_time"]
        rows = quick.rows("schemes_vs_time")
        metrics = {r.metric for r in rows}
        assert {"min_rate", "rate", "uav_position", "energy_used", "mean_min_rate"} <= metrics

    def test_write_and_reload(self, quick, tmp_path):
        paths = write_report(quick, tmp_path)
        first = paths[0].read_bytes()
        again = load_report(tmp_path)
        emit_csv(again, tmp_path / "copy")
        assert (tmp_path / "copy" / paths[0].name).read_bytes() == first
        with open(paths[0]) as fh:
            assert tuple(next(csv.reader(fh))) == CSV_HEADER


class TestCli:
    def test_validate(self, capsys):
        assert main(["validate"]) == EXIT_OK
        assert "hash=" in capsys.readouterr().out

    def test_invalid_config(self, capsys):
        assert main(["validate", "--set", "ue.count=100"]) == EXIT_INVALID
        assert "ue.count" in capsys.readouterr().err

    def test_bad_file(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("ue.count 3\n")
        assert main(["validate", "--config", str(bad)]) == EXIT_INVALID

    def test_run_twice_and_guard(self, tmp_path):
        out = str(tmp_path / "o")
        assert main(["run", "--preset", "schemes_vs_time", "--out", out, *QUICK]) == EXIT_OK
        first = (tmp_path / "o" / "schemes_vs_time.csv").read_bytes()
        assert main(["run", "--preset", "schemes_vs_time", "--out", out, *QUICK]) == EXIT_OK
        assert (tmp_path / "o" / "schemes_vs_time.csv").read_bytes() == first
        assert main(["run", "--preset", "schemes_vs_time", "--out", out, "--seed", "9", *QUICK]) == EXIT_INVALID

    def test_report(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", "--preset", "schemes_vs_time", "--out", str(out), *QUICK]) == EXIT_OK
        first = (out / "schemes_vs_time.csv").read_bytes()
        (out / "schemes_vs_time.csv").unlink()
        assert main(["report", "--out", str(out)]) == EXIT_OK
        assert (out / "schemes_vs_time.csv").read_bytes() == first

    def test_mc_check(self):
        assert main(["mc-check", "--samples", "2000"]) == EXIT_OK
