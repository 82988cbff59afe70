"""Command-line runner: exit codes, outputs and flag parsing."""

import json
from pathlib import Path

import pytest

from src.app import (
    EXIT_CONFIG,
    EXIT_OK,
    build_variants,
    main,
    parse_crashes,
    parse_delay,
    parse_seeds,
    parse_sweep,
)
from src.metrics import CSV_COLUMNS
from src.output_manager import OutputManager
from src.sim import Scenario, ScenarioError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run_folders(root: Path) -> list[Path]:
    return sorted(p for p in root.iterdir() if p.is_dir())


class TestRunScenario:
    def test_happy_path(self, out_dir, capsys):
        code = main(["--protocol", "shoalpp", "--n", "4", "--seed", "7", "--duration", "60", "-q"])
        assert code == EXIT_OK

        (folder,) = run_folders(out_dir)
        header = (folder / "latency.csv").read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        assert "total" in (folder / "summary.txt").read_text()
        metadata = json.loads((folder / "metadata.json").read_text())
        assert metadata["oracles_passed"] is True
        assert metadata["seeds"] == [7]
        assert metadata["settings"]["shoalpp"]["k"] == 3
        assert "Results written to" in capsys.readouterr().out

    def test_too_many_crashes_is_a_config_error(self, out_dir):
        assert main(["--crash", "0,1", "-q"]) == EXIT_CONFIG
        assert not out_dir.exists() or not run_folders(out_dir)

    def test_missing_scenario_file(self, out_dir, tmp_path):
        assert main([str(tmp_path / "missing.toml"), "-q"]) == EXIT_CONFIG

    def test_bad_sweep_field(self, out_dir):
        assert main(["--sweep", "colour=red,blue", "-q"]) == EXIT_CONFIG

    def test_scenario_file_with_flag_override(self, out_dir):
        code = main([str(SCENARIOS / "bullshark.toml"), "--duration", "45", "--seeds", "0,1", "-q"])
        assert code == EXIT_OK
        (folder,) = run_folders(out_dir)
        metadata = json.loads((folder / "metadata.json").read_text())
        settings = metadata["settings"]["bullshark"]
        assert settings["protocol"] == "bullshark"
        assert settings["duration"] == 45.0
        assert metadata["seeds"] == [0, 1]

    def test_identical_invocations_identical_csv(self, tmp_path):
        argv = ["--protocol", "shoal", "--seed", "3", "--duration", "45", "-q"]
        assert main(argv + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(argv + ["--out", str(tmp_path / "b")]) == EXIT_OK
        (a,) = run_folders(tmp_path / "a")
        (b,) = run_folders(tmp_path / "b")
        assert (a / "latency.csv").read_bytes() == (b / "latency.csv").read_bytes()

    def test_sweep_prints_comparison(self, out_dir, capsys):
        code = main(["--sweep", "protocol=bullshark,shoalpp", "--seeds", "0..1", "--duration", "60", "--jobs", "2", "-q"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "anchor_commit" in out
        assert "== bullshark" in out
        assert "== shoalpp" in out

    def test_list_previous_runs(self, out_dir, capsys):
        main(["--duration", "30", "-q"])
        capsys.readouterr()
        assert main(["--list"]) == EXIT_OK
        assert "shoalpp" in capsys.readouterr().out

    def test_list_without_runs(self, out_dir, capsys):
        assert main(["--list"]) == EXIT_OK
        assert "No previous runs." in capsys.readouterr().out


class TestFlagParsing:
    def test_seed_range_is_inclusive(self):
        assert parse_seeds("0..19") == list(range(20))
        assert parse_seeds("4,1") == [4, 1]

    @pytest.mark.parametrize("text", ["", "a..b", "1,x"])
    def test_bad_seeds(self, text):
        with pytest.raises(ScenarioError):
            parse_seeds(text)

    def test_sweep_values_are_typed(self):
        assert parse_sweep("k=1,2,3") == ("k", [1, 2, 3])
        assert parse_sweep("round-timeout=3.5") == ("round_timeout", [3.5])

    def test_crash_times_default_to_zero(self):
        assert parse_crashes("3") == ((3, 0.0),)
        assert parse_crashes("3@10,2@0.5") == ((3, 10.0), (2, 0.5))

    def test_delay_forms(self):
        assert parse_delay("1.5") == {"delay": "fixed", "delay_value": 1.5}
        assert parse_delay("0.5:2") == {"delay": "uniform", "delay_range": (0.5, 2.0)}
        assert parse_delay("uniform") == {"delay": "uniform"}

    def test_protocol_sweep_labels(self):
        variants = build_variants(Scenario(), ("protocol", ["bullshark", "shoal"]))
        assert [label for label, _ in variants] == ["bullshark", "shoal"]
        assert variants[1][1].resolved().k == 1


class TestOutputManager:
    def test_folder_name_and_listing(self, tmp_path):
        manager = OutputManager(str(tmp_path))
        folder = manager.create_output_folder("k=1,2 sweep")
        date_str, time_str, unique_id, label = folder.name.split("_", 3)
        assert len(unique_id) == 6
        assert label == "k=1,2-sweep"

        manager.save_metadata(folder, {"k=1": {}}, label="k sweep", seeds=[0], oracles_passed=False)
        manager.create_output_folder("no-metadata")
        (entry,) = manager.get_all_outputs()
        assert entry["label"] == "k=1,2-sweep"
        assert entry["metadata"]["oracles_passed"] is False

    def test_env_var_sets_default_dir(self, out_dir):
        assert OutputManager().base_dir == out_dir
        assert out_dir.is_dir()
