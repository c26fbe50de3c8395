"""End-to-end and unit tests for the pipeline runner and its artifacts.

The heavy tests run the full chain on the committed 200-hand fixture
log (tests/data/fixture_hands.jsonl, regenerated by make_fixture.py)
once per module and share the output directory.
"""

import dataclasses
import hashlib
import json
from pathlib import Path

import pytest

from tiltlab.pipeline import (
    REPORT_FILES,
    RunConfig,
    decision_from_dict,
    decision_to_dict,
    fit_from_dict,
    fit_to_dict,
    read_jsonl,
    run_pipeline,
    situation_from_dict,
    situation_to_dict,
    write_csv,
    write_jsonl,
)

FIXTURE_LOG = Path(__file__).parent / "data" / "fixture_hands.jsonl"

# small but fully converging settings for the 200-hand fixture
FIXTURE_SETTINGS = dict(
    logs=(str(FIXTURE_LOG),),
    seed=7,
    n_starts=120,
    bootstrap=200,
    refit_starts=2,
    min_comparison_n=50,
)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code, out_dir = run_pipeline(RunConfig(out_dir=str(out), **FIXTURE_SETTINGS))
    assert code == 0
    return Path(out_dir)


class TestRunConfig:
    def test_round_trip(self):
        config = RunConfig(
            logs=("a.jsonl", "b.jsonl"),
            out_dir="/tmp/x",
            seed=3,
            excluded_players=("MrWhite",),
        )
        assert RunConfig.from_dict(config.as_dict()) == config

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            RunConfig.from_dict({"logs": ["a"], "out_dir": "x", "bootstarp": 1})

    def test_needs_logs(self):
        with pytest.raises(ValueError, match="at least one input log"):
            RunConfig(logs=(), out_dir="x")

    def test_rejects_unknown_format(self):
        with pytest.raises(ValueError, match="log_format"):
            RunConfig(logs=("a",), out_dir="x", log_format="pokerstars")

    def test_raw_format_requires_alias_map(self):
        with pytest.raises(ValueError, match="alias_map"):
            RunConfig(logs=("a",), out_dir="x", log_format="pluribus-raw")


class TestSerialization:
    def test_decision_round_trip(self, run_dir):
        rows = read_jsonl(run_dir / "decisions.jsonl")
        for raw in rows[:200]:
            decision = decision_from_dict(raw)
            assert decision_to_dict(decision) == raw

    def test_situation_round_trip(self, run_dir):
        rows = read_jsonl(run_dir / "gambles.jsonl")
        for raw in rows[:200]:
            situation = situation_from_dict(raw)
            assert situation_to_dict(situation) == raw

    def test_fit_round_trip(self, run_dir):
        raw = json.loads((run_dir / "fits" / "fit_human_neutral.json").read_text())
        fit = fit_from_dict(raw)
        assert fit.omega == raw["omega"]
        assert fit.lam == raw["lam"]
        assert fit.n_decisions == raw["n_decisions"]
        assert fit.n_valid == raw["n_valid"]

    def test_jsonl_round_trip(self, tmp_path):
        rows = [{"a": 1, "b": [1.5, None]}, {"a": 2, "b": []}]
        path = tmp_path / "rows.jsonl"
        write_jsonl(path, rows)
        assert read_jsonl(path) == rows

    def test_csv_field_formatting(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(
            path,
            ["name", "score", "flag", "note"],
            [["x", 0.1, True, None], ["y", 2.0, False, "ok"]],
        )
        lines = path.read_text().splitlines()
        assert lines[0] == "name,score,flag,note"
        assert lines[1] == "x,0.1,true,"
        assert lines[2] == "y,2.0,false,ok"


class TestPipelineRun:
    def test_reports_written(self, run_dir):
        for name in REPORT_FILES:
            assert (run_dir / name).is_file(), name

    def test_all_six_fits_written(self, run_dir):
        names = sorted(p.name for p in (run_dir / "fits").iterdir())
        assert names == [
            "fit_human_neutral.json",
            "fit_human_post_loss.json",
            "fit_human_post_win.json",
            "fit_pluribus_neutral.json",
            "fit_pluribus_post_loss.json",
            "fit_pluribus_post_win.json",
        ]

    def test_row_counts_follow_fixture(self, run_dir):
        assert len(read_jsonl(run_dir / "hands.jsonl")) == 200
        assert len(read_jsonl(run_dir / "decisions.jsonl")) == 1200
        notes = json.loads((run_dir / "gamble_notes.json").read_text())
        assert notes["n_decisions"] == 1200
        assert notes["n_unranked"] == 0
        # the four uncontested blinds are dropped from fitting
        assert notes["n_forced_excluded"] == 4
        assert notes["n_situations"] == 1196
        assert len(read_jsonl(run_dir / "gambles.jsonl")) == 1196

    def test_config_echo_omits_out_dir(self, run_dir):
        echo = json.loads((run_dir / "config.json").read_text())
        assert "out_dir" not in echo
        assert echo["seed"] == 7
        assert echo["logs"] == [str(FIXTURE_LOG)]

    def test_small_groups_skipped_with_reason(self, run_dir):
        notes = json.loads((run_dir / "analysis_notes.json").read_text())
        skipped = {entry["comparison"] for entry in notes}
        assert skipped == {
            "Pluribus:post_loss-vs-neutral",
            "Pluribus:post_win-vs-neutral",
            "post_loss:Pluribus-vs-Human",
            "post_win:Pluribus-vs-Human",
        }
        for entry in notes:
            assert entry["reason"] == "group below min_comparison_n"
            assert min(entry["n_a"], entry["n_b"]) < 50

    def test_comparisons_cover_large_groups(self, run_dir):
        lines = (run_dir / "comparisons.csv").read_text().splitlines()
        rows = [dict(zip(lines[0].split(","), l.split(","))) for l in lines[1:]]
        assert len(rows) == 6
        names = {r["comparison"] for r in rows}
        assert names == {
            "Human:post_loss-vs-neutral",
            "Human:post_win-vs-neutral",
            "neutral:Pluribus-vs-Human",
        }
        for r in rows:
            assert r["parameter"] in ("omega", "lam")
            assert 0.0 < float(r["p_value"]) <= 1.0
            assert int(r["n_failed"]) <= 0.2 * int(r["n_boot"])

    def test_fixture_loss_shift_recovered(self, run_dir):
        lines = (run_dir / "table5.csv").read_text().splitlines()
        rows = [dict(zip(lines[0].split(","), l.split(","))) for l in lines[1:]]
        by_key = {(r["agent"], r["state"]): r for r in rows}
        assert len(by_key) == 6
        # the generator loosens human play after losses; the fit should
        # land materially below the neutral risk aversion and precision
        neutral = by_key[("Human", "neutral")]
        post_loss = by_key[("Human", "post_loss")]
        assert float(post_loss["omega"]) < float(neutral["omega"]) - 0.5
        assert float(post_loss["lam"]) < float(neutral["lam"])

    def test_manifest_covers_every_artifact(self, run_dir):
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["failed_stage"] is None
        assert manifest["error"] is None
        listed = {entry["path"] for entry in manifest["artifacts"]}
        on_disk = {
            str(p.relative_to(run_dir).as_posix())
            for p in run_dir.rglob("*")
            if p.is_file() and p.name != "manifest.json"
        }
        assert listed == on_disk
        for entry in manifest["artifacts"]:
            blob = (run_dir / entry["path"]).read_bytes()
            assert entry["bytes"] == len(blob)
            assert entry["sha256"] == hashlib.sha256(blob).hexdigest()

    def test_rerun_is_byte_identical(self, run_dir, tmp_path):
        code, second = run_pipeline(
            RunConfig(out_dir=str(tmp_path / "again"), **FIXTURE_SETTINGS)
        )
        assert code == 0
        second = Path(second)
        first_files = sorted(
            p.relative_to(run_dir) for p in run_dir.rglob("*") if p.is_file()
        )
        second_files = sorted(
            p.relative_to(second) for p in second.rglob("*") if p.is_file()
        )
        assert first_files == second_files
        for rel in first_files:
            assert (run_dir / rel).read_bytes() == (second / rel).read_bytes(), rel


class TestPipelineFailure:
    def test_missing_log_fails_at_ingest(self, tmp_path):
        config = RunConfig(logs=("/nowhere/gone.jsonl",), out_dir=str(tmp_path / "o"))
        code, out_dir = run_pipeline(config)
        assert code == 2
        manifest = json.loads((Path(out_dir) / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["failed_stage"] == "ingest"
        assert "gone.jsonl" in manifest["error"]
        listed = {entry["path"] for entry in manifest["artifacts"]}
        assert listed == {"failed/config.json"}

    def test_all_players_excluded_fails_at_extract(self, tmp_path):
        config = RunConfig(
            logs=(str(FIXTURE_LOG),),
            out_dir=str(tmp_path / "o"),
            excluded_players=("Pluribus", "Alice", "Bob", "Carol", "Dave", "Erin"),
        )
        code, out_dir = run_pipeline(config)
        assert code == 2
        manifest = json.loads((Path(out_dir) / "manifest.json").read_text())
        assert manifest["failed_stage"] == "extract"
        assert "no decisions" in manifest["error"]

    def test_unreachable_start_budget_fails_numerically(self, tmp_path):
        # one start can never produce the 35 valid fits the sampler needs
        config = RunConfig(
            logs=(str(FIXTURE_LOG),),
            out_dir=str(tmp_path / "o"),
            seed=7,
            n_starts=1,
        )
        code, out_dir = run_pipeline(config)
        assert code == 3
        manifest = json.loads((Path(out_dir) / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["failed_stage"] == "fit-rum"

    def test_partial_outputs_moved_under_failed(self, tmp_path):
        config = RunConfig(
            logs=(str(FIXTURE_LOG),),
            out_dir=str(tmp_path / "o"),
            seed=7,
            n_starts=1,
        )
        _, out_dir = run_pipeline(config)
        out_dir = Path(out_dir)
        top = {p.name for p in out_dir.iterdir()}
        assert top == {"failed", "manifest.json"}
        moved = {p.name for p in (out_dir / "failed").iterdir() if p.is_file()}
        # everything staged before the failing fit survives for debugging
        assert {"config.json", "hands.jsonl", "decisions.jsonl", "models.json",
                "gambles.jsonl"} <= moved
