"""Exit-code contract and subcommand behavior of the tiltlab CLI."""

import json
from pathlib import Path

import pytest

from tiltlab.cli import main

FIXTURE_LOG = Path(__file__).parent / "data" / "fixture_hands.jsonl"


def run_cli(argv):
    """main() return code, treating argparse SystemExit the same way."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.fixture(scope="module")
def staged(tmp_path_factory):
    """ingest -> extract -> fit-outcomes artifacts shared by the module."""
    d = tmp_path_factory.mktemp("staged")
    assert run_cli(["ingest", str(FIXTURE_LOG), "--format", "canonical",
                    "--out", f"{d}/hands.jsonl"]) == 0
    assert run_cli(["extract", "--in", f"{d}/hands.jsonl",
                    "--out", f"{d}/decisions.jsonl"]) == 0
    assert run_cli(["--seed", "7", "fit-outcomes", "--in", f"{d}/decisions.jsonl",
                    "--out", f"{d}/models.json",
                    "--gambles-out", f"{d}/gambles.jsonl"]) == 0
    return d


class TestUsageErrors:
    def test_no_command(self, capsys):
        assert run_cli([]) == 1

    def test_unknown_command(self):
        assert run_cli(["frobnicate"]) == 1

    def test_missing_required_flag(self):
        assert run_cli(["extract", "--out", "x.jsonl"]) == 1

    def test_bad_choice_value(self):
        assert run_cli(["ingest", "x", "--format", "nope", "--out", "y"]) == 1

    def test_analyze_needs_out_dir(self, tmp_path):
        assert run_cli(["analyze", "--decisions", "x", "--fits", str(tmp_path)]) == 1

    def test_run_needs_config(self):
        assert run_cli(["run"]) == 1


class TestDataErrors:
    def test_missing_input_file(self, tmp_path):
        code = run_cli(["extract", "--in", f"{tmp_path}/absent.jsonl",
                        "--out", f"{tmp_path}/o.jsonl"])
        assert code == 2

    def test_raw_format_without_alias_map(self, tmp_path, capsys):
        code = run_cli(["ingest", str(FIXTURE_LOG), "--format", "pluribus-raw",
                        "--out", f"{tmp_path}/o.jsonl"])
        assert code == 2
        assert "--alias-map" in capsys.readouterr().err

    def test_rows_that_are_not_decisions(self, tmp_path):
        bad = tmp_path / "garbage.jsonl"
        bad.write_text('{"this": "is not a decision"}\n')
        code = run_cli(["fit-outcomes", "--in", str(bad), "--out", f"{tmp_path}/m.json"])
        assert code == 2

    def test_empty_decision_file(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        code = run_cli(["fit-outcomes", "--in", str(empty), "--out", f"{tmp_path}/m.json"])
        assert code == 2

    def test_agent_flag_on_synthetic_rows(self, tmp_path, capsys):
        rows = [{"play": [[1.0, 2.0]], "fold": [[1.0, 1.0]], "state": "neutral", "y": 1}]
        path = tmp_path / "synth.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        code = run_cli(["fit-rum", "--in", str(path), "--agent", "human",
                        "--out", f"{tmp_path}/f.json"])
        assert code == 2
        assert "drop --agent" in capsys.readouterr().err


class TestNumericalErrors:
    def test_two_decisions_cannot_be_fit(self, tmp_path):
        rows = [
            {"play": [[0.5, 2.0], [0.5, 0.5]], "fold": [[1.0, 1.0]],
             "state": "neutral", "y": 1},
            {"play": [[0.5, 2.0], [0.5, 0.5]], "fold": [[1.0, 1.0]],
             "state": "neutral", "y": 0},
        ]
        path = tmp_path / "tiny.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        code = run_cli(["fit-rum", "--in", str(path), "--starts", "40",
                        "--out", f"{tmp_path}/f.json"])
        assert code == 3


class TestSimulate:
    def test_rows_per_state_and_shape(self, tmp_path):
        profile = {
            "neutral": {"omega": 0.24, "lam": 12.0},
            "post_loss": {"omega": 0.07, "lam": 7.0},
            "post_win": {"omega": 0.44, "lam": 20.0},
        }
        ppath = tmp_path / "profile.json"
        ppath.write_text(json.dumps(profile))
        out = tmp_path / "synth.jsonl"
        assert run_cli(["--seed", "3", "simulate", "--profile", str(ppath),
                        "--n", "200", "--out", str(out)]) == 0
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 600
        by_state = {s: sum(r["state"] == s for r in rows)
                    for s in ("neutral", "post_loss", "post_win")}
        assert by_state == {"neutral": 200, "post_loss": 200, "post_win": 200}
        assert sorted(rows[0]) == ["fold", "play", "state", "y"]

    def test_seed_flag_position_does_not_matter(self, tmp_path):
        profile = {"neutral": {"omega": 0.2, "lam": 10.0},
                   "post_loss": {"omega": 0.2, "lam": 10.0},
                   "post_win": {"omega": 0.2, "lam": 10.0}}
        ppath = tmp_path / "p.json"
        ppath.write_text(json.dumps(profile))
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run_cli(["--seed", "9", "simulate", "--profile", str(ppath),
                        "--n", "50", "--out", str(a)]) == 0
        assert run_cli(["simulate", "--profile", str(ppath), "--seed", "9",
                        "--n", "50", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestFitRum:
    def test_fit_from_staged_gambles(self, staged, tmp_path):
        out = tmp_path / "fit.json"
        code = run_cli(["--seed", "7", "fit-rum", "--in", f"{staged}/gambles.jsonl",
                        "--agent", "human", "--state", "neutral",
                        "--starts", "60", "--out", str(out)])
        assert code == 0
        fit = json.loads(out.read_text())
        assert fit["n_decisions"] == 711
        assert fit["n_valid"] >= 35
        assert -5.0 < fit["omega"] < 5.0
        assert 0.01 < fit["lam"] < 1000.0

    def test_synthetic_rows_fit_without_agent(self, tmp_path):
        profile = {"neutral": {"omega": 0.24, "lam": 12.0},
                   "post_loss": {"omega": 0.24, "lam": 12.0},
                   "post_win": {"omega": 0.24, "lam": 12.0}}
        ppath = tmp_path / "p.json"
        ppath.write_text(json.dumps(profile))
        synth = tmp_path / "synth.jsonl"
        assert run_cli(["--seed", "4", "simulate", "--profile", str(ppath),
                        "--n", "400", "--out", str(synth)]) == 0
        out = tmp_path / "fit.json"
        code = run_cli(["--seed", "5", "fit-rum", "--in", str(synth),
                        "--state", "neutral", "--starts", "60", "--out", str(out)])
        assert code == 0
        fit = json.loads(out.read_text())
        assert fit["n_decisions"] == 400
        assert abs(fit["omega"] - 0.24) < 0.35


class TestAnalyze:
    def test_reports_from_staged_artifacts(self, staged, tmp_path):
        fits = tmp_path / "fits"
        fits.mkdir()
        for agent in ("pluribus", "human"):
            for state in ("neutral", "post-loss", "post-win"):
                out = fits / f"fit_{agent}_{state.replace('-', '_')}.json"
                code = run_cli(["--seed", "7", "fit-rum",
                                "--in", f"{staged}/gambles.jsonl",
                                "--agent", agent, "--state", state,
                                "--starts", "60", "--out", str(out)])
                assert code == 0, (agent, state)
        reports = tmp_path / "reports"
        code = run_cli(["--seed", "11", "analyze",
                        "--decisions", f"{staged}/gambles.jsonl",
                        "--fits", str(fits), "--bootstrap", "200",
                        "--refit-starts", "1", "--out-dir", str(reports)])
        assert code == 0
        written = {p.name for p in reports.iterdir()}
        assert {"table1.csv", "table4.csv", "table5.csv", "comparisons.csv",
                "fold_rates.csv", "fig4_hist.csv", "analysis_notes.json"} <= written

    def test_missing_fits_directory_content(self, staged, tmp_path):
        code = run_cli(["analyze", "--decisions", f"{staged}/gambles.jsonl",
                        "--fits", str(tmp_path), "--out-dir", f"{tmp_path}/r"])
        assert code == 2


class TestRun:
    def test_full_chain_from_config_file(self, tmp_path):
        config = {
            "logs": [str(FIXTURE_LOG)],
            "seed": 7,
            "n_starts": 60,
            "bootstrap": 200,
            "refit_starts": 1,
        }
        cpath = tmp_path / "cfg.json"
        cpath.write_text(json.dumps(config))
        code = run_cli(["run", "--config", str(cpath), "--out-dir", f"{tmp_path}/out"])
        assert code == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        names = {e["path"] for e in manifest["artifacts"]}
        assert {"table1.csv", "table5.csv", "comparisons.csv"} <= names

    def test_config_without_out_dir_needs_flag(self, tmp_path, capsys):
        cpath = tmp_path / "cfg.json"
        cpath.write_text(json.dumps({"logs": [str(FIXTURE_LOG)]}))
        assert run_cli(["run", "--config", str(cpath)]) == 1
        assert "--out-dir" in capsys.readouterr().err

    def test_failure_code_and_stage_reported(self, tmp_path, capsys):
        config = {"logs": ["/nowhere/gone.jsonl"], "out_dir": f"{tmp_path}/broken"}
        cpath = tmp_path / "cfg.json"
        cpath.write_text(json.dumps(config))
        assert run_cli(["run", "--config", str(cpath)]) == 2
        assert "stage ingest" in capsys.readouterr().err
