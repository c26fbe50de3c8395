"""Command-line entry point.

Subcommands mirror the pipeline stages (`ingest`, `extract`,
`fit-outcomes`, `fit-rum`, `simulate`, `analyze`) plus `run` for the
whole chain. Exit codes: 0 success, 1 usage, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from pathlib import Path

import numpy as np

from .hands import ParseError, emit_hand_log, parse_hand_log
from .models import serialize_models
from .pipeline import (
    RunConfig,
    _derive_seed,
    analyze_situations,
    build_situations,
    decision_from_dict,
    decision_to_dict,
    extract_decisions,
    fit_from_dict,
    fit_outcome_models,
    fit_to_dict,
    ingest_logs,
    read_jsonl,
    run_pipeline,
    situation_from_dict,
    situation_to_dict,
    write_json,
    write_jsonl,
    write_reports,
)
from .reports import BootstrapError
from .rum import FitConfig, Gamble, RumFitError, fit_rum
from .simulate import RECOVERY_CONFIG, AgentProfile, generate_gambles, simulate_agent

_AGENT_FLAGS = {"pluribus": "Pluribus", "human": "Human"}
_STATE_FLAGS = {"neutral": "neutral", "post-loss": "post_loss", "post-win": "post_win"}
_FIT_FILE = re.compile(r"^fit_(pluribus|human)_(neutral|post_loss|post_win)\.json$")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _usage(message: str) -> int:
    print(f"tiltlab: error: {message}", file=sys.stderr)
    return 1


def _data_error(exc) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return 2


def _cmd_ingest(args) -> int:
    result = ingest_logs(args.logs, args.format, args.alias_map)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(emit_hand_log(result.records))
    print(f"wrote {len(result.records)} hands to {args.out}", file=sys.stderr)
    for diag in result.diagnostics:
        print(
            f"note: {diag.kind} game={diag.game_id} hand={diag.hand_index}: {diag.detail}",
            file=sys.stderr,
        )
    return 0


def _cmd_extract(args) -> int:
    text = Path(args.infile).read_text()
    result = parse_hand_log(text, format="canonical")
    decisions = extract_decisions(result.records)
    write_jsonl(Path(args.out), (decision_to_dict(d) for d in decisions))
    print(f"wrote {len(decisions)} decisions to {args.out}", file=sys.stderr)
    return 0


def _cmd_fit_outcomes(args) -> int:
    try:
        decisions = [decision_from_dict(r) for r in read_jsonl(Path(args.infile))]
        if not decisions:
            raise ValueError(f"no decision rows in {args.infile}")
    except (TypeError, ValueError) as exc:
        return _data_error(exc)
    win_model, payoff_models, norm = fit_outcome_models(decisions, args.model, _seed(args))
    write_json(Path(args.out), serialize_models(win_model, payoff_models, norm))
    print(
        f"win model held-out accuracy {win_model.held_out_accuracy:.3f}; "
        f"payoff R2 win {payoff_models.win_reg.r_squared:.3f} "
        f"loss {payoff_models.loss_reg.r_squared:.3f}",
        file=sys.stderr,
    )
    if args.gambles_out:
        situations, notes = build_situations(decisions, win_model, payoff_models, norm)
        write_jsonl(Path(args.gambles_out), (situation_to_dict(s) for s in situations))
        print(
            f"wrote {notes['n_situations']} gambles to {args.gambles_out} "
            f"({notes['n_payoffs_clamped']} payoffs clamped)",
            file=sys.stderr,
        )
    return 0


def _load_choice_rows(path: Path, agent: str | None, state: str | None):
    rows = read_jsonl(path)
    if not rows:
        raise ValueError(f"no decision rows in {path}")
    pairs = []
    if "gamble" in rows[0]:
        for row in rows:
            s = situation_from_dict(row)
            if agent is not None and s.decision.agent != agent:
                continue
            if state is not None and s.decision.trigger != state:
                continue
            pairs.append((s.gamble, 1 if s.played else 0))
    else:
        if agent is not None:
            raise ValueError("synthetic decisions carry no agent; drop --agent")
        for row in rows:
            if state is not None and row["state"] != state:
                continue
            gamble = Gamble(
                play=tuple((float(p), float(v)) for p, v in row["play"]),
                fold=tuple((float(p), float(v)) for p, v in row["fold"]),
            )
            pairs.append((gamble, int(row["y"])))
    if not pairs:
        raise ValueError("no decisions left after filtering by agent/state")
    return pairs


def _cmd_fit_rum(args) -> int:
    agent = _AGENT_FLAGS[args.agent] if args.agent else None
    state = _STATE_FLAGS[args.state] if args.state else None
    try:
        pairs = _load_choice_rows(Path(args.infile), agent, state)
    except (TypeError, ValueError) as exc:
        return _data_error(exc)
    config = FitConfig(n_starts=args.starts, sample_size=args.valid_sample, seed=_seed(args))
    fit = fit_rum([g for g, _ in pairs], [y for _, y in pairs], config)
    write_json(Path(args.out), fit_to_dict(fit))
    print(
        f"fit {len(pairs)} decisions: omega={fit.omega:.4f} lam={fit.lam:.3f} "
        f"({fit.n_valid}/{config.n_starts} valid starts)",
        file=sys.stderr,
    )
    return 0


def _cmd_simulate(args) -> int:
    profile = AgentProfile.from_dict(json.loads(Path(args.profile).read_text()))
    config = dataclasses.replace(RECOVERY_CONFIG, n=args.n)
    seed = _seed(args)
    rows = []
    for state in ("neutral", "post_loss", "post_win"):
        gambles = generate_gambles(config, seed=_derive_seed(seed, f"sim:{state}:g"))
        decisions = simulate_agent(
            gambles, profile, [state] * args.n, seed=_derive_seed(seed, f"sim:{state}:c")
        )
        rows.extend(d.as_dict() for d in decisions)
    write_jsonl(Path(args.out), rows)
    print(f"wrote {len(rows)} simulated decisions to {args.out}", file=sys.stderr)
    return 0


def _load_fits(fits_dir: Path):
    fits = {}
    for path in sorted(fits_dir.glob("*.json")):
        match = _FIT_FILE.match(path.name)
        if not match:
            continue
        agent = _AGENT_FLAGS[match.group(1)]
        fits[(agent, match.group(2))] = fit_from_dict(json.loads(path.read_text()))
    if not fits:
        raise FileNotFoundError(
            f"no fit files matching fit_<agent>_<state>.json under {fits_dir}"
        )
    return fits


def _cmd_analyze(args) -> int:
    if args.out_dir is None:
        return _usage("analyze requires --out-dir")
    try:
        situations = [situation_from_dict(r) for r in read_jsonl(Path(args.decisions))]
        if not situations:
            raise ValueError(f"no decision rows in {args.decisions}")
    except (TypeError, ValueError) as exc:
        return _data_error(exc)
    fits = _load_fits(Path(args.fits))
    analysis = analyze_situations(
        situations,
        fits,
        seed=_seed(args),
        n_boot=args.bootstrap,
        refit_starts=args.refit_starts,
        min_comparison_n=args.min_group,
    )
    out_dir = Path(args.out_dir)
    write_reports(out_dir, analysis, fits)
    write_json(out_dir / "analysis_notes.json", analysis["skipped_comparisons"])
    n_comp = len(analysis["comparisons"]) // 2
    print(
        f"wrote report tables to {out_dir} "
        f"({n_comp} comparisons, {len(analysis['skipped_comparisons'])} skipped)",
        file=sys.stderr,
    )
    return 0


def _cmd_run(args) -> int:
    if args.config is None:
        return _usage("run requires --config")
    raw = json.loads(Path(args.config).read_text())
    if args.out_dir is not None:
        raw = {**raw, "out_dir": args.out_dir}
    if "out_dir" not in raw:
        return _usage("config has no out_dir; pass --out-dir")
    config = RunConfig.from_dict(raw)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    code, out_dir = run_pipeline(config)
    if code == 0:
        print(f"run completed: {out_dir}", file=sys.stderr)
    else:
        manifest = json.loads((out_dir / "manifest.json").read_text())
        print(
            f"run failed at stage {manifest['failed_stage']}: {manifest['error']}",
            file=sys.stderr,
        )
    return code


def build_parser() -> _Parser:
    parser = _Parser(prog="tiltlab", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="seed for any subcommand")
    parser.add_argument("--config", default=None, help="run config file (JSON)")
    parser.add_argument("--out-dir", default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", metavar="command")
    suppress = argparse.SUPPRESS

    p = sub.add_parser("ingest", help="parse hand logs to the canonical format")
    p.add_argument("logs", nargs="+", help="input log files")
    p.add_argument("--format", required=True, choices=("canonical", "pluribus-raw"))
    p.add_argument("--alias-map", default=None, help="JSON object of name -> id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("extract", help="pre-flop decisions from canonical hands")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("fit-outcomes", help="train win and payoff models")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--seed", type=int, default=suppress)
    p.add_argument("--model", choices=("logistic", "mlp"), default="logistic")
    p.add_argument("--out", required=True)
    p.add_argument("--gambles-out", default=None, help="also write decision gambles")
    p.set_defaults(func=_cmd_fit_outcomes)

    p = sub.add_parser("fit-rum", help="fit risk aversion and precision")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--agent", choices=tuple(_AGENT_FLAGS), default=None)
    p.add_argument("--state", choices=tuple(_STATE_FLAGS), default=None)
    p.add_argument("--starts", type=int, default=200)
    p.add_argument("--valid-sample", type=int, default=35)
    p.add_argument("--seed", type=int, default=suppress)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_rum)

    p = sub.add_parser("simulate", help="synthetic decisions from a profile")
    p.add_argument("--profile", required=True, help="JSON of per-state omega/lam")
    p.add_argument("--n", type=int, default=10000, help="decisions per trigger state")
    p.add_argument("--seed", type=int, default=suppress)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="report tables and comparisons")
    p.add_argument("--decisions", required=True, help="gambles file from fit-outcomes")
    p.add_argument("--fits", required=True, help="directory of fit_<agent>_<state>.json")
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--seed", type=int, default=suppress)
    p.add_argument("--refit-starts", type=int, default=4)
    p.add_argument("--min-group", type=int, default=50)
    p.add_argument("--out-dir", default=suppress)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("run", help="execute the whole pipeline")
    p.add_argument("--config", default=suppress, help="run config file (JSON)")
    p.add_argument("--out-dir", default=suppress, help="override config out_dir")
    p.add_argument("--seed", type=int, default=suppress, help="override config seed")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = getattr(args, "command", None)
    if command is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (RumFitError, BootstrapError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3 if command in ("fit-outcomes", "fit-rum") else 2


if __name__ == "__main__":
    raise SystemExit(main())
