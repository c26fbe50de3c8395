"""End-to-end orchestration: stage functions, artifact files, and the
run manifest.

A run executes ingest -> extract -> fit-outcomes -> build-gambles ->
fit-rum -> analyze, writing every artifact into one output directory
and finishing with a manifest that hashes each file. Identical config
and inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .decisions import (
    AGENTS,
    TRIGGER_STATES,
    PreflopDecision,
    extract_preflop_decisions,
    label_trigger_states,
    pool_humans,
)
from .hands import (
    AliasMap,
    HandRecord,
    ParseError,
    ParseResult,
    emit_hand_log,
    normalize_aliases,
    parse_hand_log,
    validate_hands,
)
from .models import (
    ClampCounter,
    NormalizationSpec,
    WinConfig,
    build_gamble,
    deserialize_models,
    fit_payoff_models,
    fit_win_model,
    pooled_raw_payoffs,
    serialize_models,
)
from .reports import (
    BootstrapConfig,
    BootstrapError,
    ChoiceSituation,
    ComparisonResult,
    choice_pairs,
    compare_parameters,
    eu_diff_table,
    fold_rate_report,
    rationality_table,
    utility_gap_histogram,
)
from .rum import FitConfig, Gamble, RumFit, RumFitError, fit_rum

logger = logging.getLogger(__name__)

__all__ = [
    "RunConfig",
    "FitSummary",
    "run_pipeline",
    "ingest_logs",
    "extract_decisions",
    "build_situations",
    "fit_states",
    "analyze_situations",
    "decision_to_dict",
    "decision_from_dict",
    "situation_to_dict",
    "situation_from_dict",
    "fit_to_dict",
    "fit_from_dict",
    "write_jsonl",
    "read_jsonl",
    "write_manifest",
    "REPORT_FILES",
]

LOG_FORMATS = ("canonical", "pluribus-raw")
WIN_MODELS = ("logistic", "mlp")
REPORT_FILES = (
    "table1.csv",
    "table4.csv",
    "table5.csv",
    "comparisons.csv",
    "fold_rates.csv",
    "fig4_hist.csv",
)


@dataclass(frozen=True)
class RunConfig:
    """Fully serializable settings for one pipeline run."""

    logs: tuple[str, ...]
    out_dir: str
    log_format: str = "canonical"
    alias_map: str | None = None
    seed: int = 0
    win_model: str = "logistic"
    n_starts: int = 200
    valid_sample: int = 35
    bootstrap: int = 500
    refit_starts: int = 4
    min_comparison_n: int = 50
    excluded_players: tuple[str, ...] = ()
    excluded_games: tuple[str, ...] = ()
    include_forced: bool = False

    def __post_init__(self):
        if not self.logs:
            raise ValueError("config needs at least one input log")
        if self.log_format not in LOG_FORMATS:
            raise ValueError(f"log_format must be one of {LOG_FORMATS}")
        if self.win_model not in WIN_MODELS:
            raise ValueError(f"win_model must be one of {WIN_MODELS}")
        if self.log_format == "pluribus-raw" and self.alias_map is None:
            raise ValueError(
                "raw logs use rotating display names; supply alias_map "
                "with a name-to-id JSON object"
            )

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["logs"] = list(self.logs)
        out["excluded_players"] = list(self.excluded_players)
        out["excluded_games"] = list(self.excluded_games)
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        data = dict(raw)
        for key in ("logs", "excluded_players", "excluded_games"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def _derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# artifact serialization

def decision_to_dict(d: PreflopDecision) -> dict:
    return dataclasses.asdict(d)


def decision_from_dict(raw: Mapping) -> PreflopDecision:
    return PreflopDecision(**raw)


def situation_to_dict(s: ChoiceSituation) -> dict:
    out = decision_to_dict(s.decision)
    out["gamble"] = {
        "play": [[p, v] for p, v in s.gamble.play],
        "fold": [[p, v] for p, v in s.gamble.fold],
    }
    out["gamble_class"] = s.gamble_class
    return out


def situation_from_dict(raw: Mapping) -> ChoiceSituation:
    data = dict(raw)
    gamble = data.pop("gamble")
    cls = data.pop("gamble_class")
    return ChoiceSituation(
        decision=decision_from_dict(data),
        gamble=Gamble(
            play=tuple((float(p), float(v)) for p, v in gamble["play"]),
            fold=tuple((float(p), float(v)) for p, v in gamble["fold"]),
        ),
        gamble_class=cls,
    )


@dataclass(frozen=True)
class FitSummary:
    """Scalar view of a stored fit; start-level diagnostics stay in the
    file and are not rehydrated."""

    omega: float
    lam: float
    omega_std: float
    lam_std: float
    n_decisions: int
    n_valid: int


def fit_to_dict(fit: RumFit) -> dict:
    return {
        "omega": fit.omega,
        "lam": fit.lam,
        "omega_std": fit.omega_std,
        "lam_std": fit.lam_std,
        "n_decisions": fit.n_decisions,
        "n_valid": fit.n_valid,
        "sampled_indices": list(fit.sampled_indices),
        "config": dataclasses.asdict(fit.config),
        "starts": [dataclasses.asdict(s) for s in fit.starts],
    }


def fit_from_dict(raw: Mapping) -> FitSummary:
    return FitSummary(
        omega=float(raw["omega"]),
        lam=float(raw["lam"]),
        omega_std=float(raw["omega_std"]),
        lam_std=float(raw["lam_std"]),
        n_decisions=int(raw["n_decisions"]),
        n_valid=int(raw["n_valid"]),
    )


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(_dump_json(row) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _csv_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_field(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# stages

def ingest_logs(
    paths: Sequence[str],
    log_format: str,
    alias_map_path: str | None,
) -> ParseResult:
    """Parse one or more hand logs and normalize player names."""
    if log_format not in LOG_FORMATS:
        raise ValueError(f"unknown format {log_format!r}; expected one of {LOG_FORMATS}")
    if log_format == "pluribus-raw" and alias_map_path is None:
        raise ValueError(
            "raw logs use rotating display names; supply an alias map "
            "(JSON object of name -> canonical id) via --alias-map"
        )
    records: list[HandRecord] = []
    diagnostics = []
    for path in paths:
        text = Path(path).read_text()
        game_id = Path(path).stem
        result = parse_hand_log(text, format=log_format, game_id=game_id)
        records.extend(result.records)
        diagnostics.extend(result.diagnostics)
    if alias_map_path is not None:
        alias = AliasMap.from_json(Path(alias_map_path).read_text())
        records = normalize_aliases(records, alias)
    diagnostics.extend(validate_hands(records))
    return ParseResult(records=tuple(records), diagnostics=tuple(diagnostics))


def extract_decisions(
    records: Sequence[HandRecord],
    excluded_players: Sequence[str] = (),
    excluded_games: Sequence[str] = (),
) -> list[PreflopDecision]:
    """Pre-flop decisions with trigger states and pooled agent labels."""
    kept = [r for r in records if r.game_id not in set(excluded_games)]
    decisions = extract_preflop_decisions(kept)
    dropped = set(excluded_players)
    decisions = [d for d in decisions if d.player_id not in dropped]
    return pool_humans(label_trigger_states(decisions))


def fit_outcome_models(decisions: Sequence[PreflopDecision], kind: str, seed: int):
    win_model = fit_win_model(decisions, WinConfig(kind=kind, seed=seed))
    payoff_models = fit_payoff_models(decisions)
    raw = pooled_raw_payoffs(decisions, win_model, payoff_models)
    norm = NormalizationSpec.fit(raw)
    return win_model, payoff_models, norm


def build_situations(
    decisions: Sequence[PreflopDecision],
    win_model,
    payoff_models,
    norm: NormalizationSpec,
    include_forced: bool = False,
) -> tuple[list[ChoiceSituation], dict]:
    """Pair each usable decision with its monetary gamble.

    Rows without a strength rank never enter models; forced blinds are
    excluded unless requested because no choice was made.
    """
    counter = ClampCounter()
    situations = []
    n_unranked = n_forced = 0
    for d in decisions:
        if d.sklansky is None:
            n_unranked += 1
            continue
        if d.forced and not include_forced:
            n_forced += 1
            continue
        gamble = build_gamble(d, win_model, payoff_models, norm, counter)
        situations.append(ChoiceSituation.from_decision(d, gamble))
    notes = {
        "n_decisions": len(decisions),
        "n_unranked": n_unranked,
        "n_forced_excluded": n_forced,
        "n_situations": len(situations),
        "n_payoffs_clamped": counter.count,
    }
    return situations, notes


def _group(situations: Sequence[ChoiceSituation], agent: str, state: str):
    return [
        s
        for s in situations
        if s.decision.agent == agent and s.decision.trigger == state
    ]


def fit_states(
    situations: Sequence[ChoiceSituation],
    config: RunConfig,
) -> dict[tuple[str, str], RumFit]:
    """One maximum-likelihood fit per populated agent-state group."""
    fits = {}
    for agent in AGENTS:
        for state in TRIGGER_STATES:
            group = _group(situations, agent, state)
            if not group:
                continue
            pairs = choice_pairs(group)
            fit_config = FitConfig(
                n_starts=config.n_starts,
                sample_size=config.valid_sample,
                seed=_derive_seed(config.seed, f"rum:{agent}:{state}"),
            )
            fits[(agent, state)] = fit_rum(
                [g for g, _ in pairs], [y for _, y in pairs], fit_config
            )
    if not fits:
        raise ValueError("no populated agent-state group to fit")
    return fits


def _comparison_plan(fits: Mapping[tuple[str, str], object]):
    plan = []
    for agent in AGENTS:
        for state in ("post_loss", "post_win"):
            a, b = (agent, state), (agent, "neutral")
            if a in fits and b in fits:
                plan.append((f"{agent}:{state}-vs-neutral", a, b))
    for state in TRIGGER_STATES:
        a, b = (AGENTS[0], state), (AGENTS[1], state)
        if a in fits and b in fits:
            plan.append((f"{state}:{AGENTS[0]}-vs-{AGENTS[1]}", a, b))
    return plan


def analyze_situations(
    situations: Sequence[ChoiceSituation],
    fits: Mapping[tuple[str, str], FitSummary | RumFit],
    seed: int,
    n_boot: int = 500,
    refit_starts: int = 4,
    min_comparison_n: int = 50,
) -> dict:
    """All report tables plus bootstrap comparisons.

    Comparisons whose groups are smaller than ``min_comparison_n`` are
    skipped and listed under ``skipped_comparisons``: tiny groups make
    bootstrap refits fail more often than the failure budget allows.
    """
    params = {k: f for k, f in fits.items()}
    comparisons: list[ComparisonResult] = []
    skipped = []
    for label, key_a, key_b in _comparison_plan(fits):
        group_a = choice_pairs(_group(situations, *key_a))
        group_b = choice_pairs(_group(situations, *key_b))
        if min(len(group_a), len(group_b)) < min_comparison_n:
            skipped.append(
                {
                    "comparison": label,
                    "reason": "group below min_comparison_n",
                    "n_a": len(group_a),
                    "n_b": len(group_b),
                }
            )
            continue
        boot = BootstrapConfig(
            n_boot=n_boot,
            seed=_derive_seed(seed, f"boot:{label}"),
            refit_starts=refit_starts,
        )
        res_omega, res_lam = compare_parameters(
            fits[key_a],
            fits[key_b],
            group_a,
            group_b,
            boot,
            labels=("/".join(key_a), "/".join(key_b)),
        )
        comparisons.append((label, res_omega))
        comparisons.append((label, res_lam))
    return {
        "table1": rationality_table(situations, params),
        "table4": eu_diff_table(situations, params),
        "fold_rates": fold_rate_report(situations),
        "fig4_hist": utility_gap_histogram(situations, params),
        "comparisons": comparisons,
        "skipped_comparisons": skipped,
    }


# ---------------------------------------------------------------------------
# report files

def _fit_order(fits: Mapping[tuple[str, str], object]):
    for agent in AGENTS:
        for state in TRIGGER_STATES:
            if (agent, state) in fits:
                yield (agent, state)


def write_reports(
    out_dir: Path,
    analysis: dict,
    fits: Mapping[tuple[str, str], FitSummary | RumFit],
) -> None:
    write_csv(
        out_dir / "table1.csv",
        (
            "agent",
            "trigger",
            "gamble_class",
            "n_rational_play",
            "n_irrational_play",
            "n_rational_fold",
            "n_irrational_fold",
            "prop_play",
            "prop_fold",
        ),
        [
            (
                c.agent,
                c.trigger,
                c.gamble_class,
                c.n_rational_play,
                c.n_irrational_play,
                c.n_rational_fold,
                c.n_irrational_fold,
                c.prop_play,
                c.prop_fold,
            )
            for c in analysis["table1"]
        ],
    )
    write_csv(
        out_dir / "table4.csv",
        ("agent", "trigger", "gamble_class", "n", "mean_gap"),
        [
            (c.agent, c.trigger, c.gamble_class, c.n, c.mean_gap)
            for c in analysis["table4"]
        ],
    )
    write_csv(
        out_dir / "table5.csv",
        ("agent", "state", "omega", "omega_std", "lam", "lam_std", "n_decisions", "n_valid"),
        [
            (
                agent,
                state,
                fits[(agent, state)].omega,
                fits[(agent, state)].omega_std,
                fits[(agent, state)].lam,
                fits[(agent, state)].lam_std,
                fits[(agent, state)].n_decisions,
                fits[(agent, state)].n_valid,
            )
            for agent, state in _fit_order(fits)
        ],
    )
    write_csv(
        out_dir / "comparisons.csv",
        (
            "comparison",
            "parameter",
            "group_a",
            "group_b",
            "estimate_a",
            "estimate_b",
            "delta",
            "ratio",
            "p_value",
            "method",
            "n_boot",
            "n_failed",
        ),
        [
            (
                label,
                r.parameter,
                r.group_a,
                r.group_b,
                r.estimate_a,
                r.estimate_b,
                r.delta,
                r.ratio,
                r.p_value,
                r.method,
                r.n_boot,
                r.n_failed,
            )
            for label, r in analysis["comparisons"]
        ],
    )
    write_csv(
        out_dir / "fold_rates.csv",
        (
            "agent",
            "trigger",
            "gamble_class",
            "n",
            "n_fold",
            "fold_rate",
            "z_vs_neutral",
            "p_vs_neutral",
            "significant",
        ),
        [
            (
                c.agent,
                c.trigger,
                c.gamble_class,
                c.n,
                c.n_fold,
                c.fold_rate,
                c.z_vs_neutral,
                c.p_vs_neutral,
                c.significant,
            )
            for c in analysis["fold_rates"]
        ],
    )
    write_csv(
        out_dir / "fig4_hist.csv",
        ("agent", "lo", "hi", "kind", "n_rational", "n_irrational"),
        [
            (b.agent, b.lo, b.hi, b.kind, b.n_rational, b.n_irrational)
            for b in analysis["fig4_hist"]
        ],
    )


# ---------------------------------------------------------------------------
# manifest and the full run

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    out_dir: Path,
    status: str,
    failed_stage: str | None = None,
    error: str | None = None,
) -> dict:
    """Hash every file under the output directory into manifest.json."""
    artifacts = []
    for path in sorted(out_dir.rglob("*")):
        if not path.is_file() or path.name == "manifest.json":
            continue
        rel = path.relative_to(out_dir).as_posix()
        artifacts.append(
            {"path": rel, "sha256": _sha256(path), "bytes": path.stat().st_size}
        )
    manifest = {
        "status": status,
        "failed_stage": failed_stage,
        "error": error,
        "artifacts": artifacts,
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest


def _move_into_failed(out_dir: Path) -> None:
    failed = out_dir / "failed"
    failed.mkdir(parents=True, exist_ok=True)
    for entry in sorted(out_dir.iterdir()):
        if entry.name in ("failed", "manifest.json"):
            continue
        shutil.move(str(entry), str(failed / entry.name))


def _exit_code(stage: str, exc: Exception) -> int:
    """2 for data problems, 3 for numerical failures."""
    if isinstance(
        exc,
        (RumFitError, BootstrapError, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError),
    ):
        return 3
    if isinstance(exc, (ParseError, OSError, json.JSONDecodeError, KeyError)):
        return 2
    if stage in ("fit-outcomes", "build-gambles", "fit-rum"):
        return 3
    return 2


def run_pipeline(config: RunConfig) -> tuple[int, Path]:
    """Execute every stage, returning (exit code, output directory).

    On failure the partial outputs move under ``failed/`` and the
    manifest records the stage and error; the exit code is 2 for data
    errors and 3 for numerical failures.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = "config"
    try:
        echo = config.as_dict()
        # the echo omits the directory it sits in so reruns into different
        # locations stay byte-identical
        del echo["out_dir"]
        write_json(out_dir / "config.json", echo)

        stage = "ingest"
        parsed = ingest_logs(config.logs, config.log_format, config.alias_map)
        (out_dir / "hands.jsonl").write_text(emit_hand_log(parsed.records))
        write_json(
            out_dir / "ingest_diagnostics.json",
            [dataclasses.asdict(d) for d in parsed.diagnostics],
        )

        stage = "extract"
        decisions = extract_decisions(
            parsed.records, config.excluded_players, config.excluded_games
        )
        if not decisions:
            raise ValueError("no decisions extracted; check logs and exclusions")
        write_jsonl(out_dir / "decisions.jsonl", (decision_to_dict(d) for d in decisions))

        stage = "fit-outcomes"
        win_model, payoff_models, norm = fit_outcome_models(
            decisions, config.win_model, _derive_seed(config.seed, "win")
        )
        write_json(out_dir / "models.json", serialize_models(win_model, payoff_models, norm))

        stage = "build-gambles"
        situations, notes = build_situations(
            decisions, win_model, payoff_models, norm, config.include_forced
        )
        write_jsonl(out_dir / "gambles.jsonl", (situation_to_dict(s) for s in situations))
        write_json(out_dir / "gamble_notes.json", notes)

        stage = "fit-rum"
        fits = fit_states(situations, config)
        for (agent, state), fit in fits.items():
            write_json(
                out_dir / "fits" / f"fit_{agent.lower()}_{state}.json", fit_to_dict(fit)
            )

        stage = "analyze"
        analysis = analyze_situations(
            situations,
            fits,
            seed=config.seed,
            n_boot=config.bootstrap,
            refit_starts=config.refit_starts,
            min_comparison_n=config.min_comparison_n,
        )
        write_reports(out_dir, analysis, fits)
        write_json(out_dir / "analysis_notes.json", analysis["skipped_comparisons"])
    except Exception as exc:
        _move_into_failed(out_dir)
        write_manifest(out_dir, status="failed", failed_stage=stage, error=str(exc))
        logger.error("stage %s failed: %s", stage, exc)
        return _exit_code(stage, exc), out_dir
    write_manifest(out_dir, status="ok")
    return 0, out_dir
