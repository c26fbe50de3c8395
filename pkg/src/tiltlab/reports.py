"""Observed-rationality tables, utility-gap summaries, fold-rate reports,
and bootstrap comparisons of fitted decision parameters."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .decisions import TRIGGER_STATES, PreflopDecision
from .rum import (
    GAMBLE_CLASSES,
    FitConfig,
    Gamble,
    RumParams,
    classify_gamble,
    utility_gap,
    _fit_single_start,
    _pack,
    _Packed,
)

__all__ = [
    "ChoiceSituation",
    "RationalityCell",
    "GapBin",
    "EuDiffCell",
    "FoldRateCell",
    "BootstrapConfig",
    "BootstrapError",
    "ComparisonResult",
    "BOOTSTRAP_METHOD",
    "rational_label",
    "rationality_table",
    "utility_gap_histogram",
    "eu_diff_table",
    "fold_rate_report",
    "compare_parameters",
    "choice_pairs",
]

BOOTSTRAP_METHOD = "hand-bootstrap-percentile-v1"


@dataclass(frozen=True)
class ChoiceSituation:
    """One labeled decision together with its monetary gamble."""

    decision: PreflopDecision
    gamble: Gamble
    gamble_class: str

    def __post_init__(self):
        if self.gamble_class not in GAMBLE_CLASSES:
            raise ValueError(f"unknown gamble class {self.gamble_class!r}")
        if self.decision.agent is None:
            raise ValueError("decision has no agent label; pool agents first")
        if self.decision.trigger is None:
            raise ValueError("decision has no trigger label; label states first")

    @classmethod
    def from_decision(cls, decision: PreflopDecision, gamble: Gamble) -> "ChoiceSituation":
        return cls(decision=decision, gamble=gamble, gamble_class=classify_gamble(gamble))

    @property
    def played(self) -> bool:
        return self.decision.y == "play"


def choice_pairs(situations: Sequence[ChoiceSituation]) -> list[tuple[Gamble, int]]:
    """(gamble, choice) rows in the form the fitting code consumes."""
    return [(s.gamble, 1 if s.played else 0) for s in situations]


def rational_label(situation: ChoiceSituation, omega: float) -> str:
    """Label a choice rational when the chosen option has the weakly
    greater expected utility at the given risk aversion; an exact tie
    makes either choice rational."""
    gap = utility_gap(situation.gamble, omega)
    if situation.played:
        return "rational" if gap >= 0.0 else "irrational"
    return "rational" if gap <= 0.0 else "irrational"


def _fit_lookup(
    situations: Sequence[ChoiceSituation],
    fits: Mapping[tuple[str, str], RumParams],
) -> None:
    needed = {(s.decision.agent, s.decision.trigger) for s in situations}
    missing = sorted(k for k in needed if k not in fits)
    if missing:
        raise ValueError(f"no fit supplied for agent/state groups: {missing}")


@dataclass(frozen=True)
class RationalityCell:
    """Choice-by-class counts for one agent, split by label."""

    agent: str
    trigger: str
    gamble_class: str
    n_rational_play: int
    n_irrational_play: int
    n_rational_fold: int
    n_irrational_fold: int
    prop_play: float
    prop_fold: float

    @property
    def n(self) -> int:
        return (
            self.n_rational_play
            + self.n_irrational_play
            + self.n_rational_fold
            + self.n_irrational_fold
        )


def rationality_table(
    situations: Sequence[ChoiceSituation],
    fits: Mapping[tuple[str, str], RumParams],
    trigger: str | None = None,
) -> list[RationalityCell]:
    """Count rational and irrational plays and folds per gamble class.

    Proportions are taken over each agent's decision count within the
    requested trigger scope (all states when ``trigger`` is None), so the
    class-by-choice proportions of one agent sum to 1.
    """
    if trigger is not None and trigger not in TRIGGER_STATES:
        raise ValueError(f"unknown trigger state {trigger!r}")
    _fit_lookup(situations, fits)
    agents = sorted({s.decision.agent for s in situations})
    scope = [s for s in situations if trigger is None or s.decision.trigger == trigger]
    counts: dict[tuple[str, str], list[int]] = {
        (a, c): [0, 0, 0, 0] for a in agents for c in GAMBLE_CLASSES
    }
    totals = Counter(s.decision.agent for s in scope)
    for s in scope:
        omega = fits[(s.decision.agent, s.decision.trigger)].omega
        rational = rational_label(s, omega) == "rational"
        slot = (0 if rational else 1) if s.played else (2 if rational else 3)
        counts[(s.decision.agent, s.gamble_class)][slot] += 1
    cells = []
    for agent in agents:
        total = totals[agent]
        for cls in GAMBLE_CLASSES:
            rp, ip, rf, nf = counts[(agent, cls)]
            cells.append(
                RationalityCell(
                    agent=agent,
                    trigger=trigger if trigger is not None else "all",
                    gamble_class=cls,
                    n_rational_play=rp,
                    n_irrational_play=ip,
                    n_rational_fold=rf,
                    n_irrational_fold=nf,
                    prop_play=(rp + ip) / total if total else 0.0,
                    prop_fold=(rf + nf) / total if total else 0.0,
                )
            )
    return cells


@dataclass(frozen=True)
class GapBin:
    """One histogram cell of play-minus-fold utility gaps."""

    agent: str
    lo: float
    hi: float
    kind: str  # low_mass | bin | high_mass
    n_rational: int
    n_irrational: int


def utility_gap_histogram(
    situations: Sequence[ChoiceSituation],
    fits: Mapping[tuple[str, str], RumParams],
    n_bins: int = 21,
    bound: float = 0.5,
) -> list[GapBin]:
    """Bin utility gaps per agent, splitting rational from irrational
    choices; gaps at or beyond ``±bound`` collapse to endpoint masses."""
    if n_bins < 1:
        raise ValueError("need at least one interior bin")
    if not bound > 0.0:
        raise ValueError("bound must be positive")
    _fit_lookup(situations, fits)
    agents = sorted({s.decision.agent for s in situations})
    width = 2.0 * bound / n_bins
    # row 0 is the low endpoint mass, rows 1..n_bins the interior bins,
    # row n_bins+1 the high endpoint mass
    table = {a: np.zeros((n_bins + 2, 2), dtype=int) for a in agents}
    for s in situations:
        omega = fits[(s.decision.agent, s.decision.trigger)].omega
        gap = utility_gap(s.gamble, omega)
        if gap <= -bound:
            row = 0
        elif gap >= bound:
            row = n_bins + 1
        else:
            row = 1 + min(n_bins - 1, int((gap + bound) / width))
        col = 0 if rational_label(s, omega) == "rational" else 1
        table[s.decision.agent][row, col] += 1
    bins: list[GapBin] = []
    for agent in agents:
        rows = table[agent]
        bins.append(GapBin(agent, -bound, -bound, "low_mass", int(rows[0, 0]), int(rows[0, 1])))
        for i in range(n_bins):
            bins.append(
                GapBin(
                    agent=agent,
                    lo=-bound + i * width,
                    hi=-bound + (i + 1) * width,
                    kind="bin",
                    n_rational=int(rows[i + 1, 0]),
                    n_irrational=int(rows[i + 1, 1]),
                )
            )
        bins.append(
            GapBin(agent, bound, bound, "high_mass", int(rows[n_bins + 1, 0]), int(rows[n_bins + 1, 1]))
        )
    return bins


@dataclass(frozen=True)
class EuDiffCell:
    """Mean utility gap for one agent, trigger state, and gamble class."""

    agent: str
    trigger: str
    gamble_class: str
    n: int
    mean_gap: float | None


def eu_diff_table(
    situations: Sequence[ChoiceSituation],
    fits: Mapping[tuple[str, str], RumParams],
) -> list[EuDiffCell]:
    """Mean play-minus-fold utility gap per agent, state, and class.

    Every cell of the grid is emitted; empty cells carry n = 0 and a
    null mean.
    """
    _fit_lookup(situations, fits)
    agents = sorted({s.decision.agent for s in situations})
    gaps: dict[tuple[str, str, str], list[float]] = {}
    for s in situations:
        omega = fits[(s.decision.agent, s.decision.trigger)].omega
        key = (s.decision.agent, s.decision.trigger, s.gamble_class)
        gaps.setdefault(key, []).append(utility_gap(s.gamble, omega))
    cells = []
    for agent in agents:
        for trig in TRIGGER_STATES:
            for cls in GAMBLE_CLASSES:
                vals = gaps.get((agent, trig, cls), [])
                cells.append(
                    EuDiffCell(
                        agent=agent,
                        trigger=trig,
                        gamble_class=cls,
                        n=len(vals),
                        mean_gap=float(np.mean(vals)) if vals else None,
                    )
                )
    return cells


@dataclass(frozen=True)
class FoldRateCell:
    """Fold proportion for one agent, trigger state, and gamble class,
    with a pooled two-proportion test against the agent's neutral cell."""

    agent: str
    trigger: str
    gamble_class: str
    n: int
    n_fold: int
    fold_rate: float | None
    z_vs_neutral: float | None
    p_vs_neutral: float | None
    significant: bool | None


def _two_proportion(x1: int, n1: int, x2: int, n2: int) -> tuple[float, float]:
    pooled = (x1 + x2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        return 0.0, 1.0
    z = (x1 / n1 - x2 / n2) / se
    return z, math.erfc(abs(z) / math.sqrt(2.0))


def fold_rate_report(
    situations: Sequence[ChoiceSituation],
    alpha: float = 0.05,
) -> list[FoldRateCell]:
    """Fold rates by agent, trigger state, and gamble class.

    Triggered cells are tested against the same agent and class in the
    neutral state with a pooled two-proportion z-test; the test fields
    are null for neutral cells and for pairs with an empty side.
    """
    agents = sorted({s.decision.agent for s in situations})
    tally: dict[tuple[str, str, str], list[int]] = {
        (a, t, c): [0, 0] for a in agents for t in TRIGGER_STATES for c in GAMBLE_CLASSES
    }
    for s in situations:
        cell = tally[(s.decision.agent, s.decision.trigger, s.gamble_class)]
        cell[0] += 1
        cell[1] += 0 if s.played else 1
    cells = []
    for agent in agents:
        for trig in TRIGGER_STATES:
            for cls in GAMBLE_CLASSES:
                n, n_fold = tally[(agent, trig, cls)]
                z = p = sig = None
                if trig != "neutral" and n > 0:
                    n0, f0 = tally[(agent, "neutral", cls)]
                    if n0 > 0:
                        z, p = _two_proportion(n_fold, n, f0, n0)
                        sig = p < alpha
                cells.append(
                    FoldRateCell(
                        agent=agent,
                        trigger=trig,
                        gamble_class=cls,
                        n=n,
                        n_fold=n_fold,
                        fold_rate=n_fold / n if n else None,
                        z_vs_neutral=z,
                        p_vs_neutral=p,
                        significant=sig,
                    )
                )
    return cells


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings for the hand-level bootstrap comparison."""

    n_boot: int = 500
    seed: int = 0
    refit_starts: int = 4
    jitter_scale: float = 0.35
    max_failure_rate: float = 0.2
    n_jobs: int = 1
    fit_config: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.n_boot < 200:
            raise ValueError("bootstrap needs at least 200 replicates")
        if self.refit_starts < 1:
            raise ValueError("need at least one refit start")
        if not 0.0 <= self.max_failure_rate < 1.0:
            raise ValueError("max_failure_rate must be in [0, 1)")


class BootstrapError(RuntimeError):
    """Too many bootstrap replicates failed to refit."""

    def __init__(self, message: str, n_failed: int, n_boot: int, statuses: Counter):
        super().__init__(message)
        self.n_failed = n_failed
        self.n_boot = n_boot
        self.statuses = statuses


@dataclass(frozen=True)
class ComparisonResult:
    """Bootstrap comparison of one parameter between two decision groups."""

    parameter: str
    group_a: str
    group_b: str
    estimate_a: float
    estimate_b: float
    delta: float
    ratio: float | None
    p_value: float
    method: str
    n_boot: int
    n_failed: int


def _take(data: _Packed, idx: np.ndarray) -> _Packed:
    return _Packed(
        data.p1[idx], data.l1[idx], data.p2[idx], data.l2[idx], data.lf[idx], data.y[idx]
    )


def _refit(
    data: _Packed,
    x_warm: np.ndarray,
    rng: np.random.Generator,
    config: BootstrapConfig,
) -> tuple[tuple[float, float] | None, tuple[str, ...]]:
    fc = config.fit_config
    lo_w, hi_w = fc.omega_bounds
    s_lo = math.log(fc.lam_bounds[0])
    s_hi = math.log(fc.lam_bounds[1])
    lo = np.array([lo_w + 1e-3 * (hi_w - lo_w), s_lo + 1e-3 * (s_hi - s_lo)])
    hi = np.array([hi_w - 1e-3 * (hi_w - lo_w), s_hi - 1e-3 * (s_hi - s_lo)])
    best = None
    statuses = []
    for j in range(config.refit_starts):
        x0 = x_warm if j == 0 else x_warm + rng.normal(0.0, config.jitter_scale, size=2)
        x0 = np.clip(x0, lo, hi)
        sr = _fit_single_start((j, x0, data, fc))
        statuses.append(sr.status)
        if sr.status == "valid" and (best is None or sr.nll < best.nll):
            best = sr
    if best is None:
        return None, tuple(statuses)
    return (best.omega, best.lam), tuple(statuses)


def _replicate(
    seed: int,
    data_a: _Packed,
    data_b: _Packed,
    x_a: np.ndarray,
    x_b: np.ndarray,
    config: BootstrapConfig,
):
    rng = np.random.default_rng(seed)
    n_a = data_a.y.size
    n_b = data_b.y.size
    sample_a = _take(data_a, rng.integers(0, n_a, size=n_a))
    sample_b = _take(data_b, rng.integers(0, n_b, size=n_b))
    est_a, st_a = _refit(sample_a, x_a, rng, config)
    est_b, st_b = _refit(sample_b, x_b, rng, config)
    return est_a, est_b, st_a, st_b


_BOOT_STATE: dict = {}


def _boot_init(state: dict) -> None:
    _BOOT_STATE.update(state)


def _boot_run(seed: int):
    return _replicate(
        seed,
        _BOOT_STATE["data_a"],
        _BOOT_STATE["data_b"],
        _BOOT_STATE["x_a"],
        _BOOT_STATE["x_b"],
        _BOOT_STATE["config"],
    )


def _percentile_p(deltas: np.ndarray) -> float:
    n = deltas.size
    n_le = int(np.sum(deltas <= 0.0))
    n_ge = int(np.sum(deltas >= 0.0))
    return min(1.0, 2.0 * (min(n_le, n_ge) + 1) / (n + 1))


def compare_parameters(
    fit_a,
    fit_b,
    decisions_a: Sequence[tuple[Gamble, int]],
    decisions_b: Sequence[tuple[Gamble, int]],
    config: BootstrapConfig | None = None,
    labels: tuple[str, str] = ("a", "b"),
) -> tuple[ComparisonResult, ComparisonResult]:
    """Bootstrap test of the risk-aversion and precision differences
    between two decision groups.

    Decisions are resampled with replacement within each group and
    refitted from starts jittered around the group's point estimate, so
    one replicate yields one delta for each parameter. Replicates run
    from per-index seeds and reduce in index order, which keeps results
    identical across worker counts. The two-sided p-value is the
    smoothed percentile of zero in the delta distribution.

    Raises BootstrapError when more than ``max_failure_rate`` of the
    replicates fail to refit on either side.
    """
    if config is None:
        config = BootstrapConfig()
    if not decisions_a or not decisions_b:
        raise ValueError("both decision groups must be non-empty")
    data_a = _pack([g for g, _ in decisions_a], [y for _, y in decisions_a])
    data_b = _pack([g for g, _ in decisions_b], [y for _, y in decisions_b])
    x_a = np.array([fit_a.omega, math.log(fit_a.lam)])
    x_b = np.array([fit_b.omega, math.log(fit_b.lam)])
    seeds = np.random.SeedSequence(config.seed).generate_state(config.n_boot, dtype=np.uint64)
    seed_list = [int(s) for s in seeds]
    if config.n_jobs > 1:
        state = {"data_a": data_a, "data_b": data_b, "x_a": x_a, "x_b": x_b, "config": config}
        with ProcessPoolExecutor(
            max_workers=config.n_jobs, initializer=_boot_init, initargs=(state,)
        ) as pool:
            outcomes = list(pool.map(_boot_run, seed_list, chunksize=16))
    else:
        outcomes = [_replicate(s, data_a, data_b, x_a, x_b, config) for s in seed_list]
    deltas_omega = []
    deltas_lam = []
    n_failed = 0
    failure_statuses: Counter = Counter()
    for est_a, est_b, st_a, st_b in outcomes:
        if est_a is None or est_b is None:
            n_failed += 1
            if est_a is None:
                failure_statuses.update(st_a)
            if est_b is None:
                failure_statuses.update(st_b)
            continue
        deltas_omega.append(est_a[0] - est_b[0])
        deltas_lam.append(est_a[1] - est_b[1])
    if n_failed > config.max_failure_rate * config.n_boot:
        raise BootstrapError(
            f"{n_failed} of {config.n_boot} bootstrap replicates failed to refit "
            f"(start statuses: {dict(failure_statuses)})",
            n_failed=n_failed,
            n_boot=config.n_boot,
            statuses=failure_statuses,
        )
    results = []
    for name, attr, deltas in (
        ("omega", "omega", np.asarray(deltas_omega)),
        ("lam", "lam", np.asarray(deltas_lam)),
    ):
        est_a = float(getattr(fit_a, attr))
        est_b = float(getattr(fit_b, attr))
        results.append(
            ComparisonResult(
                parameter=name,
                group_a=labels[0],
                group_b=labels[1],
                estimate_a=est_a,
                estimate_b=est_b,
                delta=est_a - est_b,
                ratio=est_a / est_b if est_b != 0.0 else None,
                p_value=_percentile_p(deltas),
                method=BOOTSTRAP_METHOD,
                n_boot=config.n_boot,
                n_failed=n_failed,
            )
        )
    return results[0], results[1]
