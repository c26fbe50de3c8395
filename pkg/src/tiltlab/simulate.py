"""Synthetic agents with known risk preferences.

Generates abstract play-or-fold gambles, simulates softmax agents on
them, and refits the estimator on its own output.  Recovery of the
ground-truth (omega, lambda) pairs is the end-to-end certificate that
the fitting machinery works; nothing here deals cards or knows poker.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rum import (
    FitConfig,
    Gamble,
    RumFit,
    RumParams,
    choice_probability,
    classify_gamble,
    fit_rum,
)

_STATES = ("neutral", "post_loss", "post_win")

_MAX_DRAW_ATTEMPTS = 100


@dataclass(frozen=True)
class AgentProfile:
    """Ground-truth preference parameters, one pair per trigger state."""

    neutral: RumParams
    post_loss: RumParams
    post_win: RumParams

    def params_for(self, state: str) -> RumParams:
        if state not in _STATES:
            raise ValueError(f"unknown trigger state {state!r}")
        return getattr(self, state)

    def as_dict(self) -> dict:
        return {
            state: {"omega": p.omega, "lam": p.lam}
            for state in _STATES
            for p in [getattr(self, state)]
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AgentProfile":
        missing = [s for s in _STATES if s not in raw]
        if missing:
            raise ValueError(f"profile missing states: {missing}")
        return cls(
            **{
                state: RumParams(
                    omega=float(raw[state]["omega"]), lam=float(raw[state]["lam"])
                )
                for state in _STATES
            }
        )


@dataclass(frozen=True)
class GambleConfig:
    """Distribution of generated gambles.

    ``payoff_range`` anchors the fold payoff; play payoffs are scaled
    off that anchor, so they can run somewhat above the top of the
    range but never below its floor, which keeps every payoff at or
    above the normalized minimum.  Mixed gambles are built to switch
    preference at a crossing drawn from ``crossing_range``: the fold
    payoff is set to the power mean of the play payoffs at the crossing
    exponent, which makes the agent exactly indifferent there.  The two
    log-spread windows control how sharply the utility gap moves with
    risk aversion around that crossing (wide spreads pin down omega,
    narrow ones leave decisions noisy enough to reveal lambda).
    """

    n: int = 1000
    mix_mixed: float = 0.21
    mix_risk_dominant: float = 0.23
    mix_safe_dominant: float = 0.56
    payoff_range: tuple[float, float] = (1.0, 4.0)
    crossing_range: tuple[float, float] = (-1.0, 2.0)
    soft_log_spread: tuple[float, float] = (0.12, 0.7)
    sharp_log_spread: tuple[float, float] = (0.7, 2.2)
    soft_fraction: float = 0.5
    play_prob_range: tuple[float, float] = (0.35, 0.65)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        mix = (self.mix_mixed, self.mix_risk_dominant, self.mix_safe_dominant)
        if any(m < 0 for m in mix):
            raise ValueError("class mix fractions must be nonnegative")
        if abs(sum(mix) - 1.0) > 1e-9:
            raise ValueError("class mix must sum to 1")
        lo, hi = self.payoff_range
        if not (0.0 < lo < hi):
            raise ValueError("payoff_range must satisfy 0 < lo < hi")
        if self.crossing_range[0] >= self.crossing_range[1]:
            raise ValueError("crossing_range must be increasing")
        for name in ("soft_log_spread", "sharp_log_spread"):
            a, b = getattr(self, name)
            if not (0.0 < a < b):
                raise ValueError(f"{name} must satisfy 0 < lo < hi")
        if not 0.0 <= self.soft_fraction <= 1.0:
            raise ValueError("soft_fraction must lie in [0, 1]")
        pa, pb = self.play_prob_range
        if not (0.0 < pa <= pb < 1.0):
            raise ValueError("play_prob_range must lie strictly inside (0, 1)")

    def class_counts(self) -> dict[str, int]:
        """Integer class counts; rounding remainder goes to the largest class."""
        mix = {
            "mixed": self.mix_mixed,
            "risk_dominant": self.mix_risk_dominant,
            "safe_dominant": self.mix_safe_dominant,
        }
        counts = {k: int(round(self.n * v)) for k, v in mix.items()}
        slack = self.n - sum(counts.values())
        counts[max(mix, key=mix.get)] += slack
        return counts


#: Gamble distribution used by the recovery harness.  Heavier on mixed
#: gambles than the default, with crossings covering the plausible
#: omega range, chosen so both parameters stay identified from a few
#: thousand decisions even when lambda is in the hundreds.
RECOVERY_CONFIG = GambleConfig(
    mix_mixed=0.50,
    mix_risk_dominant=0.20,
    mix_safe_dominant=0.30,
)


def _draw_mixed(rng: np.random.Generator, cfg: GambleConfig) -> Gamble:
    lo, hi = cfg.payoff_range
    v_lose = rng.uniform(lo, lo + 0.17 * (hi - lo))
    if rng.random() < cfg.soft_fraction:
        spread = rng.uniform(*cfg.soft_log_spread)
    else:
        spread = rng.uniform(*cfg.sharp_log_spread)
    v_win = v_lose * math.exp(spread)
    p = rng.uniform(*cfg.play_prob_range)
    crossing = rng.uniform(*cfg.crossing_range)
    eps = 1.0 - crossing
    if abs(eps) >= 1e-6:
        v_fold = (p * v_win**eps + (1.0 - p) * v_lose**eps) ** (1.0 / eps)
    else:
        v_fold = math.exp(p * math.log(v_win) + (1.0 - p) * math.log(v_lose))
    return Gamble(play=((p, v_win), (1.0 - p, v_lose)), fold=((1.0, v_fold),))


def _draw_risk_dominant(rng: np.random.Generator, cfg: GambleConfig) -> Gamble:
    lo, hi = cfg.payoff_range
    v_fold = rng.uniform(lo, lo + 0.5 * (hi - lo))
    v_lose = v_fold * rng.uniform(1.02, 1.4)
    v_win = v_lose * rng.uniform(1.05, 1.8)
    p = rng.uniform(0.2, 0.8)
    return Gamble(play=((p, v_win), (1.0 - p, v_lose)), fold=((1.0, v_fold),))


def _draw_safe_dominant(rng: np.random.Generator, cfg: GambleConfig) -> Gamble:
    lo, hi = cfg.payoff_range
    v_fold = rng.uniform(lo + 0.2 * (hi - lo), hi)
    # position the play payoffs between the range floor and the fold
    # payoff so nothing drops below the normalized minimum
    v_win = lo + (v_fold - lo) * rng.uniform(0.6, 0.98)
    v_lose = lo + (v_win - lo) * rng.uniform(0.6, 0.98)
    p = rng.uniform(0.2, 0.8)
    return Gamble(play=((p, v_win), (1.0 - p, v_lose)), fold=((1.0, v_fold),))


_RECIPES = {
    "mixed": _draw_mixed,
    "risk_dominant": _draw_risk_dominant,
    "safe_dominant": _draw_safe_dominant,
}


def generate_gambles(config: GambleConfig, seed: int) -> list[Gamble]:
    """Draw ``config.n`` gambles with the requested class mix.

    Each draw is rebuilt until ``classify_gamble`` confirms the class
    its recipe targets, so the realized mix matches the integer class
    counts exactly.  Classes are interleaved in random order.  The
    output is deterministic for a given (config, seed).
    """
    rng = np.random.default_rng(seed)
    kinds: list[str] = []
    for kind, count in config.class_counts().items():
        kinds.extend([kind] * count)
    kinds = [kinds[i] for i in rng.permutation(len(kinds))]
    gambles: list[Gamble] = []
    for kind in kinds:
        recipe = _RECIPES[kind]
        for _ in range(_MAX_DRAW_ATTEMPTS):
            g = recipe(rng, config)
            if classify_gamble(g) == kind:
                gambles.append(g)
                break
        else:
            raise RuntimeError(f"could not construct a {kind} gamble")
    return gambles


@dataclass(frozen=True)
class SynthDecision:
    """One simulated play-or-fold choice; ``y`` is 1 when the agent plays."""

    gamble: Gamble
    state: str
    y: int

    def as_dict(self) -> dict:
        return {
            "play": [list(o) for o in self.gamble.play],
            "fold": [list(o) for o in self.gamble.fold],
            "state": self.state,
            "y": self.y,
        }


def simulate_agent(
    gambles: Sequence[Gamble],
    profile: AgentProfile,
    states: Sequence[str],
    seed: int,
) -> list[SynthDecision]:
    """Sample one choice per gamble from the softmax rule.

    ``states[i]`` selects which of the profile's parameter pairs
    governs gamble ``i``.  Deterministic for a given seed.
    """
    if len(states) != len(gambles):
        raise ValueError(
            f"got {len(gambles)} gambles but {len(states)} states"
        )
    params = [profile.params_for(s) for s in states]
    rng = np.random.default_rng(seed)
    draws = rng.random(len(gambles))
    out = []
    for g, state, pr, u in zip(gambles, states, params, draws):
        p_play, _ = choice_probability(g, pr)
        out.append(SynthDecision(gamble=g, state=state, y=int(u < p_play)))
    return out


@dataclass(frozen=True)
class RecoveryRow:
    """Truth against estimate for one trigger state."""

    state: str
    true_omega: float
    true_lam: float
    est_omega: float
    est_lam: float
    omega_error: float
    lam_rel_error: float
    n_decisions: int
    fit: RumFit


@dataclass(frozen=True)
class RecoveryReport:
    seed: int
    rows: tuple[RecoveryRow, ...]

    def row_for(self, state: str) -> RecoveryRow:
        for row in self.rows:
            if row.state == state:
                return row
        raise KeyError(state)


def _state_seeds(seed: int, n_states: int) -> np.ndarray:
    # Three independent 32-bit subseeds per state (gambles, choices,
    # fit starts), derived from the experiment seed in state order.
    return np.random.SeedSequence(seed).generate_state(3 * n_states)


def recovery_experiment(
    truth: AgentProfile,
    n_per_state: int,
    seed: int,
    config: GambleConfig | None = None,
    fit_config: FitConfig | None = None,
    states: Sequence[str] = _STATES,
    n_jobs: int = 1,
) -> RecoveryReport:
    """Generate, simulate, and refit each trigger state independently.

    Reports the estimation error against the known truth.  Fit
    failures propagate; a caller probing a pathological design is
    supposed to see them.
    """
    if n_per_state < 1000:
        raise ValueError("recovery needs at least 1,000 decisions per state")
    bad = [s for s in states if s not in _STATES]
    if bad:
        raise ValueError(f"unknown trigger states: {bad}")
    base = config if config is not None else RECOVERY_CONFIG
    gamble_cfg = dataclasses.replace(base, n=n_per_state)
    if fit_config is None:
        fit_config = FitConfig(n_starts=32, sample_size=32)
    subseeds = _state_seeds(seed, len(states))
    rows = []
    for i, state in enumerate(states):
        g_seed, c_seed, f_seed = (int(s) for s in subseeds[3 * i : 3 * i + 3])
        gambles = generate_gambles(gamble_cfg, g_seed)
        decisions = simulate_agent(gambles, truth, [state] * len(gambles), c_seed)
        ys = [d.y for d in decisions]
        fit = fit_rum(
            gambles,
            ys,
            dataclasses.replace(fit_config, seed=f_seed),
            n_jobs=n_jobs,
        )
        true_p = truth.params_for(state)
        rows.append(
            RecoveryRow(
                state=state,
                true_omega=true_p.omega,
                true_lam=true_p.lam,
                est_omega=fit.omega,
                est_lam=fit.lam,
                omega_error=fit.omega - true_p.omega,
                lam_rel_error=fit.lam / true_p.lam - 1.0 if true_p.lam > 0 else math.inf,
                n_decisions=len(ys),
                fit=fit,
            )
        )
    return RecoveryReport(seed=seed, rows=tuple(rows))
