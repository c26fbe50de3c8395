"""Pre-flop decision extraction and trigger-state labeling.

Each (player, hand) pair yields at most one modeled choice: the
player's final pre-flop action, with fold on one side and every
continuing action (check, call, bet, raise, all-in) on the other.
Features are frozen at the moment that final action is taken.  A big
blind who wins because everyone folds never chose anything; such rows
are emitted with ``forced=True`` so downstream fitting can drop them
without losing the accounting.

Trigger states look exactly one hand back within the same game: a win
of a pot holding more than the two blinds marks the next hand
``post_win``, a loss strictly exceeding the big blind marks it
``post_loss``, and everything else (including the first hand of a
game) is ``neutral``.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Sequence

from .cards import sklansky_rank
from .hands import PLURIBUS, HandRecord

logger = logging.getLogger(__name__)

TRIGGER_STATES = ("neutral", "post_loss", "post_win")

AGENTS = (PLURIBUS, "Human")


@dataclass(frozen=True)
class PreflopDecision:
    """One play-or-fold choice with its decision-time context."""

    player_id: str
    game_id: str
    hand_index: int
    seat: int
    sklansky: int | None
    y: str
    preflop_pot: float
    own_contribution: float
    n_active: int
    outcome: str
    amount: float
    forced: bool
    hand_pot: float
    small_blind: float
    big_blind: float
    agent: str | None = None
    trigger: str | None = None

    def __post_init__(self) -> None:
        if self.y not in ("play", "fold"):
            raise ValueError(f"y must be play or fold, got {self.y!r}")
        if self.outcome not in ("won", "lost"):
            raise ValueError(f"outcome must be won or lost, got {self.outcome!r}")
        if self.sklansky is not None and not 1 <= self.sklansky <= 9:
            raise ValueError(f"sklansky rank {self.sklansky} outside 1..9")
        if not 1 <= self.seat <= 6:
            raise ValueError(f"seat {self.seat} outside 1..6")
        if self.own_contribution < 0 or self.own_contribution > self.preflop_pot:
            raise ValueError(
                f"own contribution {self.own_contribution:g} outside "
                f"[0, {self.preflop_pot:g}]"
            )
        if self.trigger is not None and self.trigger not in TRIGGER_STATES:
            raise ValueError(f"unknown trigger {self.trigger!r}")
        if self.agent is not None and self.agent not in AGENTS:
            raise ValueError(f"unknown agent {self.agent!r}")


def _rank_or_none(rec: HandRecord, player: str) -> int | None:
    cards = rec.hole_cards.get(player)
    if cards is None:
        logger.warning(
            "hand %s/%s: no hole cards for %s; emitting decision without "
            "a strength rank",
            rec.game_id, rec.hand_index, player,
        )
        return None
    try:
        return sklansky_rank(*cards)
    except ValueError as exc:
        logger.warning(
            "hand %s/%s: bad hole cards for %s (%s); emitting decision "
            "without a strength rank",
            rec.game_id, rec.hand_index, player, exc,
        )
        return None


def extract_preflop_decisions(
    records: Sequence[HandRecord],
) -> list[PreflopDecision]:
    """One decision per (player, hand), features taken at the final action.

    Players with no pre-flop action (an uncontested big blind) come out
    flagged ``forced`` with end-of-round features.
    """
    out: list[PreflopDecision] = []
    for rec in records:
        preflop = rec.actions[0] if rec.actions else ()
        contrib = {p: rec.blind(p) for p in rec.seats}
        pot = sum(contrib.values())
        folded: set[str] = set()
        last: dict[str, tuple[float, float, int, str]] = {}
        for act in preflop:
            n_active = len(rec.seats) - len(folded)
            last[act.player] = (pot, contrib.get(act.player, 0.0), n_active, act.kind)
            pot += act.amount
            contrib[act.player] = contrib.get(act.player, 0.0) + act.amount
            if act.kind == "fold":
                folded.add(act.player)
        end_active = len(rec.seats) - len(folded)
        hand_pot = rec.pot_total
        for p in rec.players:
            if p in last:
                pot_then, own_then, n_active, kind = last[p]
                y = "fold" if kind == "fold" else "play"
                forced = False
            else:
                pot_then, own_then, n_active = pot, contrib[p], end_active
                y = "play"
                forced = True
            net = rec.net_result.get(p, 0.0)
            out.append(
                PreflopDecision(
                    player_id=p,
                    game_id=rec.game_id,
                    hand_index=rec.hand_index,
                    seat=rec.seats[p],
                    sklansky=_rank_or_none(rec, p),
                    y=y,
                    preflop_pot=pot_then,
                    own_contribution=own_then,
                    n_active=n_active,
                    outcome="won" if net > 0 else "lost",
                    amount=net,
                    forced=forced,
                    hand_pot=hand_pot,
                    small_blind=rec.small_blind,
                    big_blind=rec.big_blind,
                )
            )
    return out


def _trigger_from(prev: PreflopDecision) -> str:
    if prev.amount > 0 and prev.hand_pot > prev.small_blind + prev.big_blind:
        return "post_win"
    if prev.amount < -prev.big_blind:
        return "post_loss"
    return "neutral"


def label_trigger_states(
    decisions: Sequence[PreflopDecision],
) -> list[PreflopDecision]:
    """Set each decision's trigger from the same player's previous hand.

    The previous hand is hand_index - 1 within the same game; when that
    hand is absent (first hand, or a gap from skipped input) the label
    is neutral.  Labels never cross game boundaries.
    """
    by_key = {(d.player_id, d.game_id, d.hand_index): d for d in decisions}
    out = []
    for d in decisions:
        prev = by_key.get((d.player_id, d.game_id, d.hand_index - 1))
        trigger = "neutral" if prev is None else _trigger_from(prev)
        out.append(dataclasses.replace(d, trigger=trigger))
    return out


def pool_humans(decisions: Sequence[PreflopDecision]) -> list[PreflopDecision]:
    """Mark every non-bot player as the pooled Human agent."""
    return [
        dataclasses.replace(
            d, agent=PLURIBUS if d.player_id == PLURIBUS else "Human"
        )
        for d in decisions
    ]
