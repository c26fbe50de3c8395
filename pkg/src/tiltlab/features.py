"""Feature encoding for pre-flop outcome models.

The design is four dummy blocks laid end to end: hand strength rank
(9 cells), seat (6 cells), player-by-seat interactions (6 cells per
known player), and rank-by-seat interactions (54 cells).  Stack sizes
are deliberately absent; they reset every hand and carry no signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decisions import PreflopDecision

N_RANKS = 9
N_SEATS = 6


@dataclass(frozen=True)
class FeatureSchema:
    """Fixed encoding layout for one dataset.

    The player list is frozen when the schema is built; decisions by
    players outside it encode with an all-zero player block rather
    than failing, so a model can still score unseen players on the
    shared blocks.
    """

    players: tuple[str, ...]

    @classmethod
    def from_decisions(cls, decisions: Sequence[PreflopDecision]) -> "FeatureSchema":
        return cls(players=tuple(sorted({d.player_id for d in decisions})))

    @property
    def dim(self) -> int:
        return N_RANKS + N_SEATS + N_SEATS * len(self.players) + N_RANKS * N_SEATS

    def encode(self, decision: PreflopDecision) -> np.ndarray:
        if decision.sklansky is None:
            raise ValueError(
                f"decision {decision.game_id}/{decision.hand_index} for "
                f"{decision.player_id} has no strength rank"
            )
        x = np.zeros(self.dim)
        sk = decision.sklansky - 1
        seat = decision.seat - 1
        x[sk] = 1.0
        x[N_RANKS + seat] = 1.0
        base = N_RANKS + N_SEATS
        try:
            pi = self.players.index(decision.player_id)
            x[base + pi * N_SEATS + seat] = 1.0
        except ValueError:
            pass
        base += N_SEATS * len(self.players)
        x[base + sk * N_SEATS + seat] = 1.0
        return x


def build_features(decision: PreflopDecision, schema: FeatureSchema) -> np.ndarray:
    """Encode one decision under a fixed schema."""
    return schema.encode(decision)
