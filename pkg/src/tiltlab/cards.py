"""Card parsing and pre-flop hand strength groups.

Hole-card pairs collapse to 169 classes (pair, suited, offsuit) and
each class maps to a strength group from 1 (strongest) to 9 (weakest).
Groups 1 through 8 are the classic Sklansky-Malmuth hand groups; group
9 is every hand the published groupings leave unranked.
"""

from __future__ import annotations

from dataclasses import dataclass

RANKS = "23456789TJQKA"
SUITS = "cdhs"


@dataclass(frozen=True, order=True)
class Card:
    rank: str
    suit: str

    def __post_init__(self) -> None:
        if self.rank not in RANKS:
            raise ValueError(f"bad card rank {self.rank!r}")
        if self.suit not in SUITS:
            raise ValueError(f"bad card suit {self.suit!r}")

    @property
    def rank_value(self) -> int:
        return RANKS.index(self.rank)

    def __str__(self) -> str:
        return self.rank + self.suit


def parse_card(text: str) -> Card:
    """Parse two-character card notation such as ``As`` or ``7c``."""
    if len(text) != 2:
        raise ValueError(f"bad card {text!r}")
    return Card(rank=text[0].upper(), suit=text[1].lower())


_GROUPS: dict[int, tuple[str, ...]] = {
    1: ("AA", "KK", "QQ", "JJ", "AKs"),
    2: ("TT", "AQs", "AJs", "KQs", "AKo"),
    3: ("99", "JTs", "QJs", "KJs", "ATs", "AQo"),
    4: ("T9s", "KQo", "88", "QTs", "98s", "J9s", "AJo", "KTs"),
    5: (
        "77", "87s", "Q9s", "T8s", "KJo", "QJo", "JTo", "76s", "97s",
        "A9s", "A8s", "A7s", "A6s", "A5s", "A4s", "A3s", "A2s", "65s",
    ),
    6: ("66", "ATo", "55", "86s", "KTo", "QTo", "54s", "K9s", "J8s", "75s"),
    7: (
        "44", "J9o", "64s", "T9o", "53s", "33", "98o", "43s", "22",
        "K8s", "K7s", "K6s", "K5s", "K4s", "K3s", "K2s", "T7s", "Q8s",
    ),
    8: (
        "87o", "A9o", "Q9o", "76o", "42s", "32s", "96s", "85s", "J8o",
        "J7s", "65o", "54o", "74s", "K9o", "T8o",
    ),
}

_GROUP_OF_CLASS: dict[str, int] = {
    cls: group for group, classes in _GROUPS.items() for cls in classes
}

WEAKEST_GROUP = 9


def hand_class(first: Card, second: Card) -> str:
    """Canonical class label for a hole-card pair, e.g. ``AKs`` or ``72o``."""
    if first == second:
        raise ValueError(f"duplicate card {first}")
    hi, lo = sorted((first, second), key=lambda c: c.rank_value, reverse=True)
    if hi.rank == lo.rank:
        return hi.rank + lo.rank
    return hi.rank + lo.rank + ("s" if hi.suit == lo.suit else "o")


def sklansky_rank(first: Card, second: Card) -> int:
    """Strength group 1 (strongest) to 9 (weakest) for a hole-card pair."""
    return _GROUP_OF_CLASS.get(hand_class(first, second), WEAKEST_GROUP)
