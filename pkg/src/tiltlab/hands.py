"""Hand-history ingestion.

Two input grammars are supported.  The canonical format is one JSON
object per line and is parsed strictly: a malformed interior line is a
hard error, only a malformed final line (a truncated tail from an
interrupted write) is downgraded to a diagnostic.  The raw six-player
ACPC log format (``STATE:...`` lines) is handled by a best-effort
adapter that reconstructs per-action chip amounts from the cumulative
raise-to notation and skips hands it cannot walk, with a diagnostic
for each skip.

Money is counted in chips.  A player's contribution to a hand is their
posted blind plus the sum of their action amounts, and ``pot_total``
is the sum of everyone's contributions; uncalled chips are not netted
back out of it (``net_result`` is authoritative for money won).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .cards import Card, parse_card

PLURIBUS = "Pluribus"

ACTION_KINDS = ("fold", "check", "call", "bet", "raise", "all-in")

FORMATS = ("canonical", "pluribus-raw")


class Action(NamedTuple):
    player: str
    kind: str
    amount: float


@dataclass(frozen=True)
class HandRecord:
    """One complete hand: seating, blinds, actions, and money flow."""

    game_id: str
    hand_index: int
    small_blind: float
    big_blind: float
    seats: dict[str, int]
    actions: tuple[tuple[Action, ...], ...]
    net_result: dict[str, float]
    hole_cards: dict[str, tuple[Card, Card]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for rnd in self.actions:
            for act in rnd:
                if act.kind not in ACTION_KINDS:
                    raise ValueError(f"unknown action kind {act.kind!r}")

    @property
    def players(self) -> tuple[str, ...]:
        return tuple(sorted(self.seats, key=self.seats.__getitem__))

    def blind(self, player: str) -> float:
        seat = self.seats.get(player)
        if seat == 1:
            return self.small_blind
        if seat == 2:
            return self.big_blind
        return 0.0

    def contribution(self, player: str) -> float:
        total = self.blind(player)
        for rnd in self.actions:
            for act in rnd:
                if act.player == player:
                    total += act.amount
        return total

    @property
    def pot_total(self) -> float:
        return sum(self.contribution(p) for p in self.seats)


@dataclass(frozen=True)
class Diagnostic:
    game_id: str
    hand_index: int
    kind: str
    detail: str


@dataclass(frozen=True)
class ParseResult:
    records: tuple[HandRecord, ...]
    diagnostics: tuple[Diagnostic, ...]


class ParseError(ValueError):
    """A line the strict parser refuses, with its position and token."""

    def __init__(self, line_no: int, token: str, reason: str):
        super().__init__(f"line {line_no}: {reason} (at {token!r})")
        self.line_no = line_no
        self.token = token


@dataclass(frozen=True)
class AliasMap:
    """Observed-name to canonical-id mapping.

    The bot's name is reserved: nothing else may map to it and it may
    not map to anything else, so no human alias can ever be merged
    into the bot's identity.
    """

    entries: dict[str, str]

    def __post_init__(self) -> None:
        for name, canon in self.entries.items():
            if not canon:
                raise ValueError(f"empty canonical id for {name!r}")
            if canon == PLURIBUS and name != PLURIBUS:
                raise ValueError(f"cannot merge {name!r} into {PLURIBUS}")
            if name == PLURIBUS and canon != PLURIBUS:
                raise ValueError(f"cannot rename {PLURIBUS} to {canon!r}")

    @classmethod
    def from_json(cls, text: str) -> "AliasMap":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("alias map must be a JSON object of name -> id")
        return cls(entries={str(k): str(v) for k, v in raw.items()})

    @classmethod
    def identity(cls, names: Iterable[str]) -> "AliasMap":
        return cls(entries={n: n for n in names})

    def resolve(self, name: str) -> str | None:
        if name in self.entries:
            return self.entries[name]
        # Canonical ids pass through so normalization is idempotent.
        if name in self.entries.values():
            return name
        return None


def parse_hand_log(
    text: str,
    format: str,
    game_id: str | None = None,
    small_blind: float = 50.0,
    big_blind: float = 100.0,
    stack: float = 10000.0,
) -> ParseResult:
    """Parse one log into HandRecords plus diagnostics, preserving order.

    ``game_id`` labels hands from formats whose lines do not carry one
    (the raw ACPC logs); blind and stack sizes likewise apply only to
    that adapter.
    """
    if format == "canonical":
        return _parse_canonical(text)
    if format == "pluribus-raw":
        return _parse_acpc(text, game_id or "raw", small_blind, big_blind, stack)
    raise ValueError(f"unknown hand-log format {format!r}")


_REQUIRED_KEYS = (
    "game_id",
    "hand_index",
    "small_blind",
    "big_blind",
    "seats",
    "actions",
    "net_result",
)


def _num(value: float) -> float | int:
    f = float(value)
    return int(f) if f.is_integer() else f


def _parse_canonical_line(obj: dict, line_no: int) -> HandRecord:
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise ParseError(line_no, key, "missing field")
    try:
        seats = {str(p): int(s) for p, s in obj["seats"].items()}
        hole = {
            str(p): (parse_card(cs[0]), parse_card(cs[1]))
            for p, cs in obj.get("hole_cards", {}).items()
        }
        actions = tuple(
            tuple(Action(str(p), str(kind), float(amount)) for p, kind, amount in rnd)
            for rnd in obj["actions"]
        )
        net = {str(p): float(v) for p, v in obj["net_result"].items()}
        return HandRecord(
            game_id=str(obj["game_id"]),
            hand_index=int(obj["hand_index"]),
            small_blind=float(obj["small_blind"]),
            big_blind=float(obj["big_blind"]),
            seats=seats,
            actions=actions,
            net_result=net,
            hole_cards=hole,
        )
    except ParseError:
        raise
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ParseError(line_no, _shorten(json.dumps(obj)), str(exc)) from exc


def _shorten(token: str, limit: int = 60) -> str:
    return token if len(token) <= limit else token[: limit - 3] + "..."


def _parse_canonical(text: str) -> ParseResult:
    records: list[HandRecord] = []
    diagnostics: list[Diagnostic] = []
    lines = text.splitlines()
    last_content = max(
        (i for i, ln in enumerate(lines) if ln.strip()), default=-1
    )
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        line_no = i + 1
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ParseError(line_no, _shorten(line), "expected a JSON object")
            records.append(_parse_canonical_line(obj, line_no))
        except (json.JSONDecodeError, ParseError) as exc:
            if i == last_content and isinstance(exc, json.JSONDecodeError):
                diagnostics.append(
                    Diagnostic(
                        game_id="",
                        hand_index=-1,
                        kind="incomplete",
                        detail=f"line {line_no}: incomplete trailing hand dropped",
                    )
                )
                continue
            if isinstance(exc, ParseError):
                raise
            raise ParseError(line_no, _shorten(line), exc.msg) from exc
    return ParseResult(records=tuple(records), diagnostics=tuple(diagnostics))


def emit_hand_log(records: Iterable[HandRecord]) -> str:
    """Serialize records to the canonical line format (parse inverse)."""
    lines = []
    for r in records:
        obj = {
            "game_id": r.game_id,
            "hand_index": r.hand_index,
            "small_blind": _num(r.small_blind),
            "big_blind": _num(r.big_blind),
            "seats": {p: r.seats[p] for p in r.players},
            "hole_cards": {
                p: [str(c) for c in cards] for p, cards in sorted(r.hole_cards.items())
            },
            "actions": [
                [[a.player, a.kind, _num(a.amount)] for a in rnd] for rnd in r.actions
            ],
            "net_result": {p: _num(r.net_result[p]) for p in sorted(r.net_result)},
        }
        lines.append(json.dumps(obj))
    return "\n".join(lines) + ("\n" if lines else "")


_ACPC_TOKEN = re.compile(r"f|c|r(\d+)")


def _walk_acpc_betting(
    betting: str,
    players: Sequence[str],
    small_blind: float,
    big_blind: float,
    stack: float,
) -> tuple[tuple[Action, ...], ...]:
    """Reconstruct per-action chip amounts from an ACPC betting string.

    ``r<N>`` means raise so that the actor's whole-hand commitment
    becomes N chips.  Raises an inconsistency ValueError whenever the
    string cannot be walked by legal-order rotation.
    """
    n = len(players)
    cum = {p: 0.0 for p in players}
    cum[players[0]] = min(small_blind, stack)
    cum[players[1]] = min(big_blind, stack)
    folded: set[str] = set()
    allin: set[str] = set()
    rounds: list[tuple[Action, ...]] = []
    for round_no, chunk in enumerate(betting.split("/")):
        acts: list[Action] = []
        cursor = 2 if round_no == 0 else 0
        bet_seen = False
        pos = 0
        while pos < len(chunk):
            m = _ACPC_TOKEN.match(chunk, pos)
            if m is None:
                raise ValueError(f"bad betting token at {chunk[pos:]!r}")
            actor = None
            for step in range(n):
                cand = players[(cursor + step) % n]
                if cand not in folded and cand not in allin:
                    actor = cand
                    cursor = (cursor + step + 1) % n
                    break
            if actor is None:
                raise ValueError("actions remain but no player can act")
            token = m.group(0)
            if token == "f":
                acts.append(Action(actor, "fold", 0.0))
                folded.add(actor)
            elif token == "c":
                target = min(max(cum.values()), stack)
                delta = target - cum[actor]
                if delta < 0:
                    raise ValueError(f"negative call by {actor}")
                cum[actor] += delta
                if cum[actor] >= stack:
                    allin.add(actor)
                acts.append(Action(actor, "check" if delta == 0 else "call", delta))
            else:
                total = float(m.group(1))
                delta = total - cum[actor]
                if delta <= 0 or total > stack:
                    raise ValueError(f"bad raise to {total:g} by {actor}")
                cum[actor] = total
                if total >= stack:
                    kind = "all-in"
                    allin.add(actor)
                elif round_no == 0 or bet_seen:
                    kind = "raise"
                else:
                    kind = "bet"
                bet_seen = True
                acts.append(Action(actor, kind, delta))
            pos = m.end()
        rounds.append(tuple(acts))
    return tuple(rounds)


def _parse_acpc_line(
    line: str,
    line_no: int,
    game_id: str,
    small_blind: float,
    big_blind: float,
    stack: float,
) -> HandRecord:
    parts = line.split(":")
    if len(parts) != 6:
        raise ValueError(f"expected 6 colon-separated sections, got {len(parts)}")
    _, hand_no, betting, cards, payoffs, names = parts
    players = names.split("|")
    if len(players) != 6 or len(set(players)) != 6:
        raise ValueError(f"expected 6 distinct player names, got {names!r}")
    nets = [float(x) for x in payoffs.split("|")]
    if len(nets) != 6:
        raise ValueError(f"expected 6 payoffs, got {payoffs!r}")
    hole_section = cards.split("/")[0]
    hole_strs = hole_section.split("|")
    if len(hole_strs) != 6:
        raise ValueError(f"expected 6 hole-card entries, got {hole_section!r}")
    hole: dict[str, tuple[Card, Card]] = {}
    for p, h in zip(players, hole_strs):
        if h:
            if len(h) != 4:
                raise ValueError(f"bad hole cards {h!r}")
            hole[p] = (parse_card(h[:2]), parse_card(h[2:]))
    actions = _walk_acpc_betting(betting, players, small_blind, big_blind, stack)
    return HandRecord(
        game_id=game_id,
        hand_index=int(hand_no),
        small_blind=small_blind,
        big_blind=big_blind,
        seats={p: i + 1 for i, p in enumerate(players)},
        actions=actions,
        net_result=dict(zip(players, nets)),
        hole_cards=hole,
    )


def _parse_acpc(
    text: str, game_id: str, small_blind: float, big_blind: float, stack: float
) -> ParseResult:
    records: list[HandRecord] = []
    diagnostics: list[Diagnostic] = []
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line.startswith("STATE:"):
            continue
        try:
            records.append(
                _parse_acpc_line(line, i + 1, game_id, small_blind, big_blind, stack)
            )
        except (ValueError, IndexError) as exc:
            m = re.match(r"STATE:(\d+)", line)
            diagnostics.append(
                Diagnostic(
                    game_id=game_id,
                    hand_index=int(m.group(1)) if m else -1,
                    kind="skipped",
                    detail=f"line {i + 1}: {exc}",
                )
            )
    return ParseResult(records=tuple(records), diagnostics=tuple(diagnostics))


def normalize_aliases(
    records: Sequence[HandRecord], alias_map: AliasMap
) -> list[HandRecord]:
    """Rewrite every player id to its canonical form.

    Names absent from the map (and not already canonical ids) abort
    with one error listing all of them, so a partial map cannot
    silently split one player into two.
    """
    unmapped: set[str] = set()
    for r in records:
        for name in r.seats:
            if alias_map.resolve(name) is None:
                unmapped.add(name)
    if unmapped:
        raise ValueError(f"unmapped player names: {sorted(unmapped)}")
    out = []
    for r in records:
        canon = {name: alias_map.resolve(name) for name in r.seats}
        out.append(
            HandRecord(
                game_id=r.game_id,
                hand_index=r.hand_index,
                small_blind=r.small_blind,
                big_blind=r.big_blind,
                seats={canon[p]: s for p, s in r.seats.items()},
                actions=tuple(
                    tuple(Action(canon.get(a.player, a.player), a.kind, a.amount) for a in rnd)
                    for rnd in r.actions
                ),
                net_result={canon.get(p, p): v for p, v in r.net_result.items()},
                hole_cards={canon.get(p, p): cs for p, cs in r.hole_cards.items()},
            )
        )
    return out


def validate_hands(records: Sequence[HandRecord]) -> list[Diagnostic]:
    """Semantic checks that return diagnostics instead of failing."""
    out: list[Diagnostic] = []
    for r in records:
        net_sum = sum(r.net_result.values())
        if abs(net_sum) > 1e-6:
            out.append(
                Diagnostic(r.game_id, r.hand_index, "zero_sum",
                           f"net results sum to {net_sum:g}, not 0")
            )
        seats = sorted(r.seats.values())
        if len(r.seats) == 6 and seats != [1, 2, 3, 4, 5, 6]:
            out.append(
                Diagnostic(r.game_id, r.hand_index, "seat",
                           f"seats {seats} are not a bijection onto 1..6")
            )
        for rnd_no, rnd in enumerate(r.actions):
            for act in rnd:
                if act.amount < 0:
                    out.append(
                        Diagnostic(r.game_id, r.hand_index, "amount",
                                   f"negative amount {act.amount:g} by {act.player} "
                                   f"in round {rnd_no}")
                    )
                elif act.kind in ("fold", "check") and act.amount != 0:
                    out.append(
                        Diagnostic(r.game_id, r.hand_index, "amount",
                                   f"{act.kind} by {act.player} carries amount "
                                   f"{act.amount:g}")
                    )
    return out
