"""Regenerate fixture_hands.jsonl, the deterministic 200-hand log the
end-to-end tests run on.

The file is committed; rerun this script only when the fixture itself
needs to change:

    python3 tests/data/make_fixture.py

Hands are synthesized with a seeded toy behavior rule (strong hands
play and raise more, thresholds shift with the previous hand's result)
so every downstream stage has signal to fit. The script deliberately
avoids importing the package under test.
"""

import json
import math
from pathlib import Path

import numpy as np

SEED = 20240917
N_HANDS = 200
PLAYERS = ["Pluribus", "Alice", "Bob", "Carol", "Dave", "Erin"]
SMALL_BLIND = 50
BIG_BLIND = 100
RAISE_SIZES = [200, 300, 400, 600]

RANKS = "23456789TJQKA"
SUITS = "cdhs"
DECK = [r + s for r in RANKS for s in SUITS]


def hand_strength(card_a, card_b):
    """Crude standalone strength proxy in roughly [0.15, 1.25]."""
    v1 = RANKS.index(card_a[0]) + 2
    v2 = RANKS.index(card_b[0]) + 2
    score = (v1 + v2) / 28.0
    if card_a[0] == card_b[0]:
        score += 0.25
    if card_a[1] == card_b[1]:
        score += 0.08
    return score


def play_threshold(player, state):
    if player == "Pluribus":
        return {"neutral": 0.55, "post_loss": 0.50, "post_win": 0.57}[state]
    return {"neutral": 0.52, "post_loss": 0.42, "post_win": 0.47}[state]


def precision(player):
    return 1.6 if player == "Pluribus" else 1.0


def play_probability(player, state, strength, target):
    z = 6.0 * precision(player) * (strength - play_threshold(player, state))
    z -= 0.8 * (target - BIG_BLIND) / 200.0
    return 1.0 / (1.0 + math.exp(-z))


def trigger_state(prev):
    if prev is None:
        return "neutral"
    net, pot = prev
    if net > 0 and pot > SMALL_BLIND + BIG_BLIND:
        return "post_win"
    if net < -BIG_BLIND:
        return "post_loss"
    return "neutral"


def make_hand(index, rng, last_result):
    seats = {PLAYERS[(index + i) % 6]: i + 1 for i in range(6)}
    by_seat = {s: p for p, s in seats.items()}
    deck = rng.permutation(DECK)
    hole = {by_seat[s]: [str(deck[2 * (s - 1)]), str(deck[2 * (s - 1) + 1])] for s in range(1, 7)}
    strength = {p: hand_strength(*hole[p]) for p in PLAYERS}
    states = {p: trigger_state(last_result.get(p)) for p in PLAYERS}

    sb, bb = by_seat[1], by_seat[2]
    contrib = {p: 0 for p in PLAYERS}
    contrib[sb] = SMALL_BLIND
    contrib[bb] = BIG_BLIND
    target = BIG_BLIND
    actions = []
    folded = set()
    raised = False
    order = [by_seat[s] for s in (3, 4, 5, 6, 1, 2)]

    for player in order:
        if player == bb and len(folded) == 5:
            break  # uncontested blind: hand ends with no big-blind action
        if player == bb and target == BIG_BLIND:
            actions.append([bb, "check", 0])
            continue
        p_play = play_probability(player, states[player], strength[player], target)
        if rng.random() >= p_play:
            actions.append([player, "fold", 0])
            folded.add(player)
            continue
        if not raised and player != bb and strength[player] > 0.75 and rng.random() < 0.55:
            target = int(rng.choice(RAISE_SIZES))
            # raise amounts are the increment actually paid, not the new total
            actions.append([player, "raise", target - contrib[player]])
            raised = True
        else:
            actions.append([player, "call", target - contrib[player]])
        contrib[player] = target

    if raised:
        # players who flat-called ahead of the raise now face the new price
        for player in order:
            if player in folded or contrib[player] >= target:
                continue
            p_play = play_probability(player, states[player], strength[player], target)
            if rng.random() < p_play:
                actions.append([player, "call", target - contrib[player]])
                contrib[player] = target
            else:
                actions.append([player, "fold", 0])
                folded.add(player)

    pot = sum(contrib.values())
    players_in = sorted(p for p in order if p not in folded)
    if len(players_in) == 1:
        winner = players_in[0]
    else:
        weights = np.array([math.exp(3.5 * strength[p]) for p in players_in])
        winner = players_in[rng.choice(len(players_in), p=weights / weights.sum())]
    net = {p: (pot - contrib[p]) if p == winner else -contrib[p] for p in PLAYERS}

    for p in PLAYERS:
        last_result[p] = (net[p], pot)

    return {
        "game_id": "fixture",
        "hand_index": index,
        "small_blind": SMALL_BLIND,
        "big_blind": BIG_BLIND,
        "seats": seats,
        "hole_cards": hole,
        "actions": [actions],
        "net_result": net,
    }


def main():
    rng = np.random.default_rng(SEED)
    last_result = {}
    lines = [json.dumps(make_hand(i, rng, last_result), sort_keys=True) for i in range(N_HANDS)]
    out = Path(__file__).parent / "fixture_hands.jsonl"
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {N_HANDS} hands to {out}")


if __name__ == "__main__":
    main()
