"""Tests for hand-history parsing, aliasing, and validation."""

import json

import pytest

from tiltlab.cards import parse_card
from tiltlab.hands import (
    Action,
    AliasMap,
    HandRecord,
    ParseError,
    ParseResult,
    emit_hand_log,
    normalize_aliases,
    parse_hand_log,
    validate_hands,
)

PLAYERS = ["P1", "P2", "P3", "P4", "P5", "P6"]


def hand_obj(**over):
    """Canonical-format hand where everyone folds to the big blind."""
    obj = {
        "game_id": "g30",
        "hand_index": 0,
        "small_blind": 50,
        "big_blind": 100,
        "seats": {p: i + 1 for i, p in enumerate(PLAYERS)},
        "hole_cards": {"P1": ["As", "Kd"], "P2": ["7c", "2h"]},
        "actions": [
            [
                ["P3", "fold", 0],
                ["P4", "fold", 0],
                ["P5", "fold", 0],
                ["P6", "fold", 0],
                ["P1", "fold", 0],
            ]
        ],
        "net_result": {"P1": -50, "P2": 50, "P3": 0, "P4": 0, "P5": 0, "P6": 0},
    }
    obj.update(over)
    return obj


def showdown_obj():
    return hand_obj(
        hand_index=1,
        actions=[
            [
                ["P3", "raise", 200],
                ["P4", "fold", 0],
                ["P5", "fold", 0],
                ["P6", "fold", 0],
                ["P1", "call", 150],
                ["P2", "call", 100],
            ],
            [["P1", "check", 0], ["P2", "check", 0], ["P3", "check", 0]],
        ],
        net_result={"P1": -200, "P2": -200, "P3": 400, "P4": 0, "P5": 0, "P6": 0},
        hole_cards={"P1": ["As", "Ks"], "P2": ["7h", "2d"], "P3": ["Qc", "Qd"]},
    )


def lines(*objs):
    return "\n".join(json.dumps(o) for o in objs) + "\n"


class TestCanonicalParse:
    def test_fold_to_big_blind(self):
        result = parse_hand_log(lines(hand_obj()), "canonical")
        assert result.diagnostics == ()
        (rec,) = result.records
        assert rec.net_result == {"P1": -50, "P2": 50, "P3": 0, "P4": 0, "P5": 0, "P6": 0}
        assert rec.pot_total == 150
        assert rec.players == tuple(PLAYERS)
        assert rec.hole_cards["P1"] == (parse_card("As"), parse_card("Kd"))

    def test_empty_input(self):
        assert parse_hand_log("", "canonical") == ParseResult((), ())

    def test_round_trip_is_identity(self):
        text = lines(hand_obj(), showdown_obj(), hand_obj(hand_index=2))
        once = parse_hand_log(text, "canonical")
        twice = parse_hand_log(emit_hand_log(once.records), "canonical")
        assert once.records == twice.records

    def test_malformed_interior_line_is_an_error(self):
        text = lines(hand_obj()) + "{broken\n" + lines(showdown_obj())
        with pytest.raises(ParseError, match="line 2") as exc:
            parse_hand_log(text, "canonical")
        assert exc.value.line_no == 2

    def test_truncated_final_line_is_a_diagnostic(self):
        text = lines(hand_obj()) + '{"game_id": "g30", "hand_in'
        result = parse_hand_log(text, "canonical")
        assert len(result.records) == 1
        assert [d.kind for d in result.diagnostics] == ["incomplete"]

    def test_missing_field_names_it(self):
        obj = hand_obj()
        del obj["small_blind"]
        with pytest.raises(ParseError, match="small_blind"):
            parse_hand_log(lines(obj), "canonical")

    def test_bad_card_is_an_error(self):
        obj = hand_obj(hole_cards={"P1": ["Xx", "Kd"]})
        with pytest.raises(ParseError, match="line 1"):
            parse_hand_log(lines(obj), "canonical")

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError, match="format"):
            parse_hand_log("", "excel")

    def test_ordering_preserves_file_order(self):
        text = lines(hand_obj(hand_index=5), hand_obj(hand_index=2))
        result = parse_hand_log(text, "canonical")
        assert [r.hand_index for r in result.records] == [5, 2]


class TestHandRecord:
    def test_contribution_counts_blind_and_actions(self):
        (rec,) = parse_hand_log(lines(showdown_obj()), "canonical").records
        assert rec.contribution("P1") == 200
        assert rec.contribution("P2") == 200
        assert rec.contribution("P3") == 200
        assert rec.contribution("P4") == 0
        assert rec.pot_total == 600

    def test_winner_collects_the_others_losses(self):
        (rec,) = parse_hand_log(lines(showdown_obj()), "canonical").records
        losses = sum(v for v in rec.net_result.values() if v < 0)
        assert rec.net_result["P3"] == -losses

    def test_unknown_action_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown action kind"):
            HandRecord(
                game_id="g",
                hand_index=0,
                small_blind=50,
                big_blind=100,
                seats={"A": 1},
                actions=((Action("A", "limp", 0.0),),),
                net_result={"A": 0},
            )


ACPC_SHOWDOWN = (
    "STATE:7:r200fffcc/ccc/ccc/ccc:"
    "AsKs|7h2d|QcQd|JhTs|9c8c|5d5h/3c4c5c/Ah/Kd:"
    "-200|-200|400|0|0|0:Alf|Bea|Cal|Dot|Eve|Fay"
)

ACPC_ALLIN = (
    "STATE:12:r300r10000fffff:"
    "AhAd|KhKd|QhQd|JdJc|Th9h|5c4c:"
    "-50|-100|-300|450|0|0:Alf|Bea|Cal|Dot|Eve|Fay"
)


class TestAcpcAdapter:
    def test_betting_walk_reconstructs_amounts(self):
        result = parse_hand_log(ACPC_SHOWDOWN, "pluribus-raw", game_id="d30")
        assert result.diagnostics == ()
        (rec,) = result.records
        assert rec.game_id == "d30"
        assert rec.hand_index == 7
        assert rec.seats == {"Alf": 1, "Bea": 2, "Cal": 3, "Dot": 4, "Eve": 5, "Fay": 6}
        assert rec.actions[0] == (
            Action("Cal", "raise", 200.0),
            Action("Dot", "fold", 0.0),
            Action("Eve", "fold", 0.0),
            Action("Fay", "fold", 0.0),
            Action("Alf", "call", 150.0),
            Action("Bea", "call", 100.0),
        )
        assert rec.actions[1] == (
            Action("Alf", "check", 0.0),
            Action("Bea", "check", 0.0),
            Action("Cal", "check", 0.0),
        )
        assert rec.pot_total == 600
        assert rec.net_result["Cal"] == 400
        assert rec.hole_cards["Alf"] == (parse_card("As"), parse_card("Ks"))

    def test_all_in_labeled(self):
        (rec,) = parse_hand_log(ACPC_ALLIN, "pluribus-raw").records
        kinds = [a.kind for a in rec.actions[0]]
        assert kinds == ["raise", "all-in", "fold", "fold", "fold", "fold", "fold"]
        assert rec.actions[0][1] == Action("Dot", "all-in", 10000.0)

    def test_bad_hand_skipped_with_diagnostic(self):
        text = "\n".join(
            [
                ACPC_SHOWDOWN,
                "STATE:8:r200xq:AsKs|7h2d|QcQd|JhTs|9c8c|5d5h:0|0|0|0|0|0:"
                "Alf|Bea|Cal|Dot|Eve|Fay",
                ACPC_ALLIN,
            ]
        )
        result = parse_hand_log(text, "pluribus-raw")
        assert [r.hand_index for r in result.records] == [7, 12]
        (diag,) = result.diagnostics
        assert diag.kind == "skipped"
        assert diag.hand_index == 8

    def test_wrong_player_count_skipped(self):
        text = "STATE:0:ff:AsKs|7h2d:0|0:Alf|Bea"
        result = parse_hand_log(text, "pluribus-raw")
        assert result.records == ()
        assert len(result.diagnostics) == 1

    def test_chatter_lines_ignored(self):
        text = "# hands for session 30\nSCORE:12|-12:Alf|Bea\n" + ACPC_SHOWDOWN
        result = parse_hand_log(text, "pluribus-raw")
        assert len(result.records) == 1
        assert result.diagnostics == ()


class TestAliasMap:
    def test_cannot_merge_into_pluribus(self):
        with pytest.raises(ValueError, match="merge"):
            AliasMap(entries={"MrBlue": "Pluribus"})

    def test_cannot_rename_pluribus(self):
        with pytest.raises(ValueError, match="rename"):
            AliasMap(entries={"Pluribus": "Bot7"})

    def test_empty_canonical_id_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            AliasMap(entries={"A": ""})

    def test_from_json(self):
        amap = AliasMap.from_json('{"MrOrange": "P_A"}')
        assert amap.resolve("MrOrange") == "P_A"

    def test_canonical_ids_pass_through(self):
        amap = AliasMap(entries={"MrOrange": "P_A"})
        assert amap.resolve("P_A") == "P_A"
        assert amap.resolve("Nobody") is None


class TestNormalizeAliases:
    def base_records(self):
        a = hand_obj(game_id="103")
        b = hand_obj(game_id="103b", seats={**hand_obj()["seats"]})
        b["seats"]["MrBrown"] = b["seats"].pop("P1")
        b["net_result"]["MrBrown"] = b["net_result"].pop("P1")
        b["hole_cards"]["MrBrown"] = b["hole_cards"].pop("P1")
        b["actions"] = [[[("MrBrown" if p == "P1" else p), k, x] for p, k, x in rnd]
                        for rnd in b["actions"]]
        a["seats"]["MrOrange"] = a["seats"].pop("P1")
        a["net_result"]["MrOrange"] = a["net_result"].pop("P1")
        a["hole_cards"]["MrOrange"] = a["hole_cards"].pop("P1")
        a["actions"] = [[[("MrOrange" if p == "P1" else p), k, x] for p, k, x in rnd]
                        for rnd in a["actions"]]
        return parse_hand_log(lines(a, b), "canonical").records

    def merge_map(self):
        entries = {p: p for p in PLAYERS[1:]}
        entries.update({"MrOrange": "P_A", "MrBrown": "P_A"})
        return AliasMap(entries=entries)

    def test_two_names_unify(self):
        records = normalize_aliases(self.base_records(), self.merge_map())
        assert all("P_A" in r.seats for r in records)
        assert not any("MrOrange" in r.seats or "MrBrown" in r.seats for r in records)
        assert records[0].net_result["P_A"] == -50

    def test_identity_map_is_a_no_op(self):
        records = parse_hand_log(lines(hand_obj(), showdown_obj()), "canonical").records
        out = normalize_aliases(records, AliasMap.identity(PLAYERS))
        assert list(records) == out

    def test_idempotent(self):
        once = normalize_aliases(self.base_records(), self.merge_map())
        twice = normalize_aliases(once, self.merge_map())
        assert once == twice

    def test_missing_name_errors_with_all_unmapped(self):
        records = parse_hand_log(lines(hand_obj()), "canonical").records
        with pytest.raises(ValueError, match="P5.*P6"):
            normalize_aliases(records, AliasMap.identity(PLAYERS[:4]))

    def test_record_count_preserved(self):
        records = self.base_records()
        assert len(normalize_aliases(records, self.merge_map())) == len(records)


class TestValidateHands:
    def test_clean_records_have_no_diagnostics(self):
        records = parse_hand_log(lines(hand_obj(), showdown_obj()), "canonical").records
        assert validate_hands(records) == []

    def test_zero_sum_violation(self):
        obj = hand_obj(net_result={"P1": -50, "P2": 60, "P3": 0, "P4": 0, "P5": 0, "P6": 0})
        records = parse_hand_log(lines(obj), "canonical").records
        (diag,) = validate_hands(records)
        assert diag.kind == "zero_sum"

    def test_seat_collision(self):
        seats = {p: i + 1 for i, p in enumerate(PLAYERS)}
        seats["P4"] = 3
        records = parse_hand_log(lines(hand_obj(seats=seats)), "canonical").records
        (diag,) = validate_hands(records)
        assert diag.kind == "seat"

    def test_negative_amount(self):
        obj = showdown_obj()
        obj["actions"][0][0] = ["P3", "raise", -200]
        records = parse_hand_log(lines(obj), "canonical").records
        assert any(d.kind == "amount" for d in validate_hands(records))

    def test_fold_with_chips_flagged(self):
        obj = hand_obj()
        obj["actions"][0][0] = ["P3", "fold", 25]
        records = parse_hand_log(lines(obj), "canonical").records
        (diag,) = validate_hands(records)
        assert diag.kind == "amount"

    def test_input_not_mutated(self):
        records = parse_hand_log(lines(hand_obj()), "canonical").records
        before = emit_hand_log(records)
        validate_hands(records)
        assert emit_hand_log(records) == before
