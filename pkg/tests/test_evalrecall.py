"""Name normalization, edit distance, greedy matching, and recall reports."""
from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from menulens.errors import MissingTruth, ParseError, SchemaError
from menulens.evalrecall import (
    GroundTruthMenu,
    levenshtein,
    match_items,
    normalize_name,
    recall_report,
    similarity,
    truth_from_json,
)

from conftest import FIXTURES, MENU_IDS


def truth(menu_id: str, *names: str) -> GroundTruthMenu:
    return GroundTruthMenu(menu_id=menu_id, language="en", items=list(names))


def load_fixture_truth(menu_id: str) -> GroundTruthMenu:
    return truth_from_json((FIXTURES / "truth" / f"{menu_id}.json").read_bytes())


class TestNormalizeName:
    @pytest.mark.parametrize(
        "raw,expect",
        [
            ("Café  Frappé", "cafe frappe"),
            ("ŻUREK", "zurek"),
            ("", ""),
            ("Crème brûlée!", "creme brulee"),
            ("fish & chips", "fish chips"),
            ("fish-and-chips", "fishandchips"),
            ("  spaced   out  ", "spaced out"),
            ("Τζατζίκι", "τζατζικι"),
        ],
    )
    def test_examples(self, raw, expect):
        assert normalize_name(raw) == expect

    def test_idempotent(self):
        for raw in ["Café Frappé", "ŻUREK", "Gelato Artigianale Misto"]:
            once = normalize_name(raw)
            assert normalize_name(once) == once


class TestLevenshtein:
    @pytest.mark.parametrize(
        "a,b,distance",
        [
            ("abc", "abc", 0),
            ("margherita", "margherlta", 1),
            ("", "abc", 3),
            ("abc", "", 3),
            ("", "", 0),
            ("kitten", "sitting", 3),
            ("flaw", "lawn", 2),
        ],
    )
    def test_distances(self, a, b, distance):
        assert levenshtein(a, b) == distance
        assert levenshtein(b, a) == distance

    def test_similarity_values(self):
        assert similarity("abc", "abc") == 1.0
        assert similarity("margherita", "margherlta") == pytest.approx(0.9)
        assert similarity("", "") == 1.0
        assert similarity("", "abc") == 0.0

    @settings(max_examples=150, deadline=None)
    @given(st.text(alphabet="abcdef", max_size=12), st.text(alphabet="abcdef", max_size=12))
    def test_metric_properties(self, a, b):
        d = levenshtein(a, b)
        assert d == levenshtein(b, a)
        assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))
        assert (d == 0) == (a == b)


class TestMatchItems:
    def test_identical_lists_match_perfectly(self):
        names = ["Greek Salad", "Beef Burger", "Lemon Sorbet"]
        pairs = match_items(names, names)
        assert sorted(pairs) == [(0, 0), (1, 1), (2, 2)]

    def test_ocr_corruption_within_threshold_matches(self):
        pairs = match_items(["Margherlta"], ["Margherita"])
        assert pairs == [(0, 0)]

    def test_below_threshold_unmatched(self):
        # "abcdefghij" vs "abcdefgxyz": distance 3, similarity 0.7
        assert match_items(["abcdefgxyz"], ["abcdefghij"]) == []

    def test_one_to_one_never_reuses_endpoints(self):
        pairs = match_items(["soup", "soup"], ["soup"])
        assert pairs == [(0, 0)]
        pairs = match_items(["soup"], ["soup", "soup x"])
        assert len(pairs) == 1

    def test_best_similarity_wins_contested_truth(self):
        # both parsed names clear θ against the single truth name; the
        # closer one takes it
        pairs = match_items(["margherita", "margherlta"], ["margherita"])
        assert pairs == [(0, 0)]

    def test_tie_breaks_by_truth_then_parsed_index(self):
        pairs = match_items(["pasta", "pasta"], ["pasta", "pasta"])
        assert sorted(pairs) == [(0, 0), (1, 1)]

    def test_theta_validation(self):
        with pytest.raises(ValueError):
            match_items(["a"], ["a"], theta=0.0)
        with pytest.raises(ValueError):
            match_items(["a"], ["a"], theta=1.1)

    NAME = st.text(alphabet="abcd ", min_size=1, max_size=8)

    @settings(max_examples=150, deadline=None)
    @given(st.lists(NAME, max_size=20), st.lists(NAME, max_size=20))
    def test_theta_one_equals_exact_match_oracle(self, parsed, truth_names):
        pairs = match_items(parsed, truth_names, theta=1.0)
        # oracle: greedy exact matching on normalized names, truth order,
        # each parsed name usable once
        norm_parsed = [normalize_name(n) for n in parsed]
        used: set[int] = set()
        expected = []
        for ti, name in enumerate(normalize_name(n) for n in truth_names):
            pi = next(
                (i for i, p in enumerate(norm_parsed) if i not in used and p == name), None
            )
            if pi is not None:
                used.add(pi)
                expected.append((pi, ti))
        assert sorted(pairs) == sorted(expected)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(NAME, max_size=15), st.lists(NAME, max_size=15))
    def test_matching_is_one_to_one(self, parsed, truth_names):
        pairs = match_items(parsed, truth_names)
        assert len({pi for pi, _ in pairs}) == len(pairs)
        assert len({ti for _, ti in pairs}) == len(pairs)


class TestRecallReport:
    def test_perfect_fixture_parse_scores_one(self):
        truths = {mid: load_fixture_truth(mid) for mid in MENU_IDS}
        parsed = {mid: list(t.items) for mid, t in truths.items()}
        report = recall_report(parsed, truths)
        assert report.aggregate_recall == 1.0
        assert report.macro_recall == 1.0
        assert report.unmatched == []
        assert sum(m.total for m in report.per_menu.values()) == 31

    def test_thirty_of_thirty_one(self):
        truths = {mid: load_fixture_truth(mid) for mid in MENU_IDS}
        parsed = {mid: list(t.items) for mid, t in truths.items()}
        parsed["menu_en"] = parsed["menu_en"][1:]  # drop one item entirely
        report = recall_report(parsed, truths)
        assert report.aggregate_recall == pytest.approx(30 / 31)
        assert len(report.unmatched) == 1
        assert report.unmatched[0][0] == "menu_en"

    def test_empty_parse_scores_zero_with_all_unmatched(self):
        truths = {"m": truth("m", "a pie", "b pie", "c pie", "d pie", "e pie")}
        report = recall_report({"m": []}, truths)
        assert report.per_menu["m"].recall == 0.0
        assert len(report.unmatched) == 5

    def test_truth_without_parsed_menu_counts_as_empty_parse(self):
        truths = {
            "seen": truth("seen", "soup"),
            "unseen": truth("unseen", "cake", "pie"),
        }
        report = recall_report({"seen": ["soup"]}, truths)
        assert report.per_menu["seen"].matched == 1
        assert report.per_menu["unseen"].matched == 0
        assert report.aggregate_recall == pytest.approx(1 / 3)

    def test_parsed_menu_without_truth_raises(self):
        with pytest.raises(MissingTruth):
            recall_report({"ghost": ["soup"]}, {})

    def test_micro_vs_macro_divergence(self):
        truths = {
            "big": truth("big", *(f"dish {c}" for c in "abcdefghij")),
            "small": truth("small", "pie"),
        }
        parsed = {"big": [f"dish {c}" for c in "abcdefghij"], "small": []}
        report = recall_report(parsed, truths)
        assert report.aggregate_recall == pytest.approx(10 / 11)
        assert report.macro_recall == pytest.approx(0.5)

    def test_adding_correct_item_never_lowers_recall(self):
        truths = {"m": truth("m", "greek salad", "beef burger", "lemon sorbet")}
        partial = {"m": ["greek salad"]}
        fuller = {"m": ["greek salad", "beef burger"]}
        before = recall_report(partial, truths)
        after = recall_report(fuller, truths)
        assert after.per_menu["m"].recall >= before.per_menu["m"].recall

    def test_report_json_shape(self):
        truths = {"m": truth("m", "soup")}
        obj = recall_report({"m": ["soup"]}, truths).to_obj()
        assert obj["per_menu"]["m"] == {"matched": 1, "total": 1, "recall": 1.0}
        assert obj["aggregate_recall"] == 1.0
        assert obj["unmatched"] == []
        assert json.dumps(obj)


class TestTruthFromJson:
    def test_fixture_truths_parse(self):
        for menu_id in MENU_IDS:
            t = load_fixture_truth(menu_id)
            assert t.menu_id == menu_id
            assert t.items

    def test_item_counts_sum_to_thirty_one(self):
        assert sum(len(load_fixture_truth(mid).items) for mid in MENU_IDS) == 31

    def test_malformed_json_reports_offset(self):
        with pytest.raises(ParseError):
            truth_from_json(b"{nope")

    @pytest.mark.parametrize(
        "obj",
        [
            [],
            {"language": "en", "items": ["a"]},
            {"menu_id": "m", "items": ["a"]},
            {"menu_id": "m", "language": "en"},
            {"menu_id": "m", "language": "en", "items": ["a", ""]},
            {"menu_id": "m", "language": "en", "items": ["Café", "cafe"]},
        ],
    )
    def test_invalid_shapes_rejected(self, obj):
        with pytest.raises(SchemaError):
            truth_from_json(json.dumps(obj))
