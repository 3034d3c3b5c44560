from __future__ import annotations

import io
import logging

import pytest
from hypothesis import given, strategies as st

from stapleforge.corpus import (
    DEFAULT_POLICY,
    EXACT_POLICY,
    NormalizationPolicy,
    PredictionSet,
    normalize,
    parse_gold,
    parse_predictions,
    parse_prompts,
    write_predictions,
)
from stapleforge.errors import ParseError, ValidationError

TABLE_BLOCK = """q1|is my explanation clear?
minha explicação está clara?|0.26739
minha explicação é clara?|0.16168
a minha explicação é clara?|0.11109
está clara minha explicação?|0.08778
minha explanação está clara?|0.05717
"""

policies = st.builds(
    NormalizationPolicy,
    lowercase=st.booleans(),
    strip_punctuation=st.booleans(),
    collapse_whitespace=st.booleans(),
    unicode_nfc=st.booleans(),
)


class TestNormalize:
    def test_default_policy_examples(self):
        assert normalize("Minha explicação está CLARA?") == "minha explicação está clara"
        assert normalize("a  b\tc ") == "a b c"
        assert normalize("?!.") == ""

    def test_exact_policy_is_identity(self):
        assert normalize("A  b?!", EXACT_POLICY) == "A  b?!"

    @given(st.text(), policies)
    def test_idempotent_for_all_policies(self, text, policy):
        once = normalize(text, policy)
        assert normalize(once, policy) == once


class TestParseGold:
    def test_table_block(self):
        golds = parse_gold(TABLE_BLOCK)
        assert len(golds) == 1
        gold = golds[0]
        assert gold.prompt.id == "q1"
        assert len(gold.translations) == 5
        assert gold.translations[0].weight == 0.26739
        assert gold.translations[0].text == "minha explicação está clara?"

    def test_single_translation_weight_one(self):
        golds = parse_gold("p|hello\nolá|1.0\n")
        assert len(golds[0].translations) == 1

    def test_weight_out_of_range(self):
        with pytest.raises(ValidationError, match="weight"):
            parse_gold("p|x\nfoo|1.5\n")
        with pytest.raises(ValidationError, match="weight"):
            parse_gold("p|x\nfoo|0\n")

    def test_malformed_header_carries_line_number(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_gold("no pipe here\nfoo|0.5\n")

    def test_bad_weight_literal(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_gold("p|x\nfoo|abc\n")

    def test_duplicate_translation_rejected(self):
        stream = "p|x\nOlá!|0.5\nolá|0.3\n"
        with pytest.raises(ValidationError, match="duplicate"):
            parse_gold(stream)
        # distinct under the exact policy
        assert len(parse_gold(stream, EXACT_POLICY)[0].translations) == 2

    def test_empty_block_rejected(self):
        with pytest.raises(ValidationError, match="empty block"):
            parse_gold("p|x\n\nq|y\nfoo|0.5\n")

    def test_weight_sum_above_one_rejected(self):
        with pytest.raises(ValidationError, match="sum"):
            parse_gold("p|x\na|0.9\nb|0.2\n")

    def test_weights_sorted_non_increasing(self):
        golds = parse_gold("p|x\na|0.1\nb|0.5\nc|0.2\n")
        weights = [t.weight for t in golds[0].translations]
        assert weights == sorted(weights, reverse=True)


class TestParsePredictions:
    def test_deduplication_first_wins(self):
        sets = parse_predictions("q1|x\na\nb\nA!\n")
        assert sets[0].candidates == ("a", "b")

    def test_empty_stream(self):
        assert parse_predictions("") == []

    def test_block_order_preserved(self):
        sets = parse_predictions("q1|x\na\n\nq2|y\nb\n")
        assert [s.prompt_id for s in sets] == ["q1", "q2"]

    def test_duplicate_prompt_id_rejected(self):
        with pytest.raises(ValidationError, match="duplicate prompt id"):
            parse_predictions("q1|x\na\n\nq1|y\nb\n")

    def test_no_silent_drops(self, caplog):
        stream = "q1|x\na\n \na\nb\n"  # 4 candidate lines after the header
        with caplog.at_level(logging.WARNING, logger="stapleforge.corpus"):
            sets = parse_predictions(stream)
        kept = len(sets[0].candidates)
        warned = len(caplog.records)
        assert kept == 2
        assert warned == 2  # one whitespace-only line, one duplicate
        assert kept + warned == 4  # every candidate line is accounted for


class TestWritePredictions:
    def test_empty(self):
        buf = io.StringIO()
        write_predictions([], buf)
        assert buf.getvalue() == ""

    def test_single_block_shape(self):
        buf = io.StringIO()
        write_predictions([PredictionSet("q1", ("a",))], buf)
        assert buf.getvalue() == "q1|\na\n"

    def test_three_block_round_trip(self):
        sets = [
            PredictionSet("q1", ("a", "b c")),
            PredictionSet("q2", ()),
            PredictionSet("q3", ("x y z",)),
        ]
        buf = io.StringIO()
        write_predictions(sets, buf)
        assert parse_predictions(buf.getvalue()) == sets

    def test_empty_candidate_rejected(self):
        with pytest.raises(ValidationError):
            write_predictions([PredictionSet("q1", (" ",))], io.StringIO())


words = st.text(alphabet="abcxyz", min_size=1, max_size=4)
sentences = st.builds(" ".join, st.lists(words, min_size=1, max_size=4))


@st.composite
def prediction_corpora(draw):
    n_sets = draw(st.integers(min_value=0, max_value=4))
    sets = []
    for i in range(n_sets):
        raw = draw(st.lists(sentences, max_size=6))
        seen, cands = set(), []
        for cand in raw:
            key = normalize(cand, DEFAULT_POLICY)
            if key not in seen:
                seen.add(key)
                cands.append(cand)
        sets.append(PredictionSet(prompt_id=f"p{i}", candidates=tuple(cands)))
    return sets


@given(prediction_corpora())
def test_round_trip_identity(sets):
    buf = io.StringIO()
    write_predictions(sets, buf)
    assert parse_predictions(buf.getvalue(), DEFAULT_POLICY) == sets


def test_parse_prompts():
    prompts = parse_prompts("p1|First prompt.\n\np2|Second prompt.\n")
    assert [(p.id, p.text) for p in prompts] == [
        ("p1", "First prompt."),
        ("p2", "Second prompt."),
    ]
    with pytest.raises(ValidationError, match="duplicate"):
        parse_prompts("p1|a\np1|b\n")
    with pytest.raises(ParseError):
        parse_prompts("no separator\n")
