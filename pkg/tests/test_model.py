import pytest
from hypothesis import given
from hypothesis import strategies as st

from kbcomplete import (
    ABSTAIN,
    EntityRef,
    Fact,
    FewShotExample,
    RelationSpec,
    ScoredPrediction,
    make_fact,
    normalize_label,
)


class TestNormalizeLabel:
    def test_whitespace_and_case(self):
        assert normalize_label("  Swedish ") == "swedish"

    def test_multiword(self):
        assert normalize_label("Edge of Reality") == "edge of reality"

    def test_trailing_period_and_diacritics(self):
        # diacritics and curly apostrophes survive; the period does not
        assert normalize_label("L’Oréal.") == "l’oréal"

    def test_internal_runs_collapse(self):
        assert normalize_label("a\t\t b\n c") == "a b c"

    def test_empty(self):
        assert normalize_label("") == ""

    @given(st.text(max_size=80))
    def test_idempotent(self, text):
        once = normalize_label(text)
        assert normalize_label(once) == once


class TestEntityRef:
    def test_requires_id(self):
        with pytest.raises(ValueError):
            EntityRef(id="", label="x")

    def test_label_may_be_empty(self):
        assert EntityRef(id="Q1").label == ""


class TestFact:
    def test_equality_ignores_object_order(self):
        a = EntityRef("Q1", "a")
        b = EntityRef("Q2", "b")
        subject = EntityRef("Q9", "s")
        assert Fact(subject, "P1", frozenset([a, b])) == Fact(subject, "P1", frozenset([b, a]))

    def test_objects_non_empty(self):
        with pytest.raises(ValueError):
            Fact(EntityRef("Q9"), "P1", frozenset())

    def test_make_fact_dedups_by_normalized_label(self):
        subject = EntityRef("Q9", "s")
        fact = make_fact(
            subject,
            "P1",
            [EntityRef("Q1", "Berlin"), EntityRef("Q2", " berlin. "), EntityRef("Q3", "Paris")],
        )
        labels = sorted(obj.label for obj in fact.objects)
        assert labels == ["Berlin", "Paris"]


class TestRelationSpec:
    def _examples(self, n, dont_know=0):
        out = []
        for i in range(n - dont_know):
            out.append(FewShotExample(subject_label=f"s{i}", object_labels=(f"o{i}",)))
        for i in range(dont_know):
            out.append(FewShotExample(subject_label=f"d{i}", dont_know=True))
        return tuple(out)

    def test_count_bounded_by_examples(self):
        with pytest.raises(ValueError):
            RelationSpec(id="P1", name="r", prompt_label="r", few_shot_count=8,
                         few_shot_examples=self._examples(4))

    def test_count_range(self):
        with pytest.raises(ValueError):
            RelationSpec(id="P1", name="r", prompt_label="r", few_shot_count=13,
                         few_shot_examples=self._examples(13))

    def test_dont_know_examples_have_no_objects(self):
        with pytest.raises(ValueError):
            FewShotExample(subject_label="s", object_labels=("x",), dont_know=True)

    def test_target_precision_open_interval(self):
        with pytest.raises(ValueError):
            RelationSpec(id="P1", name="r", prompt_label="r", few_shot_count=1,
                         few_shot_examples=self._examples(1), target_precision=1.0)


class TestScoredPrediction:
    def test_confidence_bounds(self):
        with pytest.raises(ValueError):
            ScoredPrediction(EntityRef("Q1"), "P1", ("x",), confidence=1.5)

    def test_empty_answer_rejected(self):
        with pytest.raises(ValueError):
            ScoredPrediction(EntityRef("Q1"), "P1", (), confidence=0.5)
        with pytest.raises(ValueError):
            ScoredPrediction(EntityRef("Q1"), "P1", ("", "x"), confidence=0.5)

    def test_abstain(self):
        p = ScoredPrediction(EntityRef("Q1"), "P1", ABSTAIN, confidence=0.5)
        assert p.is_abstain
        assert not ABSTAIN
