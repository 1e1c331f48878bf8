import itertools
import random

import pytest
from hypothesis import given, strategies as st

from sectra.headings import (HeadingMap, HeadingMapError, canonicalize_heading, load_heading_map,
                             map_heading, parse_heading_rows)
from sectra.labels import SectionLabel

B, M, R, C = (SectionLabel.BACKGROUND, SectionLabel.METHOD, SectionLabel.RESULT,
              SectionLabel.CONCLUSION)

# Exemplar headings per category from the NLM mapping table.
EXEMPLARS = {
    B: ["Background", "Introduction", "Motivation", "Hypothesis", "Instruction", "Aim"],
    M: ["Method", "Methodology", "Approach", "Experiment", "Measurement", "Techniques"],
    R: ["Result", "Finding", "Evaluation", "Innovations", "Outcome", "Output"],
    C: ["Conclusion", "Discussion", "Impact", "Implication", "Summary", "Limitation",
        "Future work", "Recommendation"],
}


@pytest.mark.parametrize("raw, expected", [
    ("3. METHODS:", "methods"),
    ("IV) Results and Discussion", "results and discussion"),
    ("  Introduction  ", "introduction"),
    ("2.1 Related   Work", "related work"),
    ("b) Aim", "aim"),
    ("(3) methods", "methods"),
    ("IV Results", "results"),
    ("mix models", "mix models"),
    ("3d reconstruction", "3d reconstruction"),
    ("Results/Discussion", "results discussion"),
    ("", ""),
    ("...", ""),
])
def test_canonicalize_examples(raw, expected):
    assert canonicalize_heading(raw) == expected


@given(st.text(max_size=40))
def test_canonicalize_idempotent(raw):
    once = canonicalize_heading(raw)
    assert canonicalize_heading(once) == once


@given(st.text(max_size=40))
def test_canonical_form_shape(raw):
    out = canonicalize_heading(raw)
    assert out == out.strip()
    assert "  " not in out
    assert out == out.lower()


def test_map_heading_lookup_and_miss():
    hm = load_heading_map()
    assert map_heading("methodology", hm) is M
    assert map_heading("aim", hm) is B
    assert map_heading("limitation", hm) is C
    assert map_heading("proposed framework", hm) is SectionLabel.UNMAPPED
    # exact match only: no fuzzy fallback
    assert map_heading("methodologies", hm) is SectionLabel.UNMAPPED


@pytest.mark.parametrize("label, heading",
                         [(lab, h) for lab, hs in EXEMPLARS.items() for h in hs])
def test_seed_map_covers_table_exemplars(label, heading):
    assert load_heading_map().lookup(heading) is label


def test_objective_folds_into_background(tmp_path):
    p = tmp_path / "map.tsv"
    p.write_text("# comment\nObjective\tObjective\n\nDiscussion\tConclusion\n", encoding="utf-8")
    hm = load_heading_map(p)
    assert hm.entries == {"objective": B, "discussion": C}
    assert SectionLabel.UNMAPPED not in hm.entries.values()


def test_canonical_collision_same_label_is_fine():
    hm = parse_heading_rows([("Methods", "Method"), ("  methods ", "Method")])
    assert dict(hm.entries) == {"methods": M}


def test_conflicting_duplicates_raise():
    with pytest.raises(HeadingMapError, match="conflicting labels for 'summary'"):
        parse_heading_rows([("Summary", "Conclusion"), ("SUMMARY:", "Result")])


def test_unknown_category_raises():
    with pytest.raises(HeadingMapError, match="unknown category"):
        parse_heading_rows([("Methods", "Procedure")])


def test_malformed_line_raises(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("Methods Method\n", encoding="utf-8")
    with pytest.raises(HeadingMapError, match="bad.tsv:1"):
        load_heading_map(p)


def test_load_is_order_independent():
    rows = [("Methods", "Method"), ("Results", "Result"), ("Aim", "Objective"),
            ("Discussion", "Conclusion"), ("Approach", "Method")]
    ref = parse_heading_rows(rows)
    for perm in itertools.permutations(rows):
        assert dict(parse_heading_rows(perm).entries) == dict(ref.entries)


def test_conflict_error_is_order_independent():
    rows = [("Summary", "Conclusion"), ("Summary", "Result"), ("Aim", "Bogus"),
            ("Methods", "Method"), ("methods.", "Result")]
    messages = set()
    rng = random.Random(3)
    for _ in range(20):
        rng.shuffle(rows)
        with pytest.raises(HeadingMapError) as exc:
            parse_heading_rows(rows)
        messages.add(str(exc.value))
    assert len(messages) == 1


def test_map_is_read_only():
    hm = HeadingMap({"methods": M})
    with pytest.raises(TypeError):
        hm.entries["results"] = R
