from __future__ import annotations

import pytest

from vta.corpus import SegmentRef
from vta.errors import UncitedResponse
from vta.llm.gateway import Gateway
from vta.llm.providers import ScriptedProvider
from vta.llm.templates import TemplateLibrary
from vta.pipeline import (
    EvidenceItem,
    ResponsePlan,
    format_seconds,
    generate_response,
    parse_citation_markers,
)
from vta.sessions import STUDENT, Turn

EV1 = EvidenceItem(
    ref=SegmentRef("c", "c/lec001", "s12"),
    quoted_text="log base two of n counts the halvings",
    lecture_title="Week 3: Algorithms",
    video_uri="uri://v",
    start_time=1778.84,
    end_time=1790.4,
)
EV2 = EvidenceItem(
    ref=SegmentRef("c", "c/lec001", "s06"),
    quoted_text="merge sort finishes in n log n time",
    lecture_title="Week 3: Algorithms",
    video_uri="uri://v",
    start_time=420.1,
    end_time=555.0,
)

DIALOGUE = [Turn(STUDENT, "which algorithm is n log n?")]
PLAN = ResponsePlan(familiarity="high", justification="strong cs background")


def run_response(output, evidence=(EV1, EV2), **kwargs):
    provider = ScriptedProvider([("response_generate", output)])
    gateway = Gateway(provider, TemplateLibrary.builtin())
    return generate_response(DIALOGUE, list(evidence), PLAN, gateway, **kwargs)


class TestFormatSeconds:
    def test_round_trip(self):
        for value in (0.0, 12.5, 1778.84, 1790.4, 17078.845):
            assert float(format_seconds(value)) == value


class TestMarkerParsing:
    def test_marker_extracted_and_stripped(self):
        text, markers = parse_citation_markers(
            "Merge sort. [[ref: Week 3: Algorithms | 1778.84-1790.4]] Done."
        )
        assert markers == [("Week 3: Algorithms", 1778.84, 1790.4)]
        assert "[[" not in text
        assert text == "Merge sort. Done."

    def test_title_containing_pipe(self):
        text, markers = parse_citation_markers("x [[ref: A | B | 1.5-2.5]] y")
        assert markers == [("A | B", 1.5, 2.5)]

    def test_malformed_marker_dropped_silently(self):
        text, markers = parse_citation_markers("x [[ref: no span here]] y")
        assert markers == []
        assert "[[" not in text

    def test_no_markers(self):
        text, markers = parse_citation_markers("plain text answer")
        assert text == "plain text answer"
        assert markers == []


class TestGenerateResponse:
    def test_valid_marker_resolves_citation(self):
        out = run_response(
            "The answer is merge sort. [[ref: Week 3: Algorithms | 1778.84-1790.4]]"
        )
        assert len(out.citations) == 1
        cite = out.citations[0]
        assert (cite.lecture_title, cite.start_time, cite.end_time) == (
            "Week 3: Algorithms",
            1778.84,
            1790.4,
        )
        assert cite.ref.segment_id == "s12"
        assert out.response_text == "The answer is merge sort."

    def test_two_markers_two_citations_in_order(self):
        out = run_response(
            "Merge sort runs in n log n. [[ref: Week 3: Algorithms | 420.1-555.0]] "
            "That log is the halving count. [[ref: Week 3: Algorithms | 1778.84-1790.4]]"
        )
        assert [c.ref.segment_id for c in out.citations] == ["s06", "s12"]

    def test_unknown_title_marker_stripped_and_fails_when_only_marker(self):
        bad = "Answer. [[ref: Week 9: Ghosts | 1.0-2.0]]"
        with pytest.raises(UncitedResponse):
            run_response(bad)

    def test_mismatched_timestamps_rejected(self):
        with pytest.raises(UncitedResponse):
            run_response("Answer. [[ref: Week 3: Algorithms | 1778.84-9999.0]]")

    def test_no_marker_at_all_fails_after_retry(self):
        provider = ScriptedProvider([("response_generate", "no citations here")])
        gateway = Gateway(provider, TemplateLibrary.builtin())
        with pytest.raises(UncitedResponse):
            generate_response(DIALOGUE, [EV1], PLAN, gateway, retry_on_uncited=1)
        assert len(provider.call_log) == 2  # one retry happened

    def test_retry_can_succeed(self):
        calls = {"n": 0}

        def flaky_output(prompt: str) -> str:
            calls["n"] += 1
            if calls["n"] == 1:
                return "forgot to cite"
            return "cited now [[ref: Week 3: Algorithms | 1778.84-1790.4]]"

        provider = ScriptedProvider([("response_generate", flaky_output)])
        gateway = Gateway(provider, TemplateLibrary.builtin())
        out = generate_response(DIALOGUE, [EV1], PLAN, gateway, retry_on_uncited=1)
        assert out.citations
        assert calls["n"] == 2

    def test_invalid_marker_alongside_valid_is_dropped(self):
        out = run_response(
            "Good. [[ref: Week 3: Algorithms | 1778.84-1790.4]] "
            "Bad. [[ref: Nowhere | 1.0-2.0]]"
        )
        assert len(out.citations) == 1
        assert "[[" not in out.response_text

    def test_evidence_required(self):
        from vta.errors import EmptyInstructorKnowledge

        with pytest.raises(EmptyInstructorKnowledge):
            run_response("anything", evidence=())

    def test_citations_subset_of_evidence_segments(self):
        out = run_response(
            "A [[ref: Week 3: Algorithms | 420.1-555.0]] "
            "B [[ref: Week 3: Algorithms | 1778.84-1790.4]]"
        )
        evidence_refs = {item.ref for item in out.evidence_used}
        assert {c.ref for c in out.citations} <= evidence_refs

    def test_plan_passed_through(self):
        out = run_response("x [[ref: Week 3: Algorithms | 1778.84-1790.4]]")
        assert out.plan_used == PLAN
