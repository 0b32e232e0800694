from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from vta.corpus import (
    HttpTranscriptionProvider,
    RawSegment,
    SegmentRef,
    coerce_provider_segments,
    normalize_segments,
    parse_transcript_file,
    transcribe_lecture,
)
from vta.errors import (
    DuplicateCourse,
    DuplicateTitle,
    EmptyInput,
    InvalidId,
    InvalidSegments,
    ProviderMalformedOutput,
    ProviderTransportError,
    UnknownCourse,
)

from conftest import segments
from oracles import oracle_merge


class TestRegisterCourse:
    def test_register_and_reregister_identical_is_noop(self, ctx):
        ctx.courses.register_course("CS50", "Intro CS")
        handle = ctx.courses.register_course("CS50", "Intro CS")
        assert handle.course_id == "CS50"
        assert len(ctx.courses.list_courses()) == 1

    def test_register_second_course(self, ctx):
        ctx.courses.register_course("CS50", "Intro CS")
        ctx.courses.register_course("GPP6003", "Social Science")
        assert [h.course_id for h in ctx.courses.list_courses()] == ["CS50", "GPP6003"]

    def test_conflicting_display_name_rejected(self, ctx):
        ctx.courses.register_course("CS50", "Intro CS")
        with pytest.raises(DuplicateCourse):
            ctx.courses.register_course("CS50", "Other Name")

    def test_empty_id_rejected(self, ctx):
        with pytest.raises(InvalidId):
            ctx.courses.register_course("", "x")


class TestIngestLecture:
    def test_ingest_counts(self, ctx):
        ctx.courses.register_course("c", "C")
        segs = segments(*(f"segment number {i} has plenty of words" for i in range(200)))
        ctx.courses.ingest_lecture("c", "Week 3: Algorithms", "uri://v", segs)
        assert len(ctx.courses.fetch_course_segments("c")) == 200

    def test_duplicate_title_rejected(self, ctx):
        ctx.courses.register_course("c", "C")
        ctx.courses.ingest_lecture("c", "L1", "uri://v", segments("one two three"))
        with pytest.raises(DuplicateTitle):
            ctx.courses.ingest_lecture("c", "L1", "uri://v2", segments("four five six"))

    def test_same_title_in_other_course_ok(self, ctx):
        ctx.courses.register_course("a", "A")
        ctx.courses.register_course("b", "B")
        ctx.courses.ingest_lecture("a", "L1", "u", segments("one two three"))
        ctx.courses.ingest_lecture("b", "L1", "u", segments("one two three"))

    def test_decreasing_start_times_rejected(self, ctx):
        ctx.courses.register_course("c", "C")
        bad = [RawSegment("a b c", 5.0, 6.0), RawSegment("d e f", 2.0, 3.0)]
        with pytest.raises(InvalidSegments):
            ctx.courses.ingest_lecture("c", "L1", "u", bad)

    def test_equal_start_times_rejected(self, ctx):
        ctx.courses.register_course("c", "C")
        bad = [RawSegment("a b c", 5.0, 6.0), RawSegment("d e f", 5.0, 7.0)]
        with pytest.raises(InvalidSegments):
            ctx.courses.ingest_lecture("c", "L1", "u", bad)

    def test_zero_span_rejected(self, ctx):
        ctx.courses.register_course("c", "C")
        with pytest.raises(InvalidSegments):
            ctx.courses.ingest_lecture("c", "L1", "u", [RawSegment("a b c", 5.0, 5.0)])

    def test_unknown_course(self, ctx):
        with pytest.raises(UnknownCourse):
            ctx.courses.ingest_lecture("nope", "L1", "u", segments("one two three"))

    def test_round_trip_preserves_bytes_and_times(self, ctx):
        ctx.courses.register_course("c", "C")
        segs = segments("alpha beta gamma", "delta epsilon zeta  double-spaced")
        ctx.courses.ingest_lecture("c", "L1", "u", segs)
        stored = ctx.courses.fetch_course_segments("c")
        assert [(s.text, s.start_time, s.end_time) for _, s in stored] == [
            (r.text, r.start, r.end) for r in segs
        ]

    def test_segment_ids_stable_and_scoped(self, ctx):
        ctx.courses.register_course("c", "C")
        lid = ctx.courses.ingest_lecture("c", "L1", "u", segments("a b c", "d e f"))
        stored = ctx.courses.fetch_course_segments("c")
        assert [s.segment_id for _, s in stored] == [f"{lid}#0000", f"{lid}#0001"]

    def test_ingest_bumps_version(self, ctx):
        ctx.courses.register_course("c", "C")
        v0 = ctx.courses.course_version("c")
        ctx.courses.ingest_lecture("c", "L1", "u", segments("a b c"))
        assert ctx.courses.course_version("c") == v0 + 1


class TestFetchCourseSegments:
    def test_order_lecture_then_segment(self, ctx):
        ctx.courses.register_course("c", "C")
        ctx.courses.ingest_lecture("c", "L1", "u", segments("a b c", "d e f", "g h i"))
        ctx.courses.ingest_lecture("c", "L2", "u", segments("j k l", "m n o", "p q r"))
        pairs = ctx.courses.fetch_course_segments("c")
        assert len(pairs) == 6
        assert [info.title for info, _ in pairs] == ["L1"] * 3 + ["L2"] * 3

    def test_empty_course(self, ctx):
        ctx.courses.register_course("c", "C")
        assert ctx.courses.fetch_course_segments("c") == []

    def test_additivity(self, ctx):
        ctx.courses.register_course("c", "C")
        ctx.courses.ingest_lecture("c", "L1", "u", segments("a b c"))
        before = len(ctx.courses.fetch_course_segments("c"))
        ctx.courses.ingest_lecture("c", "L3", "u", segments("a b c", "d e f"))
        assert len(ctx.courses.fetch_course_segments("c")) == before + 2

    def test_unknown_course(self, ctx):
        with pytest.raises(UnknownCourse):
            ctx.courses.fetch_course_segments("nope")

    def test_citation_preimage_unique(self, demo_ctx):
        seen = set()
        for info, seg in demo_ctx.courses.fetch_course_segments("cs101"):
            key = (info.title, seg.start_time)
            assert key not in seen
            seen.add(key)

    def test_get_segment_by_ref(self, ctx):
        ctx.courses.register_course("c", "C")
        lid = ctx.courses.ingest_lecture("c", "L1", "u", segments("a b c"))
        info, seg = ctx.courses.get_segment(SegmentRef("c", lid, f"{lid}#0000"))
        assert seg.text == "a b c"
        assert info.title == "L1"


class TestNormalizeSegments:
    def test_short_head_merges_into_successor(self):
        raw = [RawSegment("a", 0, 1), RawSegment("long enough segment here", 1, 5)]
        out = normalize_segments(raw, min_tokens=2)
        assert out == [RawSegment("a long enough segment here", 0, 5)]

    def test_identity_when_nothing_short(self):
        raw = segments("one two three", "four five six")
        assert normalize_segments(raw, min_tokens=1) == raw

    def test_trailing_short_merges_into_predecessor(self):
        raw = [RawSegment("one two three", 0, 1), RawSegment("x", 2, 3)]
        out = normalize_segments(raw, min_tokens=2)
        assert out == [RawSegment("one two three x", 0, 3)]

    def test_all_short_collapse_to_one(self):
        raw = [RawSegment("a", 0, 1), RawSegment("b", 2, 3), RawSegment("c", 4, 5)]
        out = normalize_segments(raw, min_tokens=5)
        assert out == [RawSegment("a b c", 0, 5)]

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            normalize_segments([], min_tokens=2)

    def test_matches_merge_oracle_on_fixed_cases(self):
        words = ["w"]
        raw = []
        lengths = [1, 4, 2, 1, 1, 6, 1, 3, 2, 1]
        t = 0.0
        for n in lengths:
            raw.append(RawSegment(" ".join(words * n), t, t + 1.0))
            t += 2.0
        got = normalize_segments(raw, min_tokens=3)
        expected = oracle_merge([(r.text, r.start, r.end) for r in raw], min_tokens=3)
        assert [(s.text, s.start, s.end) for s in got] == expected

    @given(
        lengths=st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=12),
        min_tokens=st.integers(min_value=1, max_value=4),
    )
    def test_matches_merge_oracle(self, lengths, min_tokens):
        raw = []
        t = 0.0
        for i, n in enumerate(lengths):
            raw.append(RawSegment(" ".join(f"tok{i}" for _ in range(n)), t, t + 1.5))
            t += 2.0
        got = normalize_segments(raw, min_tokens=min_tokens)
        expected = oracle_merge([(r.text, r.start, r.end) for r in raw], min_tokens)
        assert [(s.text, s.start, s.end) for s in got] == expected

    @given(
        lengths=st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=12),
        min_tokens=st.integers(min_value=1, max_value=4),
    )
    def test_idempotent(self, lengths, min_tokens):
        raw = []
        t = 0.0
        for i, n in enumerate(lengths):
            raw.append(RawSegment(" ".join(f"tok{i}" for _ in range(n)), t, t + 1.5))
            t += 2.0
        once = normalize_segments(raw, min_tokens=min_tokens)
        assert normalize_segments(once, min_tokens=min_tokens) == once


class TestTranscriptFile:
    def test_parse_and_reject_with_line_numbers(self, tmp_path):
        good = tmp_path / "ok.jsonl"
        good.write_text(
            '{"text": "alpha beta", "start": 0.0, "end": 1.5}\n'
            '{"text": "gamma delta", "start": 2.0, "end": 3.0}\n'
        )
        segs = parse_transcript_file(good)
        assert [s.text for s in segs] == ["alpha beta", "gamma delta"]

        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            '{"text": "alpha", "start": 0.0, "end": 1.5}\n'
            '{"text": "late", "start": 3.0, "end": 2.0}\n'
        )
        with pytest.raises(InvalidSegments, match="line 2"):
            parse_transcript_file(bad)

    def test_non_json_line_number(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"text": "a", "start": 0, "end": 1}\nnot json\n')
        with pytest.raises(InvalidSegments, match="line 2"):
            parse_transcript_file(bad)

    def test_out_of_order_starts_rejected(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            '{"text": "a b", "start": 5.0, "end": 6.0}\n'
            '{"text": "c d", "start": 1.0, "end": 2.0}\n'
        )
        with pytest.raises(InvalidSegments, match="line 2"):
            parse_transcript_file(bad)


class FakeTranscriber:
    def __init__(self, records):
        self.records = records

    def transcribe(self, audio_uri):
        return coerce_provider_segments(self.records)


class TestTranscribeLecture:
    def test_ordered_triples_pass_through(self):
        provider = FakeTranscriber([("hello there", 0.0, 2.0), ("more words", 2.5, 4.0)])
        out = transcribe_lecture(provider, "audio://x")
        assert [(s.text, s.start, s.end) for s in out] == [
            ("hello there", 0.0, 2.0),
            ("more words", 2.5, 4.0),
        ]

    def test_zero_length_span_rejected(self):
        provider = FakeTranscriber([("text", 5.0, 5.0)])
        with pytest.raises(ProviderMalformedOutput):
            transcribe_lecture(provider, "audio://x")

    def test_missing_timestamps_rejected(self):
        provider = FakeTranscriber([{"text": "no times"}])
        with pytest.raises(ProviderMalformedOutput):
            transcribe_lecture(provider, "audio://x")

    def test_unreachable_endpoint(self):
        import httpx

        def raise_connect(request):
            raise httpx.ConnectError("refused")

        provider = HttpTranscriptionProvider(
            endpoint="http://127.0.0.1:1/transcribe",
            transport=httpx.MockTransport(raise_connect),
        )
        with pytest.raises(ProviderTransportError):
            transcribe_lecture(provider, "audio://x")

    def test_http_happy_path(self):
        import httpx

        def respond(request):
            return httpx.Response(
                200,
                json={"segments": [{"text": "spoken words here", "start": 0.0, "end": 3.2}]},
            )

        provider = HttpTranscriptionProvider(
            endpoint="http://host/transcribe", transport=httpx.MockTransport(respond)
        )
        out = transcribe_lecture(provider, "audio://x")
        assert out[0].text == "spoken words here"
