import csv
import json

import pytest

from tourguide import analytics
from tourguide.analytics import (TranscriptRecord, compute_metrics, export_metrics,
                                 label_turns, load_transcript_file,
                                 per_area_error_rates)
from tourguide.dialogue import ChatMessage, ToolCall
from tourguide.errors import EmptyCorpus, ParseError


def msg(role, text, t=0.0, label=None, area=None):
    return ChatMessage(role, text, t, label=label, area_id=area)


def transcript(session_id="t", minutes=10.0, areas=(), messages=()):
    return TranscriptRecord(session_id=session_id, start_s=0.0,
                            end_s=minutes * 60.0, messages=list(messages),
                            areas_visited=list(areas))


# --- labeling ---------------------------------------------------------------

def test_archetype_answered(phrases):
    t = transcript(messages=[
        msg("visitor", "Which type of ship is represented in this painting?", 1.0),
        msg("robot", "It is a military cruiser", 2.0),
    ])
    out = label_turns(t, phrases)
    assert out.messages[0].label == "question"
    assert out.messages[1].label == "answered"


def test_archetype_out_of_scope(phrases):
    t = transcript(messages=[
        msg("visitor", "What is the most beautiful ocean liner ever built?", 1.0),
        msg("robot", "I'm not aware of this information. You should ask the museum staff", 2.0),
    ])
    assert label_turns(t, phrases).messages[1].label == "out_of_scope"


def test_archetype_comprehension_failure(phrases):
    t = transcript(messages=[
        msg("robot", "Could you repeat your question? I didn't understand", 2.0),
    ])
    assert label_turns(t, phrases).messages[0].label == "comprehension_failure"


def test_ground_truth_labels_preserved(phrases):
    t = transcript(messages=[
        msg("visitor", "hmm?", 1.0, label="other"),
        msg("robot", "It is a military cruiser", 2.0, label="other"),
    ])
    out = label_turns(t, phrases)
    assert [m.label for m in out.messages] == ["other", "other"]


def test_labeling_idempotent(phrases):
    t = transcript(messages=[
        msg("visitor", "Which ship is this?", 1.0),
        msg("robot", "A cruiser.", 2.0),
        msg("visitor", "thanks", 3.0),
        msg("robot", "You're welcome!", 4.0),
    ])
    once = label_turns(t, phrases)
    twice = label_turns(once, phrases)
    assert [m.label for m in once.messages] == [m.label for m in twice.messages]


def test_robot_statement_without_question_is_other(phrases):
    t = transcript(messages=[
        msg("visitor", "nice painting", 1.0),
        msg("robot", "Indeed, it is one of our finest.", 2.0),
    ])
    out = label_turns(t, phrases)
    assert out.messages[0].label == "other"
    assert out.messages[1].label == "other"


# --- metrics ----------------------------------------------------------------

def three_transcript_fixture():
    def questions(n):
        out = []
        for i in range(n):
            out.append(msg("visitor", f"question {i}?", float(i), label="question"))
            out.append(msg("robot", "answer", float(i) + 0.5, label="answered"))
        return out

    return [
        transcript("a", minutes=10.0, areas=("sails",), messages=questions(4)),
        transcript("b", minutes=20.0, areas=("sails", "ports_of_europe"),
                   messages=questions(7)),
        transcript("c", minutes=30.0, areas=("sails", "ports_of_europe",
                                             "emigration"), messages=questions(11)),
    ]


def test_metrics_hand_arithmetic():
    m = compute_metrics(three_transcript_fixture())
    mu, sigma = m.duration_minutes
    assert abs(mu - 20.0) < 0.005 and abs(sigma - 10.0) < 0.005
    mu, sigma = m.questions
    assert abs(mu - 7.3333) < 0.005
    assert abs(sigma - 3.5119) < 0.005  # sqrt(111/9), by hand
    mu, _ = m.areas_visited
    assert abs(mu - 2.0) < 0.005
    mu, _ = m.answers
    assert abs(mu - 7.3333) < 0.005


def test_singleton_corpus_sigma_zero():
    m = compute_metrics([transcript("solo", minutes=12.0)])
    for name in analytics.PARAMETERS:
        assert getattr(m, name)[1] == 0.0


def test_empty_corpus_raises():
    with pytest.raises(EmptyCorpus):
        compute_metrics([])


def test_count_consistency_property(fixtures_dir, museum_map, scripted_backend, phrases):
    from tourguide.personas import load_persona_file, run_session
    t = label_turns(run_session(
        load_persona_file(fixtures_dir / "personas" / "archetypes.json"),
        museum_map, scripted_backend), phrases)
    q = sum(1 for m in t.messages if m.role == "visitor" and m.label == "question")
    a = sum(1 for m in t.messages if m.role == "robot" and m.label == "answered")
    oos = sum(1 for m in t.messages if m.role == "robot" and m.label == "out_of_scope")
    assert q >= a + oos - 1  # oos replies may also follow non-question turns


# --- per-area error rates ---------------------------------------------------

def failure_msg(area):
    return msg("robot", "Could you repeat your question? I didn't understand",
               5.0, label="comprehension_failure", area=area)


def test_rate_one_failure_seventeen_visitors(museum_map):
    corpus = [transcript(f"v{i}", areas=("port_of_genoa",)) for i in range(17)]
    corpus[0] = transcript("v0", areas=("port_of_genoa",),
                           messages=[failure_msg("port_of_genoa")])
    rates = per_area_error_rates(corpus, museum_map)
    assert round(rates["port_of_genoa"] * 100, 2) == 5.88


def test_rate_two_failures_six_visitors(museum_map):
    corpus = [transcript(f"v{i}", areas=("military_ships",)) for i in range(6)]
    corpus[0] = transcript("v0", areas=("military_ships",),
                           messages=[failure_msg("military_ships")])
    corpus[1] = transcript("v1", areas=("military_ships",),
                           messages=[failure_msg("military_ships")])
    rates = per_area_error_rates(corpus, museum_map)
    assert round(rates["military_ships"] * 100, 2) == 33.33


def test_zero_failures_zero_rates(museum_map):
    corpus = [transcript("a", areas=("sails", "emigration"))]
    rates = per_area_error_rates(corpus, museum_map)
    assert rates == {"sails": 0.0, "emigration": 0.0}


def test_unvisited_areas_omitted(museum_map):
    corpus = [transcript("a", areas=("sails",))]
    rates = per_area_error_rates(corpus, museum_map)
    assert set(rates) == {"sails"}


def test_rates_in_unit_interval_and_denominator_is_transcripts(museum_map):
    # two failures in one transcript still count one visitor
    corpus = [transcript("a", areas=("sails",),
                         messages=[failure_msg("sails"), failure_msg("sails")])]
    rates = per_area_error_rates(corpus, museum_map)
    assert rates["sails"] == 2.0  # failures / visitors may exceed 1 only if
    # a single visitor fails repeatedly; clamp is deliberately absent


# --- export and IO ----------------------------------------------------------

def test_export_metrics_golden(tmp_path, fixtures_dir, museum_map):
    metrics = compute_metrics(three_transcript_fixture())
    rates = per_area_error_rates(three_transcript_fixture(), museum_map)
    out = tmp_path / "metrics.csv"
    export_metrics(metrics, rates, out)
    golden = (fixtures_dir / "golden_metrics.csv").read_text()
    assert out.read_text() == golden


def test_export_metrics_deterministic(tmp_path, museum_map):
    metrics = compute_metrics(three_transcript_fixture())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    export_metrics(metrics, {}, a)
    export_metrics(metrics, {}, b)
    assert a.read_bytes() == b.read_bytes()


def test_export_metrics_without_rates(tmp_path):
    out = tmp_path / "m.csv"
    export_metrics(compute_metrics(three_transcript_fixture()), {}, out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["name", "mean", "sd"]
    assert len(rows) == 1 + len(analytics.PARAMETERS)


def test_transcript_json_round_trip(tmp_path):
    t = transcript("rt", minutes=5.0, areas=("sails",), messages=[
        msg("visitor", "hi", 1.0, label="other", area="entrance")])
    t.tool_calls.append((ToolCall("go_to", "sails"), 2.0))
    path = tmp_path / "t.json"
    path.write_text(t.to_json())
    again = load_transcript_file(path)
    assert again.to_json() == t.to_json()


def test_malformed_transcript_raises(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"nope": true}')
    with pytest.raises(ParseError):
        load_transcript_file(path)
