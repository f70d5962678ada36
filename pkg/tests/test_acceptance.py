"""Acceptance suite: one test per release criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible with ``pytest -s``
or in captured output) and enforces the stated tolerance and runtime budget.
"""

import copy
import json
import math
import random
import time
from collections import deque
from contextlib import contextmanager

import pytest

from tourguide import analytics, museum, navsim
from tourguide.dialogue import ChatMessage, LlmResponse, ToolCall, render_prompt
from tourguide.engine import (APOLOGY_TEXT, EngineConfig, GREETING_TEXT,
                              SessionEvent, SessionState, TourPhase,
                              call_backend, handle_event, run_loop)
from tourguide.errors import BackendError, NoPath
from tourguide.museum import Artwork, OccupancyGrid, Pose


@contextmanager
def criterion(name, budget_s):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < budget_s, f"{name}: {elapsed:.2f}s exceeds {budget_s}s budget"
    print(f"[PASS] {name} ({elapsed:.2f}s)")


# --- engine helpers ----------------------------------------------------------

def fresh(museum_map, sid="acc"):
    return SessionState.new(museum_map, EngineConfig(), sid)


def step(state, event):
    state, effects = handle_event(state, event)
    return state, effects


def tick_until(state, predicate, limit=300):
    for _ in range(limit):
        if predicate(state):
            return state
        state, _ = step(state, SessionEvent.tick(state.clock + 1.0, 1.0))
    raise AssertionError("condition not reached within tick limit")


def consented(museum_map, backend=None):
    """State parked at the first mandatory area with consent given."""
    state = fresh(museum_map)
    state, _ = step(state, SessionEvent.visitor_detected(0.0))
    state, _ = step(state, SessionEvent.tick(1.0, 1.0))
    state, _ = step(state, SessionEvent.consent(2.0, True))
    return tick_until(state, lambda s: s.phase is TourPhase.AT_AREA)


def ask(state, backend, text):
    state, effects = step(state, SessionEvent.utterance(state.clock, text))
    if any(type(e).__name__ == "RequestBackend" for e in effects):
        result = call_backend(state, backend)
        if result is not None:
            t, reply = result
            state, effects = step(state, SessionEvent.backend_reply(t, reply))
    return state, effects


# --- criteria ----------------------------------------------------------------

def test_behavior_matrix(museum_map, scripted_backend):
    with criterion("behavior matrix: six trigger/behavior rows", 1.0):
        # approach -> greeting
        s = fresh(museum_map)
        s, eff = step(s, SessionEvent.visitor_detected(0.0))
        says = [e.text for e in eff if type(e).__name__ == "Say"]
        assert says == [GREETING_TEXT]

        # consent -> guided to the first mandatory area
        s, _ = step(s, SessionEvent.tick(1.0, 1.0))
        s, _ = step(s, SessionEvent.consent(2.0, True))
        assert s.phase is TourPhase.NAVIGATING
        assert s.target_area_id == museum_map.mandatory_area(1).id

        # readiness at the first area -> guided to the second
        s = tick_until(s, lambda st: st.phase is TourPhase.AT_AREA)
        s, _ = step(s, SessionEvent.utterance(s.clock, "Let's continue."))
        assert s.phase is TourPhase.NAVIGATING
        assert s.target_area_id == museum_map.mandatory_area(2).id

        # area request after the mandatory pair -> guided to the requested area
        s = tick_until(s, lambda st: st.phase is TourPhase.AT_AREA)
        s, _ = ask(s, scripted_backend,
                   "Can you take me to the Military Ships area?")
        assert s.phase is TourPhase.NAVIGATING
        assert s.target_area_id == "military_ships"

        # prolonged silence -> tour ends autonomously
        s2 = fresh(museum_map, "acc-silent")
        s2, _ = step(s2, SessionEvent.visitor_detected(0.0))
        s2, _ = step(s2, SessionEvent.tick(1.0, 1.0))
        s2 = tick_until(s2, lambda st: st.phase is TourPhase.ENDING)
        assert [tc.name for tc, _ in s2.transcript.tool_calls] == ["end_tour"]

        # explicit end request -> tour ends
        s3 = consented(museum_map)
        s3, _ = step(s3, SessionEvent.end_request(s3.clock))
        assert s3.phase is TourPhase.ENDING
        assert s3.transcript.tool_calls[-1][0].name == "end_tour"


def test_silence_timeout_exactness(fixtures_dir, museum_map, scripted_backend):
    with criterion("silence timeout fires in (120, 121] s; ends at entrance", 1.0):
        from tourguide.personas import _merged_stream, load_persona_file, schedule_events
        persona = load_persona_file(fixtures_dir / "personas" / "silent.json")
        config = EngineConfig()
        state = SessionState.new(museum_map, config, "acc-timeout")
        transcript = run_loop(
            state, _merged_stream(schedule_events(persona, museum_map), state,
                                  config.tick_s), scripted_backend)
        end_calls = [(tc, t) for tc, t in transcript.tool_calls
                     if tc.name == "end_tour"]
        assert len(end_calls) == 1
        silence = end_calls[0][1] - 1.0  # listening starts at the first tick
        assert 120.0 < silence <= 121.0
        wp = museum_map.entrance.waypoint
        assert math.hypot(state.nav.pose.x - wp.x,
                          state.nav.pose.y - wp.y) <= museum_map.grid.resolution


def test_mandatory_prefix(fixtures_dir, museum_map, scripted_backend):
    with criterion("mandatory areas always open the tour, in rank order", 5.0):
        from test_personas import fuzz_persona
        from tourguide.personas import load_persona_file, run_session
        personas = [load_persona_file(fixtures_dir / "personas" / f"{n}.json")
                    for n in ("quitter", "full_tour", "archetypes")]
        personas += [fuzz_persona(seed) for seed in range(20)]
        expected = [museum_map.mandatory_area(1).id, museum_map.mandatory_area(2).id]
        for persona in personas:
            transcript = run_session(persona, museum_map, scripted_backend)
            assert transcript.areas_visited[:2] == expected, persona.name


def test_prompt_locality_and_boundedness(museum_doc, museum_map):
    with criterion("prompt unchanged by out-of-area artwork injection; "
                   "five headers once each in order", 1.0):
        from test_dialogue import make_bundle
        from tourguide.dialogue import SECTION_HEADERS
        doc = copy.deepcopy(museum_doc)
        for i in range(100):
            doc["artworks"].append({
                "id": f"noise-{i}", "title": f"Noise {i}", "author": "N",
                "position": [1.0 + (i % 3) * 0.1, 1.0 + (i // 3) * 0.05],
                "facts": ["noise"], "trigger_radius_m": 0.5,
                "passing_utterance": "noise"})
        base = render_prompt(make_bundle(museum_map))
        aug = render_prompt(make_bundle(museum.load_museum(doc)))
        assert base == aug
        positions = [base.index(h) for h in SECTION_HEADERS]
        assert positions == sorted(positions)
        assert all(base.count(h) == 1 for h in SECTION_HEADERS)


def oracle_distance(grid, s, g):
    """Independent BFS cell-count oracle; None when unreachable."""
    dist = {s: 1}
    queue = deque([s])
    while queue:
        cell = queue.popleft()
        if cell == g:
            return dist[cell]
        r, c = cell
        for nxt in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if nxt not in dist and grid.in_bounds(*nxt) and not grid.is_occupied(*nxt):
                dist[nxt] = dist[cell] + 1
                queue.append(nxt)
    return None


def test_planner_matches_oracle(museum_map):
    with criterion("planner path length equals shortest-path oracle on "
                   "50 random grids", 5.0):
        for seed in range(50):
            rng = random.Random(9000 + seed)
            grid = OccupancyGrid(20, 20, 1.0,
                                 tuple(rng.random() < 0.3 for _ in range(400)))
            free = [(r, c) for r in range(20) for c in range(20)
                    if not grid.is_occupied(r, c)]
            start, goal = rng.sample(free, 2)
            start_pose = Pose(*grid.cell_center(*start))
            goal_xy = grid.cell_center(*goal)
            expect = oracle_distance(grid, start, goal)
            if expect is None:
                with pytest.raises(NoPath):
                    navsim.plan_path(grid, start_pose, goal_xy)
            else:
                path = navsim.plan_path(grid, start_pose, goal_xy)
                assert len(path.waypoints) == expect, seed


def test_notification_geometry():
    with criterion("proximity/orientation notification gating with "
                   "once-per-pass arming", 1.0):
        art = Artwork("a1", "T", "A", (2.0, 1.0), ("f",), 1.0, "ping")
        fov = math.pi / 3

        def fired_along(poses, nav=None):
            nav = nav or navsim.NavState(pose=poses[0])
            out = []
            for i, pose in enumerate(poses):
                nav = navsim.NavState(pose=pose, trigger_arming=nav.trigger_arming)
                nav, fired = navsim.check_notifications(nav, [art], fov, float(i))
                out.append([n.artwork_id for n in fired])
            return out

        # eastbound pass: fires once entering the radius, stays quiet after
        east = [Pose(x, 1.0, 0.0) for x in (0.0, 1.2, 1.6, 2.4)]
        assert fired_along(east) == [[], ["a1"], [], []]

        # behind the robot: inside the radius but outside the field of view
        behind = [Pose(3.0, 1.0, 0.0), Pose(2.5, 1.0, 0.0)]
        assert fired_along(behind) == [[], []]

        # leave beyond 1.5x the radius, return facing it: fires a second time
        round_trip = [Pose(1.2, 1.0, 0.0),          # fire
                      Pose(2.4, 1.0, 0.0),          # inside 1.5x, still disarmed
                      Pose(4.0, 1.0, 0.0),          # beyond 1.5x: re-arms
                      Pose(2.8, 1.0, math.pi)]      # back inside, facing it
        assert fired_along(round_trip) == [["a1"], [], [], ["a1"]]


def test_error_rate_extremes(museum_map):
    with criterion("per-area failure rates 1/17 = 5.88% and 2/6 = 33.33%", 1.0):
        from test_analytics import failure_msg, transcript
        low = [transcript(f"v{i}", areas=("port_of_genoa",)) for i in range(17)]
        low[0] = transcript("v0", areas=("port_of_genoa",),
                            messages=[failure_msg("port_of_genoa")])
        high = [transcript(f"w{i}", areas=("military_ships",)) for i in range(6)]
        for i in range(2):
            high[i] = transcript(f"w{i}", areas=("military_ships",),
                                 messages=[failure_msg("military_ships")])
        rates = analytics.per_area_error_rates(low + high, museum_map)
        assert abs(rates["port_of_genoa"] * 100 - 5.88) <= 0.005
        assert abs(rates["military_ships"] * 100 - 33.33) <= 0.005


def test_metrics_against_hand_arithmetic():
    with criterion("corpus means and deviations match hand arithmetic "
                   "within 0.005", 1.0):
        from test_analytics import three_transcript_fixture, transcript
        m = analytics.compute_metrics(three_transcript_fixture())
        assert abs(m.duration_minutes[0] - 20.0) < 0.005
        assert abs(m.duration_minutes[1] - 10.0) < 0.005
        assert abs(m.questions[0] - 7.3333) < 0.005
        assert abs(m.questions[1] - 3.5119) < 0.005
        solo = analytics.compute_metrics([transcript("solo", minutes=12.0)])
        assert all(getattr(solo, n)[1] == 0.0 for n in analytics.PARAMETERS)


def test_reply_archetype_labels(phrases):
    with criterion("answered / out-of-scope / comprehension-failure "
                   "archetypes classify correctly", 1.0):
        from test_analytics import msg, transcript
        t = transcript(messages=[
            msg("visitor", "Which type of ship is represented in this painting?", 1.0),
            msg("robot", "It is a military cruiser", 2.0),
            msg("visitor", "What is the most beautiful ocean liner?", 3.0),
            msg("robot", "I'm not aware of this information. "
                         "You should ask the museum staff", 4.0),
            msg("visitor", "frgl mmph blorp", 5.0),
            msg("robot", "Could you repeat your question? I didn't understand", 6.0),
        ])
        labels = [m.label for m in analytics.label_turns(t, phrases).messages
                  if m.role == "robot"]
        assert labels == ["answered", "out_of_scope", "comprehension_failure"]


def test_replay_determinism_and_speed(fixtures_dir, tmp_path):
    with criterion("identical inputs give byte-identical transcripts; "
                   "full tour under 2 s", 2.0):
        from click.testing import CliRunner
        from tourguide.cli import main as cli_main
        runner = CliRunner()
        args = lambda out: [
            "run", "--museum", str(fixtures_dir / "museum.json"),
            "--persona", str(fixtures_dir / "personas" / "full_tour.json"),
            "--backend", str(fixtures_dir / "backend_rules.json"),
            "--seed", "0", "--out", str(out)]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert runner.invoke(cli_main, args(a)).exit_code == 0
        assert runner.invoke(cli_main, args(b)).exit_code == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(json.loads(a.read_text())["areas_visited"]) == 7


def test_backend_fault_degradation(museum_map):
    with criterion("backend outage: robot apologizes, session stays alive", 1.0):
        class DownBackend:
            calls = 0

            def complete(self, bundle, tools):
                self.calls += 1
                raise BackendError("unreachable")

        backend = DownBackend()
        state = consented(museum_map)
        state, _ = step(state, SessionEvent.utterance(
            state.clock, "Which type of ship is represented in this painting?"))
        result = call_backend(state, backend)
        assert result is None
        assert backend.calls == state.config.retries + 1
        assert state.history[-1].text == APOLOGY_TEXT
        assert state.transcript.fault_flags
        assert state.phase is TourPhase.AT_AREA  # still serving the visitor
