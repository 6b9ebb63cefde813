import json

import pytest

from clipgrounder.policies import OraclePolicy
from clipgrounder.protocol import render_parts
from clipgrounder.remote import HttpClient, HttpPolicy, serve
from clipgrounder.rollout import PolicyTransportError, RolloutFailure, SyntheticVideo, run_rollout
from clipgrounder.types import AnswerText, Clip, Question, TemporalInterval, VideoMeta

VIDEO = SyntheticVideo(VideoMeta("syn", 400), TemporalInterval(100, 120), "B")
Q = Question("what?", choices=("A. a", "B. b"), gt_answer="B", gt_interval=TemporalInterval(100, 120))


@pytest.fixture
def server():
    started = []

    def start(respond):
        srv, _ = serve(respond)
        started.append(srv)
        return f"http://127.0.0.1:{srv.server_address[1]}"

    yield start
    for srv in started:
        srv.shutdown()
        srv.server_close()


def test_wire_contract(server):
    requests = []

    def respond(req):
        requests.append(req)
        turn = sum(m["role"] == "assistant" for m in req["messages"]) + 1
        if turn == 1:
            return render_parts("look", Clip(TemporalInterval(100, 120)))
        return render_parts("ok", AnswerText("B"))

    url = server(respond)
    t = run_rollout(HttpPolicy(url), VIDEO, Q, seed=3)
    assert len(t.steps) == 2
    first = requests[0]
    assert set(first) == {"messages", "temperature", "request_id"}
    assert first["temperature"] == 0.1
    roles = [m["role"] for m in requests[1]["messages"]]
    assert roles == ["system", "user", "assistant", "tool"]
    frames = [c for c in requests[1]["messages"][-1]["content"] if c["type"] == "frames"]
    assert frames[0]["clip"] == [100.0, 120.0] and len(frames[0]["timestamps"]) == 40
    assert all("gt_answer" not in json.dumps(r) for r in requests)


def test_retries_then_succeeds(server):
    calls = []

    def respond(req):
        calls.append(req["request_id"])
        if len(calls) < 3:
            raise RuntimeError("busy")
        return "<think>x</think><answer>B</answer>"

    url = server(respond)
    client = HttpClient(url, retries=2, backoff_s=0.0)
    assert client.generate([], 0.1, "rid") == "<think>x</think><answer>B</answer>"
    assert calls == ["rid", "rid", "rid"]


def test_unreachable_raises_transport_error():
    client = HttpClient("http://127.0.0.1:9", retries=1, backoff_s=0.0, timeout_s=1)
    with pytest.raises(PolicyTransportError):
        client.generate([], 0.1, "x")
    with pytest.raises(RolloutFailure):
        run_rollout(HttpPolicy("http://127.0.0.1:9", retries=0, timeout_s=1), VIDEO, Q)


def test_remote_oracle_matches_local(server):
    # the server can't see hidden state, so it only proves the transport is transparent
    url = server(lambda req: "<think>x</think><answer>B</answer>")
    remote = run_rollout(HttpPolicy(url), VIDEO, Q)
    assert remote.steps[0].turn.raw_text == "<think>x</think><answer>B</answer>"
    assert run_rollout(OraclePolicy(), VIDEO, Q).clips()
