import json

import pytest

from clipgrounder import jsonl
from clipgrounder.policies import SCRIPTED
from clipgrounder.rollout import run_rollout
from clipgrounder.synthbench import BenchSpec, generate
from clipgrounder.types import AssistantTurn, Question, Step, Termination, Trajectory, VideoMeta


@pytest.fixture(scope="module")
def trajectories():
    bench = generate(BenchSpec(counts=(3, 3, 3, 3), seed=5, grounding_fraction=0.3))
    out = []
    for name, cls in SCRIPTED.items():
        for k, inst in enumerate(bench):
            out.append(run_rollout(cls(), inst.video, inst.question, seed=k, group_id=f"{name}-{k}"))
    return out


def test_round_trip(trajectories):
    for t in trajectories:
        line = jsonl.encode(t)
        assert jsonl.decode(line) == t
        assert jsonl.encode(jsonl.decode(line)) == line


def test_schema_field_names(trajectories):
    d = json.loads(jsonl.encode(trajectories[0]))
    assert set(d) == {"video", "question", "steps", "terminated_by", "group_id"}
    assert set(d["video"]) == {"id", "duration_s"}
    step = d["steps"][0]
    assert {"think", "action"} <= set(step)
    assert step["action"]["type"] in {"clip", "answer_text", "answer_interval"}


def test_strict_and_lenient(trajectories):
    d = jsonl.trajectory_to_dict(trajectories[0])
    d["extra"] = 1
    d["steps"][0]["note"] = "x"
    with pytest.raises(jsonl.SchemaError):
        jsonl.trajectory_from_dict(d)
    assert jsonl.trajectory_from_dict(d, strict=False) == trajectories[0]


def test_malformed_step_keeps_raw():
    t = Trajectory(
        VideoMeta("v", 5), Question("q", gt_answer="A"), (Step(AssistantTurn("", None, "<think>x")),),
        Termination.PROTOCOL_ERROR,
    )
    d = jsonl.trajectory_to_dict(t)
    assert d["steps"][0] == {"think": None, "action": None, "raw": "<think>x"}
    assert jsonl.decode(json.dumps(d)) == t


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        "{}",
        '{"video":{"id":"v","duration_s":-1},"question":{"text":"q"},"steps":[],"terminated_by":"answer"}',
        '{"video":{"id":"v","duration_s":5},"question":{"text":"q"},"steps":[{"think":"t","action":{"type":"zoom"}}],"terminated_by":"answer"}',
        '{"video":{"id":"v","duration_s":5},"question":{"text":"q"},"steps":[],"terminated_by":"bored"}',
    ],
)
def test_rejects_bad_lines(line):
    with pytest.raises(jsonl.SchemaError):
        jsonl.decode(line)


def test_file_helpers(tmp_path, trajectories):
    path = tmp_path / "t.jsonl"
    jsonl.write_jsonl(path, [jsonl.trajectory_to_dict(t) for t in trajectories[:3]])
    path.write_text(path.read_text() + "\n\n")
    assert [jsonl.decode(x) for x in jsonl.read_jsonl(path)] == trajectories[:3]
