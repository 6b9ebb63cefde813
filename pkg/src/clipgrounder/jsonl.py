"""Trajectory JSONL codec.

Strict decoding rejects unknown fields; lenient decoding ignores them.
Each step may carry ``"raw"``, the exact assistant message. When it is absent
the canonical rendering is used, and malformed turns always carry it.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .protocol import render_parts
from .types import (
    AnswerInterval,
    AnswerText,
    AssistantTurn,
    Clip,
    Observation,
    Question,
    Step,
    TemporalInterval,
    Trajectory,
    VideoMeta,
)


class SchemaError(ValueError):
    pass


_TOP = {"video", "question", "steps", "terminated_by", "group_id", "curation"}
_VIDEO = {"id", "duration_s", "source_uri"}
_QUESTION = {"text", "task", "choices", "gt_answer", "gt_interval"}
_STEP = {"think", "action", "observation", "raw"}
_OBS = {"interval", "timestamps", "error"}
_ACTION = {"clip": {"type", "interval"}, "answer_text": {"type", "text"}, "answer_interval": {"type", "interval"}}


def _check(obj: dict, allowed: set[str], where: str, strict: bool) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    if strict:
        extra = set(obj) - allowed
        if extra:
            raise SchemaError(f"{where}: unknown fields {sorted(extra)}")


def _interval(value, where: str) -> TemporalInterval:
    if not (isinstance(value, list) and len(value) == 2):
        raise SchemaError(f"{where}: interval must be [start, end]")
    try:
        return TemporalInterval(value[0], value[1])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from None


def video_to_dict(v: VideoMeta) -> dict:
    out = {"id": v.id, "duration_s": v.duration_s}
    if v.source_uri is not None:
        out["source_uri"] = v.source_uri
    return out


def video_from_dict(d: dict, strict: bool = True) -> VideoMeta:
    _check(d, _VIDEO, "video", strict)
    try:
        return VideoMeta(str(d["id"]), d["duration_s"], d.get("source_uri"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"video: {exc}") from None


def question_to_dict(q: Question) -> dict:
    out: dict = {"text": q.text, "task": q.task.value}
    if q.choices is not None:
        out["choices"] = list(q.choices)
    if q.gt_answer is not None:
        out["gt_answer"] = q.gt_answer
    if q.gt_interval is not None:
        out["gt_interval"] = q.gt_interval.as_list()
    return out


def question_from_dict(d: dict, strict: bool = True) -> Question:
    _check(d, _QUESTION, "question", strict)
    try:
        gt = d.get("gt_interval")
        return Question(
            text=d["text"],
            task=d.get("task", "videoqa"),
            choices=d.get("choices"),
            gt_answer=d.get("gt_answer"),
            gt_interval=None if gt is None else _interval(gt, "question.gt_interval"),
        )
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"question: {exc}") from None


def action_to_dict(a) -> dict:
    if isinstance(a, Clip):
        return {"type": "clip", "interval": a.interval.as_list()}
    if isinstance(a, AnswerText):
        return {"type": "answer_text", "text": a.text}
    if isinstance(a, AnswerInterval):
        return {"type": "answer_interval", "interval": a.interval.as_list()}
    raise TypeError(a)


def action_from_dict(d: dict, strict: bool = True):
    if not isinstance(d, dict) or d.get("type") not in _ACTION:
        raise SchemaError(f"action: unknown type {d.get('type') if isinstance(d, dict) else d!r}")
    kind = d["type"]
    _check(d, _ACTION[kind], "action", strict)
    if kind == "clip":
        return Clip(_interval(d.get("interval"), "action.interval"))
    if kind == "answer_interval":
        return AnswerInterval(_interval(d.get("interval"), "action.interval"))
    if not isinstance(d.get("text"), str):
        raise SchemaError("action: answer_text needs a string text")
    return AnswerText(d["text"])


def _canonical(turn: AssistantTurn) -> str | None:
    try:
        return render_parts(turn.think, turn.action)
    except ValueError:
        return None


def step_to_dict(s: Step) -> dict:
    turn = s.turn
    out: dict = {"think": turn.think if not turn.malformed else None}
    out["action"] = None if turn.malformed else action_to_dict(turn.action)
    if turn.malformed or turn.raw_text != _canonical(turn):
        out["raw"] = turn.raw_text
    obs = s.observation
    if obs is not None:
        o: dict = {}
        if obs.interval is not None:
            o["interval"] = obs.interval.as_list()
        o["timestamps"] = list(obs.timestamps)
        if obs.error is not None:
            o["error"] = obs.error
        out["observation"] = o
    return out


def step_from_dict(d: dict, strict: bool = True) -> Step:
    _check(d, _STEP, "step", strict)
    if "action" not in d:
        raise SchemaError("step: missing action")
    if d["action"] is None:
        if not isinstance(d.get("raw"), str):
            raise SchemaError("step: malformed turn needs raw text")
        turn = AssistantTurn("", None, d["raw"])
    else:
        action = action_from_dict(d["action"], strict)
        think = d.get("think")
        if not isinstance(think, str):
            raise SchemaError("step: think must be a string")
        raw = d.get("raw")
        if raw is None:
            try:
                raw = render_parts(think, action)
            except ValueError as exc:
                raise SchemaError(f"step: {exc}") from None
        turn = AssistantTurn(think, action, raw)
    obs = None
    if d.get("observation") is not None:
        o = d["observation"]
        _check(o, _OBS, "observation", strict)
        interval = None if o.get("interval") is None else _interval(o["interval"], "observation.interval")
        timestamps = o.get("timestamps", [])
        if not isinstance(timestamps, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in timestamps
        ):
            raise SchemaError("observation: timestamps must be numbers")
        obs = Observation(interval, tuple(timestamps), o.get("error"))
    return Step(turn, obs)


def trajectory_to_dict(t: Trajectory, **extra) -> dict:
    out = {
        "video": video_to_dict(t.video),
        "question": question_to_dict(t.question),
        "steps": [step_to_dict(s) for s in t.steps],
        "terminated_by": t.terminated_by.value,
    }
    if t.group_id is not None:
        out["group_id"] = t.group_id
    out.update(extra)
    return out


def trajectory_from_dict(d: dict, strict: bool = True) -> Trajectory:
    _check(d, _TOP, "trajectory", strict)
    for key in ("video", "question", "steps", "terminated_by"):
        if key not in d:
            raise SchemaError(f"trajectory: missing {key}")
    if not isinstance(d["steps"], list):
        raise SchemaError("trajectory: steps must be a list")
    try:
        return Trajectory(
            video=video_from_dict(d["video"], strict),
            question=question_from_dict(d["question"], strict),
            steps=tuple(step_from_dict(s, strict) for s in d["steps"]),
            terminated_by=d["terminated_by"],
            group_id=d.get("group_id"),
        )
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"trajectory: {exc}") from None


def encode(t: Trajectory, **extra) -> str:
    return json.dumps(trajectory_to_dict(t, **extra), ensure_ascii=False)


def decode(line: str, strict: bool = True) -> Trajectory:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}") from None
    return trajectory_from_dict(data, strict)


def read_jsonl(path: str | Path) -> Iterator[str]:
    """Yield non-blank lines."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield line


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
