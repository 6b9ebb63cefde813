"""Tagged assistant-message grammar.

A message is one ``<think>`` block followed by exactly one action block,
either ``<tool_call>`` carrying a JSON ``video_clip`` call or ``<answer>``.
Whitespace between blocks is ignored; whitespace inside blocks is kept.
"""

from __future__ import annotations

import json
import math
import re

from .types import (
    AnswerInterval,
    AnswerText,
    AssistantTurn,
    Clip,
    TemporalInterval,
    Trajectory,
    is_answer,
)

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
TOOL_OPEN, TOOL_CLOSE = "<tool_call>", "</tool_call>"
ANSWER_OPEN, ANSWER_CLOSE = "<answer>", "</answer>"
ALL_TAGS = (THINK_OPEN, THINK_CLOSE, TOOL_OPEN, TOOL_CLOSE, ANSWER_OPEN, ANSWER_CLOSE)

TOOL_NAME = "video_clip"
START_KEY, END_KEY = "start_time", "end_time"

_NUM = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
INTERVAL_ANSWER = re.compile(rf"\s*\[\s*({_NUM})\s*,\s*({_NUM})\s*\]\s*")


class ParseFailure(ValueError):
    def __init__(self, reason: str, position: int):
        super().__init__(f"{reason} (at {position})")
        self.reason = reason
        self.position = position


def _skip_ws(raw: str, pos: int) -> int:
    while pos < len(raw) and raw[pos].isspace():
        pos += 1
    return pos


def _read_block(raw: str, pos: int, open_tag: str, close_tag: str, name: str) -> tuple[str, int]:
    """Read ``open_tag ... close_tag`` starting at ``pos``; return (content, end)."""
    body_start = pos + len(open_tag)
    close = raw.find(close_tag, body_start)
    if close < 0:
        raise ParseFailure(f"unclosed {name} block", pos)
    content = raw[body_start:close]
    for tag in ALL_TAGS:
        inner = content.find(tag)
        if inner >= 0:
            raise ParseFailure(f"tag {tag} inside {name} block", body_start + inner)
    return content, close + len(close_tag)


def _number(value: object) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _parse_tool_call(content: str, pos: int) -> Clip:
    try:
        payload = json.loads(content)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"malformed tool call JSON: {exc.msg}", pos + exc.pos) from None
    if not isinstance(payload, dict) or set(payload) != {"name", "arguments"}:
        raise ParseFailure("tool call must be an object with name and arguments", pos)
    if payload["name"] != TOOL_NAME:
        raise ParseFailure(f"unknown tool {payload['name']!r}", pos)
    args = payload["arguments"]
    if not isinstance(args, dict) or set(args) != {START_KEY, END_KEY}:
        raise ParseFailure("tool arguments must be exactly start_time and end_time", pos)
    start, end = _number(args[START_KEY]), _number(args[END_KEY])
    if start is None or end is None:
        raise ParseFailure("non-numeric clip time", pos)
    try:
        return Clip(TemporalInterval(start, end))
    except ValueError as exc:
        raise ParseFailure(f"invalid clip interval: {exc}", pos) from None


def _parse_answer(content: str, pos: int) -> AnswerText | AnswerInterval:
    m = INTERVAL_ANSWER.fullmatch(content)
    if m:
        try:
            return AnswerInterval(TemporalInterval(float(m.group(1)), float(m.group(2))))
        except ValueError as exc:
            raise ParseFailure(f"invalid answer interval: {exc}", pos) from None
    if not content.strip():
        raise ParseFailure("empty answer", pos)
    return AnswerText(content)


def parse_assistant(raw: str) -> AssistantTurn:
    """Parse one assistant message; raise :class:`ParseFailure` if it is malformed."""
    pos = _skip_ws(raw, 0)
    if not raw.startswith(THINK_OPEN, pos):
        raise ParseFailure("missing think block", pos)
    think, pos = _read_block(raw, pos, THINK_OPEN, THINK_CLOSE, "think")

    pos = _skip_ws(raw, pos)
    if raw.startswith(TOOL_OPEN, pos):
        content, end = _read_block(raw, pos, TOOL_OPEN, TOOL_CLOSE, "tool_call")
        action = _parse_tool_call(content, pos + len(TOOL_OPEN))
    elif raw.startswith(ANSWER_OPEN, pos):
        content, end = _read_block(raw, pos, ANSWER_OPEN, ANSWER_CLOSE, "answer")
        action = _parse_answer(content, pos + len(ANSWER_OPEN))
    elif pos == len(raw):
        raise ParseFailure("missing action block", pos)
    elif raw.startswith(THINK_OPEN, pos):
        raise ParseFailure("duplicate think block", pos)
    else:
        raise ParseFailure("text outside blocks", pos)

    tail = _skip_ws(raw, end)
    if tail != len(raw):
        if any(raw.startswith(tag, tail) for tag in ALL_TAGS):
            raise ParseFailure("duplicate block", tail)
        raise ParseFailure("text after final block", tail)
    return AssistantTurn(think=think, action=action, raw_text=raw)


def try_parse(raw: str) -> AssistantTurn:
    """Like :func:`parse_assistant` but returns a malformed turn instead of raising."""
    try:
        return parse_assistant(raw)
    except ParseFailure:
        return AssistantTurn(think="", action=None, raw_text=raw)


def _fmt(x: float) -> str:
    return repr(float(x))


def render_parts(think: str, action: Clip | AnswerText | AnswerInterval) -> str:
    """Canonical serialization. Raises ValueError for content the grammar cannot carry."""
    for tag in ALL_TAGS:
        if tag in think:
            raise ValueError(f"think text contains reserved tag {tag}")
    head = f"{THINK_OPEN}{think}{THINK_CLOSE}"
    if isinstance(action, Clip):
        payload = {
            "name": TOOL_NAME,
            "arguments": {START_KEY: action.interval.start_s, END_KEY: action.interval.end_s},
        }
        return f"{head}{TOOL_OPEN}{json.dumps(payload)}{TOOL_CLOSE}"
    if isinstance(action, AnswerInterval):
        iv = action.interval
        return f"{head}{ANSWER_OPEN}[{_fmt(iv.start_s)}, {_fmt(iv.end_s)}]{ANSWER_CLOSE}"
    if isinstance(action, AnswerText):
        text = action.text
        for tag in ALL_TAGS:
            if tag in text:
                raise ValueError(f"answer text contains reserved tag {tag}")
        if not text.strip():
            raise ValueError("answer text is empty")
        if INTERVAL_ANSWER.fullmatch(text):
            raise ValueError("answer text is indistinguishable from an interval answer")
        return f"{head}{ANSWER_OPEN}{text}{ANSWER_CLOSE}"
    raise TypeError(f"not an action: {action!r}")


def render_assistant(turn: AssistantTurn) -> str:
    if turn.action is None:
        raise ValueError("cannot render a malformed turn")
    return render_parts(turn.think, turn.action)


def make_turn(think: str, action: Clip | AnswerText | AnswerInterval) -> AssistantTurn:
    return AssistantTurn(think=think, action=action, raw_text=render_parts(think, action))


def format_valid(t: Trajectory) -> bool:
    """True iff every turn parses, every non-final turn clips and the last one answers."""
    if not t.steps:
        return False
    turns = t.turns
    for i, turn in enumerate(turns):
        try:
            parsed = parse_assistant(turn.raw_text)
        except ParseFailure:
            return False
        final = i == len(turns) - 1
        if final and not is_answer(parsed.action):
            return False
        if not final and not isinstance(parsed.action, Clip):
            return False
    return True
