"""Shared domain vocabulary: intervals, videos, questions, turns and trajectories.

All types are frozen dataclasses; sequences are stored as tuples so values can
be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

DEFAULT_T_MAX = 3


class Task(str, Enum):
    VIDEOQA = "videoqa"
    GROUNDING = "grounding"


class Termination(str, Enum):
    ANSWER = "answer"
    MAX_TURNS = "max_turns"
    PROTOCOL_ERROR = "protocol_error"


@dataclass(frozen=True, slots=True)
class TemporalInterval:
    """A closed span ``[start_s, end_s]`` in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        start, end = float(self.start_s), float(self.end_s)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise ValueError(f"interval bounds must be finite, got [{start}, {end}]")
        if start < 0:
            raise ValueError(f"interval start must be non-negative, got {start}")
        if start > end:
            raise ValueError(f"reversed interval [{start}, {end}]")
        object.__setattr__(self, "start_s", start)
        object.__setattr__(self, "end_s", end)

    @property
    def length(self) -> float:
        return self.end_s - self.start_s

    def as_list(self) -> list[float]:
        return [self.start_s, self.end_s]


@dataclass(frozen=True, slots=True)
class VideoMeta:
    id: str
    duration_s: float
    source_uri: str | None = None

    def __post_init__(self) -> None:
        duration = float(self.duration_s)
        if not (math.isfinite(duration) and duration > 0):
            raise ValueError(f"video duration must be positive, got {self.duration_s}")
        object.__setattr__(self, "duration_s", duration)

    @property
    def full_span(self) -> TemporalInterval:
        return TemporalInterval(0.0, self.duration_s)


@dataclass(frozen=True, slots=True)
class Question:
    text: str
    task: Task = Task.VIDEOQA
    choices: tuple[str, ...] | None = None
    gt_answer: str | None = None
    gt_interval: TemporalInterval | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", Task(self.task))
        if self.choices is not None:
            object.__setattr__(self, "choices", tuple(self.choices))

    def public(self) -> Question:
        """Copy with ground truth stripped, safe to hand to a policy."""
        return Question(self.text, self.task, self.choices)


@dataclass(frozen=True, slots=True)
class Clip:
    interval: TemporalInterval


@dataclass(frozen=True, slots=True)
class AnswerText:
    text: str


@dataclass(frozen=True, slots=True)
class AnswerInterval:
    interval: TemporalInterval


Action = Union[Clip, AnswerText, AnswerInterval]
ANSWER_TYPES = (AnswerText, AnswerInterval)


def is_answer(action: Action | None) -> bool:
    return isinstance(action, ANSWER_TYPES)


@dataclass(frozen=True, slots=True)
class AssistantTurn:
    """One assistant message.

    ``action`` is ``None`` when ``raw_text`` failed to parse; in that case
    ``think`` is empty and the raw text is kept for diagnostics.
    """

    think: str
    action: Action | None
    raw_text: str

    @property
    def malformed(self) -> bool:
        return self.action is None


@dataclass(frozen=True, slots=True)
class Observation:
    """What the environment returned after a turn.

    A successful crop carries the clamped interval and its frame timestamps.
    Error observations (unusable clip, malformed message) carry ``error`` and
    no frames.
    """

    interval: TemporalInterval | None
    timestamps: tuple[float, ...] = ()
    error: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamps", tuple(float(t) for t in self.timestamps))


@dataclass(frozen=True, slots=True)
class Step:
    turn: AssistantTurn
    observation: Observation | None = None


@dataclass(frozen=True, slots=True)
class Trajectory:
    video: VideoMeta
    question: Question
    steps: tuple[Step, ...]
    terminated_by: Termination
    group_id: str | None = field(default=None, compare=True)

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "terminated_by", Termination(self.terminated_by))

    @property
    def turns(self) -> tuple[AssistantTurn, ...]:
        return tuple(step.turn for step in self.steps)

    def clips(self) -> list[Clip]:
        return [s.turn.action for s in self.steps if isinstance(s.turn.action, Clip)]


def validate_trajectory(
    t: Trajectory, t_max: int = DEFAULT_T_MAX, clip_max_frames: int | None = None
) -> list[str]:
    """Return every invariant violation of ``t``; an empty list means valid."""
    problems: list[str] = []
    n = len(t.steps)
    if n == 0 and t.terminated_by is not Termination.PROTOCOL_ERROR:
        problems.append("no assistant turns")
    if n > t_max:
        problems.append("turn count exceeds T_max")

    answers = [i for i, s in enumerate(t.steps) if is_answer(s.turn.action)]
    if len(answers) > 1:
        problems.append("more than one answer")
    if any(i != n - 1 for i in answers):
        problems.append("answer before final turn")

    for i, step in enumerate(t.steps):
        action, obs = step.turn.action, step.observation
        if isinstance(action, Clip) and obs is None:
            problems.append(f"turn {i + 1}: clip without observation")
        if is_answer(action) and obs is not None:
            problems.append(f"turn {i + 1}: answer followed by observation")
        if obs is not None:
            problems.extend(f"turn {i + 1}: {p}" for p in _observation_problems(obs, clip_max_frames))

    last = t.steps[-1].turn if t.steps else None
    if t.terminated_by is Termination.ANSWER:
        if last is None or not is_answer(last.action):
            problems.append("terminated_by=answer without final answer")
    elif t.terminated_by is Termination.MAX_TURNS:
        if n != t_max:
            problems.append("terminated_by=max_turns before T_max")
        if last is not None and is_answer(last.action):
            problems.append("terminated_by=max_turns but final turn answers")
    elif t.terminated_by is Termination.PROTOCOL_ERROR:
        if last is not None and is_answer(last.action):
            problems.append("terminated_by=protocol_error but final turn answers")
    return problems


def _observation_problems(obs: Observation, clip_max_frames: int | None) -> list[str]:
    out = []
    ts = obs.timestamps
    if obs.error is None and obs.interval is None:
        out.append("observation without interval")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        out.append("timestamps not strictly increasing")
    if ts and obs.interval is not None:
        if ts[0] < obs.interval.start_s or ts[-1] > obs.interval.end_s:
            out.append("timestamp outside interval")
    if clip_max_frames is not None and len(ts) > clip_max_frames:
        out.append("observation exceeds clip frame cap")
    return out


def trajectory_warnings(t: Trajectory) -> list[str]:
    """Soft issues that do not invalidate a trajectory."""
    return [
        f"turn {i + 1}: empty think"
        for i, s in enumerate(t.steps)
        if not s.turn.malformed and not s.turn.think.strip()
    ]


def final_action(t: Trajectory) -> AnswerText | AnswerInterval | None:
    if not t.steps:
        return None
    action = t.steps[-1].turn.action
    return action if is_answer(action) else None
