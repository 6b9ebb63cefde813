"""Unified SFT supervision mask: only the last two assistant turns carry loss."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .types import Trajectory

SUPERVISED_TURNS = 2


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


class NoAssistantSpans(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class MessageSpan:
    role: Role
    start: int
    length: int
    turn_index: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", Role(self.role))
        if self.length <= 0 or self.start < 0:
            raise ValueError(f"bad span start={self.start} length={self.length}")


SupervisionMask = tuple[bool, ...]


def _check_spans(spans: Sequence[MessageSpan]) -> None:
    for prev, cur in zip(spans, spans[1:]):
        if cur.start < prev.start + prev.length:
            raise ValueError("spans must be ordered and disjoint")


def unified_mask(spans: Sequence[MessageSpan]) -> SupervisionMask:
    _check_spans(spans)
    assistant = [i for i, s in enumerate(spans) if s.role is Role.ASSISTANT]
    if not assistant:
        raise NoAssistantSpans("sample has no assistant message")
    # order by turn_index when present, else by position
    ranked = sorted(assistant, key=lambda i: (spans[i].turn_index if spans[i].turn_index is not None else i, i))
    keep = set(ranked[-SUPERVISED_TURNS:])
    return tuple(i in keep for i in range(len(spans)))


def masked_token_count(mask: Sequence[bool], spans: Sequence[MessageSpan]) -> tuple[int, int]:
    if len(mask) != len(spans):
        raise ValueError("mask and spans are misaligned")
    supervised = sum(s.length for m, s in zip(mask, spans) if m)
    total = sum(s.length for s in spans)
    return supervised, total - supervised


def whitespace_tokens(text: str) -> int:
    return max(1, len(text.split()))


def trajectory_messages(t: Trajectory) -> list[tuple[Role, str]]:
    """Flatten a trajectory into chat messages: question, then turns and observations."""
    q = t.question
    prompt = q.text if not q.choices else q.text + "\n" + "\n".join(q.choices)
    messages = [(Role.USER, prompt)]
    for step in t.steps:
        messages.append((Role.ASSISTANT, step.turn.raw_text))
        obs = step.observation
        if obs is not None:
            if obs.error is not None:
                messages.append((Role.TOOL, obs.error))
            else:
                messages.append((Role.TOOL, " ".join(repr(ts) for ts in obs.timestamps)))
    return messages


def trajectory_spans(
    t: Trajectory, count_tokens: Callable[[str], int] = whitespace_tokens
) -> list[MessageSpan]:
    spans, pos, turn = [], 0, 0
    for role, text in trajectory_messages(t):
        n = count_tokens(text)
        index = None
        if role is Role.ASSISTANT:
            turn += 1
            index = turn
        spans.append(MessageSpan(role, pos, n, index))
        pos += n
    return spans


def export_record(sample_id: str, spans: Sequence[MessageSpan], mask: Sequence[bool]) -> dict:
    return {
        "sample_id": sample_id,
        "spans": [
            {"role": s.role.value, "start": s.start, "len": s.length, "supervised": bool(m)}
            for s, m in zip(spans, mask)
        ],
    }
