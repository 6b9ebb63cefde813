"""Scripted reference policies for desk-scale checks.

Each policy is stateless: everything it needs comes from the request and the
per-turn seed, so policies are safe to share across threads and replay
byte-for-byte. Policies that read ``request.hidden`` only work on synthetic
videos.
"""

from __future__ import annotations

import numpy as np

from .protocol import render_parts
from .rollout import PolicyRequest
from .types import AnswerInterval, AnswerText, Clip, Task, TemporalInterval

DEFAULT_CHOICES = ("A", "B", "C", "D")


def option_letters(request: PolicyRequest) -> tuple[str, ...]:
    choices = request.question.choices
    if not choices:
        return DEFAULT_CHOICES
    return tuple(c.strip()[0] for c in choices)


def _hidden(request: PolicyRequest):
    if request.hidden is None:
        raise ValueError(f"{request.video.id}: this policy needs a synthetic video")
    return request.hidden


def clip_message(interval: TemporalInterval, think: str) -> str:
    return render_parts(think, Clip(interval))


def answer_message(request: PolicyRequest, rng: np.random.Generator, interval: TemporalInterval | None = None) -> str:
    """Answer from what was seen; guess a letter when nothing was revealed."""
    if request.question.task is Task.GROUNDING:
        span = interval or request.last_clip or request.video.full_span
        return render_parts("The clip I inspected is the moment asked about.", AnswerInterval(span))
    if request.revealed_answer is not None:
        return render_parts("The frames settle it.", AnswerText(request.revealed_answer))
    letters = option_letters(request)
    return render_parts("No frame was decisive, so I guess.", AnswerText(str(rng.choice(letters))))


def shift_inside(evidence: TemporalInterval, offset: float, duration: float) -> TemporalInterval:
    """Move the span by ``|offset|`` toward whichever side of the video has room."""
    room_right = duration - evidence.end_s
    room_left = evidence.start_s
    delta = abs(offset)
    if room_right >= delta or room_right >= room_left:
        delta = min(delta, room_right)
    else:
        delta = -min(delta, room_left)
    return TemporalInterval(evidence.start_s + delta, evidence.end_s + delta)


class OraclePolicy:
    """Clips exactly the hidden evidence, then answers."""

    def generate(self, request: PolicyRequest, seed: int) -> str:
        rng = np.random.default_rng(seed)
        ev = _hidden(request).evidence
        if request.turn == 1 and request.t_max > 1:
            return clip_message(ev, "The event should be inside this span.")
        return answer_message(request, rng, ev)


class DirectAnswerPolicy:
    """Answers from the skim alone, never clips."""

    def generate(self, request: PolicyRequest, seed: int) -> str:
        return answer_message(request, np.random.default_rng(seed))


class RefinePolicy:
    """First clip is off by ``offset_s``; the second is corrected; then answers."""

    def __init__(self, offset_s: float = 30.0):
        self.offset_s = offset_s

    def generate(self, request: PolicyRequest, seed: int) -> str:
        rng = np.random.default_rng(seed)
        ev = _hidden(request).evidence
        if request.turn == 1 and request.t_max > 1:
            first = TemporalInterval(ev.start_s + self.offset_s, ev.end_s + self.offset_s)
            return clip_message(first, "A first rough guess at the span.")
        if request.turn == 2 and request.t_max > 2:
            return clip_message(ev, "The earlier clip missed part of it; refining.")
        return answer_message(request, rng, ev)


class BlindPolicy:
    """Clips a uniformly random interval (two sorted uniform points), then answers."""

    def generate(self, request: PolicyRequest, seed: int) -> str:
        rng = np.random.default_rng(seed)
        if request.turn == 1 and request.t_max > 1:
            a, b = sorted(rng.uniform(0.0, request.video.duration_s, size=2))
            return clip_message(TemporalInterval(a, b), "Any span will do.")
        return answer_message(request, rng)


class NoisyPolicy:
    """Clips the evidence displaced by a fraction of its own length.

    The displacement fraction grows linearly with video duration,
    ``scale * duration / max_duration``, so longer videos are grounded worse.
    """

    def __init__(self, scale: float = 0.5, max_duration_s: float = 4800.0):
        self.scale = scale
        self.max_duration_s = max_duration_s

    def error_fraction(self, duration_s: float) -> float:
        return self.scale * duration_s / self.max_duration_s

    def generate(self, request: PolicyRequest, seed: int) -> str:
        rng = np.random.default_rng(seed)
        ev = _hidden(request).evidence
        if request.turn == 1 and request.t_max > 1:
            offset = self.error_fraction(request.video.duration_s) * ev.length
            return clip_message(shift_inside(ev, offset, request.video.duration_s), "Roughly here.")
        return answer_message(request, rng, request.last_clip)


class LengthAwarePolicy:
    """Answers directly on short videos and clips the evidence on longer ones."""

    def __init__(self, threshold_s: float = 180.0):
        self.threshold_s = threshold_s

    def generate(self, request: PolicyRequest, seed: int) -> str:
        rng = np.random.default_rng(seed)
        short = request.video.duration_s < self.threshold_s
        if not short and request.turn == 1 and request.t_max > 1:
            return clip_message(_hidden(request).evidence, "Long video; zooming in.")
        return answer_message(request, rng)


class ReplayPolicy:
    """Returns pre-written messages in order, one per turn."""

    def __init__(self, messages: list[str]):
        self.messages = list(messages)

    def generate(self, request: PolicyRequest, seed: int) -> str:
        return self.messages[min(request.turn, len(self.messages)) - 1]


SCRIPTED = {
    "oracle": OraclePolicy,
    "direct": DirectAnswerPolicy,
    "refine": RefinePolicy,
    "blind": BlindPolicy,
    "noisy": NoisyPolicy,
    "length_aware": LengthAwarePolicy,
}
