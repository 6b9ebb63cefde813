"""Agentic localize-clip-answer harness for long-video grounding and QA."""

from .types import (
    AnswerInterval,
    AnswerText,
    AssistantTurn,
    Clip,
    Observation,
    Question,
    Step,
    Task,
    TemporalInterval,
    Termination,
    Trajectory,
    VideoMeta,
    final_action,
    validate_trajectory,
)

__version__ = "0.1.0"
