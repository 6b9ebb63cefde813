"""The localize-clip-answer loop.

A rollout starts from a skim of the whole video, then alternates policy
messages and environment observations until the policy answers or the turn
budget runs out. Each clip request is turned into a crop plan and appended to
the context; nothing is ever evicted.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .cliptool import OutOfRange, SamplingConfig, crop_plan, skim_plan
from .grpo import GroupAdvantages, GroupTooSmall, group_advantages
from .protocol import ParseFailure, parse_assistant
from .rewards import RewardBreakdown, RewardConfig, score_trajectory
from .types import (
    AssistantTurn,
    Clip,
    Observation,
    Question,
    Step,
    TemporalInterval,
    Termination,
    Trajectory,
    VideoMeta,
    is_answer,
)

log = logging.getLogger(__name__)

MALFORMED_MESSAGE = "malformed tool call"
CLIP_OUT_OF_RANGE = "clip outside video"

SYSTEM_PROMPT = (
    "Reason inside <think></think>. Then either request a clip with "
    '<tool_call>{"name": "video_clip", "arguments": {"start_time": s, "end_time": e}}</tool_call> '
    "or reply with <answer></answer>. Grounding answers use the form [start, end] in seconds."
)


class ParseFailurePolicy(str, Enum):
    TERMINATE = "terminate"
    ERROR_OBSERVATION_AND_CONTINUE = "error_observation_and_continue"


@dataclass(frozen=True, slots=True)
class RolloutConfig:
    t_max: int = 3
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    on_parse_failure: ParseFailurePolicy = ParseFailurePolicy.ERROR_OBSERVATION_AND_CONTINUE
    temperature: float = 0.1
    jobs: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "on_parse_failure", ParseFailurePolicy(self.on_parse_failure))
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")


@dataclass(frozen=True, slots=True)
class SyntheticVideo:
    """A stand-in video with a hidden evidence span and its answer.

    The question becomes answerable once the frames seen so far put enough
    timestamps inside the evidence span: at least ``coverage_fraction`` of what
    a perfect crop of that span would deliver under the sampling budget.
    """

    meta: VideoMeta
    evidence: TemporalInterval
    answer: str
    coverage_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.evidence.end_s > self.meta.duration_s:
            raise ValueError("evidence must lie inside the video")

    def required_frames(self, cfg: SamplingConfig) -> float:
        best = min(self.evidence.length * cfg.fps_cap, cfg.clip_max_frames)
        return self.coverage_fraction * best

    def frames_on_evidence(self, timestamps) -> int:
        lo, hi = self.evidence.start_s, self.evidence.end_s
        return sum(1 for t in timestamps if lo <= t <= hi)

    def answerable(self, timestamps, cfg: SamplingConfig) -> bool:
        hits = self.frames_on_evidence(timestamps)
        return hits >= 1 and hits >= self.required_frames(cfg)

    def describe(self, timestamps, cfg: SamplingConfig) -> tuple[str, str | None]:
        if self.answerable(timestamps, cfg):
            return f"The sampled frames show that option {self.answer} is correct.", self.answer
        return "The sampled frames contain no decisive evidence.", None


@dataclass(frozen=True)
class PolicyRequest:
    """Everything a policy may look at before writing its next message.

    ``hidden`` is populated only for synthetic videos and exists so scripted
    reference policies (oracle, refine, noisy) can be built; learned or remote
    policies never see it.
    """

    video: VideoMeta
    question: Question
    messages: tuple[dict, ...]
    turn: int
    t_max: int
    revealed_answer: str | None
    last_clip: TemporalInterval | None
    temperature: float
    hidden: SyntheticVideo | None = None


class Policy(Protocol):
    def generate(self, request: PolicyRequest, seed: int) -> str: ...


class PolicyTransportError(RuntimeError):
    pass


class RolloutFailure(RuntimeError):
    def __init__(self, message: str, partial: Trajectory):
        super().__init__(message)
        self.partial = partial


def _text(text: str) -> dict:
    return {"type": "text", "text": text}


def _frames(obs: Observation) -> dict:
    return {"type": "frames", "timestamps": list(obs.timestamps), "clip": obs.interval.as_list()}


def question_prompt(q: Question) -> str:
    lines = [q.text]
    if q.choices:
        lines.extend(q.choices)
    return "\n".join(lines)


@dataclass(frozen=True)
class RolloutState:
    video: VideoMeta
    question: Question
    cfg: RolloutConfig
    env: SyntheticVideo | None
    steps: tuple[Step, ...]
    messages: tuple[dict, ...]
    seen: tuple[float, ...]
    revealed_answer: str | None = None
    terminated_by: Termination | None = None

    @property
    def turn(self) -> int:
        return len(self.steps) + 1

    @property
    def done(self) -> bool:
        return self.terminated_by is not None

    def last_clip(self) -> TemporalInterval | None:
        for s in reversed(self.steps):
            if isinstance(s.turn.action, Clip) and s.observation and s.observation.interval:
                return s.observation.interval
        return None

    def request(self, hidden_ok: bool = True) -> PolicyRequest:
        return PolicyRequest(
            video=self.video,
            question=self.question.public(),
            messages=self.messages,
            turn=self.turn,
            t_max=self.cfg.t_max,
            revealed_answer=self.revealed_answer,
            last_clip=self.last_clip(),
            temperature=self.cfg.temperature,
            hidden=self.env if hidden_ok else None,
        )

    def trajectory(self, terminated_by: Termination | None = None, group_id: str | None = None) -> Trajectory:
        return Trajectory(
            self.video,
            self.question,
            self.steps,
            terminated_by or self.terminated_by or Termination.PROTOCOL_ERROR,
            group_id,
        )


def _env_text(env: SyntheticVideo | None, seen, cfg: SamplingConfig) -> tuple[list[dict], str | None]:
    if env is None:
        return [], None
    text, revealed = env.describe(seen, cfg)
    return [_text(text)], revealed


def start(
    video: VideoMeta | SyntheticVideo, question: Question, cfg: RolloutConfig = RolloutConfig()
) -> RolloutState:
    env = video if isinstance(video, SyntheticVideo) else None
    meta = env.meta if env else video
    skim = skim_plan(meta, cfg.sampling)
    extra, revealed = _env_text(env, skim.timestamps, cfg.sampling)
    messages = (
        {"role": "system", "content": [_text(SYSTEM_PROMPT)]},
        {"role": "user", "content": [_text(question_prompt(question.public())), _frames(skim), *extra]},
    )
    return RolloutState(meta, question, cfg, env, (), messages, skim.timestamps, revealed)


def step(state: RolloutState, raw_message: str) -> RolloutState:
    """Append one assistant message and the environment's response."""
    if state.done:
        raise RuntimeError("rollout already terminated")
    cfg = state.cfg
    assistant_msg = {"role": "assistant", "content": [_text(raw_message)]}
    last_turn = state.turn >= cfg.t_max

    try:
        turn = parse_assistant(raw_message)
    except ParseFailure as exc:
        log.debug("turn %d unparseable: %s", state.turn, exc)
        bad = AssistantTurn("", None, raw_message)
        if cfg.on_parse_failure is ParseFailurePolicy.TERMINATE or last_turn:
            return replace(
                state,
                steps=state.steps + (Step(bad),),
                messages=state.messages + (assistant_msg,),
                terminated_by=Termination.PROTOCOL_ERROR,
            )
        obs = Observation(None, (), MALFORMED_MESSAGE)
        tool_msg = {"role": "tool", "content": [_text(f"{MALFORMED_MESSAGE}: {exc.reason}")]}
        return replace(
            state,
            steps=state.steps + (Step(bad, obs),),
            messages=state.messages + (assistant_msg, tool_msg),
        )

    if is_answer(turn.action):
        return replace(
            state,
            steps=state.steps + (Step(turn),),
            messages=state.messages + (assistant_msg,),
            terminated_by=Termination.ANSWER,
        )

    try:
        obs = crop_plan(state.video, turn.action.interval, cfg.sampling)
    except OutOfRange:
        obs = Observation(None, (), CLIP_OUT_OF_RANGE)
        content = [_text(CLIP_OUT_OF_RANGE)]
        seen, revealed = state.seen, state.revealed_answer
    else:
        seen = tuple(sorted(set(state.seen).union(obs.timestamps)))
        extra, revealed = _env_text(state.env, seen, cfg.sampling)
        content = [_frames(obs), *extra]
    return replace(
        state,
        steps=state.steps + (Step(turn, obs),),
        messages=state.messages + (assistant_msg, {"role": "tool", "content": content}),
        seen=seen,
        revealed_answer=revealed,
        terminated_by=Termination.MAX_TURNS if last_turn else None,
    )


def turn_seed(seed: int, turn: int) -> int:
    return int(np.random.SeedSequence([seed, turn]).generate_state(1)[0])


def run_rollout(
    policy: Policy,
    video: VideoMeta | SyntheticVideo,
    question: Question,
    cfg: RolloutConfig = RolloutConfig(),
    seed: int = 0,
    group_id: str | None = None,
) -> Trajectory:
    state = start(video, question, cfg)
    while not state.done:
        try:
            raw = policy.generate(state.request(), turn_seed(seed, state.turn))
        except PolicyTransportError as exc:
            raise RolloutFailure(str(exc), state.trajectory(Termination.PROTOCOL_ERROR, group_id)) from exc
        state = step(state, raw)
    return state.trajectory(group_id=group_id)


def rollout_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass(frozen=True)
class GroupResult:
    trajectories: tuple[Trajectory, ...]
    breakdowns: tuple[RewardBreakdown, ...]
    failures: dict[int, RolloutFailure]

    @property
    def rewards(self) -> tuple[float, ...]:
        return tuple(b.total for b in self.breakdowns)

    def advantages(self) -> GroupAdvantages:
        return group_advantages(self.rewards)


def run_group(
    policy: Policy,
    video: VideoMeta | SyntheticVideo,
    question: Question,
    group_size: int,
    cfg: RolloutConfig = RolloutConfig(),
    seed: int = 0,
    reward_cfg: RewardConfig = RewardConfig(),
    group_id: str | None = None,
) -> GroupResult:
    """Sample ``group_size`` independent rollouts and score each one.

    A failed rollout keeps its partial trajectory (scored like any other) and is
    listed in ``failures``; the rest of the group is unaffected.
    """
    if group_size < 2:
        raise GroupTooSmall(f"group size must be >= 2, got {group_size}")

    def one(s: int) -> tuple[Trajectory, RolloutFailure | None]:
        try:
            return run_rollout(policy, video, question, cfg, s, group_id), None
        except RolloutFailure as exc:
            return exc.partial, exc

    seeds = rollout_seeds(seed, group_size)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    trajectories = tuple(t for t, _ in results)
    failures = {i: f for i, (_, f) in enumerate(results) if f is not None}
    breakdowns = tuple(score_trajectory(t, reward_cfg) for t in trajectories)
    return GroupResult(trajectories, breakdowns, failures)


@dataclass(frozen=True, slots=True)
class ToolCallStats:
    clip_ratio: float
    avg_clips: float
    n: int


def toolcall_behavior(trajectories: Sequence[Trajectory]) -> ToolCallStats:
    if not trajectories:
        raise ValueError("no trajectories")
    counts = [len(t.clips()) for t in trajectories]
    n = len(counts)
    return ToolCallStats(sum(c > 0 for c in counts) / n, sum(counts) / n, n)
