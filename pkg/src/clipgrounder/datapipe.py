"""Curation of multi-turn, multi-clip training trajectories.

An external annotator proposes a candidate span, answers from that span alone,
then answers again with everything seen so far. Samples whose answers disagree
with ground truth get one regrounding attempt, but only on videos longer than
the gate; everything else that fails is dropped. Annotator transport failures
defer a sample instead of dropping it.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .cliptool import OutOfRange, SamplingConfig, clamp_interval, crop_plan
from .evalkit import DurationBucket, bucket_of
from .jsonl import question_from_dict, question_to_dict, video_from_dict, video_to_dict
from .protocol import INTERVAL_ANSWER, make_turn
from .rollout import CLIP_OUT_OF_RANGE, PolicyTransportError, question_prompt
from .rewards import Matcher, accuracy_reward, temporal_iou
from .types import (
    AnswerInterval,
    AnswerText,
    Clip,
    Observation,
    Question,
    Step,
    Task,
    TemporalInterval,
    Termination,
    Trajectory,
    VideoMeta,
)

log = logging.getLogger(__name__)

LONG_VIDEO_S = 180.0
RELABEL_IOU = 0.5
MAX_ANNOTATOR_CALLS = 6


class Outcome(str, Enum):
    SINGLE_TOOL = "single_tool"
    MULTI_TOOL = "multi_tool"
    DISCARDED = "discarded"


class AnnotatorError(RuntimeError):
    """The annotator could not be reached or returned garbage."""


class Deferred(RuntimeError):
    def __init__(self, sample_id: str, stage: str, cause: Exception):
        super().__init__(f"{sample_id}: deferred at {stage}: {cause}")
        self.sample_id = sample_id
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True, slots=True)
class RawSample:
    sample_id: str
    video: VideoMeta
    question: Question
    modality: str = "video"

    def __post_init__(self) -> None:
        q = self.question
        if q.task is Task.VIDEOQA and q.gt_answer is None:
            raise ValueError(f"{self.sample_id}: QA sample without gt_answer")
        if q.task is Task.GROUNDING and q.gt_interval is None:
            raise ValueError(f"{self.sample_id}: grounding sample without gt_interval")

    @property
    def task(self) -> Task:
        return self.question.task

    @property
    def original_interval(self) -> TemporalInterval | None:
        return self.question.gt_interval

    @property
    def bucket(self) -> DurationBucket:
        return bucket_of(self.video.duration_s)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "video": video_to_dict(self.video),
            "question": question_to_dict(self.question),
            "modality": self.modality,
        }

    @classmethod
    def from_dict(cls, d: dict) -> RawSample:
        unknown = set(d) - {"sample_id", "video", "question", "modality"}
        if unknown:
            raise ValueError(f"unknown sample fields {sorted(unknown)}")
        return cls(
            str(d["sample_id"]),
            video_from_dict(d["video"]),
            question_from_dict(d["question"]),
            d.get("modality", "video"),
        )


@dataclass(frozen=True)
class FailureContext:
    """What the annotator is shown when asked to reground."""

    candidate: TemporalInterval | None
    failed_stage: str
    answers: tuple[str, ...]


@dataclass(frozen=True)
class FullContext:
    clips: tuple[TemporalInterval, ...]
    transcript: tuple[str, ...] = ()


class Annotator(Protocol):
    def ground(self, sample: RawSample) -> TemporalInterval: ...

    def answer_from_clip(self, sample: RawSample, clip: TemporalInterval) -> str: ...

    def answer_full_context(self, sample: RawSample, context: FullContext) -> str: ...

    def reground(self, sample: RawSample, failure: FailureContext) -> TemporalInterval: ...


def relabel_filter(original: TemporalInterval, relabeled: TemporalInterval) -> bool:
    return temporal_iou(original, relabeled) > RELABEL_IOU


def answer_matches(sample: RawSample, text: str) -> bool:
    """QA answers use the normalized choice matcher; grounding answers must pass the relabel filter."""
    if sample.task is Task.GROUNDING:
        m = INTERVAL_ANSWER.fullmatch(text)
        if m is None:
            return False
        try:
            pred = TemporalInterval(float(m.group(1)), float(m.group(2)))
        except ValueError:
            return False
        return relabel_filter(sample.question.gt_interval, pred)
    return bool(accuracy_reward(text, sample.question.gt_answer, Matcher.MC_NORMALIZED))


def rejection_sample_qa(sample: RawSample, annotator: Annotator) -> bool:
    if sample.question.gt_answer is None:
        raise ValueError(f"{sample.sample_id}: no gt_answer to check against")
    try:
        text = annotator.answer_full_context(sample, FullContext(()))
    except AnnotatorError as exc:
        raise Deferred(sample.sample_id, "answer_full_context", exc) from exc
    return bool(accuracy_reward(text, sample.question.gt_answer, Matcher.MC_NORMALIZED))


@dataclass(frozen=True)
class CurationConfig:
    long_video_s: float = LONG_VIDEO_S
    # on the retry path step 2 also sees the failed attempt's answers
    include_failure_transcript: bool = True
    sampling: SamplingConfig = field(default_factory=SamplingConfig)


@dataclass(frozen=True)
class CurationRecord:
    sample_id: str
    candidate_interval: TemporalInterval | None
    step1_pass: bool
    step2_pass: bool
    retry_used: bool
    outcome: Outcome
    reground_interval: TemporalInterval | None = None
    retry_step1_pass: bool | None = None
    retry_step2_pass: bool | None = None
    final_answer: str | None = None
    calls: int = 0
    reasoning: Mapping[str, str] = field(default_factory=dict)
    trajectory: Trajectory | None = None

    def __post_init__(self) -> None:
        if self.outcome is Outcome.MULTI_TOOL and not self.retry_used:
            raise ValueError("multi_tool requires a retry")

    def audit(self) -> dict:
        iv = lambda x: None if x is None else x.as_list()  # noqa: E731
        return {
            "sample_id": self.sample_id,
            "outcome": self.outcome.value,
            "candidate_interval": iv(self.candidate_interval),
            "step1_pass": self.step1_pass,
            "step2_pass": self.step2_pass,
            "retry_used": self.retry_used,
            "reground_interval": iv(self.reground_interval),
            "retry_step1_pass": self.retry_step1_pass,
            "retry_step2_pass": self.retry_step2_pass,
            "calls": self.calls,
        }


class _Session:
    """Wraps one sample's annotator calls, counting them and converting transport failures."""

    def __init__(self, sample: RawSample, annotator: Annotator):
        self.sample = sample
        self.annotator = annotator
        self.calls = 0

    def __call__(self, stage: str, *args):
        self.calls += 1
        if self.calls > MAX_ANNOTATOR_CALLS:
            raise AssertionError("annotator call budget exceeded")
        try:
            return getattr(self.annotator, stage)(self.sample, *args)
        except AnnotatorError as exc:
            raise Deferred(self.sample.sample_id, stage, exc) from exc


def _attempt(call: _Session, sample: RawSample, clip: TemporalInterval | None, context: FullContext):
    """Steps 1 and 2 for one candidate span. Returns (step1, step2, answers)."""
    clip = _clamp(clip, sample.video)
    if clip is None:
        return False, False, ()
    a1 = call("answer_from_clip", clip)
    if not answer_matches(sample, a1):
        return False, False, (a1,)
    a2 = call("answer_full_context", context)
    return True, answer_matches(sample, a2), (a1, a2)


def _clamp(p: TemporalInterval, v: VideoMeta) -> TemporalInterval | None:
    try:
        return clamp_interval(p, v)
    except OutOfRange:
        return None


def curate(sample: RawSample, annotator: Annotator, cfg: CurationConfig = CurationConfig()) -> CurationRecord:
    """Run the ground / verify / optional reground state machine on one sample.

    Raises ``Deferred`` if any annotator call fails in transport.
    """
    call = _Session(sample, annotator)
    candidate = call("ground")
    s1, s2, answers = _attempt(call, sample, candidate, FullContext(_clips(candidate, sample)))
    reasoning = _reasoning(annotator, sample)

    def record(**kw) -> CurationRecord:
        return CurationRecord(
            sample.sample_id, candidate, s1, s2, calls=call.calls, reasoning=reasoning, **kw
        )

    if s1 and s2:
        rec = record(retry_used=False, outcome=Outcome.SINGLE_TOOL, final_answer=answers[-1])
        return _with_trajectory(rec, sample, cfg)
    if not sample.video.duration_s > cfg.long_video_s:
        return record(retry_used=False, outcome=Outcome.DISCARDED)

    stage = "answer_from_clip" if not s1 else "answer_full_context"
    regrounded = call("reground", FailureContext(candidate, stage, answers))
    clips = _clips(candidate, sample) + _clips(regrounded, sample)
    transcript = answers if cfg.include_failure_transcript else ()
    r1, r2, retry_answers = _attempt(call, sample, regrounded, FullContext(clips, transcript))
    outcome = Outcome.MULTI_TOOL if r1 and r2 else Outcome.DISCARDED
    rec = record(
        retry_used=True,
        outcome=outcome,
        reground_interval=regrounded,
        retry_step1_pass=r1,
        retry_step2_pass=r2,
        final_answer=retry_answers[-1] if outcome is Outcome.MULTI_TOOL else None,
    )
    return _with_trajectory(rec, sample, cfg) if outcome is Outcome.MULTI_TOOL else rec


def _clips(p: TemporalInterval, sample: RawSample) -> tuple[TemporalInterval, ...]:
    c = _clamp(p, sample.video)
    return () if c is None else (c,)


def _reasoning(annotator: Annotator, sample: RawSample) -> dict[str, str]:
    fn = getattr(annotator, "reasoning", None)
    return dict(fn(sample) or {}) if fn else {}


def _with_trajectory(rec: CurationRecord, sample: RawSample, cfg: CurationConfig) -> CurationRecord:
    return CurationRecord(**{**_fields(rec), "trajectory": assemble_trajectory(rec, sample, cfg.sampling)})


def _fields(rec: CurationRecord) -> dict:
    return {k: getattr(rec, k) for k in rec.__dataclass_fields__}


PLACEHOLDER_THINK = {
    "ground": "The question points to one stretch of the video; I will inspect it closely.",
    "reground": "That clip did not settle the question, so I will look at another span.",
    "answer": "The clip contains what the question asks about.",
}


def assemble_trajectory(
    rec: CurationRecord, sample: RawSample, sampling: SamplingConfig = SamplingConfig()
) -> Trajectory:
    """Build the SFT trajectory: clip, [second clip,] answer."""
    if rec.outcome is Outcome.DISCARDED:
        raise ValueError(f"{rec.sample_id}: discarded samples have no trajectory")
    think = {**PLACEHOLDER_THINK, **rec.reasoning}
    clips = [rec.candidate_interval]
    if rec.outcome is Outcome.MULTI_TOOL:
        clips.append(rec.reground_interval)
    steps = []
    for i, p in enumerate(clips):
        turn = make_turn(think["ground" if i == 0 else "reground"], Clip(p))
        try:
            obs = crop_plan(sample.video, p, sampling)
        except OutOfRange:
            obs = Observation(None, (), CLIP_OUT_OF_RANGE)
        steps.append(Step(turn, obs))
    if sample.task is Task.GROUNDING:
        m = INTERVAL_ANSWER.fullmatch(rec.final_answer or "")
        span = TemporalInterval(float(m.group(1)), float(m.group(2))) if m else clips[-1]
        action = AnswerInterval(_clamp(span, sample.video) or sample.video.full_span)
    else:
        action = AnswerText(sample.question.gt_answer)
    steps.append(Step(make_turn(think["answer"], action)))
    return Trajectory(sample.video, sample.question, tuple(steps), Termination.ANSWER, sample.sample_id)


@dataclass
class CurationRun:
    records: list[CurationRecord]
    deferred: list[Deferred]


def curate_all(
    samples: Sequence[RawSample],
    annotator: Annotator,
    cfg: CurationConfig = CurationConfig(),
    jobs: int = 1,
) -> CurationRun:
    """Curate independent samples on a bounded pool; results keep input order."""

    def one(s: RawSample):
        try:
            return curate(s, annotator, cfg)
        except Deferred as exc:
            log.warning("%s", exc)
            return exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, samples))
    else:
        results = [one(s) for s in samples]
    return CurationRun(
        [r for r in results if isinstance(r, CurationRecord)],
        [r for r in results if isinstance(r, Deferred)],
    )


def write_retry_queue(path: str | Path, deferred: Sequence[Deferred], samples: Sequence[RawSample]) -> None:
    by_id = {s.sample_id: s for s in samples}
    lines = []
    for d in deferred:
        row = {**by_id[d.sample_id].to_dict(), "deferred_at": d.stage, "error": str(d.cause)}
        lines.append(json.dumps(row) + "\n")
    Path(path).write_text("".join(lines))


Stratum = tuple[DurationBucket, Task, str]


def stratum_of(sample: RawSample) -> Stratum:
    return (sample.bucket, sample.task, sample.modality)


def stratified_balance(
    samples: Sequence[RawSample], quotas: Mapping[Stratum, int], seed: int = 0
) -> tuple[list[RawSample], dict[Stratum, int]]:
    """Draw ``min(quota, available)`` per stratum without replacement.

    Returns the chosen samples in input order and the shortfall of every
    stratum that could not meet its quota. Strata without a quota get nothing.
    """
    if any(q < 0 for q in quotas.values()):
        raise ValueError("quotas must be non-negative")
    pools: dict[Stratum, list[int]] = defaultdict(list)
    for i, s in enumerate(samples):
        pools[stratum_of(s)].append(i)
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    shortfall: dict[Stratum, int] = {}
    for key in sorted(quotas, key=lambda k: (k[0].value, k[1].value, k[2])):
        pool, quota = pools.get(key, []), quotas[key]
        take = min(quota, len(pool))
        if take < quota:
            shortfall[key] = quota - take
        if take:
            chosen.extend(pool[j] for j in rng.choice(len(pool), size=take, replace=False))
    return [samples[i] for i in sorted(chosen)], shortfall


class MockAnnotator:
    """Table-driven annotator.

    Each row is keyed by sample id::

        {"ground": [s, e], "answer_from_clip": "B" | ["A", "B"],
         "answer_full_context": ..., "reground": [s, e],
         "fail": "ground", "reasoning": {"ground": "..."}}

    A list gives one reply per attempt (first try, then retry); a scalar is
    reused. ``fail`` names a stage that raises ``AnnotatorError``.
    """

    STAGES = ("ground", "answer_from_clip", "answer_full_context", "reground")

    def __init__(self, table: Mapping[str, Mapping]):
        self.table = {k: dict(v) for k, v in table.items()}
        self.calls: dict[str, list[str]] = defaultdict(list)
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> MockAnnotator:
        return cls(json.loads(Path(path).read_text()))

    def _reply(self, sample: RawSample, stage: str):
        row = self.table.get(sample.sample_id)
        if row is None:
            raise KeyError(f"mock table has no row for {sample.sample_id}")
        with self._lock:
            attempt = self.calls[sample.sample_id].count(stage)
            self.calls[sample.sample_id].append(stage)
        if row.get("fail") == stage:
            raise AnnotatorError(f"scripted failure at {stage}")
        if stage not in row:
            raise KeyError(f"mock row {sample.sample_id} has no {stage} entry")
        value = row[stage]
        if stage in ("answer_from_clip", "answer_full_context") and isinstance(value, list):
            value = value[min(attempt, len(value) - 1)]
        return value

    def ground(self, sample: RawSample) -> TemporalInterval:
        return TemporalInterval(*self._reply(sample, "ground"))

    def answer_from_clip(self, sample: RawSample, clip: TemporalInterval) -> str:
        return str(self._reply(sample, "answer_from_clip"))

    def answer_full_context(self, sample: RawSample, context: FullContext) -> str:
        return str(self._reply(sample, "answer_full_context"))

    def reground(self, sample: RawSample, failure: FailureContext) -> TemporalInterval:
        return TemporalInterval(*self._reply(sample, "reground"))

    def reasoning(self, sample: RawSample) -> dict[str, str]:
        return dict(self.table.get(sample.sample_id, {}).get("reasoning", {}))


DEFAULT_PROMPTS = {
    "ground": "Give the [start, end] span in seconds that answers the question.\n{question}",
    "answer_from_clip": "Answer using only the clip {clip}.\n{question}",
    "answer_full_context": "Answer using the whole video and the clips {clips}.\n{question}{transcript}",
    "reground": "The span {candidate} did not support an answer ({stage}). Give a better [start, end].\n{question}",
}


class HttpAnnotator:
    """Annotator served over the remote-policy HTTP contract; prompts are plain templates."""

    def __init__(self, url: str, prompts: Mapping[str, str] | None = None, temperature: float = 0.0, **client_kwargs):
        from .remote import HttpClient

        self.client = HttpClient(url, **client_kwargs)
        self.prompts = {**DEFAULT_PROMPTS, **(prompts or {})}
        self.temperature = temperature

    def _ask(self, sample: RawSample, stage: str, clip: list | None = None, **fmt) -> str:
        text = self.prompts[stage].format(question=question_prompt(sample.question.public()), **fmt)
        content = [{"type": "text", "text": text}]
        if clip is not None:
            content.append({"type": "frames", "timestamps": [], "clip": clip})
        messages = [{"role": "user", "content": content}]
        try:
            return self.client.generate(messages, self.temperature, f"{sample.sample_id}:{stage}")
        except PolicyTransportError as exc:
            raise AnnotatorError(str(exc)) from exc

    def _interval(self, text: str) -> TemporalInterval:
        m = INTERVAL_ANSWER.search(text)
        if m is None:
            raise AnnotatorError(f"no [start, end] span in reply {text[:80]!r}")
        try:
            return TemporalInterval(float(m.group(1)), float(m.group(2)))
        except ValueError as exc:
            raise AnnotatorError(str(exc)) from exc

    def ground(self, sample: RawSample) -> TemporalInterval:
        return self._interval(self._ask(sample, "ground", sample.video.full_span.as_list()))

    def answer_from_clip(self, sample: RawSample, clip: TemporalInterval) -> str:
        return self._ask(sample, "answer_from_clip", clip.as_list(), clip=clip.as_list()).strip()

    def answer_full_context(self, sample: RawSample, context: FullContext) -> str:
        transcript = "".join(f"\nearlier answer: {a}" for a in context.transcript)
        clips = [c.as_list() for c in context.clips]
        return self._ask(
            sample, "answer_full_context", sample.video.full_span.as_list(), clips=clips, transcript=transcript
        ).strip()

    def reground(self, sample: RawSample, failure: FailureContext) -> TemporalInterval:
        cand = None if failure.candidate is None else failure.candidate.as_list()
        reply = self._ask(sample, "reground", sample.video.full_span.as_list(), candidate=cand, stage=failure.failed_stage)
        return self._interval(reply)
