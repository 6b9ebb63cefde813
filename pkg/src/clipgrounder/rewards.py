"""Trajectory rewards: answer accuracy, format adherence, penalty-aware IoU."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .cliptool import OutOfRange, clamp_interval
from .protocol import format_valid
from .types import (
    AnswerInterval,
    AnswerText,
    Clip,
    TemporalInterval,
    Task,
    Trajectory,
    final_action,
)


class Matcher(str, Enum):
    EXACT = "exact"
    MC_NORMALIZED = "mc_normalized"


class ClipSelection(str, Enum):
    LAST = "last"
    BEST = "best"


class MissingGroundTruth(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class RewardConfig:
    lambda_penalty: float = 0.1
    sigma_threshold: float = 0.1
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    matcher: Matcher = Matcher.MC_NORMALIZED
    clip_selection: ClipSelection = ClipSelection.LAST

    def __post_init__(self) -> None:
        object.__setattr__(self, "matcher", Matcher(self.matcher))
        object.__setattr__(self, "clip_selection", ClipSelection(self.clip_selection))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.lambda_penalty < 0:
            raise ValueError("lambda must be >= 0")
        if not 0 <= self.sigma_threshold <= 1:
            raise ValueError("sigma must lie in [0, 1]")
        if len(self.weights) != 3 or any(w < 0 for w in self.weights):
            raise ValueError("weights must be three non-negative numbers")

    # JSON file keys are fixed: lambda, sigma, weights, matcher (+ optional clip_selection)
    _KEYS = {"lambda", "sigma", "weights", "matcher", "clip_selection"}

    @classmethod
    def from_dict(cls, data: dict) -> RewardConfig:
        unknown = set(data) - cls._KEYS
        if unknown:
            raise ValueError(f"unknown reward config keys: {sorted(unknown)}")
        kwargs = {}
        if "lambda" in data:
            kwargs["lambda_penalty"] = float(data["lambda"])
        if "sigma" in data:
            kwargs["sigma_threshold"] = float(data["sigma"])
        if "weights" in data:
            kwargs["weights"] = tuple(data["weights"])
        if "matcher" in data:
            kwargs["matcher"] = data["matcher"]
        if "clip_selection" in data:
            kwargs["clip_selection"] = data["clip_selection"]
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> RewardConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_penalty,
            "sigma": self.sigma_threshold,
            "weights": list(self.weights),
            "matcher": self.matcher.value,
            "clip_selection": self.clip_selection.value,
        }


@dataclass(frozen=True, slots=True)
class RewardBreakdown:
    accuracy: int | None
    format: int
    iou_raw: float | None
    iou_penalized: float | None
    total: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "format": self.format,
            "iou_raw": self.iou_raw,
            "iou_penalized": self.iou_penalized,
            "total": self.total,
        }


_STRIP = string.punctuation + string.whitespace


def normalize_choice(text: str) -> str:
    """Trim, case-fold and strip surrounding punctuation: ``" b. "`` -> ``"b"``."""
    return text.strip(_STRIP).casefold()


def accuracy_reward(pred: str, gt: str, matcher: Matcher | str = Matcher.EXACT) -> int:
    if Matcher(matcher) is Matcher.EXACT:
        return int(pred == gt)
    return int(normalize_choice(pred) == normalize_choice(gt))


def temporal_iou(a: TemporalInterval, b: TemporalInterval) -> float:
    inter = max(0.0, min(a.end_s, b.end_s) - max(a.start_s, b.start_s))
    union = a.length + b.length - inter
    if union <= 0:
        return 0.0
    return inter / union


def penalty_aware_iou(iou: float, cfg: RewardConfig = RewardConfig()) -> float:
    if iou < cfg.sigma_threshold:
        return iou - cfg.lambda_penalty
    return iou


def _clamped_iou(pred: TemporalInterval, gt: TemporalInterval, t: Trajectory) -> float:
    try:
        return temporal_iou(clamp_interval(pred, t.video), gt)
    except OutOfRange:
        return 0.0


def _grounding_iou(t: Trajectory, cfg: RewardConfig) -> float | None:
    gt = t.question.gt_interval
    if t.question.task is Task.GROUNDING:
        action = final_action(t)
        if not isinstance(action, AnswerInterval):
            return 0.0
        return _clamped_iou(action.interval, gt, t)
    if gt is None:
        return None
    clips = [c for c in t.clips() if isinstance(c, Clip)]
    if not clips:
        return None
    if cfg.clip_selection is ClipSelection.BEST:
        return max(_clamped_iou(c.interval, gt, t) for c in clips)
    return _clamped_iou(clips[-1].interval, gt, t)


def score_trajectory(t: Trajectory, cfg: RewardConfig = RewardConfig()) -> RewardBreakdown:
    """Score a whole trajectory.

    VideoQA earns accuracy against ``gt_answer`` and, when an evidence interval
    is annotated and the trajectory clipped at least once, an IoU term on the
    selected clip. Grounding earns the IoU term on its interval answer and no
    accuracy term.
    """
    q = t.question
    if q.task is Task.VIDEOQA and q.gt_answer is None:
        raise MissingGroundTruth("videoqa question without gt_answer")
    if q.task is Task.GROUNDING and q.gt_interval is None:
        raise MissingGroundTruth("grounding question without gt_interval")

    accuracy = None
    if q.task is Task.VIDEOQA:
        action = final_action(t)
        accuracy = (
            accuracy_reward(action.text, q.gt_answer, cfg.matcher)
            if isinstance(action, AnswerText)
            else 0
        )
    fmt = int(format_valid(t))
    iou = _grounding_iou(t, cfg)
    penalized = None if iou is None else penalty_aware_iou(iou, cfg)

    w_acc, w_fmt, w_iou = cfg.weights
    total = w_fmt * fmt
    if accuracy is not None:
        total += w_acc * accuracy
    if penalized is not None:
        total += w_iou * penalized
    return RewardBreakdown(accuracy, fmt, iou, penalized, total)
