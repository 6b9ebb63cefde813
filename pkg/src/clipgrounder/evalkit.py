"""Grounding and QA metrics with duration-bucketed reporting."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .cliptool import OutOfRange, clamp_interval
from .rewards import Matcher, accuracy_reward, temporal_iou
from .types import AnswerInterval, AnswerText, Task, TemporalInterval, Trajectory, VideoMeta, final_action


class DurationBucket(str, Enum):
    B0_3MIN = "b0_3min"
    B3_10MIN = "b3_10min"
    B10_20MIN = "b10_20min"
    B20PLUS = "b20plus"


# lower-inclusive, upper-exclusive, in seconds
BUCKET_BOUNDS = {
    DurationBucket.B0_3MIN: (0.0, 180.0),
    DurationBucket.B3_10MIN: (180.0, 600.0),
    DurationBucket.B10_20MIN: (600.0, 1200.0),
    DurationBucket.B20PLUS: (1200.0, float("inf")),
}


def bucket_of(duration_s: float) -> DurationBucket:
    if not duration_s >= 0:
        raise ValueError(f"duration must be non-negative, got {duration_s}")
    for bucket, (lo, hi) in BUCKET_BOUNDS.items():
        if lo <= duration_s < hi:
            return bucket
    raise AssertionError("unreachable")


@dataclass(frozen=True, slots=True)
class EvalRecord:
    duration_s: float
    task: Task
    pred_interval: TemporalInterval | None = None
    gt_interval: TemporalInterval | None = None
    pred_answer: str | None = None
    gt_answer: str | None = None
    clip_count: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", Task(self.task))
        if self.gt_interval is None and self.gt_answer is None:
            raise ValueError("record needs an interval or an answer ground truth")

    @property
    def has_interval(self) -> bool:
        return self.gt_interval is not None

    @property
    def has_answer(self) -> bool:
        # grounding-only records do not enter accuracy
        return self.task is Task.VIDEOQA and self.gt_answer is not None

    def iou(self) -> float:
        """IoU of the prediction; a missing prediction scores 0."""
        if self.gt_interval is None:
            raise ValueError("record has no ground-truth interval")
        if self.pred_interval is None:
            return 0.0
        return temporal_iou(self.pred_interval, self.gt_interval)

    def correct(self) -> int:
        if self.pred_answer is None:
            return 0
        return accuracy_reward(self.pred_answer, self.gt_answer, Matcher.MC_NORMALIZED)


def _nonempty(records: Sequence[EvalRecord], what: str) -> None:
    if not records:
        raise ValueError(f"{what}: no records")


def miou(records: Sequence[EvalRecord]) -> float:
    _nonempty(records, "miou")
    return sum(r.iou() for r in records) / len(records)


def recall_at_iou(records: Sequence[EvalRecord], threshold: float) -> float:
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    _nonempty(records, "recall")
    return sum(r.iou() >= threshold for r in records) / len(records)


def accuracy(records: Sequence[EvalRecord]) -> float:
    _nonempty(records, "accuracy")
    return sum(r.correct() for r in records) / len(records)


@dataclass(frozen=True, slots=True)
class ReportRow:
    label: str
    n: int
    n_iou: int
    n_acc: int
    miou: float | None
    acc: float | None
    clip_ratio: float | None
    avg_clips: float | None

    def to_dict(self) -> dict:
        return {
            "bucket": self.label,
            "n": self.n,
            "n_iou": self.n_iou,
            "n_acc": self.n_acc,
            "miou": self.miou,
            "acc": self.acc,
            "clip_ratio": self.clip_ratio,
            "avg_clips": self.avg_clips,
        }


def _row(label: str, records: Sequence[EvalRecord]) -> ReportRow:
    with_iou = [r for r in records if r.has_interval]
    with_acc = [r for r in records if r.has_answer]
    n = len(records)
    return ReportRow(
        label=label,
        n=n,
        n_iou=len(with_iou),
        n_acc=len(with_acc),
        miou=miou(with_iou) if with_iou else None,
        acc=accuracy(with_acc) if with_acc else None,
        clip_ratio=sum(r.clip_count > 0 for r in records) / n if n else None,
        avg_clips=sum(r.clip_count for r in records) / n if n else None,
    )


@dataclass(frozen=True)
class BucketReport:
    rows: tuple[ReportRow, ...]
    overall: ReportRow

    def row(self, bucket: DurationBucket | str) -> ReportRow:
        label = DurationBucket(bucket).value
        return next(r for r in self.rows if r.label == label)

    def to_dict(self) -> dict:
        return {"buckets": [r.to_dict() for r in self.rows], "overall": self.overall.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = list(self.overall.to_dict())
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in (*self.rows, self.overall):
            writer.writerow({k: _cell(v) for k, v in r.to_dict().items()})
        return buf.getvalue()

    def to_markdown(self) -> str:
        fields = list(self.overall.to_dict())
        lines = ["| " + " | ".join(fields) + " |", "|" + "---|" * len(fields)]
        for r in (*self.rows, self.overall):
            lines.append("| " + " | ".join(_cell(v) for v in r.to_dict().values()) + " |")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json() + "\n"
        if fmt == "csv":
            return self.to_csv()
        if fmt == "md":
            return self.to_markdown()
        raise ValueError(f"unknown format {fmt!r}")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)  # shortest exact round-trip form
    return str(v)


def bucketed_report(records: Iterable[EvalRecord]) -> BucketReport:
    records = list(records)
    groups: dict[DurationBucket, list[EvalRecord]] = {b: [] for b in DurationBucket}
    for r in records:
        groups[bucket_of(r.duration_s)].append(r)
    rows = tuple(_row(b.value, groups[b]) for b in DurationBucket)
    return BucketReport(rows, _row("overall", records))


def record_from_trajectory(t: Trajectory) -> EvalRecord:
    """Predicted interval: the interval answer for grounding, else the last clip (clamped)."""
    q = t.question
    action = final_action(t)
    pred_interval = None
    if q.task is Task.GROUNDING:
        if isinstance(action, AnswerInterval):
            pred_interval = _clamped(action.interval, t.video)
    else:
        clips = t.clips()
        if clips:
            pred_interval = _clamped(clips[-1].interval, t.video)
    return EvalRecord(
        duration_s=t.video.duration_s,
        task=q.task,
        pred_interval=pred_interval,
        gt_interval=q.gt_interval,
        pred_answer=action.text if isinstance(action, AnswerText) else None,
        gt_answer=q.gt_answer,
        clip_count=len(t.clips()),
    )


def _clamped(p: TemporalInterval, v: VideoMeta) -> TemporalInterval | None:
    try:
        return clamp_interval(p, v)
    except OutOfRange:
        return None
