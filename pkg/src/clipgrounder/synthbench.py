"""Seeded synthetic benchmark spanning the four duration buckets."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .evalkit import (
    BUCKET_BOUNDS,
    BucketReport,
    DurationBucket,
    bucket_of,
    bucketed_report,
    record_from_trajectory,
)
from .jsonl import question_from_dict, question_to_dict, video_from_dict, video_to_dict
from .rewards import RewardConfig, score_trajectory
from .rollout import Policy, RolloutConfig, SyntheticVideo, rollout_seeds, run_rollout
from .types import Question, Task, TemporalInterval, Trajectory, VideoMeta

LETTERS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class BenchSpec:
    counts: tuple[int, int, int, int] = (300, 300, 300, 300)
    evidence_fraction: tuple[float, float] = (0.02, 0.1)
    seed: int = 0
    max_duration_s: float = 4800.0
    min_duration_s: float = 10.0
    grounding_fraction: float = 0.0
    coverage_fraction: float = 0.5

    def __post_init__(self) -> None:
        if len(self.counts) != 4 or any(c < 0 for c in self.counts):
            raise ValueError("need four non-negative bucket counts")
        lo, hi = self.evidence_fraction
        if not 0 < lo <= hi <= 1:
            raise ValueError("evidence fractions must lie in (0, 1]")

    def duration_range(self, bucket: DurationBucket) -> tuple[float, float]:
        lo, hi = BUCKET_BOUNDS[bucket]
        return max(lo, self.min_duration_s), min(hi, self.max_duration_s)


@dataclass(frozen=True)
class BenchInstance:
    video: SyntheticVideo
    question: Question

    @property
    def bucket(self) -> DurationBucket:
        return bucket_of(self.video.meta.duration_s)


def generate(spec: BenchSpec) -> list[BenchInstance]:
    rng = np.random.default_rng(spec.seed)
    out = []
    for bucket, count in zip(DurationBucket, spec.counts):
        lo, hi = spec.duration_range(bucket)
        for k in range(count):
            duration = float(rng.uniform(lo, hi))
            frac = float(rng.uniform(*spec.evidence_fraction))
            length = frac * duration
            start = float(rng.uniform(0.0, duration - length))
            evidence = TemporalInterval(start, min(start + length, duration))
            answer = str(rng.choice(LETTERS))
            grounding = bool(rng.uniform() < spec.grounding_fraction)
            vid = f"{bucket.value}-{k:04d}"
            meta = VideoMeta(vid, duration)
            if grounding:
                q = Question(f"When does event {vid} happen?", Task.GROUNDING, gt_interval=evidence)
            else:
                q = Question(
                    f"What happens during event {vid}?",
                    Task.VIDEOQA,
                    choices=tuple(f"{x}. option {x}" for x in LETTERS),
                    gt_answer=answer,
                    gt_interval=evidence,
                )
            out.append(BenchInstance(SyntheticVideo(meta, evidence, answer, spec.coverage_fraction), q))
    return out


def instance_to_dict(inst: BenchInstance) -> dict:
    return {
        "video": video_to_dict(inst.video.meta),
        "question": question_to_dict(inst.question.public()),
        "hidden": {
            "evidence": inst.video.evidence.as_list(),
            "answer": inst.video.answer,
            "coverage_fraction": inst.video.coverage_fraction,
            "gt_answer": inst.question.gt_answer,
            "gt_interval": None if inst.question.gt_interval is None else inst.question.gt_interval.as_list(),
        },
    }


def instance_from_dict(d: dict) -> BenchInstance:
    meta = video_from_dict(d["video"])
    hidden = d["hidden"]
    q = question_from_dict(
        {**d["question"], **{k: hidden[k] for k in ("gt_answer", "gt_interval") if hidden.get(k) is not None}}
    )
    ev = TemporalInterval(*hidden["evidence"])
    return BenchInstance(SyntheticVideo(meta, ev, hidden["answer"], hidden.get("coverage_fraction", 0.5)), q)


def save(path: str | Path, instances: Sequence[BenchInstance]) -> None:
    Path(path).write_text("".join(json.dumps(instance_to_dict(i)) + "\n" for i in instances))


def load(path: str | Path) -> list[BenchInstance]:
    return [instance_from_dict(json.loads(line)) for line in Path(path).read_text().splitlines() if line.strip()]


def run_bench(
    instances: Sequence[BenchInstance], policy: Policy, cfg: RolloutConfig = RolloutConfig(), seed: int = 0
) -> list[Trajectory]:
    seeds = rollout_seeds(seed, len(instances))
    return [run_rollout(policy, i.video, i.question, cfg, s) for i, s in zip(instances, seeds)]


def difficulty_profile(
    instances: Sequence[BenchInstance], policy: Policy, cfg: RolloutConfig = RolloutConfig(), seed: int = 0
) -> BucketReport:
    trajectories = run_bench(instances, policy, cfg, seed)
    return bucketed_report(record_from_trajectory(t) for t in trajectories)


def random_interval_iou_grid(evidence: TemporalInterval, duration_s: float, n: int = 1000) -> np.ndarray:
    """IoU of ``evidence`` against every midpoint-grid pair of ordered endpoints.

    Discretizes the law of a random interval built from two sorted uniform
    points on ``[0, duration]``; each cell of the lower triangle carries equal mass.
    """
    pts = (np.arange(n) + 0.5) * (duration_s / n)
    a, b = np.meshgrid(pts, pts, indexing="ij")
    s, e = np.minimum(a, b), np.maximum(a, b)
    inter = np.clip(np.minimum(e, evidence.end_s) - np.maximum(s, evidence.start_s), 0.0, None)
    union = (e - s) + evidence.length - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def random_interval_stats(
    evidence: TemporalInterval, duration_s: float, sigma: float = 0.1, n: int = 1000
) -> tuple[float, float]:
    """(expected IoU, P(IoU < sigma)) for a uniformly random interval, by grid quadrature."""
    grid = random_interval_iou_grid(evidence, duration_s, n)
    return float(grid.mean()), float((grid < sigma).mean())


@dataclass(frozen=True)
class HackingComparison:
    """Mean IoU-term reward for blind clipping versus answering without a clip.

    Direct answers have no predicted interval, so their IoU term is absent and
    contributes 0 under either reward.
    """

    n: int
    naive_blind: float
    penalized_blind: float
    frac_below_sigma: float
    naive_direct: float = 0.0
    penalized_direct: float = 0.0

    @property
    def blind_preferred_naive(self) -> bool:
        return self.naive_blind > self.naive_direct

    @property
    def blind_penalized(self) -> bool:
        return self.penalized_blind < self.penalized_direct


def hacking_comparison(
    trajectories: Sequence[Trajectory], naive: RewardConfig, penalized: RewardConfig
) -> HackingComparison:
    naive_terms, pen_terms, below = [], [], 0
    for t in trajectories:
        a = score_trajectory(t, naive)
        b = score_trajectory(t, penalized)
        if a.iou_raw is None:
            continue
        naive_terms.append(a.iou_penalized)
        pen_terms.append(b.iou_penalized)
        below += a.iou_raw < penalized.sigma_threshold
    n = len(naive_terms)
    if n == 0:
        raise ValueError("no trajectory carried an IoU term")
    return HackingComparison(n, float(np.mean(naive_terms)), float(np.mean(pen_terms)), below / n)
