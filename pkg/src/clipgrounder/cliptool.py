"""Frame-timestamp planning for skims and crops.

Pixels never pass through here. A plan is the list of timestamps an external
extractor should decode; the harness and its tests only need the timestamps.
"""

from __future__ import annotations

import math
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .types import Observation, TemporalInterval, VideoMeta


@dataclass(frozen=True, slots=True)
class SamplingConfig:
    fps_cap: float = 2.0
    skim_max_frames: int = 512
    clip_max_frames: int = 64
    frame_edge_px: int = 224  # recorded only; frames are never resized here

    def __post_init__(self) -> None:
        if not self.fps_cap > 0:
            raise ValueError("fps_cap must be positive")
        if not 0 < self.clip_max_frames <= self.skim_max_frames:
            raise ValueError("need 0 < clip_max_frames <= skim_max_frames")


class OutOfRange(ValueError):
    """The requested span does not intersect the video."""


class DegenerateInterval(ValueError):
    pass


def clamp_interval(p: TemporalInterval, v: VideoMeta) -> TemporalInterval:
    start = max(p.start_s, 0.0)
    end = min(p.end_s, v.duration_s)
    if start > end or (start == end and p.length > 0):
        raise OutOfRange(f"[{p.start_s}, {p.end_s}] outside video of {v.duration_s} s")
    return TemporalInterval(start, end)


def frame_count(length: float, fps_cap: float, max_frames: int) -> int:
    return min(max_frames, max(1, math.floor(length * fps_cap)))


def uniform_timestamps(span: TemporalInterval, fps_cap: float, max_frames: int) -> tuple[float, ...]:
    """Bin-center timestamps: ``n`` equal bins over the span, one frame per bin."""
    length = span.length
    if length == 0:
        return (span.start_s,)
    n = frame_count(length, fps_cap, max_frames)
    step = length / n
    return tuple(span.start_s + (k + 0.5) * step for k in range(n))


def skim_plan(v: VideoMeta, cfg: SamplingConfig = SamplingConfig()) -> Observation:
    span = v.full_span
    return Observation(span, uniform_timestamps(span, cfg.fps_cap, cfg.skim_max_frames))


def crop_plan(v: VideoMeta, p: TemporalInterval, cfg: SamplingConfig = SamplingConfig()) -> Observation:
    span = clamp_interval(p, v)
    return Observation(span, uniform_timestamps(span, cfg.fps_cap, cfg.clip_max_frames))


def effective_density(obs: Observation) -> float:
    if obs.interval is None or obs.interval.length <= 0:
        raise DegenerateInterval("density undefined for a zero-length interval")
    return len(obs.timestamps) / obs.interval.length


def write_timestamps(path: str | Path, timestamps: Sequence[float]) -> None:
    """One decimal seconds value per line."""
    Path(path).write_text("".join(f"{t!r}\n" for t in map(float, timestamps)))


def read_timestamps(path: str | Path) -> list[float]:
    return [float(line) for line in Path(path).read_text().split()]


@dataclass(frozen=True)
class FrameExtractor:
    """Wraps the external ``extract --video <uri> --timestamps <file>`` hook.

    ``command`` is the argv prefix, e.g. ``("extract",)``. At most ``jobs``
    extractor processes run at once.
    """

    command: tuple[str, ...] = ("extract",)
    jobs: int = 4
    timeout_s: float | None = None

    def extract(self, video: VideoMeta, obs: Observation) -> subprocess.CompletedProcess:
        if video.source_uri is None:
            raise ValueError(f"video {video.id} has no source_uri")
        with tempfile.TemporaryDirectory() as tmp:
            ts_file = Path(tmp) / "timestamps.txt"
            write_timestamps(ts_file, obs.timestamps)
            argv = [*self.command, "--video", video.source_uri, "--timestamps", str(ts_file)]
            return subprocess.run(argv, capture_output=True, text=True, check=True, timeout=self.timeout_s)

    def extract_many(
        self, jobs: Sequence[tuple[VideoMeta, Observation]]
    ) -> list[subprocess.CompletedProcess]:
        with ThreadPoolExecutor(max_workers=max(1, self.jobs)) as pool:
            return list(pool.map(lambda job: self.extract(*job), jobs))
