"""
Frame budgets for skimming and clipping
=======================================

A long video is first skimmed at a coarse rate, then a chosen stretch is
cropped and sampled densely. Both plans share one rule: at most 2 frames per
second, with a hard cap (512 for the skim, 64 for a clip).
"""

from clipgrounder.cliptool import SamplingConfig, crop_plan, effective_density, skim_plan
from clipgrounder.types import TemporalInterval, VideoMeta

cfg = SamplingConfig()

# A 40-minute video: 4800 candidate frames at 2 FPS, capped at 512.
video = VideoMeta("lecture", 2400.0)
skim = skim_plan(video, cfg)
print(f"skim: {len(skim.timestamps)} frames, {effective_density(skim):.3f} fps")

# Zoom into 20 seconds of it. 40 frames fit under the clip cap.
crop = crop_plan(video, TemporalInterval(1200.0, 1220.0), cfg)
print(f"crop: {len(crop.timestamps)} frames, first at {crop.timestamps[0]} s, {effective_density(crop):.1f} fps")

# Timestamps sit at bin centers, so two adjacent clips never share a frame.
left = crop_plan(video, TemporalInterval(0.0, 5.0), cfg).timestamps
right = crop_plan(video, TemporalInterval(5.0, 10.0), cfg).timestamps
print("left ends at", left[-1], "and right starts at", right[0])

# Requests that run past the end are clamped to the video.
print("clamped:", crop_plan(VideoMeta("short", 600.0), TemporalInterval(590.0, 700.0), cfg).interval)
