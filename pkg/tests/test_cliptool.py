import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from clipgrounder.cliptool import (
    DegenerateInterval,
    FrameExtractor,
    OutOfRange,
    SamplingConfig,
    clamp_interval,
    crop_plan,
    effective_density,
    read_timestamps,
    skim_plan,
    uniform_timestamps,
    write_timestamps,
)
from clipgrounder.types import Observation, TemporalInterval, VideoMeta

V600 = VideoMeta("v", 600.0, "file:///v.mp4")
CFG = SamplingConfig()


def test_clamp_examples():
    assert clamp_interval(TemporalInterval(590, 700), V600) == TemporalInterval(590, 600)
    assert clamp_interval(TemporalInterval(0, 600), V600) == TemporalInterval(0, 600)
    with pytest.raises(OutOfRange):
        clamp_interval(TemporalInterval(700, 800), V600)
    with pytest.raises(OutOfRange):
        clamp_interval(TemporalInterval(600, 650), V600)
    assert clamp_interval(TemporalInterval(600, 600), V600) == TemporalInterval(600, 600)


def test_uniform_timestamp_examples():
    assert len(uniform_timestamps(TemporalInterval(0, 600), 2, 512)) == 512
    ts = uniform_timestamps(TemporalInterval(100, 120), 2, 64)
    assert len(ts) == 40 and ts[0] == 100.25
    assert all(abs((b - a) - 0.5) < 1e-12 for a, b in zip(ts, ts[1:]))
    assert uniform_timestamps(TemporalInterval(5, 5), 2, 64) == (5.0,)


def test_crop_examples():
    obs = crop_plan(V600, TemporalInterval(100, 120))
    assert obs.interval == TemporalInterval(100, 120) and len(obs.timestamps) == 40
    assert len(crop_plan(V600, TemporalInterval(0, 600)).timestamps) == 64
    obs = crop_plan(V600, TemporalInterval(590, 700))
    assert obs.interval == TemporalInterval(590, 600) and len(obs.timestamps) == 20


def test_density_examples():
    assert effective_density(crop_plan(V600, TemporalInterval(100, 120))) == 2.0
    assert effective_density(crop_plan(V600, TemporalInterval(0, 600))) == pytest.approx(64 / 600)
    with pytest.raises(DegenerateInterval):
        effective_density(Observation(TemporalInterval(5, 5), (5.0,)))


@given(st.floats(0, 7200), st.floats(0, 7200), st.sampled_from([0.5, 1.0, 2.0, 3.0]), st.integers(1, 600))
def test_timestamps_match_oracle(a, b, fps, cap):
    span = TemporalInterval(min(a, b), max(a, b))
    ts = uniform_timestamps(span, fps, cap)
    if span.length == 0:
        assert ts == (span.start_s,)
        return
    assert len(ts) == oracles.frame_count(span.length, fps, cap)
    assert all(span.start_s <= t <= span.end_s for t in ts)
    assert all(y > x for x, y in zip(ts, ts[1:]))
    assert ts == uniform_timestamps(span, fps, cap)


def test_skim_is_capped():
    assert len(skim_plan(VideoMeta("long", 7200)).timestamps) == 512
    assert len(skim_plan(VideoMeta("short", 30.7)).timestamps) == 61


def test_config_invariants():
    with pytest.raises(ValueError):
        SamplingConfig(fps_cap=0)
    with pytest.raises(ValueError):
        SamplingConfig(clip_max_frames=600)


def test_timestamp_file_round_trip(tmp_path):
    ts = uniform_timestamps(TemporalInterval(0.1, 7.3), 2, 64)
    write_timestamps(tmp_path / "ts.txt", ts)
    assert tuple(read_timestamps(tmp_path / "ts.txt")) == ts


def test_extractor_hook(tmp_path):
    # a stand-in extractor that echoes how many timestamps it was given
    script = tmp_path / "extract.py"
    script.write_text(
        "import sys\n"
        "args = dict(zip(sys.argv[1::2], sys.argv[2::2]))\n"
        "print(args['--video'], len(open(args['--timestamps']).read().split()))\n"
    )
    ex = FrameExtractor(command=(sys.executable, str(script)), jobs=2)
    obs = [crop_plan(V600, TemporalInterval(0, 10)), crop_plan(V600, TemporalInterval(0, 3))]
    results = ex.extract_many([(V600, o) for o in obs])
    assert [r.stdout.split() for r in results] == [["file:///v.mp4", "20"], ["file:///v.mp4", "6"]]
