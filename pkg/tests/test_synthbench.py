import numpy as np
import pytest

import oracles
from clipgrounder.evalkit import bucket_of
from clipgrounder.policies import BlindPolicy
from clipgrounder.rewards import RewardConfig
from clipgrounder.synthbench import (
    BenchSpec,
    generate,
    hacking_comparison,
    load,
    random_interval_stats,
    run_bench,
    save,
)
from clipgrounder.types import TemporalInterval


def test_counts_and_determinism():
    spec = BenchSpec(counts=(2, 2, 2, 2), seed=1)
    a, b = generate(spec), generate(spec)
    assert len(a) == 8 and a == b
    assert generate(BenchSpec(counts=(2, 2, 2, 2), seed=2)) != a
    assert [i.bucket.value for i in a] == ["b0_3min"] * 2 + ["b3_10min"] * 2 + ["b10_20min"] * 2 + ["b20plus"] * 2


def test_evidence_fraction_example():
    inst = generate(BenchSpec(counts=(0, 0, 20, 0), evidence_fraction=(0.05, 0.05), seed=3))
    for i in inst:
        assert i.video.evidence.length == pytest.approx(0.05 * i.video.meta.duration_s, abs=1e-9)
    spec = BenchSpec(counts=(0, 0, 1, 0), evidence_fraction=(0.05, 0.05))
    assert 0.05 * 1200 == 60.0 and spec.duration_range(inst[0].bucket)[1] <= 1200


def test_invariants():
    for i in generate(BenchSpec(counts=(30, 30, 30, 30), seed=9, grounding_fraction=0.5)):
        d = i.video.meta.duration_s
        ev = i.video.evidence
        assert 0 <= ev.start_s <= ev.end_s <= d
        assert bucket_of(d) is i.bucket
        assert i.question.gt_interval == ev


def test_save_load_round_trip(tmp_path):
    bench = generate(BenchSpec(counts=(3, 3, 3, 3), seed=4, grounding_fraction=0.5))
    save(tmp_path / "b.jsonl", bench)
    assert load(tmp_path / "b.jsonl") == bench


def test_blind_miou_tracks_grid_expectation():
    """Blind clipping on one instance repeated many times converges to the quadrature value."""
    inst = generate(BenchSpec(counts=(0, 1, 0, 0), seed=6))[0]
    trajectories = run_bench([inst] * 2000, BlindPolicy(), seed=1)
    ious = [t.clips()[-1].interval for t in trajectories if t.clips()]
    ev = inst.video.evidence
    values = [oracles.iou((c.start_s, c.end_s), (ev.start_s, ev.end_s)) for c in ious]
    mean, p_below = random_interval_stats(ev, inst.video.meta.duration_s)
    se = np.std(values) / np.sqrt(len(values))
    assert abs(np.mean(values) - mean) < 4 * se + 1e-3
    assert abs(np.mean(np.array(values) < 0.1) - p_below) < 4 * np.sqrt(p_below * (1 - p_below) / len(values)) + 1e-3


def test_hacking_comparison_sign():
    bench = generate(BenchSpec(counts=(10, 10, 10, 10), seed=3))
    cmp = hacking_comparison(
        run_bench(bench * 5, BlindPolicy(), seed=2), RewardConfig(lambda_penalty=0.0), RewardConfig()
    )
    assert cmp.blind_preferred_naive and cmp.blind_penalized
    with pytest.raises(ValueError):
        hacking_comparison([], RewardConfig(), RewardConfig())


def test_grid_exact_for_full_evidence():
    # IoU is then the length fraction of two sorted uniform points: mean 1/3, P(< 0.1) = 1 - 0.9**2
    mean, below = random_interval_stats(TemporalInterval(0, 100), 100)
    assert mean == pytest.approx(1 / 3, abs=1e-3) and below == pytest.approx(0.19, abs=5e-3)
