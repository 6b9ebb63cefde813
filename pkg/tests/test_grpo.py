import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from clipgrounder.grpo import (
    GroupAdvantages,
    GroupTooSmall,
    TokenLogProbPair,
    broadcast_token_advantages,
    export_record,
    group_advantages,
    kl_estimate,
    objective_terms,
)

LN2 = math.log(2)


def test_advantage_examples():
    assert group_advantages([1, 0]) == GroupAdvantages((1.0, -1.0), False)
    assert group_advantages([1, 1, 1]) == GroupAdvantages((0.0, 0.0, 0.0), True)
    a = group_advantages([2, 0, 1]).per_trajectory
    assert a == pytest.approx((1.2247448713915890, -1.2247448713915890, 0.0), abs=1e-12)


def test_group_too_small_and_non_finite():
    with pytest.raises(GroupTooSmall):
        group_advantages([1.0])
    with pytest.raises(ValueError):
        group_advantages([1.0, float("nan")])


rewards = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=16)


@given(rewards)
def test_matches_oracle(r):
    got = group_advantages(r)
    want, eps = oracles.group_advantages(r)
    assert got.epsilon_used == eps
    assert np.allclose(got.per_trajectory, want, atol=1e-9)


@given(rewards, st.floats(-50, 50), st.floats(0.01, 100))
def test_shift_scale_invariance(r, shift, scale):
    base = group_advantages(r)
    if base.epsilon_used or np.std(r) < 1e-3:
        return
    moved = group_advantages([x * scale + shift for x in r])
    assert np.allclose(base.per_trajectory, moved.per_trajectory, atol=1e-8)


def test_broadcast_examples():
    assert broadcast_token_advantages(GroupAdvantages((1.0, -1.0), False), [3, 2]) == [[1, 1, 1], [-1, -1]]
    assert broadcast_token_advantages(GroupAdvantages((0.0,) * 3, True), [1, 1, 1]) == [[0], [0], [0]]
    shapes = broadcast_token_advantages(GroupAdvantages((1.2247, -1.2247, 0.0), False), [2, 1, 1])
    assert [len(x) for x in shapes] == [2, 1, 1]
    with pytest.raises(ValueError):
        broadcast_token_advantages(GroupAdvantages((1.0, -1.0), False), [1, 0])


def test_kl_examples():
    kl = kl_estimate([TokenLogProbPair(0.0, 0.0), TokenLogProbPair(0.0, LN2), TokenLogProbPair(LN2, 0.0)])
    assert kl == pytest.approx([0.0, 2 - LN2 - 1, 0.5 + LN2 - 1], abs=1e-12)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_kl_nonnegative_and_clipped(cur, ref):
    (v,) = kl_estimate([TokenLogProbPair(cur, ref)])
    assert v >= 0 and math.isfinite(v)
    assert v <= math.exp(20) - 20 - 1 + 1e-6
    assert (v == 0) == (cur == ref) or abs(ref - cur) < 1e-7


def test_objective_examples():
    assert objective_terms([[1.0]], [[0.0]], 0.1)[1] == 1.0
    kl = 2 - LN2 - 1
    _, s = objective_terms([[1.0], [-1.0]], [[kl], [0.0]], 1.0)
    assert s == pytest.approx((1 - kl - 1) / 2, abs=1e-12)
    adv = [[0.5, 0.5, 0.5], [-1.5]]
    assert objective_terms(adv, [[9, 9, 9], [9]], 0.0)[1] == pytest.approx(0.0)
    with pytest.raises(ValueError):
        objective_terms([[1.0]], [[0.0, 1.0]], 0.1)


def test_export_record():
    adv = group_advantages([1, 0])
    assert export_record("g", [1, 0], adv) == {
        "group_id": "g",
        "rewards": [1.0, 0.0],
        "advantages": [1.0, -1.0],
        "epsilon_used": False,
    }
