"""
Why the IoU reward is penalized below a threshold
=================================================

A trajectory earns accuracy, format and IoU terms. If the IoU term were used
as is, clipping a random stretch would still pay a little on average, which
beats not clipping at all. Subtracting a penalty whenever IoU falls below
sigma removes that incentive.
"""

from clipgrounder.policies import BlindPolicy, OraclePolicy
from clipgrounder.rewards import RewardConfig, penalty_aware_iou, score_trajectory
from clipgrounder.rollout import run_rollout
from clipgrounder.synthbench import BenchSpec, generate, hacking_comparison, run_bench

# The penalty is a step: just under sigma the reward drops by lambda.
for iou in (0.0, 0.05, 0.0999, 0.1, 0.5):
    print(f"iou {iou:<6} -> {penalty_aware_iou(iou):+.4f}")

bench = generate(BenchSpec(counts=(10, 10, 10, 10), seed=0))
first = bench[0]
oracle = run_rollout(OraclePolicy(), first.video, first.question)
print("oracle breakdown:", score_trajectory(oracle).to_dict())

# Blind clipping over the whole bench, scored both ways.
blind = run_bench(bench * 10, BlindPolicy(), seed=1)
cmp = hacking_comparison(blind, RewardConfig(lambda_penalty=0.0), RewardConfig())
print(f"blind IoU term, naive:     {cmp.naive_blind:+.4f}  (answering without a clip earns 0)")
print(f"blind IoU term, penalized: {cmp.penalized_blind:+.4f}")
print(f"share of blind clips under sigma: {cmp.frac_below_sigma:.2%}")
