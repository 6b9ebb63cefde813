"""
Performance by video length
===========================

A synthetic benchmark spans four duration buckets. A policy whose grounding
error grows with duration shows the expected decline, and a length-aware
policy only reaches for the clip tool on longer videos.
"""

from clipgrounder.policies import LengthAwarePolicy, NoisyPolicy, OraclePolicy
from clipgrounder.synthbench import BenchSpec, difficulty_profile, generate

bench = generate(BenchSpec(counts=(20, 20, 20, 20), seed=1))

for policy in (OraclePolicy(), NoisyPolicy(), LengthAwarePolicy()):
    print(f"\n{type(policy).__name__}")
    print(difficulty_profile(bench, policy, seed=1).to_markdown())
