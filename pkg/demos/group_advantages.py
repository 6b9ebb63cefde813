"""
Group-relative advantages and the KL-regularized objective
==========================================================

Rewards are compared only within a group of rollouts for the same prompt.
"""

import numpy as np

from clipgrounder.grpo import (
    TokenLogProbPair,
    broadcast_token_advantages,
    group_advantages,
    kl_estimate,
    objective_terms,
)

adv = group_advantages([2.1, 0.9, 1.0, -0.2])
print("advantages:", np.round(adv.per_trajectory, 4))

# Shifting or rescaling all rewards changes nothing.
print("rescaled:  ", np.round(group_advantages([10 * r + 3 for r in (2.1, 0.9, 1.0, -0.2)]).per_trajectory, 4))

# When every rollout scores the same there is no signal, and we say so.
flat = group_advantages([1.0, 1.0, 1.0])
print("flat group:", flat.per_trajectory, "epsilon used:", flat.epsilon_used)

# Each token inherits its trajectory's advantage; KL is estimated per token.
rng = np.random.default_rng(0)
lengths = [5, 3, 4, 6]
kls = []
for n in lengths:
    cur = rng.normal(-1.5, 0.3, n)
    pairs = [TokenLogProbPair(c, c + rng.normal(0, 0.1)) for c in cur]
    kls.append(kl_estimate(pairs))
per_token, objective = objective_terms(broadcast_token_advantages(adv, lengths), kls, beta=0.04)
print(f"objective: {objective:.5f} over {sum(lengths)} tokens")
