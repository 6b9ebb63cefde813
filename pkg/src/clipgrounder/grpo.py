"""Group-relative advantages and the per-token objective skeleton.

Nothing here updates a model; these are the quantities a trainer consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEGENERATE_STD = 1e-8
KL_CLIP = 20.0


class GroupTooSmall(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class GroupAdvantages:
    per_trajectory: tuple[float, ...]
    epsilon_used: bool


@dataclass(frozen=True, slots=True)
class TokenLogProbPair:
    logp_current: float
    logp_reference: float


def group_advantages(rewards: Sequence[float]) -> GroupAdvantages:
    """``(r - mean) / std`` with the population std; zeros for a flat group."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise GroupTooSmall(f"need at least 2 rewards per group, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    centered = r - r.mean()
    std = np.sqrt(np.mean(centered**2))
    if std < DEGENERATE_STD:
        return GroupAdvantages(tuple(0.0 for _ in r), True)
    return GroupAdvantages(tuple((centered / std).tolist()), False)


def broadcast_token_advantages(adv: GroupAdvantages, token_counts: Sequence[int]) -> list[list[float]]:
    if len(token_counts) != len(adv.per_trajectory):
        raise ValueError("one token count per trajectory required")
    if any(c <= 0 for c in token_counts):
        raise ValueError("token counts must be positive")
    return [[a] * c for a, c in zip(adv.per_trajectory, token_counts)]


def kl_estimate(pairs: Sequence[TokenLogProbPair]) -> list[float]:
    """Per-token ``exp(d) - d - 1`` with ``d = logp_ref - logp_cur`` clipped to +-20."""
    if not pairs:
        return []
    cur = np.array([p.logp_current for p in pairs], dtype=np.float64)
    ref = np.array([p.logp_reference for p in pairs], dtype=np.float64)
    d = np.clip(ref - cur, -KL_CLIP, KL_CLIP)
    return (np.expm1(d) - d).tolist()


def objective_terms(
    adv_tokens: Sequence[Sequence[float]], kl_tokens: Sequence[Sequence[float]], beta: float
) -> tuple[list[list[float]], float]:
    """Per-token ``a - beta * kl`` and their sum over all group tokens divided by the token total."""
    if len(adv_tokens) != len(kl_tokens) or any(
        len(a) != len(k) for a, k in zip(adv_tokens, kl_tokens)
    ):
        raise ValueError("advantage and KL token shapes differ")
    per_token = [[a - beta * k for a, k in zip(ar, kr)] for ar, kr in zip(adv_tokens, kl_tokens)]
    total = sum(len(row) for row in per_token)
    if total == 0:
        raise ValueError("no tokens")
    return per_token, float(sum(sum(row) for row in per_token) / total)


def export_record(group_id: str, rewards: Sequence[float], adv: GroupAdvantages) -> dict:
    return {
        "group_id": group_id,
        "rewards": [float(r) for r in rewards],
        "advantages": list(adv.per_trajectory),
        "epsilon_used": adv.epsilon_used,
    }
