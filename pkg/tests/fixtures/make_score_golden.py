"""Regenerate the 3-line golden fixture for ``clipgrounder score``.

Takes three cases with a non-default reward config from reward_cases.json and
scores them with the oracle:

    python3 tests/fixtures/make_score_golden.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402

CONFIG = {"lambda": 0.25, "sigma": 0.3, "weights": [1.0, 0.5, 2.0], "matcher": "mc_normalized"}


def main() -> None:
    cases = [c for c in json.loads((HERE / "reward_cases.json").read_text()) if c["config"] == CONFIG]
    # one QA case with a clip, one without, one grounding case
    picks = []
    for want in ("qa-clip", "qa-direct", "grounding"):
        for c in cases:
            t = c["trajectory"]
            kind = "grounding" if t["question"]["task"] == "grounding" else (
                "qa-clip" if any(s["action"] and s["action"]["type"] == "clip" for s in t["steps"]) else "qa-direct"
            )
            if kind == want and c not in picks:
                picks.append(c)
                break
    assert len(picks) == 3
    out = HERE / "score_golden"
    out.mkdir(exist_ok=True)
    (out / "reward.json").write_text(json.dumps(CONFIG) + "\n")
    (out / "traj.jsonl").write_text("".join(json.dumps({**c["trajectory"], "group_id": f"g{i}"}) + "\n" for i, c in enumerate(picks)))
    rows = [{"line": i + 1, "group_id": f"g{i}", **oracles.score(c)} for i, c in enumerate(picks)]
    (out / "rewards.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))


if __name__ == "__main__":
    main()
