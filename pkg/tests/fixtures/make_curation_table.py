"""Regenerate curation_table.json: 30 mock-annotator rows and their expected outcomes.

    python3 tests/fixtures/make_curation_table.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402

GT = [100.0, 120.0]
HIT = [100.0, 120.0]
MISS = [300.0, 320.0]
NEAR_MISS = [150.0, 170.0]  # in range for the short videos
# answers judged against GT [100, 120]; "[100.0, 110.0]" sits exactly on the 0.5 bar
IOU_06 = "[102.0, 122.0]"  # 18 / 22
IOU_02 = "[116.0, 136.0]"  # 4 / 36


def qa(sid, duration, row):
    sample = {
        "sample_id": sid,
        "video": {"id": f"vid-{sid}", "duration_s": duration},
        "question": {"text": f"What happens in {sid}?", "task": "videoqa",
                     "choices": ["A. one", "B. two", "C. three", "D. four"],
                     "gt_answer": "B", "gt_interval": GT},
    }
    return sample, row


def gr(sid, duration, row):
    sample = {
        "sample_id": sid,
        "video": {"id": f"vid-{sid}", "duration_s": duration},
        "question": {"text": f"When does {sid} happen?", "task": "grounding", "gt_interval": GT},
    }
    return sample, row


def rows():
    P, F = "b)", "C"
    yield qa("qa-pp-short", 120.0, {"ground": HIT, "answer_from_clip": P, "answer_full_context": "B"})
    yield qa("qa-pp-gate", 180.0, {"ground": HIT, "answer_from_clip": " b. ", "answer_full_context": "(B)"})
    yield qa("qa-pp-long", 400.0, {"ground": HIT, "answer_from_clip": "B", "answer_full_context": "B"})
    for d in (120.0, 180.0):
        yield qa(f"qa-f1-{int(d)}", d, {"ground": NEAR_MISS, "answer_from_clip": F, "answer_full_context": "B", "reground": HIT})
        yield qa(f"qa-f2-{int(d)}", d, {"ground": HIT, "answer_from_clip": "B", "answer_full_context": F, "reground": HIT})
    for first in ("f1", "f2"):
        for retry in ("pp", "pf", "f"):
            clip = {"f1": [F], "f2": ["B"]}[first]
            full = {"f1": [], "f2": [F]}[first]
            if retry == "pp":
                clip, full = clip + ["B"], full + ["B"]
            elif retry == "pf":
                clip, full = clip + ["B"], full + [F]
            else:
                clip = clip + [F]
            full = full or ["B"]
            yield qa(f"qa-{first}-retry-{retry}", 400.0,
                     {"ground": MISS, "answer_from_clip": clip, "answer_full_context": full, "reground": HIT})
    yield qa("qa-f1-180.5", 180.5, {"ground": NEAR_MISS, "answer_from_clip": [F, "B"], "answer_full_context": "B", "reground": HIT})
    yield qa("qa-f1-179.9", 179.9, {"ground": NEAR_MISS, "answer_from_clip": [F, "B"], "answer_full_context": "B", "reground": HIT})
    yield qa("qa-oob-retry", 400.0, {"ground": [500.0, 600.0], "answer_from_clip": "B", "answer_full_context": "B", "reground": HIT})
    yield qa("qa-oob-both", 400.0, {"ground": [500.0, 600.0], "answer_from_clip": "B", "answer_full_context": "B", "reground": [450.0, 460.0]})
    yield qa("qa-oob-short", 150.0, {"ground": [500.0, 600.0], "answer_from_clip": "B", "answer_full_context": "B", "reground": HIT})
    yield qa("qa-wordy-wrong", 400.0, {"ground": HIT, "answer_from_clip": "B because", "answer_full_context": "B", "reground": HIT})
    yield gr("gr-06-long", 400.0, {"ground": HIT, "answer_from_clip": IOU_06, "answer_full_context": IOU_06})
    yield gr("gr-06-short", 120.0, {"ground": HIT, "answer_from_clip": IOU_06, "answer_full_context": "[100, 120]"})
    yield gr("gr-05-short", 120.0, {"ground": HIT, "answer_from_clip": "[100.0, 110.0]", "answer_full_context": IOU_06, "reground": HIT})
    yield gr("gr-05-retry", 400.0, {"ground": MISS, "answer_from_clip": ["[100.0, 110.0]", IOU_06], "answer_full_context": IOU_06, "reground": HIT})
    yield gr("gr-step2-05", 400.0, {"ground": HIT, "answer_from_clip": IOU_06, "answer_full_context": ["[100.0, 110.0]", "[110.0, 120.0]"], "reground": HIT})
    yield gr("gr-02", 400.0, {"ground": MISS, "answer_from_clip": IOU_02, "answer_full_context": IOU_06, "reground": MISS})
    yield gr("gr-oob-reground", 400.0, {"ground": MISS, "answer_from_clip": IOU_02, "answer_full_context": IOU_06, "reground": [401.0, 420.0]})
    for stage in ("ground", "answer_from_clip", "answer_full_context", "reground"):
        yield qa(f"qa-transport-{stage}", 400.0,
                 {"ground": MISS, "answer_from_clip": ["C", "B"], "answer_full_context": "B", "reground": HIT, "fail": stage})


def main() -> None:
    samples, table, expected = [], {}, {}
    for sample, row in rows():
        sid = sample["sample_id"]
        samples.append(sample)
        table[sid] = row
        expected[sid] = oracles.curation(row, sample)
    assert len(samples) == 30, len(samples)
    out = {"samples": samples, "table": table, "expected": expected}
    (HERE / "curation_table.json").write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
