"""
The localize, clip, answer loop
===============================

A policy sees a coarse skim of the video, may call the clip tool up to twice,
and must then answer. Here scripted policies play against a synthetic video
whose answer only becomes visible once enough of the evidence has been seen.
"""

from clipgrounder import jsonl
from clipgrounder.policies import BlindPolicy, DirectAnswerPolicy, OraclePolicy, RefinePolicy
from clipgrounder.protocol import parse_assistant
from clipgrounder.rewards import score_trajectory
from clipgrounder.rollout import SyntheticVideo, run_group, run_rollout, toolcall_behavior
from clipgrounder.types import Question, Task, TemporalInterval, VideoMeta

evidence = TemporalInterval(812.0, 840.0)
video = SyntheticVideo(VideoMeta("cooking", 1500.0), evidence, "C")
question = Question(
    "What does the cook add after the onions?",
    Task.VIDEOQA,
    ("A. salt", "B. garlic", "C. tomatoes", "D. water"),
    gt_answer="C",
    gt_interval=evidence,
)

for policy in (OraclePolicy(), RefinePolicy(), DirectAnswerPolicy(), BlindPolicy()):
    t = run_rollout(policy, video, question, seed=3)
    r = score_trajectory(t)
    clips = [(c.interval.start_s, c.interval.end_s) for c in t.clips()]
    print(f"{type(policy).__name__:<20} clips={clips} answer={t.steps[-1].turn.action} total={r.total:+.3f}")

# Messages on the wire are plain tagged text.
raw = run_rollout(OraclePolicy(), video, question).steps[0].turn.raw_text
print(raw)
print(parse_assistant(raw).action)

# A group of rollouts shares one question; its advantages are relative.
group = run_group(BlindPolicy(), video, question, 8, seed=11, group_id="cooking")
print("rewards:", [round(x, 3) for x in group.rewards])
print("advantages:", [round(x, 3) for x in group.advantages().per_trajectory])
print(toolcall_behavior(group.trajectories))
print(jsonl.encode(group.trajectories[0])[:160], "...")
