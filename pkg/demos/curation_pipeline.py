"""
Curating multi-turn training data
=================================

Each raw sample goes through grounding, an answer from the clip, and an
answer from the full context. A long video that fails gets one more chance
with a fresh interval; short videos that fail are dropped. Here the
annotator is a table of scripted replies.
"""

from clipgrounder.datapipe import MockAnnotator, RawSample, curate_all, stratified_balance, stratum_of
from clipgrounder.types import Question, Task, TemporalInterval, VideoMeta


def sample(sid, duration):
    q = Question("Which tool is used?", Task.VIDEOQA, ("A. saw", "B. drill"), "B", TemporalInterval(60, 80))
    return RawSample(sid, VideoMeta(f"v-{sid}", duration), q)


samples = [sample("easy", 400), sample("second-try", 400), sample("short-miss", 120), sample("flaky", 900)]
annotator = MockAnnotator({
    "easy": {"ground": [60, 80], "answer_from_clip": "B", "answer_full_context": "B"},
    "second-try": {"ground": [200, 220], "answer_from_clip": ["A", "B"], "answer_full_context": "B",
                   "reground": [62, 82]},
    "short-miss": {"ground": [10, 20], "answer_from_clip": "A"},
    "flaky": {"fail": "ground"},
})

run = curate_all(samples, annotator)
for rec in run.records:
    steps = len(rec.trajectory.steps) if rec.trajectory else 0
    print(f"{rec.sample_id:<11} {rec.outcome.value:<11} calls={rec.calls} retry={rec.retry_used} steps={steps}")
for d in run.deferred:
    print(f"{d.sample_id:<11} deferred at {d.stage}")

# Raw pools are balanced by duration bucket, task and modality before curation.
quotas = {stratum_of(samples[0]): 1}
chosen, shortfall = stratified_balance(samples, quotas, seed=0)
print("balanced pick:", [s.sample_id for s in chosen], "shortfall:", shortfall)
