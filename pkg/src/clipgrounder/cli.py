"""Command-line entry point: ``clipgrounder <subcommand> ...``.

Exit codes: 0 success, 1 usage or I/O error, 2 some records failed (the
failures are written inline), 3 a remote service could not be reached.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence, TextIO

from . import datapipe, evalkit, grpo, jsonl, masking, synthbench
from .policies import SCRIPTED
from .rewards import RewardConfig, score_trajectory
from .rollout import (
    ParseFailurePolicy,
    PolicyTransportError,
    RolloutConfig,
    RolloutFailure,
    rollout_seeds,
    run_group,
    toolcall_behavior,
)
from .types import Task, TemporalInterval

log = logging.getLogger("clipgrounder")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_TRANSPORT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class TransportError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


@contextmanager
def _output(path: str | None) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    try:
        fh = open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None
    with fh:
        yield fh


def _dump(fh: TextIO, obj: dict) -> None:
    fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _lines(path: str) -> list[str]:
    try:
        return list(jsonl.read_jsonl(_existing(path)))
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _ordered_map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# score


def cmd_score(args: argparse.Namespace) -> int:
    cfg = RewardConfig()
    if args.reward is not None:
        try:
            cfg = RewardConfig.load(_existing(args.reward))
        except (ValueError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad reward config: {exc}") from None
    lines = _lines(args.trajectories)

    def one(item: tuple[int, str]) -> dict:
        i, line = item
        try:
            t = jsonl.decode(line, strict=not args.lenient)
            return {"line": i, "group_id": t.group_id, **score_trajectory(t, cfg).to_dict()}
        except ValueError as exc:
            return {"line": i, "error": str(exc)}

    records = _ordered_map(one, list(enumerate(lines, 1)), args.jobs)
    with _output(args.output) as fh:
        for r in records:
            _dump(fh, r)
    failed = sum("error" in r for r in records)
    if failed:
        log.warning("%d of %d lines failed", failed, len(records))
    return EXIT_PARTIAL if failed else EXIT_OK


# rollout


def _policy(args: argparse.Namespace):
    if args.policy == "http":
        if not args.url:
            raise UsageError("--policy http needs --url")
        from .remote import HttpPolicy

        return HttpPolicy(args.url, timeout_s=args.timeout)
    return SCRIPTED[args.policy]()


def cmd_rollout(args: argparse.Namespace) -> int:
    if args.env != "synthetic":
        raise UsageError(f"unsupported env {args.env!r}")
    if args.group_size < 2:
        raise UsageError("--group-size must be at least 2")
    if args.bench:
        instances = synthbench.load(_existing(args.bench))
    else:
        spec = synthbench.BenchSpec(counts=(args.per_bucket,) * 4, seed=args.seed)
        instances = synthbench.generate(spec)
    policy = _policy(args)
    cfg = RolloutConfig(
        t_max=args.t_max,
        on_parse_failure=ParseFailurePolicy(args.on_parse_failure),
        temperature=args.temperature,
        jobs=args.jobs,
    )
    group_seeds = rollout_seeds(args.seed, len(instances))
    trajectories = []
    with _output(args.output) as fh:
        for inst, s in zip(instances, group_seeds):
            gid = inst.video.meta.id
            result = run_group(policy, inst.video, inst.question, args.group_size, cfg, s, group_id=gid)
            if result.failures:
                raise TransportError(next(iter(result.failures.values())))
            for t in result.trajectories:
                _dump(fh, jsonl.trajectory_to_dict(t))
            trajectories.extend(result.trajectories)
    stats = toolcall_behavior(trajectories)
    summary = {"n": stats.n, "clip_ratio": stats.clip_ratio, "avg_clips": stats.avg_clips}
    print(json.dumps({"toolcall_behavior": summary}), file=sys.stderr)
    return EXIT_OK


# mask


def _spans_from_record(d: dict) -> list[masking.MessageSpan]:
    return [
        masking.MessageSpan(masking.Role(s["role"]), int(s["start"]), int(s["len"]), s.get("turn_index"))
        for s in d["spans"]
    ]


def cmd_mask(args: argparse.Namespace) -> int:
    lines = _lines(args.sft)

    def one(item: tuple[int, str]) -> dict:
        i, line = item
        try:
            d = json.loads(line)
            if isinstance(d, dict) and "spans" in d:
                sample_id, spans = str(d.get("sample_id", i)), _spans_from_record(d)
            else:
                t = jsonl.trajectory_from_dict(d, strict=not args.lenient)
                sample_id, spans = t.group_id or str(i), masking.trajectory_spans(t)
            return masking.export_record(sample_id, spans, masking.unified_mask(spans))
        except (ValueError, KeyError, TypeError) as exc:
            return {"line": i, "error": str(exc)}

    records = _ordered_map(one, list(enumerate(lines, 1)), args.jobs)
    with _output(args.output) as fh:
        for r in records:
            _dump(fh, r)
    return EXIT_PARTIAL if any("error" in r for r in records) else EXIT_OK


# curate


def _annotator(spec: str):
    if spec.startswith("mock:"):
        path = _existing(spec[len("mock:"):])
        try:
            return datapipe.MockAnnotator.load(path)
        except (json.JSONDecodeError, AttributeError) as exc:
            raise UsageError(f"bad mock table: {exc}") from None
    if spec.startswith(("http://", "https://")):
        return datapipe.HttpAnnotator(spec)
    raise UsageError(f"--annotator must be mock:<table.json> or an http(s) URL, got {spec!r}")


def cmd_curate(args: argparse.Namespace) -> int:
    lines = _lines(args.raw)
    try:
        samples = [datapipe.RawSample.from_dict(json.loads(line)) for line in lines]
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad raw sample: {exc}") from None
    annotator = _annotator(args.annotator)
    run = datapipe.curate_all(samples, annotator, jobs=args.jobs)
    with _output(args.output) as fh:
        for rec in run.records:
            if rec.trajectory is not None:
                curation = {"outcome": rec.outcome.value, "retry_used": rec.retry_used}
                _dump(fh, jsonl.trajectory_to_dict(rec.trajectory, curation=curation))
    audit = args.audit or (None if args.output in (None, "-") else args.output + ".audit.jsonl")
    if audit:
        jsonl.write_jsonl(audit, [r.audit() for r in run.records])
    if run.deferred:
        queue = args.retry_queue or (
            "retry_queue.jsonl" if args.output in (None, "-") else args.output + ".retry.jsonl"
        )
        datapipe.write_retry_queue(queue, run.deferred, samples)
        log.warning("%d samples deferred to %s", len(run.deferred), queue)
        return EXIT_PARTIAL
    return EXIT_OK


# eval


def _interval(v) -> TemporalInterval | None:
    return None if v is None else TemporalInterval(float(v[0]), float(v[1]))


def _records_from_pairs(pred_lines: list[str], gt_lines: list[str]) -> list[evalkit.EvalRecord]:
    preds = {}
    for line in pred_lines:
        d = json.loads(line)
        preds[str(d["id"])] = d
    out = []
    for line in gt_lines:
        g = json.loads(line)
        p = preds.get(str(g["id"]), {})
        out.append(
            evalkit.EvalRecord(
                duration_s=float(g["duration_s"]),
                task=Task(g.get("task", Task.VIDEOQA.value)),
                pred_interval=_interval(p.get("pred_interval")),
                gt_interval=_interval(g.get("gt_interval")),
                pred_answer=p.get("pred_answer"),
                gt_answer=g.get("gt_answer"),
                clip_count=int(p.get("clip_count", 0)),
            )
        )
    return out


def cmd_eval(args: argparse.Namespace) -> int:
    pred_lines = _lines(args.pred)
    try:
        if args.gt is None:
            records = [
                evalkit.record_from_trajectory(jsonl.decode(line, strict=not args.lenient))
                for line in pred_lines
            ]
        else:
            records = _records_from_pairs(pred_lines, _lines(args.gt))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad eval input: {exc}") from None
    report = evalkit.bucketed_report(records)
    with _output(args.output) as fh:
        fh.write(report.render(args.format))
    return EXIT_OK


# advantages


def cmd_advantages(args: argparse.Namespace) -> int:
    if args.beta < 0:
        raise UsageError("--beta must be non-negative")
    groups: OrderedDict[str, list[dict]] = OrderedDict()
    for i, line in enumerate(_lines(args.rewards), 1):
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UsageError(f"line {i}: invalid JSON: {exc.msg}") from None
        key = d.get(args.group_key)
        if key is None:
            raise UsageError(f"line {i}: missing group key {args.group_key!r}")
        if "total" not in d:
            raise UsageError(f"line {i}: missing reward 'total'")
        groups.setdefault(str(key), []).append(d)

    failed = 0
    with _output(args.output) as fh:
        for gid, members in groups.items():
            rewards = [float(m["total"]) for m in members]
            try:
                adv = grpo.group_advantages(rewards)
            except grpo.GroupTooSmall as exc:
                _dump(fh, {"group_id": gid, "error": str(exc)})
                failed += 1
                continue
            rec = grpo.export_record(gid, rewards, adv)
            if all("logprobs" in m for m in members):
                rec["objective"] = _group_objective(members, adv, args.beta)
            _dump(fh, rec)
    return EXIT_PARTIAL if failed else EXIT_OK


def _group_objective(members: list[dict], adv: grpo.GroupAdvantages, beta: float) -> float:
    kls = []
    for m in members:
        lp = m["logprobs"]
        pairs = [grpo.TokenLogProbPair(c, r) for c, r in zip(lp["current"], lp["reference"])]
        kls.append(grpo.kl_estimate(pairs))
    adv_tokens = grpo.broadcast_token_advantages(adv, [len(k) for k in kls])
    return grpo.objective_terms(adv_tokens, kls, beta)[1]


# wiring


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="output path (default: stdout)")
    common.add_argument("--jobs", type=int, default=1, help="parallelism limit")
    common.add_argument("--lenient", action="store_true", help="ignore unknown JSON fields")

    parser = argparse.ArgumentParser(prog="clipgrounder", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score trajectories")
    p.add_argument("trajectories")
    p.add_argument("reward", nargs="?", help="reward config JSON")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rollout", parents=[common], help="run grouped rollouts")
    p.add_argument("--env", default="synthetic")
    p.add_argument("--policy", choices=[*SCRIPTED, "http"], default="oracle")
    p.add_argument("--url")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--group-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bench", help="bench JSONL; default is a generated one")
    p.add_argument("--per-bucket", type=int, default=2)
    p.add_argument("--t-max", type=int, default=3)
    p.add_argument("--temperature", type=float, default=0.1)
    p.add_argument(
        "--on-parse-failure", choices=[m.value for m in ParseFailurePolicy],
        default=ParseFailurePolicy.ERROR_OBSERVATION_AND_CONTINUE.value,
    )
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("mask", parents=[common], help="unified SFT masks")
    p.add_argument("sft")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("curate", parents=[common], help="curate raw samples")
    p.add_argument("raw")
    p.add_argument("--annotator", required=True, help="mock:<table.json> or an http(s) URL")
    p.add_argument("--audit")
    p.add_argument("--retry-queue")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("eval", parents=[common], help="bucketed report")
    p.add_argument("pred")
    p.add_argument("gt", nargs="?")
    p.add_argument("--format", choices=["json", "csv", "md"], default="md")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("advantages", parents=[common], help="group-normalized advantages")
    p.add_argument("rewards")
    p.add_argument("--group-key", default="group_id")
    p.add_argument("--beta", type=float, default=0.0)
    p.set_defaults(func=cmd_advantages)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("CLIPGROUNDER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Iterable[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("clipgrounder: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"clipgrounder: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransportError, PolicyTransportError, RolloutFailure) as exc:
        print(f"clipgrounder: transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


def main_exit() -> None:
    try:
        code = main()
        sys.stdout.flush()
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not an error
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = EXIT_OK
    sys.exit(code)


if __name__ == "__main__":
    main_exit()
