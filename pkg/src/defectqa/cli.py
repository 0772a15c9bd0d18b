"""Command-line entry point.

Subcommands: validate, build, stats, score, eval-seg, loss-check (and a
bundled random-responder used for baseline checks). Exit codes: 0 on
success, 1 on validation or tolerance failure, 2 on usage errors.
Warnings go to a --log file when requested; stderr stays silent on
success.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import qagen, scoring, segmetrics
from .geometry import MaskDecodeError
from .losses import run_loss_check
from .manifest import ManifestError, load_manifest, validate_masks
from .scoremap import ScoreMapFormatError

_TASK_ALIASES = {t.lower(): t for t in qagen.TASKS}


def _parse_tasks(raw: str) -> tuple[str, ...]:
    tasks = []
    for part in raw.split(","):
        part = part.strip().lower()
        if not part:
            continue
        if part not in _TASK_ALIASES:
            raise argparse.ArgumentTypeError(
                f"unknown task {part!r} (expected a subset of ad,rdl,dfm,dc)"
            )
        tasks.append(_TASK_ALIASES[part])
    if not tasks:
        raise argparse.ArgumentTypeError("task list must not be empty")
    return tuple(dict.fromkeys(tasks))


def _log_lines(path: str | None, lines) -> None:
    if path is None:
        return
    with open(path, "a", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def _cmd_validate(args) -> int:
    manifest = load_manifest(args.manifest)
    report = validate_masks(manifest)
    print(report.summary())
    return 0 if report.ok else 1


def _cmd_build(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = qagen.BuildConfig(
        seed=args.seed,
        tasks=args.tasks,
        fallback_defect_classes=tuple(args.fallback_defect_classes or ()),
    )
    result = qagen.build_dataset(manifest, cfg)
    qagen.write_qa_jsonl(result.records, args.out)
    if result.issues:
        _log_lines(
            args.log,
            (
                f"skipped {i.sample_id} {i.task} defect[{i.defect_index}]: {i.reason}"
                for i in result.issues
            ),
        )
    print(f"wrote {len(result.records)} records to {args.out}"
          + (f" ({len(result.issues)} skipped)" if result.issues else ""))
    return 0


def _cmd_stats(args) -> int:
    columns = []
    for qa_path in args.qa:
        counts = {t: 0 for t in qagen.TASKS}
        for record in qagen.read_qa_jsonl(qa_path):
            if record.task in counts:
                counts[record.task] += 1
        columns.append((Path(qa_path).stem, counts))
    totals = {t: sum(c[t] for _, c in columns) for t in qagen.TASKS}

    if args.format == "json":
        doc = {
            "tasks": {
                t: {"questions": totals[t], **{name: c[t] for name, c in columns}}
                for t in qagen.TASKS
            },
            "total": sum(totals.values()),
        }
        print(json.dumps(doc, separators=(",", ":")))
        return 0

    headers = ["Task", "Questions"] + [name for name, _ in columns]
    rows = [[t, str(totals[t])] + [str(c[t]) for _, c in columns] for t in qagen.TASKS]
    rows.append(
        ["Total", str(sum(totals.values()))]
        + [str(sum(c.values())) for _, c in columns]
    )
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))]
    if args.format == "markdown":
        print("| " + " | ".join(headers) + " |")
        print("|" + "|".join(" --- " for _ in headers) + "|")
        for row in rows:
            print("| " + " | ".join(row) + " |")
    else:
        print("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
        for row in rows:
            print("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return 0


def _cmd_score(args) -> int:
    gt = qagen.read_qa_jsonl(args.gt)
    preds = scoring.read_predictions(args.pred)
    report = scoring.score_run(preds, gt, iou_threshold=args.iou)
    print(scoring.render_table(report, fmt=args.format))
    return 0


def _cmd_eval_seg(args) -> int:
    pairs = segmetrics.pair_score_maps(args.pred, args.gt)
    if args.per_image:
        metrics = segmetrics.evaluate_pairs_per_image(pairs)
    else:
        metrics = segmetrics.evaluate_pairs(pairs, mode=args.mode, bins=args.bins)
    print(metrics.to_json())
    return 0


def _cmd_loss_check(args) -> int:
    with open(args.fixture, "r", encoding="utf-8") as fh:
        fixture = json.load(fh)
    result = run_loss_check(fixture)
    for case in result.cases:
        print(
            f"{case.name}: bce={case.bce:.6f} dice={case.dice:.6f} "
            f"combined={case.combined:.6f} grad_error={case.grad_error:.3e}"
        )
    print(f"max gradient error tolerance: {result.grad_tol:.1e} "
          f"-> {'ok' if result.ok else 'FAIL'}")
    return 0 if result.ok else 1


def _cmd_random_responder(args) -> int:
    records = qagen.read_qa_jsonl(args.qa)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            rng = qagen.record_rng(args.seed, "responder:" + record.qid)
            if record.options is not None:
                answer = qagen.OPTION_LETTERS[rng.randrange(len(record.options))]
            else:
                x0, y0 = rng.randrange(64), rng.randrange(64)
                answer = f"[{x0},{y0},{x0 + rng.randrange(1, 16)},{y0 + rng.randrange(1, 16)}]"
            fh.write(json.dumps({"qid": record.qid, "answer": answer},
                                separators=(",", ":")) + "\n")
    print(f"wrote {len(records)} predictions to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defectqa",
        description="Build defect QA datasets from anomaly manifests and "
                    "evaluate answers and pixel-level score maps.",
    )
    sub = parser.add_subparsers(
        dest="command",
        required=True,
        metavar="{validate,build,stats,score,eval-seg,loss-check}",
    )

    p = sub.add_parser("validate", help="check a manifest and all its mask files")
    p.add_argument("--manifest", required=True, help="manifest JSON path")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("build", help="generate QA records as JSON Lines")
    p.add_argument("--manifest", required=True, help="manifest JSON path")
    p.add_argument("--out", required=True, help="output .jsonl path")
    p.add_argument("--seed", type=int, default=42, help="build seed (default 42)")
    p.add_argument(
        "--tasks",
        type=_parse_tasks,
        default=qagen.TASKS,
        help="comma-separated subset of ad,rdl,dfm,dc (default all)",
    )
    p.add_argument(
        "--fallback-defect-classes",
        nargs="*",
        default=(),
        help="extra distractor classes when the manifest vocabulary is small",
    )
    p.add_argument("--log", help="append skipped-record warnings to this file")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("stats", help="per-task question counts of QA files")
    p.add_argument("--qa", required=True, nargs="+", help="QA .jsonl path(s)")
    p.add_argument("--format", choices=("text", "markdown", "json"), default="text")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("score", help="score a predictions file against QA ground truth")
    p.add_argument("--pred", required=True, help="predictions .jsonl path")
    p.add_argument("--gt", required=True, help="ground-truth QA .jsonl path")
    p.add_argument("--iou", type=float, default=0.5,
                   help="IoU threshold gating DFM answers (default 0.5)")
    p.add_argument("--format", choices=("text", "markdown", "json"), default="text")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval-seg", help="pixel-level AUROC / F1-max / AP over score maps")
    p.add_argument("--pred", required=True, help="directory of score-map files")
    p.add_argument("--gt", required=True, help="directory of mask PNGs")
    p.add_argument("--mode", choices=("exact", "binned"), default="binned")
    p.add_argument("--bins", type=int, default=segmetrics.DEFAULT_BINS,
                   help="histogram resolution in binned mode (default 4096)")
    p.add_argument("--per-image", action="store_true",
                   help="average exact per-image metrics instead of pooling pixels")
    p.set_defaults(func=_cmd_eval_seg)

    p = sub.add_parser("loss-check", help="evaluate loss fixtures and gradient error")
    p.add_argument("--fixture", required=True, help="fixture JSON path")
    p.set_defaults(func=_cmd_loss_check)

    # Bundled baseline helper; intentionally absent from the visible list.
    p = sub.add_parser("random-responder")
    p.add_argument("--qa", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_random_responder)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        ManifestError,
        MaskDecodeError,
        ScoreMapFormatError,
        scoring.ScoringError,
        segmetrics.MetricsError,
        qagen.OptionPoolError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
