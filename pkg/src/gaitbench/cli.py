"""Command-line interface: synth / run / report / preprocess.

Exit codes: 0 success, 2 usage, 3 data or validation problems, 4 run finished
with task failures, 5 malformed or missing results store, 6 I/O failures,
1 unexpected errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from .errors import DataFormatError, GaitbenchError, StoreError, ValidationError
from .experiment import ResultsStore, RunConfig, run_grid, write_reports
from .ingest import load_dataset, synthesize_dataset, write_dataset
from .model import parse_spec, spec_field_strings
from .preprocess import build_feature_matrix

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUN_FAILURES = 4
EXIT_STORE = 5
EXIT_IO = 6


def _default_workers() -> int:
    raw = os.environ.get("GAITBENCH_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(
            f"GAITBENCH_WORKERS must be an integer, got {raw!r}"
        ) from None
    if value < 1:
        raise ValidationError(f"GAITBENCH_WORKERS must be >= 1, got {value}")
    return value


def _subject_list(raw):
    if not raw:
        return None
    subjects = tuple(s.strip() for s in raw.split(",") if s.strip())
    if not subjects:
        raise ValidationError(f"--subjects {raw!r} names no subjects")
    return subjects


def cmd_synth(args) -> int:
    if args.subjects < 1:
        raise ValidationError("--subjects must be >= 1 for synth")
    datasets = synthesize_dataset(
        args.subjects, args.seed,
        noise_sigma=args.noise, session_effect=args.session_effect,
    )
    n_files = write_dataset(datasets, args.out)
    n_trials = sum(len(d.trials) for d in datasets)
    print(
        f"wrote {len(datasets)} subjects, {n_trials} trials "
        f"({n_files} files) to {args.out}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    workers = args.workers if args.workers is not None else _default_workers()
    config = RunConfig(
        out_dir=Path(args.out),
        seed=args.seed,
        data_dir=Path(args.data_dir) if args.data_dir else None,
        synth_subjects=args.synth_subjects,
        subjects=_subject_list(args.subjects),
        spec_filter=args.filter,
        grid=args.grid,
        workers=workers,
        pca_foldwise=args.pca_foldwise,
        all_scalings=args.all_scalings,
    )
    progress = None if args.quiet else lambda line: print(line, flush=True)
    summary = run_grid(config, progress=progress)
    print(
        f"{summary.n_tasks} tasks: {summary.n_skipped} already complete, "
        f"{summary.n_completed} computed, {summary.n_failed} failed "
        f"({summary.seconds:.1f}s) -> {summary.store_path}"
    )
    if summary.n_skipped == summary.n_tasks:
        print("0 new tasks")
    for subject, serial, message in summary.failures:
        print(
            f"FAILED subject={subject} spec={serial}: "
            f"{message.splitlines()[-1]}",
            file=sys.stderr,
        )
    return EXIT_RUN_FAILURES if summary.n_failed else EXIT_OK


def cmd_report(args) -> int:
    store = ResultsStore.read(args.results)
    result = write_reports(store, args.out, top_n=args.top)
    for message in result.messages:
        print(message)
    for name, path in result.files:
        print(f"wrote {path}")
    print()
    print("top combinations by mean F1:")
    header = f"{'rank':>4}  {'mean_f1':>8}  {'sd':>7}  spec"
    print(header)
    for row in result.best[:10]:
        print(
            f"{row.rank:>4}  {row.mean_f1:>8.4f}  {row.sd_f1:>7.4f}  "
            f"{row.serial}"
        )
    return EXIT_OK


def cmd_preprocess(args) -> int:
    spec = parse_spec(args.spec)
    if args.data_dir:
        wanted = [args.subject] if args.subject else None
        datasets = load_dataset(args.data_dir, subjects=wanted)
    else:
        datasets = synthesize_dataset(args.synth_subjects, args.seed)
        if args.subject:
            datasets = [d for d in datasets if d.subject_id == args.subject]
            if not datasets:
                raise ValidationError(
                    f"subject {args.subject!r} not in the synthesized set"
                )
    dataset = datasets[0]
    matrix, labels, layout = build_feature_matrix(dataset, spec)

    out_fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out_fh, lineterminator="\n")
        writer.writerow(
            ["trial", "session"] + [f"f{i:04d}" for i in range(matrix.shape[1])]
        )
        for i in range(matrix.shape[0]):
            writer.writerow(
                [i, int(labels[i])] + [repr(float(v)) for v in matrix[i]]
            )
    finally:
        if args.out:
            out_fh.close()
    print(
        f"subject {dataset.subject_id}: {matrix.shape[0]} trials x "
        f"{matrix.shape[1]} features ({spec_field_strings(spec)['red']} "
        f"reduction) -> {args.out or 'stdout'}",
        file=sys.stderr,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitbench",
        description=(
            "Benchmark preprocessing and classification combinations for "
            "session recognition from ground reaction force gait trials."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser(
        "synth", help="generate a synthetic dataset in the canonical layout"
    )
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--subjects", type=int, default=1,
                         help="number of subjects to synthesize")
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--noise", type=float, default=0.01,
                         help="additive noise sigma (fraction of body weight)")
    p_synth.add_argument("--session-effect", type=float, default=0.05,
                         help="between-session parameter drift strength")
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser(
        "run", help="evaluate the preprocessing/classifier grid"
    )
    source = p_run.add_mutually_exclusive_group(required=True)
    source.add_argument("--data-dir", help="dataset directory (meta.csv + trials/)")
    source.add_argument("--synth-subjects", type=int,
                        help="synthesize this many subjects instead of loading")
    p_run.add_argument("--out", required=True,
                       help="output directory for results.csv")
    p_run.add_argument("--seed", type=int, default=7)
    p_run.add_argument("--subjects",
                       help="comma-separated subject ids to include")
    p_run.add_argument("--filter", default="",
                       help="spec filter, e.g. 'clf=svm,rfc;red=pca'")
    p_run.add_argument("--grid", choices=("paper", "coarse"), default="coarse")
    p_run.add_argument("--workers", type=int, default=None,
                       help="parallel workers (default GAITBENCH_WORKERS or 1)")
    p_run.add_argument("--pca-foldwise", action="store_true",
                       help="fit PCA and scaling on each fold's training split")
    p_run.add_argument("--all-scalings", action="store_true",
                       help="run all four scaling variants (not just the "
                            "all-trials passes)")
    p_run.add_argument("--quiet", action="store_true",
                       help="suppress per-task progress lines")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser(
        "report", help="aggregate a results store into the report tables"
    )
    p_report.add_argument("--results", required=True, help="path to results.csv")
    p_report.add_argument("--out", required=True, help="report output directory")
    p_report.add_argument("--top", type=int, default=30,
                          help="rows in best_table.csv")
    p_report.set_defaults(func=cmd_report)

    p_prep = sub.add_parser(
        "preprocess", help="dump the feature matrix for one subject and spec"
    )
    p_source = p_prep.add_mutually_exclusive_group(required=True)
    p_source.add_argument("--data-dir")
    p_source.add_argument("--synth-subjects", type=int)
    p_prep.add_argument("--spec", required=True,
                        help="full spec serialization, e.g. "
                             "'filtering=none;deriv=grf;T=101;red=tc;wn=0;"
                             "scale=z_at_mm_at;clf=svm'")
    p_prep.add_argument("--subject", help="subject id (default: first)")
    p_prep.add_argument("--seed", type=int, default=7)
    p_prep.add_argument("--out", help="output CSV path (default: stdout)")
    p_prep.set_defaults(func=cmd_preprocess)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STORE
    except (ValidationError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GaitbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
