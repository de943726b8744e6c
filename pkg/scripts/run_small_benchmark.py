#!/usr/bin/env python3
"""Small end-to-end benchmark on synthetic data.

Synthesizes one subject, evaluates a reduced spec slice on the coarse
hyperparameter grid, and writes the report tables. The default slice
(16 specs: both filtering modes x T in {11, 101} x {tc, pca} x {svm, rfc})
takes a few minutes on one core; widen or narrow it with --filter.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from gaitbench.experiment import RunConfig, run_grid, write_reports  # noqa: E402

DEFAULT_FILTER = "deriv=grf;T=11,101;red=tc,pca;wn=0;clf=svm,rfc"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/small",
                        help="output directory (default runs/small)")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--subjects", type=int, default=1,
                        help="synthetic subjects to evaluate")
    parser.add_argument("--filter", default=DEFAULT_FILTER,
                        help=f"spec slice (default {DEFAULT_FILTER!r})")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    config = RunConfig(
        out_dir=Path(args.out),
        seed=args.seed,
        synth_subjects=args.subjects,
        synth_noise=2e-4,
        synth_session_effect=0.12,
        spec_filter=args.filter,
        grid="coarse",
        workers=args.workers,
    )
    t0 = time.perf_counter()
    summary = run_grid(config, progress=print)
    print(
        f"{summary.n_completed} evaluated, {summary.n_skipped} resumed, "
        f"{summary.n_failed} failed in {time.perf_counter() - t0:.0f}s"
    )
    if summary.n_failed:
        for subject, serial, message in summary.failures:
            print(f"FAILED {subject} {serial}: {message.splitlines()[-1]}")
        return 1

    report = write_reports(summary.store_path, Path(args.out) / "report")
    for message in report.messages:
        print(message)
    for _, path in report.files:
        print(f"wrote {path}")
    print("\nbest combinations:")
    for row in report.best[:5]:
        print(f"  {row.rank:>2}. F1 {row.mean_f1:.4f}  {row.serial}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
