#!/usr/bin/env python3
"""Precompute the two heavy acceptance scenarios so the test suite can verify
them from artifacts instead of re-running hours of training.

Artifacts land in .accept/ next to the repository root:
  c8/            separability run (3 subjects, tc+pca x svm+rfc subset)
  c9_w1/, c9_w8/ full coarse-grid runs with 1 and 8 workers
  manifest.json  scenario parameters, source digests, outcomes

The test suite trusts an artifact only if the manifest parameters match the
scenario constants below AND the recorded source digests still match
src/gaitbench; otherwise it recomputes the scenario itself.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from gaitbench.evaluate import evaluate_combination  # noqa: E402
from gaitbench.experiment import ResultsStore, RunConfig, run_grid  # noqa: E402
from gaitbench.ingest import synthesize_dataset  # noqa: E402
from gaitbench.model import parse_spec  # noqa: E402

ACCEPT_DIR = REPO / ".accept"

# Scenario constants. The acceptance tests import this module and reuse them;
# edit here and rebuild if they ever change.
C8 = {
    "seed": 11,
    "n_subjects": 3,
    "noise_sigma": 2e-4,
    "session_effect": 0.12,
    "spec_filter": "red=tc,pca;clf=svm,rfc",
    "grid": "coarse",
    "f1_floor": 0.85,
    "control_subject_index": 0,
    "control_permutation_seed": 123,
    "control_specs": [
        "filtering=none;deriv=grf;T=101;red=tc;wn=0;scale=z_at_mm_at;clf=svm",
        "filtering=none;deriv=grf;T=101;red=pca;wn=0;scale=z_at_mm_at;clf=svm",
        "filtering=auto_cutoff;deriv=grf;T=101;red=tc;wn=0;scale=z_at_mm_at;clf=svm",
        "filtering=auto_cutoff;deriv=grf;T=101;red=pca;wn=0;scale=z_at_mm_at;clf=svm",
        "filtering=none;deriv=grf;T=101;red=tc;wn=0;scale=z_at_mm_at;clf=rfc",
        "filtering=none;deriv=grf;T=101;red=pca;wn=0;scale=z_at_mm_at;clf=rfc",
        "filtering=auto_cutoff;deriv=grf;T=101;red=tc;wn=0;scale=z_at_mm_at;clf=rfc",
        "filtering=auto_cutoff;deriv=grf;T=101;red=pca;wn=0;scale=z_at_mm_at;clf=rfc",
    ],
    "control_band": (0.167 - 0.10, 0.167 + 0.10),
}
C9 = {
    "seed": 7,
    "n_subjects": 1,
    "grid": "coarse",
    "workers_a": 1,
    "workers_b": 8,
}


def source_digests() -> dict:
    out = {}
    for path in sorted((REPO / "src" / "gaitbench").rglob("*.py")):
        rel = str(path.relative_to(REPO))
        out[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def normalized_store_lines(path) -> list:
    """results.csv lines with the trailing seconds column dropped."""
    lines = Path(path).read_text().splitlines()
    return [",".join(line.split(",")[:-1]) for line in lines]


def store_digest(path) -> str:
    joined = "\n".join(normalized_store_lines(path))
    return hashlib.sha256(joined.encode()).hexdigest()


def _log(msg: str) -> None:
    stamp = time.strftime("%H:%M:%S")
    print(f"[{stamp}] {msg}", flush=True)


def build_c8() -> dict:
    out_dir = ACCEPT_DIR / "c8"
    t0 = time.perf_counter()
    summary = run_grid(
        RunConfig(
            out_dir=out_dir,
            seed=C8["seed"],
            synth_subjects=C8["n_subjects"],
            synth_noise=C8["noise_sigma"],
            synth_session_effect=C8["session_effect"],
            spec_filter=C8["spec_filter"],
            grid=C8["grid"],
            workers=1,
        ),
        progress=_log,
    )
    store = ResultsStore.read(summary.store_path)
    per_subject = {}
    for subject in store.subjects:
        values = [store.mean_f1(subject, s) for s in store.serials
                  if store.has_complete(subject, s)]
        per_subject[subject] = sum(values) / len(values)
    _log(f"c8 per-subject aggregate mean F1: {per_subject}")

    datasets = synthesize_dataset(
        C8["n_subjects"], C8["seed"],
        noise_sigma=C8["noise_sigma"], session_effect=C8["session_effect"],
    )
    control_ds = datasets[C8["control_subject_index"]]
    control = {}
    for serial in C8["control_specs"]:
        res = evaluate_combination(
            control_ds, parse_spec(serial), C8["seed"], grid=C8["grid"],
            label_permutation_seed=C8["control_permutation_seed"],
        )
        control[serial] = res.mean.f1
        _log(f"c8 control {serial}: mean F1 {res.mean.f1:.4f}")

    return {
        "params": {k: v for k, v in C8.items()},
        "store": str(summary.store_path),
        "n_tasks": summary.n_tasks,
        "n_failed": summary.n_failed,
        "per_subject_mean_f1": per_subject,
        "control_mean_f1": control,
        "wall_seconds": time.perf_counter() - t0,
    }


def build_c9() -> dict:
    outcomes = {}
    for label, workers in (("w1", C9["workers_a"]), ("w8", C9["workers_b"])):
        out_dir = ACCEPT_DIR / f"c9_{label}"
        t0 = time.perf_counter()
        summary = run_grid(
            RunConfig(
                out_dir=out_dir,
                seed=C9["seed"],
                synth_subjects=C9["n_subjects"],
                grid=C9["grid"],
                workers=workers,
            ),
            progress=_log,
        )
        outcomes[label] = {
            "store": str(summary.store_path),
            "n_tasks": summary.n_tasks,
            "n_failed": summary.n_failed,
            "wall_seconds": time.perf_counter() - t0,
            "digest": store_digest(summary.store_path),
        }
        _log(f"c9 {label}: {summary.n_tasks} tasks, {summary.n_failed} failed, "
             f"{outcomes[label]['wall_seconds']:.0f}s, digest "
             f"{outcomes[label]['digest'][:16]}")
    outcomes["identical"] = outcomes["w1"]["digest"] == outcomes["w8"]["digest"]
    outcomes["params"] = {k: v for k, v in C9.items()}
    return outcomes


def main() -> int:
    ACCEPT_DIR.mkdir(exist_ok=True)
    manifest_path = ACCEPT_DIR / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())

    legs = sys.argv[1:] or ["c8", "c9"]
    for leg in legs:
        _log(f"building {leg}")
        if leg == "c8":
            manifest["c8"] = build_c8()
        elif leg == "c9":
            manifest["c9"] = build_c9()
        else:
            raise SystemExit(f"unknown leg {leg!r}")
        manifest["source_digests"] = source_digests()
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
        _log(f"{leg} written to manifest")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
