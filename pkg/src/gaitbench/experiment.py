"""Grid orchestration, result persistence, and the paper-style aggregations.

The results store is an append-only CSV keyed by (subject, spec
serialization, fold). Rows are written in task-submission order regardless of
which worker finishes first, and floats are serialized with repr, so two runs
with the same seed produce byte-identical stores apart from the timing
column. Reruns skip tasks whose 15 fold rows and mean row are already
present.
"""

from __future__ import annotations

import concurrent.futures
import csv
import multiprocessing
import time
import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GaitbenchError, StoreError, ValidationError
from .evaluate import evaluate_combination
from .ingest import load_dataset, synthesize_dataset
from .learn.grid import HyperGrid
from .model import (CombinationSpec, enumerate_combinations, parse_spec,
                    parse_spec_filter, spec_field_strings, spec_matches_filter)
from .preprocess import warm_caches
from .stats import bonferroni, cohens_d_paired, paired_t_test

STORE_COLUMNS = (
    "subject", "filtering", "deriv", "T", "red", "wn", "scale", "clf",
    "fold", "f1", "precision", "recall", "accuracy", "seconds",
)
N_FOLDS = 15

# (step key, methods in declared order): the six steps the tables aggregate
STEP_METHODS = (
    ("filtering", ("none", "auto_cutoff")),
    ("deriv", ("grf", "jerk")),
    ("T", ("11", "101", "1001")),
    ("red", ("tc", "td", "pca")),
    ("wn", ("0", "1")),
    ("clf", ("svm", "rfc", "mlp", "cnn")),
)


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------

def _serial_from_row(row: dict) -> str:
    return (
        f"filtering={row['filtering']};deriv={row['deriv']};T={row['T']};"
        f"red={row['red']};wn={row['wn']};scale={row['scale']};clf={row['clf']}"
    )


class ResultsStore:
    """Parsed view of results.csv; later rows win on duplicate keys."""

    def __init__(self, rows: dict, path=None):
        self._rows = rows  # (subject, serial, fold) -> row dict
        self.path = Path(path) if path is not None else None

    @classmethod
    def read(cls, path) -> "ResultsStore":
        path = Path(path)
        if not path.exists():
            raise StoreError(f"results store not found: {path}")
        rows = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise StoreError(f"results store is empty: {path}")
            if tuple(reader.fieldnames) != STORE_COLUMNS:
                raise StoreError(
                    f"unexpected results header in {path}: {reader.fieldnames}"
                )
            for line_no, raw in enumerate(reader, start=2):
                if any(raw[c] is None for c in STORE_COLUMNS):
                    raise StoreError(f"{path}:{line_no}: short row")
                try:
                    row = {
                        "subject": raw["subject"],
                        "fold": raw["fold"],
                        "f1": float(raw["f1"]),
                        "precision": float(raw["precision"]),
                        "recall": float(raw["recall"]),
                        "accuracy": float(raw["accuracy"]),
                        "seconds": float(raw["seconds"]),
                    }
                except ValueError as exc:
                    raise StoreError(f"{path}:{line_no}: {exc}") from None
                for metric in ("f1", "precision", "recall", "accuracy"):
                    if not 0.0 <= row[metric] <= 1.0:
                        raise StoreError(
                            f"{path}:{line_no}: {metric}={row[metric]} outside [0, 1]"
                        )
                serial = _serial_from_row(raw)
                parse_spec(serial)  # validates the seven spec fields
                rows[(raw["subject"], serial, raw["fold"])] = row
        if not rows:
            raise StoreError(f"results store has a header but no rows: {path}")
        return cls(rows, path=path)

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def subjects(self) -> tuple:
        return tuple(sorted({k[0] for k in self._rows}))

    @property
    def serials(self) -> tuple:
        return tuple(sorted({k[1] for k in self._rows}))

    def has_complete(self, subject: str, serial: str) -> bool:
        keys = [(subject, serial, str(f)) for f in range(N_FOLDS)]
        keys.append((subject, serial, "mean"))
        return all(k in self._rows for k in keys)

    def mean_f1(self, subject: str, serial: str) -> float:
        row = self._rows.get((subject, serial, "mean"))
        if row is None:
            raise StoreError(
                f"no mean row for subject={subject} spec={serial}"
            )
        return row["f1"]

    def fold_f1s(self, subject: str, serial: str) -> tuple:
        out = []
        for f in range(N_FOLDS):
            row = self._rows.get((subject, serial, str(f)))
            if row is None:
                raise StoreError(
                    f"missing fold {f} for subject={subject} spec={serial}"
                )
            out.append(row["f1"])
        return tuple(out)

    def complete_serials(self, subjects=None) -> tuple:
        """Serials complete for every listed subject (default: all present)."""
        subjects = self.subjects if subjects is None else tuple(subjects)
        return tuple(
            s for s in self.serials
            if all(self.has_complete(subj, s) for subj in subjects)
        )


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def result_rows(result) -> list:
    """Flatten a CombinationResult into store rows (15 folds + mean)."""
    fields = spec_field_strings(result.spec)
    prefix = [
        result.subject_id, fields["filtering"], fields["deriv"], fields["T"],
        fields["red"], fields["wn"], fields["scale"], fields["clf"],
    ]
    rows = []
    for fold_idx, (record, secs) in enumerate(zip(result.records, result.seconds)):
        rows.append(prefix + [
            str(fold_idx),
            _format_value(record.f1), _format_value(record.precision),
            _format_value(record.recall), _format_value(record.accuracy),
            _format_value(secs),
        ])
    rows.append(prefix + [
        "mean",
        _format_value(result.mean.f1), _format_value(result.mean.precision),
        _format_value(result.mean.recall), _format_value(result.mean.accuracy),
        _format_value(result.total_seconds),
    ])
    return rows


# ---------------------------------------------------------------------------
# Grid runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Everything run_grid needs. Exactly one data source: data_dir or
    synth_subjects."""

    out_dir: Path
    seed: int = 7
    data_dir: Path = None
    synth_subjects: int = None
    synth_noise: float = 0.01
    synth_session_effect: float = 0.05
    subjects: tuple = None
    spec_filter: str = ""
    grid: str = "coarse"
    workers: int = 1
    pca_foldwise: bool = False
    all_scalings: bool = False

    def __post_init__(self):
        if (self.data_dir is None) == (self.synth_subjects is None):
            raise ValidationError(
                "exactly one data source required: data_dir or synth_subjects"
            )
        if self.synth_subjects is not None and self.synth_subjects < 1:
            raise ValidationError("synth_subjects must be >= 1")
        if self.workers < 1:
            raise ValidationError("worker count must be >= 1")
        HyperGrid.from_name(self.grid)
        parse_spec_filter(self.spec_filter)


@dataclass(frozen=True)
class RunSummary:
    store_path: Path
    n_tasks: int
    n_skipped: int
    n_completed: int
    n_failed: int
    failures: tuple  # (subject, serial, message)
    seconds: float


# Worker context inherited through fork; set by run_grid before the pool
# spawns, read-only afterwards.
_WORKER_CONTEXT = {}


def _evaluate_to_rows(dataset, serial, seed, grid, pca_foldwise):
    spec = parse_spec(serial)
    result = evaluate_combination(
        dataset, spec, seed, grid=grid, pca_foldwise=pca_foldwise
    )
    return result_rows(result)


def _pool_task(args):
    index, subject_id, serial = args
    ctx = _WORKER_CONTEXT
    try:
        rows = _evaluate_to_rows(
            ctx["datasets"][subject_id], serial, ctx["seed"], ctx["grid"],
            ctx["pca_foldwise"],
        )
        return index, rows, None
    except GaitbenchError as exc:
        return index, None, f"{type(exc).__name__}: {exc}"
    except Exception:  # noqa: BLE001 - worker must not crash the run
        return index, None, traceback.format_exc(limit=20)


def _load_run_datasets(config: RunConfig) -> dict:
    if config.data_dir is not None:
        datasets = load_dataset(config.data_dir, subjects=config.subjects)
    else:
        datasets = synthesize_dataset(
            config.synth_subjects, config.seed,
            noise_sigma=config.synth_noise,
            session_effect=config.synth_session_effect,
        )
        if config.subjects:
            wanted = set(config.subjects)
            datasets = [d for d in datasets if d.subject_id in wanted]
            if not datasets:
                raise ValidationError(
                    f"subject filter {sorted(wanted)} matches none of the "
                    f"synthesized subjects"
                )
    return {d.subject_id: d for d in datasets}


def planned_specs(config: RunConfig) -> list:
    spec_filter = parse_spec_filter(config.spec_filter)
    specs = [
        s for s in enumerate_combinations(restrict_scaling=not config.all_scalings)
        if s.is_executable and spec_matches_filter(s, spec_filter)
    ]
    if not specs:
        raise ValidationError(
            f"spec filter {config.spec_filter!r} matches no executable "
            f"grid cell"
        )
    return specs


def run_grid(config: RunConfig, progress=None) -> RunSummary:
    """Evaluate every planned (subject, spec) task and append to the store.

    `progress`, if given, is called with one status line per finished task.
    """
    t_start = time.perf_counter()
    datasets = _load_run_datasets(config)
    specs = planned_specs(config)
    subject_ids = sorted(datasets)

    tasks = [
        (subject_id, spec.serialize())
        for subject_id in subject_ids
        for spec in specs
    ]

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store_path = out_dir / "results.csv"

    done = set()
    if store_path.exists() and store_path.stat().st_size > 0:
        try:
            existing = ResultsStore.read(store_path)
        except StoreError as exc:
            if "no rows" not in str(exc):
                raise
            existing = None  # header-only file from an aborted run
        if existing is not None:
            done = {
                (subject_id, serial)
                for subject_id, serial in tasks
                if existing.has_complete(subject_id, serial)
            }
    pending = [
        (i, subject_id, serial)
        for i, (subject_id, serial) in enumerate(tasks)
        if (subject_id, serial) not in done
    ]

    needs_filter = any(s.filtering == "auto_cutoff" for s in specs)
    needed_subjects = {p[1] for p in pending}
    for subject_id in subject_ids:
        if subject_id in needed_subjects:
            warm_caches(datasets[subject_id], include_filtered=needs_filter)

    new_file = not store_path.exists() or store_path.stat().st_size == 0
    failures = []
    n_completed = 0

    with open(store_path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new_file:
            writer.writerow(STORE_COLUMNS)
            fh.flush()

        def deliver(index, rows, error):
            nonlocal n_completed
            subject_id, serial = tasks[index]
            if error is not None:
                failures.append((subject_id, serial, error.strip()))
                if progress is not None:
                    progress(f"FAIL {subject_id} {serial}: {error.strip().splitlines()[-1]}")
                return
            writer.writerows(rows)
            fh.flush()
            n_completed += 1
            if progress is not None:
                mean_f1 = rows[-1][STORE_COLUMNS.index("f1")]
                progress(f"done {subject_id} {serial} mean_f1={mean_f1}")

        _WORKER_CONTEXT.clear()
        _WORKER_CONTEXT.update(
            datasets=datasets, seed=config.seed, grid=config.grid,
            pca_foldwise=config.pca_foldwise,
        )
        try:
            if config.workers == 1 or len(pending) <= 1:
                for index, subject_id, serial in pending:
                    idx, rows, error = _pool_task((index, subject_id, serial))
                    deliver(idx, rows, error)
            else:
                mp_ctx = multiprocessing.get_context("fork")
                buffered = {}
                next_emit = 0
                with concurrent.futures.ProcessPoolExecutor(
                    max_workers=min(config.workers, len(pending)),
                    mp_context=mp_ctx,
                ) as pool:
                    futures = [
                        pool.submit(_pool_task, p) for p in pending
                    ]
                    for fut in concurrent.futures.as_completed(futures):
                        index, rows, error = fut.result()
                        buffered[index] = (rows, error)
                        # emit in submission order so the store bytes do not
                        # depend on completion order
                        while next_emit < len(pending):
                            want = pending[next_emit][0]
                            if want not in buffered:
                                break
                            rows_e, err_e = buffered.pop(want)
                            deliver(want, rows_e, err_e)
                            next_emit += 1
        finally:
            _WORKER_CONTEXT.clear()

    return RunSummary(
        store_path=store_path,
        n_tasks=len(tasks),
        n_skipped=len(done),
        n_completed=n_completed,
        n_failed=len(failures),
        failures=tuple(failures),
        seconds=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# Aggregations
# ---------------------------------------------------------------------------

def _coerce_store(store) -> ResultsStore:
    if isinstance(store, ResultsStore):
        return store
    return ResultsStore.read(store)


def _restricted_serials() -> tuple:
    return tuple(
        s.serialize() for s in enumerate_combinations(restrict_scaling=True)
    )


def _field_of_serial(serial: str, key: str) -> str:
    return spec_field_strings(parse_spec(serial))[key]


@dataclass(frozen=True)
class MethodMean:
    step: str
    method: str
    n_specs: int
    per_subject: tuple  # ((subject, mean), ...) sorted by subject
    overall: float


def method_means(store, partial: bool = False) -> list:
    """Mean of per-spec mean F1 over every spec containing each method.

    With partial=False the full restricted 288-spec grid must be present for
    every subject in the store; partial=True averages whatever is there.
    """
    store = _coerce_store(store)
    subjects = store.subjects
    targets = _restricted_serials()
    if partial:
        targets = tuple(
            s for s in store.complete_serials(subjects) if s in set(targets)
        )
        if not targets:
            raise StoreError("store holds no complete restricted-grid spec")
    else:
        missing = [
            (subj, s) for s in targets for subj in subjects
            if not store.has_complete(subj, s)
        ]
        if missing:
            subj, serial = missing[0]
            raise StoreError(
                f"store is incomplete: {len(missing)} of "
                f"{len(targets) * len(subjects)} (subject, spec) tasks missing, "
                f"first missing subject={subj} spec={serial} "
                f"(pass partial=True to aggregate anyway)"
            )

    out = []
    for step, methods in STEP_METHODS:
        grouped = {m: [] for m in methods}
        for serial in targets:
            grouped[_field_of_serial(serial, step)].append(serial)
        for method in methods:
            serials = grouped[method]
            if not serials:
                continue
            per_subject = []
            for subj in subjects:
                values = [store.mean_f1(subj, s) for s in serials]
                per_subject.append((subj, float(np.mean(values))))
            overall = float(np.mean([v for _, v in per_subject]))
            out.append(
                MethodMean(
                    step=step, method=method, n_specs=len(serials),
                    per_subject=tuple(per_subject), overall=overall,
                )
            )
    return out


def tied_ranks(values) -> np.ndarray:
    """0-based ascending ranks; exact ties share the mean of their range."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < order.shape[0]:
        j = i
        while j + 1 < order.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j)
        i = j + 1
    return ranks


def rank_bounds(count: int, n_specs: int) -> tuple:
    """(min, max) rank score for a method appearing in `count` of n_specs
    specs: the best packing takes the top `count` ranks, the worst the
    bottom `count`."""
    low = count * (count - 1) // 2
    high = count * (2 * n_specs - count - 1) // 2
    return low, high


@dataclass(frozen=True)
class RankRow:
    step: str
    method: str
    count: int
    score: float
    pct_max: float


@dataclass(frozen=True)
class RankTable:
    n_specs: int
    total: float
    rows: tuple  # RankRow per (step, method)
    spec_ranks: tuple  # (serial, rank, mean_f1) ascending by rank


def rank_scores(store) -> RankTable:
    store = _coerce_store(store)
    subjects = store.subjects
    serials = _restricted_serials()
    for serial in serials:
        for subj in subjects:
            if not store.has_complete(subj, serial):
                raise StoreError(
                    f"rank scores need the full {len(serials)}-spec grid; "
                    f"missing subject={subj} spec={serial}"
                )

    values = np.array([
        float(np.mean([store.mean_f1(subj, s) for subj in subjects]))
        for s in serials
    ])
    ranks = tied_ranks(values)
    n = len(serials)
    total = float(n * (n - 1) // 2)

    rows = []
    for step, methods in STEP_METHODS:
        step_sum = 0.0
        for method in methods:
            member = np.array([
                _field_of_serial(s, step) == method for s in serials
            ])
            count = int(member.sum())
            score = float(ranks[member].sum())
            low, high = rank_bounds(count, n)
            pct = 100.0 * (score - low) / (high - low) if high > low else 0.0
            rows.append(RankRow(step, method, count, score, pct))
            step_sum += score
        if abs(step_sum - total) > 1e-6:
            raise StoreError(
                f"rank scores for step {step} sum to {step_sum}, "
                f"expected {total}"
            )

    order = np.argsort(ranks, kind="mergesort")
    spec_ranks = tuple(
        (serials[i], float(ranks[i]), float(values[i])) for i in order
    )
    return RankTable(n_specs=n, total=total, rows=tuple(rows),
                     spec_ranks=spec_ranks)


@dataclass(frozen=True)
class BestRow:
    rank: int
    spec: CombinationSpec
    serial: str
    mean_f1: float
    sd_f1: float
    n_subjects: int


def best_table(store, top_n: int = 30) -> list:
    """Specs with complete results for every subject, descending by
    subject-averaged mean F1; ties broken by serialization."""
    store = _coerce_store(store)
    subjects = store.subjects
    if top_n < 1:
        raise ValidationError("top_n must be >= 1")
    entries = []
    for serial in store.complete_serials(subjects):
        values = [store.mean_f1(subj, serial) for subj in subjects]
        mean = float(np.mean(values))
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        entries.append((serial, mean, sd))
    if not entries:
        raise StoreError("no spec has complete results for every subject")
    entries.sort(key=lambda e: (-e[1], e[0]))
    return [
        BestRow(rank=i + 1, spec=parse_spec(serial), serial=serial,
                mean_f1=mean, sd_f1=sd, n_subjects=len(subjects))
        for i, (serial, mean, sd) in enumerate(entries[:top_n])
    ]


@dataclass(frozen=True)
class PairwiseRow:
    step: str
    method_a: str
    method_b: str
    n_subjects: int
    t: float
    df: int
    p: float
    p_adjusted: float
    cohens_d: float  # nan when the differences have zero spread


def pairwise_tests(store, partial: bool = False) -> list:
    """Bonferroni-corrected paired t-tests between the methods of each step,
    paired over subjects' per-method means. Needs >= 2 subjects."""
    store = _coerce_store(store)
    means = method_means(store, partial=partial)
    by_step = {}
    for m in means:
        by_step.setdefault(m.step, []).append(m)

    out = []
    for step, methods in STEP_METHODS:
        entries = by_step.get(step, [])
        if len(entries) < 2:
            continue
        n_subjects = len(entries[0].per_subject)
        if n_subjects < 2:
            raise ValidationError(
                "pairwise tests need at least two subjects "
                f"(store has {n_subjects})"
            )
        pairs = [
            (a, b) for i, a in enumerate(entries) for b in entries[i + 1:]
        ]
        k = len(pairs)
        raw = []
        for a, b in pairs:
            xs = [v for _, v in a.per_subject]
            ys = [v for _, v in b.per_subject]
            t, p, df = paired_t_test(xs, ys)
            try:
                d = cohens_d_paired(xs, ys)
            except ValidationError:
                d = float("nan")
            raw.append((a.method, b.method, n_subjects, t, df, p, d))
        adjusted = bonferroni([r[5] for r in raw], k)
        for (ma, mb, ns, t, df, p, d), p_adj in zip(raw, adjusted):
            out.append(
                PairwiseRow(step=step, method_a=ma, method_b=mb,
                            n_subjects=ns, t=t, df=df, p=p,
                            p_adjusted=p_adj, cohens_d=d)
            )
    return out


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

_STEP_LABELS = {
    "filtering": "filtering",
    "deriv": "derivative",
    "T": "time points",
    "red": "reduction",
    "wn": "weight norm",
    "clf": "classifier",
}
_METHOD_LABELS = {
    ("filtering", "none"): "no", ("filtering", "auto_cutoff"): "yes",
    ("wn", "0"): "no", ("wn", "1"): "yes",
}
_STEP_COLORS = {
    "filtering": "#4878a8", "deriv": "#e49444", "T": "#5fa05a",
    "red": "#d1605e", "wn": "#857aab", "clf": "#8a6f5c",
}


def _method_label(step: str, method: str) -> str:
    return _METHOD_LABELS.get((step, method), method)


def write_fig_svg(means, path, baseline_pct: float = 16.7) -> Path:
    """Grouped bar chart of overall mean F1 (%) per method, with the random
    baseline drawn as a dashed line."""
    width, height = 940, 430
    left, right, top, bottom = 64, 16, 28, 78
    plot_w = width - left - right
    plot_h = height - top - bottom

    groups = []
    for step, _ in STEP_METHODS:
        entries = [m for m in means if m.step == step]
        if entries:
            groups.append((step, entries))
    n_bars = sum(len(e) for _, e in groups)
    n_gaps = max(len(groups) - 1, 0)
    gap_w = 26.0
    bar_w = (plot_w - n_gaps * gap_w) / max(n_bars, 1)

    def y_of(pct: float) -> float:
        return top + plot_h * (1.0 - pct / 100.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        '<g font-family="Helvetica, Arial, sans-serif">',
    ]
    for tick in range(0, 101, 20):
        y = y_of(tick)
        parts.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{width - right}" '
            f'y2="{y:.1f}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.1f}" font-size="11" '
            f'text-anchor="end" fill="#333333">{tick}</text>'
        )
    parts.append(
        f'<text x="14" y="{top + plot_h / 2:.1f}" font-size="12" '
        f'fill="#333333" transform="rotate(-90 14 {top + plot_h / 2:.1f})" '
        f'text-anchor="middle">mean F1 (%)</text>'
    )

    x = float(left)
    for step, entries in groups:
        group_start = x
        color = _STEP_COLORS.get(step, "#888888")
        for m in entries:
            pct = 100.0 * m.overall
            y = y_of(pct)
            h = y_of(0.0) - y
            parts.append(
                f'<rect x="{x + 2:.1f}" y="{y:.1f}" width="{bar_w - 4:.1f}" '
                f'height="{h:.1f}" fill="{color}"/>'
            )
            parts.append(
                f'<text x="{x + bar_w / 2:.1f}" y="{y - 4:.1f}" '
                f'font-size="10" text-anchor="middle" fill="#222222">'
                f'{pct:.1f}</text>'
            )
            parts.append(
                f'<text x="{x + bar_w / 2:.1f}" y="{y_of(0) + 14:.1f}" '
                f'font-size="10" text-anchor="middle" fill="#333333">'
                f'{_method_label(step, m.method)}</text>'
            )
            x += bar_w
        parts.append(
            f'<text x="{(group_start + x) / 2:.1f}" y="{y_of(0) + 32:.1f}" '
            f'font-size="11" font-weight="bold" text-anchor="middle" '
            f'fill="#111111">{_STEP_LABELS.get(step, step)}</text>'
        )
        x += gap_w

    yb = y_of(baseline_pct)
    parts.append(
        f'<line x1="{left}" y1="{yb:.1f}" x2="{width - right}" y2="{yb:.1f}" '
        f'stroke="#b22222" stroke-width="1.5" stroke-dasharray="6,4"/>'
    )
    parts.append(
        f'<text x="{width - right - 4}" y="{yb - 5:.1f}" font-size="10" '
        f'text-anchor="end" fill="#b22222">random baseline {baseline_pct}%</text>'
    )
    parts.append(
        f'<line x1="{left}" y1="{y_of(0):.1f}" x2="{width - right}" '
        f'y2="{y_of(0):.1f}" stroke="#333333" stroke-width="1"/>'
    )
    parts.append("</g></svg>")

    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


@dataclass(frozen=True)
class ReportResult:
    files: tuple  # (name, Path)
    messages: tuple
    best: tuple  # BestRow list for terminal display


def write_reports(store, out_dir, top_n: int = 30) -> ReportResult:
    """Emit method_means.csv, rank_table.csv, best_table.csv,
    pairwise_tests.csv and fig3.svg; partial stores get partial aggregations
    where they are well-defined and a message where they are not."""
    store = _coerce_store(store)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    messages = []

    restricted = set(_restricted_serials())
    complete = store.complete_serials(store.subjects)
    full_grid = restricted <= set(complete)

    means = method_means(store, partial=not full_grid)
    if not full_grid:
        messages.append(
            f"store covers {len(set(complete) & restricted)} of "
            f"{len(restricted)} restricted-grid specs; method means are "
            f"partial averages"
        )
    rows = []
    for m in means:
        for subj, value in m.per_subject:
            rows.append([m.step, m.method, subj, m.n_specs, repr(value)])
        rows.append([m.step, m.method, "overall", m.n_specs, repr(m.overall)])
    files.append(("method_means.csv", _write_csv(
        out_dir / "method_means.csv",
        ["step", "method", "subject", "n_specs", "mean_f1"], rows,
    )))

    if full_grid:
        table = rank_scores(store)
        files.append(("rank_table.csv", _write_csv(
            out_dir / "rank_table.csv",
            ["step", "method", "n_specs", "rank_score", "pct_max"],
            [
                [r.step, r.method, r.count, repr(r.score), repr(r.pct_max)]
                for r in table.rows
            ],
        )))
    else:
        messages.append(
            "rank table skipped: it is defined only on the complete "
            f"{len(restricted)}-spec grid (store has "
            f"{len(set(complete) & restricted)})"
        )

    best = best_table(store, top_n=top_n)
    files.append(("best_table.csv", _write_csv(
        out_dir / "best_table.csv",
        ["rank", "filtering", "deriv", "T", "red", "wn", "scale", "clf",
         "mean_f1", "sd_f1", "n_subjects"],
        [
            [b.rank] + [spec_field_strings(b.spec)[k] for k in
                        ("filtering", "deriv", "T", "red", "wn", "scale", "clf")]
            + [repr(b.mean_f1), repr(b.sd_f1), b.n_subjects]
            for b in best
        ],
    )))

    if len(store.subjects) >= 2:
        tests = pairwise_tests(store, partial=not full_grid)
        files.append(("pairwise_tests.csv", _write_csv(
            out_dir / "pairwise_tests.csv",
            ["step", "method_a", "method_b", "n_subjects", "t", "df",
             "p", "p_bonferroni", "cohens_d"],
            [
                [r.step, r.method_a, r.method_b, r.n_subjects, repr(r.t),
                 r.df, repr(r.p), repr(r.p_adjusted), repr(r.cohens_d)]
                for r in tests
            ],
        )))
    else:
        messages.append(
            "pairwise tests skipped: paired t-tests need at least two "
            "subjects"
        )

    files.append(("fig3.svg", write_fig_svg(means, out_dir / "fig3.svg")))
    return ReportResult(files=tuple(files), messages=tuple(messages),
                        best=tuple(best))


__all__ = [
    "BestRow",
    "MethodMean",
    "N_FOLDS",
    "PairwiseRow",
    "RankRow",
    "RankTable",
    "ReportResult",
    "ResultsStore",
    "RunConfig",
    "RunSummary",
    "STEP_METHODS",
    "STORE_COLUMNS",
    "best_table",
    "bonferroni",
    "cohens_d_paired",
    "method_means",
    "paired_t_test",
    "pairwise_tests",
    "planned_specs",
    "rank_bounds",
    "rank_scores",
    "result_rows",
    "run_grid",
    "tied_ranks",
    "write_fig_svg",
    "write_reports",
]
