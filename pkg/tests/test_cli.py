"""End-to-end command-line tests; main() is driven in process so exit codes
and printed output can be asserted directly."""

import csv
import hashlib
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gaitbench.cli import (EXIT_DATA, EXIT_OK, EXIT_RUN_FAILURES, EXIT_STORE,
                           EXIT_USAGE, main)
from gaitbench.experiment import STORE_COLUMNS, ResultsStore
from gaitbench.model import enumerate_combinations, parse_spec, spec_field_strings

CHEAP_FILTER = "filtering=none;deriv=grf;T=11;red=tc;wn=0;clf=svm"
SYNTH_ARGS = ["--subjects", "1", "--seed", "5",
              "--noise", "0.0002", "--session-effect", "0.12"]


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def fabricate_store(path, f1_of, subjects=("S01",)):
    """Write a results.csv where f1_of(serial) gives every metric value."""
    serials = [s.serialize() for s in enumerate_combinations(restrict_scaling=True)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STORE_COLUMNS)
        for subject in subjects:
            for serial in serials:
                fields = spec_field_strings(parse_spec(serial))
                prefix = [subject] + [
                    fields[k]
                    for k in ("filtering", "deriv", "T", "red", "wn", "scale", "clf")
                ]
                value = repr(float(f1_of(serial)))
                for fold in [str(f) for f in range(15)] + ["mean"]:
                    writer.writerow(prefix + [fold] + [value] * 4 + ["0.5"])
    return path


def tree_digest(root):
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            digest.update(path.name.encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def corrupt_trial_to_single_hump(path):
    """Replace a trial's vertical channel with one broad hump so two-peak
    extraction has nothing to find while the stance threshold still holds."""
    rows = path.read_text().splitlines()
    n = len(rows) - 1
    out = [rows[0]]
    for i, line in enumerate(rows[1:]):
        t_ms, fx, fy, _ = line.split(",")
        hump = float(700.0 * np.sin(np.pi * i / (n - 1)) + 30.0)
        out.append(f"{t_ms},{fx},{fy},{hump!r}")
    path.write_text("\n".join(out) + "\n")


class TestSynth:
    def test_writes_canonical_layout(self, tmp_path, capsys):
        out = tmp_path / "data"
        code, stdout, _ = run_cli(["synth", "--out", str(out)] + SYNTH_ARGS, capsys)
        assert code == EXIT_OK
        assert "wrote 1 subjects, 90 trials (180 files)" in stdout
        assert (out / "meta.csv").read_text().splitlines()[0] == \
            "subject,session,body_mass_kg"
        files = sorted((out / "trials").glob("*.csv"))
        assert len(files) == 180
        assert files[0].name == "S01_1_10_L.csv"  # lexicographic listing
        header = files[0].read_text().splitlines()[0]
        assert header == "t_ms,fx,fy,fz"

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        digests = []
        for name in ("a", "b"):
            out = tmp_path / name
            code, _, _ = run_cli(["synth", "--out", str(out)] + SYNTH_ARGS, capsys)
            assert code == EXIT_OK
            digests.append(tree_digest(out))
        assert digests[0] == digests[1]
        out = tmp_path / "c"
        args = ["synth", "--out", str(out), "--subjects", "1", "--seed", "6",
                "--noise", "0.0002", "--session-effect", "0.12"]
        assert run_cli(args, capsys)[0] == EXIT_OK
        assert tree_digest(out) != digests[0]

    def test_rejects_zero_subjects(self, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["synth", "--out", str(tmp_path / "d"), "--subjects", "0"], capsys
        )
        assert code == EXIT_DATA
        assert "error:" in stderr


class TestRun:
    def test_smoke_and_resume(self, tmp_path, capsys):
        out = tmp_path / "run"
        argv = ["run", "--synth-subjects", "1", "--seed", "5",
                "--out", str(out), "--filter", CHEAP_FILTER]
        code, stdout, _ = run_cli(argv, capsys)
        assert code == EXIT_OK
        assert "1 tasks: 0 already complete, 1 computed, 0 failed" in stdout
        assert "done S01" in stdout
        store_path = out / "results.csv"
        assert len(store_path.read_text().splitlines()) == 17

        code, stdout, _ = run_cli(argv, capsys)
        assert code == EXIT_OK
        assert "0 new tasks" in stdout
        assert "1 already complete, 0 computed" in stdout

    def test_quiet_suppresses_progress(self, tmp_path, capsys):
        out = tmp_path / "run"
        argv = ["run", "--synth-subjects", "1", "--seed", "5", "--quiet",
                "--out", str(out), "--filter", CHEAP_FILTER]
        code, stdout, _ = run_cli(argv, capsys)
        assert code == EXIT_OK
        assert "done S01" not in stdout

    def test_missing_out_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--synth-subjects", "1"])
        assert exc.value.code == EXIT_USAGE

    def test_bad_filter_exits_data(self, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["run", "--synth-subjects", "1", "--out", str(tmp_path / "r"),
             "--filter", "clf~svm"], capsys,
        )
        assert code == EXIT_DATA
        assert "error:" in stderr

    def test_workers_env_validated(self, tmp_path, capsys, monkeypatch):
        for raw in ("abc", "0"):
            monkeypatch.setenv("GAITBENCH_WORKERS", raw)
            code, _, stderr = run_cli(
                ["run", "--synth-subjects", "1", "--out", str(tmp_path / "r"),
                 "--filter", CHEAP_FILTER], capsys,
            )
            assert code == EXIT_DATA
            assert "GAITBENCH_WORKERS" in stderr

    def test_task_failures_exit_4(self, tmp_path, capsys):
        data = tmp_path / "data"
        code, _, _ = run_cli(["synth", "--out", str(data)] + SYNTH_ARGS, capsys)
        assert code == EXIT_OK
        corrupt_trial_to_single_hump(data / "trials" / "S01_1_1_L.csv")

        out = tmp_path / "run"
        argv = ["run", "--data-dir", str(data), "--seed", "5", "--quiet",
                "--out", str(out),
                "--filter", "filtering=none;deriv=grf;T=11;red=tc,td;wn=0;clf=svm"]
        code, stdout, stderr = run_cli(argv, capsys)
        assert code == EXIT_RUN_FAILURES
        assert "1 failed" in stdout
        assert "FAILED subject=S01" in stderr
        assert "red=td" in stderr
        store = ResultsStore.read(out / "results.csv")
        assert all("red=td" not in s for s in store.serials)


class TestReport:
    def test_full_store_report(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        store_path = fabricate_store(
            tmp_path / "results.csv", lambda serial: rng.uniform(0.2, 0.95)
        )
        out = tmp_path / "report"
        code, stdout, _ = run_cli(
            ["report", "--results", str(store_path), "--out", str(out)], capsys
        )
        assert code == EXIT_OK
        for name in ("method_means.csv", "rank_table.csv", "best_table.csv",
                     "fig3.svg"):
            assert (out / name).is_file()
            assert f"wrote {out / name}" in stdout
        assert "pairwise tests skipped" in stdout
        assert "top combinations by mean F1:" in stdout
        table_lines = stdout.split("top combinations by mean F1:")[1].strip()
        assert len(table_lines.splitlines()) == 1 + 10  # header + ten rows

    def test_top_flag_truncates_best_table(self, tmp_path, capsys):
        store_path = fabricate_store(tmp_path / "results.csv", lambda s: 0.5)
        out = tmp_path / "report"
        code, _, _ = run_cli(
            ["report", "--results", str(store_path), "--out", str(out),
             "--top", "3"], capsys,
        )
        assert code == EXIT_OK
        with open(out / "best_table.csv") as fh:
            assert len(list(csv.DictReader(fh))) == 3

    def test_malformed_store_exits_5(self, tmp_path, capsys):
        bad = tmp_path / "results.csv"
        bad.write_text("subject,f1\nS01,0.5\n")
        code, _, stderr = run_cli(
            ["report", "--results", str(bad), "--out", str(tmp_path / "r")],
            capsys,
        )
        assert code == EXIT_STORE
        assert "error:" in stderr

    def test_missing_store_exits_5(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["report", "--results", str(tmp_path / "absent.csv"),
             "--out", str(tmp_path / "r")], capsys,
        )
        assert code == EXIT_STORE

    def test_bad_top_exits_data(self, tmp_path, capsys):
        store_path = fabricate_store(tmp_path / "results.csv", lambda s: 0.5)
        code, _, _ = run_cli(
            ["report", "--results", str(store_path),
             "--out", str(tmp_path / "r"), "--top", "0"], capsys,
        )
        assert code == EXIT_DATA


class TestPreprocess:
    def test_stdout_matrix(self, capsys):
        spec = "filtering=none;deriv=grf;T=11;red=tc;wn=0;scale=z_at_mm_at;clf=svm"
        code, stdout, stderr = run_cli(
            ["preprocess", "--synth-subjects", "1", "--seed", "5",
             "--spec", spec], capsys,
        )
        assert code == EXIT_OK
        lines = stdout.splitlines()
        assert lines[0].split(",")[:2] == ["trial", "session"]
        assert lines[0].split(",")[-1] == "f0065"  # 11 points x 3 channels x 2 feet
        assert len(lines) == 1 + 90
        sessions = {int(line.split(",")[1]) for line in lines[1:]}
        assert sessions == set(range(1, 7))
        assert "90 trials x 66 features (tc reduction)" in stderr

    def test_out_file_and_scalar_reduction(self, tmp_path, capsys):
        out = tmp_path / "features.csv"
        spec = "filtering=none;deriv=grf;T=101;red=td;wn=0;scale=z_at_mm_at;clf=svm"
        code, _, stderr = run_cli(
            ["preprocess", "--synth-subjects", "1", "--seed", "5",
             "--spec", spec, "--out", str(out)], capsys,
        )
        assert code == EXIT_OK
        header = out.read_text().splitlines()[0]
        assert header.split(",")[-1] == "f0027"
        assert "28 features (td reduction)" in stderr

    def test_bad_spec_exits_data(self, capsys):
        code, _, stderr = run_cli(
            ["preprocess", "--synth-subjects", "1", "--spec", "red=tc"], capsys
        )
        assert code == EXIT_DATA
        assert "error:" in stderr

    def test_unknown_subject_exits_data(self, capsys):
        spec = "filtering=none;deriv=grf;T=11;red=tc;wn=0;scale=z_at_mm_at;clf=svm"
        code, _, _ = run_cli(
            ["preprocess", "--synth-subjects", "1", "--subject", "S99",
             "--spec", spec], capsys,
        )
        assert code == EXIT_DATA


class TestConsoleScript:
    def test_help(self):
        proc = subprocess.run(
            ["gaitbench", "--help"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        for name in ("synth", "run", "report", "preprocess"):
            assert name in proc.stdout

    def test_no_subcommand_is_usage_error(self):
        proc = subprocess.run(
            ["gaitbench"], capture_output=True, text=True
        )
        assert proc.returncode == EXIT_USAGE

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "gaitbench", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
