import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gaitbench.ingest import synthesize_dataset

# numba-compiled paths can pay a one-off JIT cost inside a property test;
# wall-clock deadlines would turn that into flaky failures.
settings.register_profile(
    "gaitbench",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("gaitbench")


@pytest.fixture(scope="session")
def dataset():
    """One low-noise synthetic subject with clear session structure."""
    return synthesize_dataset(1, 11, noise_sigma=2e-4, session_effect=0.12)[0]


@pytest.fixture(scope="session")
def noisy_dataset():
    """Default-noise subject; used where realistic jitter matters."""
    return synthesize_dataset(1, 3)[0]


def make_clusters(n_classes=6, per_class=15, n_features=8, spread=0.05, seed=0):
    """Well-separated Gaussian blobs; the standard separable substrate."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_classes, n_features)) * 3.0
    X = np.concatenate(
        [centers[c] + spread * rng.normal(size=(per_class, n_features))
         for c in range(n_classes)]
    )
    y = np.repeat(np.arange(n_classes), per_class)
    return X, y


# ---------------------------------------------------------------------------
# Acceptance reporting: one line per criterion at the end of the run.
# ---------------------------------------------------------------------------

_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module is None or item.module.__name__ != "test_acceptance":
        return
    label = getattr(item.module, "CRITERIA", {}).get(item.originalname)
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = (
            "PASS" if report.passed
            else "SKIP" if report.skipped
            else "FAIL"
        )
        notes = [v for k, v in item.user_properties if k == "note"]
        _ACCEPTANCE.append((label, status, "; ".join(notes)))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, status, note in sorted(_ACCEPTANCE):
        line = f"{label}: {status}"
        if note:
            line += f"  [{note}]"
        tr.write_line(line)
