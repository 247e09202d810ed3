import numpy as np
import pytest

from proxyforge.data import SyntheticDataset, generate_dataset
from proxyforge.embedding import Minibatch, ProxyTable


def make_batch(instances, labels, queries) -> Minibatch:
    return Minibatch(np.asarray(instances, dtype=float), np.asarray(labels), np.asarray(queries))


def make_proxies(rows, class_ids=None) -> ProxyTable:
    rows = np.asarray(rows, dtype=float)
    ids = np.arange(len(rows)) if class_ids is None else class_ids
    return ProxyTable(rows, ids)


@pytest.fixture(scope="session")
def small_split():
    """A quick open-set split: 12 train classes, 4 test classes."""
    cfg = SyntheticDataset(
        num_classes=12, instances_per_class=8, num_test_classes=4, test_instances_per_class=8, seed=3
    )
    return generate_dataset(cfg)


ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert on it."""

    def record(ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}"
        ACCEPTANCE_LINES[request.node.name] = line
        print(line)
        assert ok, detail

    return record


def pytest_runtest_logreport(report):
    # a criterion that crashed before reaching its verdict still gets a line
    name = report.nodeid.split("::")[-1]
    if "test_acceptance" in report.nodeid and report.failed and name not in ACCEPTANCE_LINES:
        ACCEPTANCE_LINES[name] = f"[FAIL] {name}: error during {report.when}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES.values():
            terminalreporter.write_line(line)
