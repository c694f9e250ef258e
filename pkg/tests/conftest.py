import time
from pathlib import Path

import numpy as np
import pytest

from mathrel.data import SplitSpec, generate_synthetic, split
from mathrel.model import TrainConfig, train

DATA = Path(__file__).parent / "data"

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

DESK_EPOCHS = 10


@pytest.fixture(scope="session")
def corpus7():
    return generate_synthetic(3284, seed=7)


@pytest.fixture(scope="session")
def corpus7_split(corpus7):
    return split(corpus7, SplitSpec(0.8, 0))


@pytest.fixture(scope="session")
def desk_run(corpus7_split):
    """Desk-config model trained once per session on the seed-7 corpus."""
    tr, te = corpus7_split
    t0 = time.perf_counter()
    model, history = train(tr, te, train_config=TrainConfig(epochs=DESK_EPOCHS, seed=0))
    return model, history, time.perf_counter() - t0


@pytest.fixture(scope="session")
def desk_model(desk_run):
    return desk_run[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def report(capsys):
    """Record and print one acceptance line."""

    def _report(number: int, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {detail}"
        ACCEPTANCE[number] = (passed, line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number][1])
    missing = [n for n in range(1, 12) if n not in ACCEPTANCE]
    if missing:
        terminalreporter.write_line(f"not run: {', '.join(map(str, missing))}")
