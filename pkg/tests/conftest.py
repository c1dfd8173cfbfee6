import importlib.util
from pathlib import Path

import numpy as np
import pytest

from swarmimpute.dataset import load_idx_images, load_idx_labels, normalize

ROOT = Path(__file__).resolve().parents[1]
MNIST_DIR = ROOT / "data" / "mnist"


def _prepare_module():
    spec = importlib.util.spec_from_file_location("prepare_mnist_subset", ROOT / "scripts" / "prepare_mnist_subset.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.fixture(scope="session")
def mnist_dir():
    prep = _prepare_module()
    if not (MNIST_DIR / prep.TEST_LABELS).exists():
        pytest.importorskip("mlxtend")
        prep.prepare(MNIST_DIR)
    return MNIST_DIR


@pytest.fixture(scope="session")
def mnist(mnist_dir):
    """(train, train_labels, test, test_labels), normalized to [0, 1]."""
    prep = _prepare_module()
    train = normalize(load_idx_images(mnist_dir / prep.TRAIN_IMAGES))
    train_labels = load_idx_labels(mnist_dir / prep.TRAIN_LABELS)
    test = normalize(load_idx_images(mnist_dir / prep.TEST_IMAGES))
    test_labels = load_idx_labels(mnist_dir / prep.TEST_LABELS)
    return train, train_labels, test, test_labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Log an acceptance verdict; the summary prints one line per criterion."""
    def _record(key, ok, detail):
        ACCEPTANCE[key] = (bool(ok), detail)
        print(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
