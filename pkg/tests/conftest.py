import numpy as np
import pytest

from sdhash import data_io


def make_blobs(n=200, seed=0, d=2, spread=0.3):
    """Two well-separated Gaussian clusters, labels 0/1."""
    rng = np.random.default_rng(seed)
    centers = np.array([[-3.0] * d, [3.0] * d])
    y = np.arange(n) % 2
    X = centers[y] + spread * rng.standard_normal((n, d))
    return X, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blobs():
    return make_blobs()


@pytest.fixture(scope="session")
def mnist_dir():
    directory = data_io.default_mnist_dir()
    try:
        data_io._find(directory, "train-images-idx3-ubyte")
    except FileNotFoundError:
        pytest.skip(f"MNIST IDX files not found in {directory} (set SDHASH_MNIST_DIR)")
    return directory


_criteria_key = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line, print it, and assert on it."""
    lines = request.config.stash.setdefault(_criteria_key, [])

    def check(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_criteria_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
