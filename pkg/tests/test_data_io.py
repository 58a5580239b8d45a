import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdhash import data_io
from sdhash.data_io import DataFormatError


def write_pair(tmp_path, images, labels):
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    data_io.write_idx(ip, np.asarray(images, dtype=np.uint8))
    data_io.write_idx(lp, np.asarray(labels, dtype=np.uint8))
    return ip, lp


def first_image_nonzero_bytes(path):
    """Independent reader: skip the 16-byte image header, count nonzero bytes of image 0."""
    with open(path, "rb") as fh:
        head = fh.read(16)
        rows, cols = int.from_bytes(head[8:12], "big"), int.from_bytes(head[12:16], "big")
        pixels = fh.read(rows * cols)
    return sum(1 for b in pixels if b != 0)


def test_single_zero_image(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((1, 28, 28)), [7])
    X, y = data_io.load_idx(ip, lp)
    assert X.shape == (1, 784)
    assert not X.any()
    assert y.tolist() == [7]


def test_header_bytes_are_big_endian(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((2, 3, 4)), [0, 1])
    raw = ip.read_bytes()
    assert raw[:4] == bytes([0, 0, 8, 3])
    assert struct.unpack(">III", raw[4:16]) == (2, 3, 4)
    assert lp.read_bytes()[:8] == bytes([0, 0, 8, 1, 0, 0, 0, 2])


def test_scaling_and_row_major(tmp_path):
    img = np.arange(6, dtype=np.uint8).reshape(1, 2, 3) * 51
    ip, lp = write_pair(tmp_path, img, [3])
    X, _ = data_io.load_idx(ip, lp)
    np.testing.assert_allclose(X[0], np.arange(6) / 5.0)


@pytest.mark.parametrize("corrupt", ["magic", "count", "truncated", "swapped"])
def test_idx_errors(tmp_path, corrupt):
    ip, lp = write_pair(tmp_path, np.ones((3, 2, 2)), [0, 1, 2])
    if corrupt == "magic":
        raw = bytearray(ip.read_bytes())
        raw[2] = 0x0D
        ip.write_bytes(bytes(raw))
    elif corrupt == "count":
        data_io.write_idx(lp, np.array([0, 1], dtype=np.uint8))
    elif corrupt == "truncated":
        ip.write_bytes(ip.read_bytes()[:-1])
    else:
        ip, lp = lp, ip
    with pytest.raises(DataFormatError):
        data_io.load_idx(ip, lp)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_idx_roundtrip_byte_exact(tmp_path_factory, n, rows, cols, seed):
    tmp = tmp_path_factory.mktemp("rt")
    rng = np.random.default_rng(seed)
    ip, lp = write_pair(tmp, rng.integers(0, 256, (n, rows, cols)), rng.integers(0, 10, n))
    X, y = data_io.load_idx(ip, lp)
    assert np.all((X >= 0) & (X <= 1))
    ip2, lp2 = tmp / "img2.idx", tmp / "lab2.idx"
    data_io.write_idx(ip2, np.rint(X * 255).astype(np.uint8).reshape(n, rows, cols))
    data_io.write_idx(lp2, y.astype(np.uint8))
    assert ip2.read_bytes() == ip.read_bytes()
    assert lp2.read_bytes() == lp.read_bytes()


def test_csv_basic(tmp_path):
    f, l = tmp_path / "f.csv", tmp_path / "l.txt"
    f.write_text("0.5,1\n2,3.25\n-1,0\n")
    l.write_text("0\n1\n0\n")
    X, y = data_io.load_csv(f, l)
    assert X.shape == (3, 2)
    assert data_io.num_classes(y) == 2


@pytest.mark.parametrize(
    "features,labels",
    [("", "0\n"), ("1,2\n3\n", "0\n1\n"), ("1,x\n", "0\n"), ("1,2\n", "0\n1\n"), ("1,2\n", "a\n")],
    ids=["empty", "ragged", "non-numeric", "count-mismatch", "bad-label"],
)
def test_csv_errors(tmp_path, features, labels):
    f, l = tmp_path / "f.csv", tmp_path / "l.txt"
    f.write_text(features)
    l.write_text(labels)
    with pytest.raises(DataFormatError):
        data_io.load_csv(f, l)


def test_csv_class_override_checked(tmp_path):
    f, l = tmp_path / "f.csv", tmp_path / "l.txt"
    f.write_text("1\n2\n")
    l.write_text("0\n4\n")
    with pytest.raises(DataFormatError):
        data_io.load_csv(f, l, n_classes=3)


def test_one_hot():
    np.testing.assert_array_equal(data_io.one_hot([1, 0, 2]), [[0, 1, 0], [1, 0, 0], [0, 0, 1]])


def test_split_sizes_and_determinism():
    a = data_io.split_indices(70000, 1000, seed=7)
    b = data_io.split_indices(70000, 1000, seed=7)
    assert len(a[0]) == 69000 and len(a[1]) == 1000
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 300), st.data())
def test_split_partition(n, data):
    test_count = data.draw(st.integers(1, n - 1))
    seed = data.draw(st.integers(0, 2**64 - 1))
    train, test = data_io.split_indices(n, test_count, seed)
    assert len(test) == test_count
    assert not set(train) & set(test)
    assert sorted(np.concatenate([train, test])) == list(range(n))


@pytest.mark.parametrize("count", [0, 10, -1])
def test_split_range(count):
    with pytest.raises(ValueError):
        data_io.split_indices(10, count, 0)


def test_mnist_files(mnist_dir):
    X, y = data_io.load_idx(
        data_io._find(mnist_dir, "train-images-idx3-ubyte"),
        data_io._find(mnist_dir, "train-labels-idx1-ubyte"),
    )
    assert X.shape == (60000, 784)
    assert data_io.num_classes(y) == 10
    assert np.count_nonzero(X[0]) == first_image_nonzero_bytes(
        data_io._find(mnist_dir, "train-images-idx3-ubyte")
    )
    X_all, y_all = data_io.load_mnist(mnist_dir)
    assert X_all.shape == (70000, 784) and len(y_all) == 70000
