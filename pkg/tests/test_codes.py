import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdhash.codes import CodeMatrix, pack_codes, sign_pm1, unpack_codes


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 256), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_pack_roundtrip(n_bits, n, seed):
    codes = np.where(np.random.default_rng(seed).random((n, n_bits)) < 0.5, -1, 1)
    packed = pack_codes(codes)
    assert packed.shape == (n, (n_bits + 7) // 8)
    np.testing.assert_array_equal(unpack_codes(packed, n_bits), codes)
    spare = 8 * packed.shape[1] - n_bits
    if spare:
        assert not np.any(packed[:, -1] >> (8 - spare))


def test_bit_layout_little_endian():
    # bit 0 -> LSB of byte 0, bit 9 -> bit 1 of byte 1
    code = -np.ones((1, 12), dtype=int)
    code[0, 0] = 1
    code[0, 9] = 1
    np.testing.assert_array_equal(pack_codes(code), [[0b00000001, 0b00000010]])


def test_sign_zero_is_plus_one():
    np.testing.assert_array_equal(sign_pm1([0.3, -0.2, 0.0, -0.0]), [1, -1, 1, 1])


def test_codematrix_rejects_dirty_padding():
    with pytest.raises(ValueError):
        CodeMatrix(np.array([[0xFF]], dtype=np.uint8), 3)


def test_pack_rejects_non_binary():
    with pytest.raises(ValueError):
        pack_codes([[1, 0, -1]])
