import numpy as np
import pytest
from hypothesis import given, strategies as st

from tfpack.sigkit import (FORMATS, SampledWaveform, bits_to_symbols, gray_code, inverse_gray_code,
                           make_constellation, make_frame, make_rng, pam_positions, power,
                           random_bits, split_iq, symbols_to_bits)


@pytest.mark.parametrize("fmt", sorted(FORMATS))
def test_unit_energy_and_size(fmt):
    c = make_constellation(fmt)
    assert c.M == FORMATS[fmt]
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert c.P ** 2 == c.M


def test_qpsk_points():
    c = make_constellation("QPSK")
    assert np.allclose(sorted(c.pam_levels), [-1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_unknown_format():
    with pytest.raises(ValueError):
        make_constellation("QAM32")


@pytest.mark.parametrize("fmt", ["QAM16", "QAM64", "QAM256"])
def test_gray_neighbours_differ_in_one_bit(fmt):
    c = make_constellation(fmt)
    lab = c.pam_labels()
    assert np.all(np.sum(lab[1:] != lab[:-1], axis=1) == 1)


@given(st.integers(0, 2**20))
def test_gray_roundtrip(n):
    assert int(inverse_gray_code(gray_code(n))) == n


@given(st.sampled_from(sorted(FORMATS)), st.integers(1, 40), st.integers(0, 2**31))
def test_bits_symbols_roundtrip(fmt, k, seed):
    c = make_constellation(fmt)
    bits = random_bits(k * c.bits_per_symbol, make_rng(seed))
    idx = bits_to_symbols(bits, c)
    assert np.array_equal(symbols_to_bits(idx, c), bits)


def test_bits_not_multiple():
    with pytest.raises(ValueError):
        bits_to_symbols(np.zeros(3, np.uint8), make_constellation("QPSK"))


def test_split_iq_rejects_off_grid():
    c = make_constellation("QAM16")
    with pytest.raises(ValueError):
        split_iq(np.array([0.1 + 0.1j]), c)
    i, q = split_iq(c.points, c)
    assert np.array_equal(pam_positions(i, c), np.repeat(np.arange(4), 4))


def test_rng_streams_reproducible_and_distinct():
    a = make_rng(5, 1).standard_normal(4)
    assert np.array_equal(a, make_rng(5, 1).standard_normal(4))
    assert not np.array_equal(a, make_rng(5, 2).standard_normal(4))


def test_frame_uniform_and_deterministic():
    c = make_constellation("QAM16")
    f = make_frame(20_000, 2, c, seed=3, training_len=100)
    assert f.symbols.shape == (20_000, 2, 2)
    counts = np.bincount(f.symbols.ravel(), minlength=16) / f.symbols.size
    assert np.allclose(counts, 1 / 16, atol=4e-3)
    assert np.array_equal(f.symbols, make_frame(20_000, 2, c, seed=3, training_len=100).symbols)
    with pytest.raises(ValueError):
        make_frame(10, 1, c, 0, training_len=11)


def test_waveform_power():
    w = SampledWaveform(np.ones(8), 1j * np.ones(8), 1e9)
    assert power(w) == pytest.approx(2.0)
