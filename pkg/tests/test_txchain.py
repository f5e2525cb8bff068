import numpy as np
import pytest
from hypothesis import given, strategies as st

from tfpack.sigkit import SampledWaveform, make_constellation, power
from tfpack.txchain import (CarrierPlan, CarrierTransmitter, OpticalFilterSpec, PulseSpec,
                            assemble_superchannel, dump_waveform, gaussian_response, load_waveform,
                            make_pulse, mz_modulate, mz_predistort, rrc_taps, shape_symbols)

T = 1 / 35e9


def test_pulse_shapes():
    fs = 16 / T
    nrz = make_pulse(PulseSpec("NRZ"), T, fs)
    rz = make_pulse(PulseSpec("RZ50"), T, fs)
    assert nrz.size == rz.size == 16
    assert rz.sum() == 8 and nrz.sum() == 16
    rrc = make_pulse(PulseSpec("RRC", 0.3), T, fs)
    assert np.sum(rrc**2) / fs == pytest.approx(1.0)


def test_pulse_needs_integer_oversampling():
    with pytest.raises(ValueError):
        make_pulse(PulseSpec("NRZ"), T, 7.5 / T)


def test_rrc_is_nyquist_after_matched_filter():
    sps = 16
    t = np.arange(-40 * sps, 40 * sps + 1) / sps * T
    p = rrc_taps(t, T, 0.25)
    r = np.convolve(p, p)
    c = r.size // 2
    assert np.max(np.abs(r[c + sps::sps][:10])) < 2e-3 * r[c]


def test_mz_predistortion_linearizes():
    levels = make_constellation("QAM16").pam_levels
    out = mz_modulate(mz_predistort(levels), np.zeros(4)).real
    assert np.allclose(out / out.max(), levels / levels.max(), atol=1e-12)


def test_mz_rejects_overdrive():
    with pytest.raises(ValueError):
        mz_modulate(np.array([1.2]), np.array([0.0]))


@given(st.integers(1, 6), st.floats(1e9, 1e11))
def test_gaussian_filter_half_power_point(order, bw):
    H = gaussian_response(np.array([0.0, bw / 2, -bw / 2]), OpticalFilterSpec(bw, order))
    assert H[0] == 1.0
    assert np.allclose(H[1:] ** 2, 0.5)


def test_shape_symbols_is_circular_superposition():
    a = np.array([1.0, 0, 0, -1.0])
    p = np.ones(4)
    y = shape_symbols(a, p, 4).real
    assert np.allclose(y[:2], 1) and np.allclose(y[-2:], 1)    # wrapped tail of the first pulse
    assert np.allclose(y[12:14], -1)


def test_superchannel_power_per_carrier():
    fs = 32 / T
    tx = CarrierTransmitter(PulseSpec("RZ50"), OpticalFilterSpec(0.5 / T), T, fs)
    c = make_constellation("QPSK")
    rng = np.random.default_rng(0)
    wf = [tx.carrier_waveform(*rng.choice(c.points, (2, 256))) for _ in range(3)]
    plan = CarrierPlan(3, 0.5 / T, T, 1e-3)
    w = assemble_superchannel(wf, plan)
    assert power(w) == pytest.approx(3e-3, rel=0.05)


def test_superchannel_rejects_undersampling():
    fs = 8 / T
    w = SampledWaveform(np.ones(64), np.ones(64), fs)
    with pytest.raises(ValueError):
        assemble_superchannel([w] * 9, CarrierPlan(9, 1 / T, T, 1e-3))


def test_dump_roundtrip(tmp_path):
    w = SampledWaveform(np.arange(5) + 1j, np.zeros(5), 1e9)
    dump_waveform(tmp_path / "w.bin", w)
    fs, arr = load_waveform(tmp_path / "w.bin")
    assert fs == 1e9 and np.allclose(arr[0], w.samples_x)
    raw = (tmp_path / "w.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_waveform(tmp_path / "t.bin")
