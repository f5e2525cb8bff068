import numpy as np
import pytest

from tfpack.rxfront import (EqualizerDivergence, FfeState, RxConfig, carrier_offsets,
                            duobinary_shape, ffe_equalize, front_end, gvd_compensate, mf_target)
from tfpack.sigkit import SampledWaveform, make_constellation

T = 1 / 32e9


def _two_sps_channel(x, rot=0.4, seed=0, sigma=0.0):
    """Mild ISI, a polarization rotation and optional noise at 2 samples/symbol."""
    K = x.shape[1]
    u = np.zeros((2, 2 * K), complex)
    u[:, ::2] = x + 0.3 * np.roll(x, 1, axis=1)
    u[:, 1::2] = 0.5 * (x + np.roll(x, -1, axis=1))
    R = np.array([[np.cos(rot), -np.sin(rot)], [np.sin(rot), np.cos(rot)]])
    u = R @ u
    if sigma:
        r = np.random.default_rng(seed)
        u = u + sigma * (r.standard_normal(u.shape) + 1j * r.standard_normal(u.shape))
    return SampledWaveform(u[0], u[1], 2 / T)


def test_ffe_learns_rotation_and_isi():
    c = make_constellation("QPSK")
    r = np.random.default_rng(0)
    x = r.choice(c.points, (2, 8000))
    w = _two_sps_channel(x, sigma=0.01)
    st = FfeState(15, 5e-3)
    y = ffe_equalize(w, st, x[:, :4000], train_passes=2)
    assert st.mode == "frozen"
    mse = np.mean(np.abs(y[:, 4000:] - x[:, 4000:]) ** 2)
    assert mse < 5e-3


def test_ffe_decision_directed_mode():
    c = make_constellation("QPSK")
    x = np.random.default_rng(1).choice(c.points, (2, 4000))
    st = FfeState(15, 5e-3)
    ffe_equalize(_two_sps_channel(x), st, x[:, :2000], dd_reference=x)
    assert st.mode == "decision-directed"


def test_ffe_state_validation():
    with pytest.raises(ValueError):
        FfeState(4)
    with pytest.raises(ValueError):
        FfeState(5, mu=0)


def test_ffe_divergence_is_reported():
    c = make_constellation("QPSK")
    x = np.random.default_rng(2).choice(c.points, (2, 2000))
    with pytest.raises(EqualizerDivergence):
        ffe_equalize(_two_sps_channel(x), FfeState(15, 50.0), x[:, :1000])


def test_ffe_training_longer_than_block():
    x = np.ones((2, 10), complex)
    with pytest.raises(ValueError):
        ffe_equalize(_two_sps_channel(x), FfeState(3), np.ones((2, 11)))


def test_mf_target_matches_convolution():
    x = np.random.default_rng(3).standard_normal(50)
    g = np.array([0.2, 1.0, 0.2])
    ref = g[1] * x + g[0] * (np.roll(x, 1) + np.roll(x, -1))
    assert np.allclose(mf_target(x, g), ref)


def test_duobinary_impulse():
    d = np.zeros(8)
    d[3] = 1
    assert np.allclose(duobinary_shape(d), [0, 0, 0, 0.5, 0.5, 0, 0, 0])


def test_front_end_selects_carrier_and_resamples():
    fs, n = 16 / T, 16 * 512
    t = np.arange(n) / fs
    df = fs / n
    f1 = np.round(1 / T / df) * df
    tone = np.exp(2j * np.pi * f1 * t) + 0.5            # carrier +1 and a DC (carrier 0) term
    w = SampledWaveform(tone, np.zeros(n, complex), fs)
    out = front_end(w, RxConfig(0.6 / T, T, 1 / T, carrier_offset=1, n_carriers=3))
    assert out.n == 2 * 512
    assert np.allclose(np.abs(out.samples_x), 1.0, atol=1e-6)
    with pytest.raises(ValueError):
        front_end(w, RxConfig(0.6 / T, T, 1 / T, carrier_offset=2, n_carriers=3))
    assert carrier_offsets(4).tolist() == [-2, -1, 0, 1]


def test_gvd_compensation_is_exact_inverse():
    r = np.random.default_rng(4)
    e = r.standard_normal(256) + 1j * r.standard_normal(256)
    w = SampledWaveform(e, e, 2 / T, center_freq_offset=1e10)
    b2L = -2e-23
    back = gvd_compensate(gvd_compensate(w, -b2L), b2L)
    assert np.allclose(back.samples_x, e)
