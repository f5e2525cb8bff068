import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import constants

from tfpack.fiberlink import (MANAKOV, TABLE1_SPANS_KM, FiberSpan, SsfmControl, amplify,
                              ase_psd, backpropagate, beta2, propagate_link, propagate_span,
                              step_schedule, table1_link, uniform_link, with_gamma)
from tfpack.rxfront import gvd_compensate
from tfpack.sigkit import SampledWaveform


def _noise_like(n, fs, seed=0, p=1e-3):
    r = np.random.default_rng(seed)
    e = np.sqrt(p / 4) * (r.standard_normal((2, n)) + 1j * r.standard_normal((2, n)))
    return SampledWaveform(e[0], e[1], fs)


def test_table1_spans():
    link = table1_link()
    assert len(link.spans) == 15
    assert TABLE1_SPANS_KM[0] == 70.8 and TABLE1_SPANS_KM[-1] == 99.4
    assert link.noise_figure == 6.0
    assert link.length == pytest.approx(sum(TABLE1_SPANS_KM))


def test_noise_figure_floor():
    with pytest.raises(ValueError):
        uniform_link(2, noise_figure=2.5)


def test_beta2_standard_fiber():
    # D = 17 ps/nm/km at 1550 nm is about -21.7 ps^2/km
    assert beta2(17.0) * 1e24 == pytest.approx(-21.68, abs=0.05)


@given(st.floats(1, 120), st.floats(1e-5, 0.1), st.floats(0.01, 5))
def test_step_schedule_covers_span_and_bounds_phase(L, p, step):
    span = FiberSpan(L)
    ctrl = SsfmControl(max_step=step, max_nl_phase=1e-2)
    h = step_schedule(span, p, ctrl)
    assert h.sum() == pytest.approx(L, abs=1e-9)
    z = np.concatenate([[0], np.cumsum(h)[:-1]])
    phase = MANAKOV * span.gamma * p * np.exp(-span.alpha * z) * h
    assert np.all(h <= step + 1e-9)
    assert np.all(phase[:-1] <= 1e-2 * (1 + 1e-9))


def test_ase_psd_formula():
    nu = constants.c / 1550e-9
    assert ase_psd(20, 6, nu) == pytest.approx(99 * constants.h * nu * 10**0.6 / 2)


def test_amplifier_deterministic_given_seed():
    w = _noise_like(64, 1e11)
    a = amplify(w, 10, 5, seed=3, stream=7)
    b = amplify(w, 10, 5, seed=3, stream=7)
    assert np.array_equal(a.samples_x, b.samples_x)
    with pytest.raises(ValueError):
        amplify(w, -1, 5, seed=0)


def test_linear_span_is_allpass_times_loss():
    w = _noise_like(1024, 2e11)
    span = FiberSpan(50.0, gamma=0.0)
    out = propagate_span(w, span)
    loss = 10 ** (-span.loss_db / 10)
    assert np.sum(np.abs(out.fields) ** 2) == pytest.approx(loss * np.sum(np.abs(w.fields) ** 2), rel=1e-10)


def test_gvd_compensation_inverts_linear_link():
    w = _noise_like(2048, 2e11, seed=1)
    link = uniform_link(2, 80.0, gamma=0.0)
    out, n0 = propagate_link(w, link, ase=False)
    back = gvd_compensate(out, link)
    nmse = np.sum(np.abs(back.fields - w.fields) ** 2) / np.sum(np.abs(w.fields) ** 2)
    assert nmse < 1e-20
    assert n0 == pytest.approx(2 * ase_psd(0.23 * 80, 5.0, link.frequency))


def test_backpropagation_inverts_single_span():
    w = _noise_like(1024, 2e11, seed=2, p=5e-3)
    link = uniform_link(1, 60.0)
    out, _ = propagate_link(w, link, ase=False)
    back = backpropagate(out, link)
    nmse = np.sum(np.abs(back.fields - w.fields) ** 2) / np.sum(np.abs(w.fields) ** 2)
    assert nmse < 1e-20


def test_with_gamma():
    link = with_gamma(table1_link(), 0.0)
    assert all(s.gamma == 0 for s in link.spans)


def test_nonfinite_input_rejected():
    w = SampledWaveform(np.array([np.nan, 0j]), np.zeros(2, complex), 1e9)
    with pytest.raises(Exception):
        propagate_span(w, FiberSpan(1.0))
