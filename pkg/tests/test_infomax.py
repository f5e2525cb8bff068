import numpy as np
import pytest
from hypothesis import given, strategies as st

from tfpack.infomax import (IRResult, SweepGrid, delta_vs_reference, estimate_ir, optimize_fb,
                            pam_mutual_information, snr_calibrate, spectral_efficiency)
from tfpack.isidet import UngerboeckModel, channel_shorten
from tfpack.sigkit import make_constellation

from _oracles import awgn_mi_monte_carlo


def _awgn(c, snr_db, K, seed, npol=1):
    r = np.random.default_rng(seed)
    N0 = 10 ** (-snr_db / 10) / 2
    x = r.choice(c.points, (npol, K))
    y = x + np.sqrt(N0) * (r.standard_normal(x.shape) + 1j * r.standard_normal(x.shape))
    return x, y, channel_shorten(UngerboeckModel(np.array([1.0]), N0), 0)


def test_gauss_hermite_matches_monte_carlo():
    c = make_constellation("QAM16")
    snr = 8.0
    sigma2 = 10 ** (-snr / 10) / 2
    gh = 2 * pam_mutual_information(c.pam_levels, sigma2)
    mc = awgn_mi_monte_carlo(c, snr, 200_000, 0)
    assert gh == pytest.approx(mc, rel=5e-3)


def test_estimate_ir_awgn():
    c = make_constellation("QPSK")
    x, y, s = _awgn(c, 3.0, 40_000, 1, npol=2)
    res = estimate_ir(x, y, s, c, 4000, F=1.0, T=1.0)
    ref = 2 * pam_mutual_information(c.pam_levels, 10 ** (-0.3) / 2)
    assert res.ir == pytest.approx(ref, rel=0.02)
    assert res.blocks == 10 and len(res.ir_pol) == 2
    assert res.se == pytest.approx(sum(res.ir_pol))
    assert not res.flagged


def test_estimate_ir_input_checks():
    c = make_constellation("QPSK")
    x, y, s = _awgn(c, 3.0, 2000, 2)
    with pytest.raises(ValueError):
        estimate_ir(x, y, s, c, 500)
    with pytest.raises(ValueError):
        estimate_ir(x, y[:, :1000], s, c, 1000)
    with pytest.raises(ValueError):
        estimate_ir(x, y, s, c, 5000)


def test_ci_flag():
    c = make_constellation("QPSK")
    x, y, s = _awgn(c, -5.0, 3000, 3)
    assert estimate_ir(x, y, s, c, 1000, ci_target=1e-6).flagged


@given(st.floats(0, 4), st.floats(0, 4), st.floats(0.1, 2), st.floats(1e-12, 1e-9))
def test_spectral_efficiency(ix, iy, F, T):
    assert spectral_efficiency(ix, iy, F / T, T) == pytest.approx((ix + iy) / F)


def test_spectral_efficiency_rejects_nonpositive():
    with pytest.raises(ValueError):
        spectral_efficiency(1, 1, 0, 1)


def test_snr_calibrate():
    assert snr_calibrate(2.0, 0.5, 1.0) == pytest.approx(10 * np.log10(2.0))
    with pytest.raises(ValueError):
        snr_calibrate(1.0, 0.0, 1.0)


def test_delta():
    assert delta_vs_reference(7.5, 6.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        delta_vs_reference(1.0, 0.0)


def test_sweep_grid_modes():
    g = SweepGrid([0.5, 0.6], [0.4, 0.5], [0.0])
    pts = g.points()
    assert len(pts) == 4 and all(b == br for _, b, br in pts)
    n = SweepGrid([1.0], [1.1], [0.0], mode="NyquistWDM", B_R_values=[0.9, 1.0])
    assert n.points() == [(1.0, 1.1, 0.9), (1.0, 1.1, 1.0)]
    t = SweepGrid([0], [1.0, 1.2], [0.0], mode="NyquistWDM", tie_spacing=True)
    assert [p[0] for p in t.points()] == [1.0, 1.2]
    with pytest.raises(ValueError):
        SweepGrid([0.9], [1.0], [0.0], mode="NyquistWDM")
    with pytest.raises(ValueError):
        SweepGrid([], [1.0], [0.0])


def test_optimize_fb_picks_maximum_and_records_failures():
    def scenario(F, B, B_R, p):
        if F == 0.6 and p == 2.0:
            raise RuntimeError("diverged")
        se = 8 - (F - 0.5) ** 2 - (B - 0.4) ** 2 - 0.1 * (p - 1) ** 2
        return IRResult(1.0, (1.0, 1.0), se, 0.01, 10)

    g = SweepGrid([0.4, 0.5, 0.6], [0.3, 0.4], [0.0, 1.0, 2.0])
    opt = optimize_fb(g, scenario)
    assert opt.best["F"] == 0.5 and opt.best["B"] == 0.4 and opt.best["power"] == 1.0
    assert opt.eta_max == pytest.approx(8.0)
    assert len(opt.failures) == 2
    assert set(opt.per_power) == {0.0, 1.0, 2.0}
