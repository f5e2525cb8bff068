"""
Per-carrier coherent receiver: carrier selection and optical filtering,
static GVD compensation, the 2x2 adaptive FFE, duobinary post-filter.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from ._kernels import ffe_butterfly
from .fiberlink import LinkSpec
from .sigkit import SampledWaveform
from .txchain import OpticalFilterSpec, gaussian_response, dump_waveform


@dataclass(frozen=True)
class RxConfig:
    bandwidth: float                 # receive optical 3-dB bandwidth, Hz
    symbol_time: float
    spacing: float
    carrier_offset: int = 0          # carrier index relative to the centre carrier
    n_carriers: int = 1
    samples_per_symbol: int = 2
    filter_order: int = 4

    def __post_init__(self):
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be >= 2")

    @property
    def filter(self) -> OpticalFilterSpec:
        return OpticalFilterSpec(self.bandwidth, self.filter_order)


def carrier_offsets(n_carriers: int) -> np.ndarray:
    return np.arange(n_carriers) - n_carriers // 2


def front_end(w: SampledWaveform, cfg: RxConfig, filt: OpticalFilterSpec | None = None) -> SampledWaveform:
    """Select one carrier, filter it optically and resample to the FFE rate.

    Ideal local oscillator: the carrier is shifted to baseband with the same
    bin-snapped frequency used at the transmitter.
    """
    offsets = carrier_offsets(cfg.n_carriers)
    if cfg.carrier_offset not in offsets:
        raise ValueError(f"carrier offset {cfg.carrier_offset} not in plan {offsets.tolist()}")
    filt = filt or cfg.filter
    fs = w.sample_rate
    n = w.n
    df = fs / n
    fc = np.round(cfg.carrier_offset * cfg.spacing / df) * df
    f = fft.fftfreq(n, 1 / fs)
    # downconversion is a circular shift of the spectrum by an integer number of bins
    shift = int(round(fc / df))
    H = gaussian_response(f, filt)
    K = int(round(n / (fs * cfg.symbol_time)))
    n_out = K * cfg.samples_per_symbol
    outs = []
    for e in (w.samples_x, w.samples_y):
        spec = np.roll(fft.fft(e), -shift) * H
        outs.append(_resample_spectrum(spec, n_out) * (n_out / n))
    return SampledWaveform(outs[0], outs[1], cfg.samples_per_symbol / cfg.symbol_time, w.t0,
                           w.center_freq_offset + fc, dict(w.meta))


def _resample_spectrum(spec: np.ndarray, n_out: int) -> np.ndarray:
    """Periodic band-limited resampling from a full-length spectrum."""
    n = spec.size
    out = np.zeros(n_out, dtype=complex)
    h = min(n, n_out) // 2
    out[:h] = spec[:h]
    out[-h:] = spec[-h:]
    return fft.ifft(out)


def gvd_compensate(w: SampledWaveform, link: LinkSpec | float) -> SampledWaveform:
    """Static all-pass inverse of the accumulated dispersion, per polarization.

    ``link`` is a LinkSpec or the accumulated beta2*L in s^2. The waveform's
    ``center_freq_offset`` is honoured so off-centre carriers are compensated
    at their true optical frequency.
    """
    b2L = link.total_beta2_length() if isinstance(link, LinkSpec) else float(link)
    if b2L == 0:
        return w
    f = fft.fftfreq(w.n, 1 / w.sample_rate)
    om = 2 * np.pi * (f + w.center_freq_offset)
    H = np.exp(-0.5j * b2L * om**2)
    return w.with_fields(fft.ifft(fft.fft(w.samples_x) * H), fft.ifft(fft.fft(w.samples_y) * H))


class EqualizerDivergence(RuntimeError):
    pass


@dataclass
class FfeState:
    """Mutable 2x2 butterfly: taps[p_out, p_in, n]."""

    n_taps: int = 25
    mu: float = 1e-3
    taps: np.ndarray | None = None
    mode: str = "training"
    input_scale: float = 1.0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_taps < 1 or self.n_taps % 2 == 0:
            raise ValueError("n_taps must be odd and positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.taps is None:
            self.taps = np.zeros((2, 2, self.n_taps), dtype=complex)

    def dump(self, path, symbol_rate: float) -> None:
        """Write taps (xx, xy, yx, yy) in the waveform debug format."""
        dump_waveform(path, arrays=[self.taps[p, q] for p in range(2) for q in range(2)],
                      sample_rate=2 * symbol_rate)


def ffe_equalize(w: SampledWaveform, state: FfeState, reference: np.ndarray,
                 dd_reference: np.ndarray | None = None, train_passes: int = 1,
                 max_ratio: float = 1e3, samples_per_symbol: int = 2,
                 mu_decay: float = 0.5) -> np.ndarray:
    """Run the fractionally spaced 2x2 LMS butterfly.

    Parameters
    ----------
    w : SampledWaveform
        Input at 2 samples/symbol, sample 2k aligned with symbol k.
    reference : ndarray, shape (2, n_train)
        Target (matched-filter output of the known training symbols).
    dd_reference : ndarray, shape (2, K), optional
        Targets rebuilt from detector decisions; when given the equalizer keeps
        adapting after the training prefix, otherwise the taps are frozen.
    train_passes : int
        Sweeps over the training prefix; the last one runs over the whole block.
    mu_decay : float
        Step-size factor applied after every pass (gear shifting), which
        trades early convergence speed for low final misadjustment.

    Returns
    -------
    ndarray, shape (2, K)
        Symbol-rate outputs per polarization.
    """
    sps = samples_per_symbol
    u = w.fields
    K = w.n // sps
    reference = np.atleast_2d(np.asarray(reference, dtype=complex))
    n_train = reference.shape[1]
    if n_train > K:
        raise ValueError("training reference longer than the received block")
    p_in = np.mean(np.abs(u) ** 2)
    state.input_scale = 1.0 / np.sqrt(p_in) if p_in > 0 else 1.0
    u = np.ascontiguousarray(u * state.input_scale)
    ref_power = float(np.mean(np.abs(reference) ** 2)) if n_train else 1.0
    if not np.any(state.taps):
        c = (state.n_taps - 1) // 2
        state.taps[0, 0, c] = state.taps[1, 1, c] = np.sqrt(ref_power)
    target = np.zeros((2, K), dtype=complex)
    target[:, :n_train] = reference
    adapt = np.zeros(K, dtype=np.bool_)
    adapt[:n_train] = True
    if dd_reference is not None:
        target[:, n_train:] = dd_reference[:, n_train:]
        adapt[n_train:] = True
    out = np.zeros((2, K), dtype=complex)
    mu = state.mu
    for _ in range(max(0, train_passes - 1)):
        status = ffe_butterfly(u, state.taps, target[:, :n_train], adapt[:n_train], mu, sps,
                               out[:, :n_train], 256, max_ratio, ref_power)
        _raise_if_diverged(status)
        mu *= mu_decay
    state.mode = "training"
    status = ffe_butterfly(u, state.taps, target, adapt, mu, sps, out, 256, max_ratio, ref_power)
    _raise_if_diverged(status)
    state.mode = "decision-directed" if dd_reference is not None else "frozen"
    if n_train:
        state.history.append(float(np.mean(np.abs(out[:, n_train // 2:n_train] - reference[:, n_train // 2:]) ** 2)))
    return out


def _raise_if_diverged(status: int):
    if status >= 0:
        raise EqualizerDivergence(f"FFE output power exceeded the divergence limit at symbol {status}")


def mf_target(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Circular matched-filter output sum_i g_i x_{k-i} for centred taps g."""
    x = np.asarray(x)
    L = (len(g) - 1) // 2
    out = np.zeros(x.shape, dtype=complex)
    for i in range(-L, L + 1):
        out += g[L + i] * np.roll(x, i, axis=-1)
    return out


def duobinary_shape(y: np.ndarray) -> np.ndarray:
    """(1 + D)/2 post-filter on a periodic symbol-rate block."""
    y = np.asarray(y)
    return 0.5 * (y + np.roll(y, 1, axis=-1))
