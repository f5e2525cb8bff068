"""
Amplified fiber link: symmetric split-step Fourier solution of the Manakov
equation, lumped EDFAs with ASE, and ideal digital backpropagation.

Sign convention: the linear operator is exp(+j beta2/2 w^2 z) in the numpy
FFT frequency domain and the Kerr rotation is exp(-j 8/9 gamma |E|^2 z).
"""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
from scipy import constants, fft

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .sigkit import SampledWaveform, make_rng

log = logging.getLogger(__name__)

MANAKOV = 8.0 / 9.0
C_KM_S = constants.c / 1e3


@dataclass(frozen=True)
class FiberSpan:
    length: float                # km
    dispersion: float = 16.63    # ps/nm/km
    attenuation: float = 0.23    # dB/km
    gamma: float = 1.3           # 1/W/km

    def __post_init__(self):
        if self.length < 0 or self.dispersion < 0 or self.attenuation < 0 or self.gamma < 0:
            raise ValueError("span parameters must be non-negative")

    @property
    def alpha(self) -> float:
        """Power attenuation coefficient, 1/km."""
        return self.attenuation * np.log(10) / 10

    @property
    def loss_db(self) -> float:
        return self.attenuation * self.length


def beta2(D: float, wavelength_nm: float = 1550.0) -> float:
    """GVD coefficient in s^2/km from D in ps/nm/km."""
    lam = wavelength_nm * 1e-9
    return -(D * 1e-6) * lam**2 / (2 * np.pi * constants.c) * 1e3


@dataclass(frozen=True)
class LinkSpec:
    spans: tuple[FiberSpan, ...]
    noise_figure: float = 6.0
    amp_gains: tuple[float, ...] | None = None   # dB, default = span loss
    reference_wavelength: float = 1550.0          # nm
    amplifiers: bool = True

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        if self.noise_figure < 3:
            raise ValueError("noise figure below the 3 dB quantum limit")
        if self.amp_gains is not None and len(self.amp_gains) != len(self.spans):
            raise ValueError("one amplifier gain per span")

    def gains_db(self) -> list[float]:
        if self.amp_gains is not None:
            return list(self.amp_gains)
        return [s.loss_db for s in self.spans]

    @property
    def length(self) -> float:
        return float(sum(s.length for s in self.spans))

    @property
    def frequency(self) -> float:
        return constants.c / (self.reference_wavelength * 1e-9)

    def total_beta2_length(self) -> float:
        """Accumulated beta2 * L over all spans, s^2."""
        return float(sum(beta2(s.dispersion, self.reference_wavelength) * s.length for s in self.spans))

    def total_dispersion(self) -> float:
        """Accumulated D * L, ps/nm."""
        return float(sum(s.dispersion * s.length for s in self.spans))


@dataclass(frozen=True)
class SsfmControl:
    max_step: float = 1.0          # km
    max_nl_phase: float = 3e-3     # rad
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if not (self.max_step > 0 and self.max_nl_phase > 0):
            raise ValueError("step controls must be positive")


class PropagationError(RuntimeError):
    pass


def step_schedule(span: FiberSpan, mean_power: float, ctrl: SsfmControl) -> np.ndarray:
    """Step lengths bounding the nonlinear phase of the mean power.

    Depends only on the span and the launch mean power, so forward and
    backward propagation can share it exactly.
    """
    steps = []
    z = 0.0
    L = span.length
    while z < L - 1e-12:
        h = min(ctrl.max_step, L - z)
        p = mean_power * np.exp(-span.alpha * z)
        if span.gamma > 0 and p > 0:
            h = min(h, ctrl.max_nl_phase / (MANAKOV * span.gamma * p))
        if L - z - h < 1e-9:
            h = L - z
        steps.append(h)
        z += h
    return np.array(steps)


def _effective_length(alpha: float, h: float) -> float:
    # nonlinear step applied at mid-step power: integral of exp(-alpha z) over the step / exp(-alpha h / 2)
    if alpha * h < 1e-12:
        return h
    return 2 * np.sinh(alpha * h / 2) / alpha


def _check_finite(E: np.ndarray, where: str):
    if not np.all(np.isfinite(E)):
        raise PropagationError(f"non-finite field samples encountered during {where}")


def _ssfm(E: np.ndarray, fs: float, span: FiberSpan, steps: np.ndarray, wavelength: float,
          direction: int, workers) -> np.ndarray:
    """Core symmetric SSFM; ``direction=-1`` runs the exact inverse over reversed steps."""
    n = E.shape[1]
    w = 2 * np.pi * fft.fftfreq(n, 1 / fs)
    b2 = beta2(span.dispersion, wavelength)
    a = span.alpha
    g = span.gamma
    seq = steps if direction > 0 else steps[::-1]

    expo = direction * (0.5j * b2 * w**2 - a / 2)
    E = E.copy()
    spec = fft.fft(E, axis=1, workers=workers)
    cache = {}

    def lin_cached(h):
        # exp(j b2/2 w^2 h - a/2 h); only a few distinct step lengths are worth keeping
        key = round(h, 12)
        op = cache.get(key)
        if op is None:
            op = np.exp(expo * h)
            if len(cache) < 4:
                cache[key] = op
        return op

    for h in seq:
        spec *= lin_cached(h / 2)
        if g > 0:
            E = fft.ifft(spec, axis=1, workers=workers)
            inten = np.abs(E[0]) ** 2 + np.abs(E[1]) ** 2
            E *= np.exp(-1j * direction * MANAKOV * g * inten * _effective_length(a, h))
            spec = fft.fft(E, axis=1, workers=workers)
        spec *= lin_cached(h / 2)
    E = fft.ifft(spec, axis=1, workers=workers)
    _check_finite(E, "fiber propagation")
    return E


def propagate_span(w: SampledWaveform, span: FiberSpan, ctrl: SsfmControl = SsfmControl(),
                   wavelength: float = 1550.0) -> SampledWaveform:
    E = w.fields
    _check_finite(E, "span input")
    steps = step_schedule(span, float(np.mean(np.sum(np.abs(E) ** 2, axis=0))), ctrl)
    out = _ssfm(E, w.sample_rate, span, steps, wavelength, +1, ctrl.workers)
    return w.with_fields(out[0], out[1])


def ase_psd(gain_db: float, nf_db: float, frequency: float) -> float:
    """ASE PSD per polarization, W/Hz: (G-1) h nu NF / 2."""
    G = 10 ** (gain_db / 10)
    return (G - 1) * constants.h * frequency * 10 ** (nf_db / 10) / 2


def amplify(w: SampledWaveform, gain_db: float, nf_db: float, seed: int | None,
            frequency: float = constants.c / 1550e-9, stream: int = 0,
            noise: bool = True) -> SampledWaveform:
    """Lumped amplifier: sqrt(G) field gain plus white circular ASE on each polarization."""
    if gain_db < 0:
        raise ValueError("amplifier gain must be >= 0 dB")
    G = 10 ** (gain_db / 10)
    ex = np.sqrt(G) * w.samples_x
    ey = np.sqrt(G) * w.samples_y
    psd = ase_psd(gain_db, nf_db, frequency)
    if noise and psd > 0:
        rng = make_rng(seed, stream=stream)
        sigma = np.sqrt(psd * w.sample_rate / 2)
        ex = ex + sigma * (rng.standard_normal(w.n) + 1j * rng.standard_normal(w.n))
        ey = ey + sigma * (rng.standard_normal(w.n) + 1j * rng.standard_normal(w.n))
    return w.with_fields(ex, ey)


@dataclass
class LinkTrace:
    """Per-span mean launch powers recorded during forward propagation."""

    span_input_power: list = field(default_factory=list)


def propagate_link(w: SampledWaveform, link: LinkSpec, ctrl: SsfmControl = SsfmControl(),
                   ase: bool = True, trace: LinkTrace | None = None) -> tuple[SampledWaveform, float]:
    """Fiber spans alternated with amplifiers.

    Returns the output waveform and the accumulated ASE PSD per polarization
    (W/Hz), summed analytically over all amplifiers.
    """
    n0 = 0.0
    gains = link.gains_db()
    for s, (span, g_db) in enumerate(zip(link.spans, gains)):
        if trace is not None:
            trace.span_input_power.append(float(np.mean(np.abs(w.samples_x) ** 2 + np.abs(w.samples_y) ** 2)))
        w = propagate_span(w, span, ctrl, link.reference_wavelength)
        if link.amplifiers:
            w = amplify(w, g_db, link.noise_figure, ctrl.seed, link.frequency, stream=1000 + s, noise=ase)
            n0 += ase_psd(g_db, link.noise_figure, link.frequency)
        log.debug("span %d/%d done", s + 1, len(link.spans))
    return w, n0


def backpropagate(w: SampledWaveform, link: LinkSpec, ctrl: SsfmControl = SsfmControl()) -> SampledWaveform:
    """Ideal digital backpropagation over the whole received bandwidth.

    Spans are undone in reverse order with negated dispersion, Kerr and loss,
    on the step schedule the forward pass would have used.
    """
    E = w.fields
    _check_finite(E, "backpropagation input")
    for span, g_db in zip(reversed(link.spans), reversed(link.gains_db())):
        if link.amplifiers:
            E = E / np.sqrt(10 ** (g_db / 10))
        p_out = float(np.mean(np.sum(np.abs(E) ** 2, axis=0)))
        p_in = p_out * np.exp(span.alpha * span.length)
        steps = step_schedule(span, p_in, ctrl)
        E = _ssfm(E, w.sample_rate, span, steps, link.reference_wavelength, -1, ctrl.workers)
    return w.with_fields(E[0], E[1])


def uniform_link(n_spans: int, span_km: float = 100.0, noise_figure: float = 5.0, **span_kw) -> LinkSpec:
    return LinkSpec(tuple(FiberSpan(span_km, **span_kw) for _ in range(n_spans)), noise_figure)


def _load_link_fragment(name: str) -> dict:
    text = (resources.files("tfpack") / "data" / "links" / f"{name}.toml").read_text()
    return tomllib.loads(text)


_TABLE1 = _load_link_fragment("table1")
TABLE1_SPANS_KM = tuple(_TABLE1["spans_km"])


def table1_link(noise_figure: float = _TABLE1["noise_figure"], **span_kw) -> LinkSpec:
    """The 15-span field link with measured span lengths."""
    return LinkSpec(tuple(FiberSpan(L, **span_kw) for L in TABLE1_SPANS_KM), noise_figure)


def with_gamma(link: LinkSpec, gamma: float) -> LinkSpec:
    return replace(link, spans=tuple(replace(s, gamma=gamma) for s in link.spans))
