"""
Superchannel transmitter: pulse shaping, MZ modulation, optical filtering
and carrier placement.

Waveforms are periodic blocks: every filter is a circular (FFT-domain)
operation and the pulse of symbol ``k`` is centred on sample ``k * sps``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .sigkit import SampledWaveform, power


@dataclass(frozen=True)
class PulseSpec:
    kind: str = "RZ50"
    rolloff: float = 0.2
    span: int = 16

    def __post_init__(self):
        if self.kind not in ("RZ50", "NRZ", "RRC"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.kind == "RRC" and not 0 < self.rolloff <= 1:
            raise ValueError("RRC roll-off must lie in (0, 1]")


@dataclass(frozen=True)
class OpticalFilterSpec:
    bandwidth: float
    order: int = 4

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("filter bandwidth must be positive")
        if self.order < 1:
            raise ValueError("filter order must be >= 1")


@dataclass(frozen=True)
class CarrierPlan:
    n_carriers: int
    spacing: float
    symbol_time: float
    launch_power: float
    delays: np.ndarray | None = None
    phases: np.ndarray | None = None

    def __post_init__(self):
        if self.n_carriers < 1 or not self.spacing > 0 or not self.symbol_time > 0:
            raise ValueError("carrier plan needs n_carriers >= 1, spacing > 0, symbol_time > 0")
        for name in ("delays", "phases"):
            arr = getattr(self, name)
            if arr is None:
                object.__setattr__(self, name, np.zeros(self.n_carriers))
            elif len(arr) != self.n_carriers:
                raise ValueError(f"{name} must have one entry per carrier")

    def offsets(self) -> np.ndarray:
        """Carrier indices relative to the centre carrier (offset 0 always present)."""
        return np.arange(self.n_carriers) - self.n_carriers // 2

    def center_index(self) -> int:
        return self.n_carriers // 2


def rrc_taps(t: np.ndarray, T: float, rolloff: float) -> np.ndarray:
    """Root-raised-cosine impulse response (unnormalized) at times ``t``."""
    a = rolloff
    x = np.asarray(t, dtype=float) / T
    out = np.empty_like(x)
    sing = np.isclose(np.abs(x), 1 / (4 * a)) if a > 0 else np.zeros_like(x, bool)
    zero = np.isclose(x, 0.0)
    reg = ~(sing | zero)
    xr = x[reg]
    num = np.sin(np.pi * xr * (1 - a)) + 4 * a * xr * np.cos(np.pi * xr * (1 + a))
    den = np.pi * xr * (1 - (4 * a * xr) ** 2)
    out[reg] = num / den
    out[zero] = 1 - a + 4 * a / np.pi
    out[sing] = a / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * a))
                                  + (1 - 2 / np.pi) * np.cos(np.pi / (4 * a)))
    return out / T


def make_pulse(spec: PulseSpec, T: float, sample_rate: float) -> np.ndarray:
    """Sampled pulse centred on its middle sample.

    RZ/NRZ return one symbol slot (``sps`` samples, centre at ``sps // 2``);
    RRC returns ``2 * span * sps + 1`` samples with unit energy.
    """
    sps_f = sample_rate * T
    sps = int(round(sps_f))
    if sps < 8 or abs(sps_f - sps) > 1e-9:
        raise ValueError(f"need an integer >= 8 samples per symbol, got {sps_f}")
    if spec.kind == "NRZ":
        return np.ones(sps)
    if spec.kind == "RZ50":
        p = np.zeros(sps)
        p[sps // 4: sps // 4 + sps // 2] = 1.0
        return p
    t = np.arange(-spec.span * sps, spec.span * sps + 1) / sample_rate
    p = rrc_taps(t, T, spec.rolloff)
    return p / np.sqrt(np.sum(p**2) / sample_rate)


def shape_symbols(a: np.ndarray, pulse: np.ndarray, sps: int) -> np.ndarray:
    """Circular linear modulation: sum_k a_k p(t - kT), pulse centre on sample k*sps."""
    n = a.size * sps
    if pulse.size > n:
        raise ValueError("pulse longer than the block")
    imp = np.zeros(n, dtype=np.result_type(a, float))
    imp[::sps] = a
    kern = np.zeros(n)
    c = pulse.size // 2
    kern[: pulse.size - c] = pulse[c:]
    kern[n - c:] = pulse[:c]
    return fft.ifft(fft.fft(imp) * fft.fft(kern))


def mz_modulate(drive_i, drive_q) -> np.ndarray:
    """Ideal push-pull IQ Mach-Zehnder: field = sin(pi/2 d_I) + j sin(pi/2 d_Q)."""
    drive_i = np.asarray(drive_i)
    drive_q = np.asarray(drive_q)
    if np.iscomplexobj(drive_i) or np.iscomplexobj(drive_q):
        if max(np.abs(np.imag(drive_i)).max(initial=0), np.abs(np.imag(drive_q)).max(initial=0)) > 1e-9:
            raise ValueError("MZ drive signals must be real")
        drive_i, drive_q = drive_i.real, drive_q.real
    if np.any(np.abs(drive_i) > 1 + 1e-12) or np.any(np.abs(drive_q) > 1 + 1e-12):
        raise ValueError("MZ drive outside [-1, 1]")
    return np.sin(np.pi / 2 * drive_i) + 1j * np.sin(np.pi / 2 * drive_q)


def mz_predistort(levels: np.ndarray) -> np.ndarray:
    """Drive amplitudes that make the MZ output proportional to ``levels``."""
    levels = np.asarray(levels, dtype=float)
    return 2 / np.pi * np.arcsin(levels / np.max(np.abs(levels)))


def gaussian_response(f: np.ndarray, spec: OpticalFilterSpec) -> np.ndarray:
    """Zero-phase n-th order Gaussian, |H(B/2)|^2 = 1/2."""
    return np.exp(-0.5 * np.log(2) * (2 * np.asarray(f) / spec.bandwidth) ** (2 * spec.order))


def apply_gaussian_filter(w: SampledWaveform, spec: OpticalFilterSpec) -> SampledWaveform:
    if spec.bandwidth >= w.sample_rate:
        raise ValueError("filter bandwidth not representable at this sample rate")
    H = gaussian_response(fft.fftfreq(w.n, 1 / w.sample_rate), spec)
    return w.with_fields(fft.ifft(fft.fft(w.samples_x) * H), fft.ifft(fft.fft(w.samples_y) * H))


def delay_waveform(x: np.ndarray, tau: float, sample_rate: float) -> np.ndarray:
    if tau == 0:
        return x
    f = fft.fftfreq(x.size, 1 / sample_rate)
    return fft.ifft(fft.fft(x) * np.exp(-2j * np.pi * f * tau))


def assemble_superchannel(per_carrier: list[SampledWaveform], plan: CarrierPlan,
                          occupied_bandwidth: float | None = None) -> SampledWaveform:
    """Place carriers at ``offset * F``, power-normalize each to ``plan.launch_power``.

    Carrier frequencies are snapped to the FFT bin grid of the block so that
    the periodic block stays continuous.
    """
    if len(per_carrier) != plan.n_carriers:
        raise ValueError("one waveform per carrier required")
    fs = per_carrier[0].sample_rate
    n = per_carrier[0].n
    if any(w.sample_rate != fs or w.n != n for w in per_carrier):
        raise ValueError("carrier waveforms differ in sample rate or length")
    bw = plan.spacing if occupied_bandwidth is None else occupied_bandwidth
    if (plan.n_carriers - 1) * plan.spacing + bw >= fs:
        raise ValueError("superchannel bandwidth exceeds the simulation sample rate")
    t = np.arange(n) / fs
    df = fs / n
    ex = np.zeros(n, complex)
    ey = np.zeros(n, complex)
    for w, off, tau, th in zip(per_carrier, plan.offsets(), plan.delays, plan.phases):
        p = power(w)
        scale = np.sqrt(plan.launch_power / p) if p > 0 else 0.0
        fc = np.round(off * plan.spacing / df) * df
        rot = np.exp(1j * (2 * np.pi * fc * t + th))
        ex += scale * delay_waveform(w.samples_x, tau, fs) * rot
        ey += scale * delay_waveform(w.samples_y, tau, fs) * rot
    return SampledWaveform(ex, ey, fs, per_carrier[0].t0, 0.0,
                           {"n_carriers": plan.n_carriers, "spacing": plan.spacing})


@dataclass
class CarrierTransmitter:
    """Electrical drive -> MZ -> transmit optical filter for one carrier."""

    pulse: PulseSpec
    tx_filter: OpticalFilterSpec | None
    symbol_time: float
    sample_rate: float
    predistort: bool = True
    _pulse_cache: np.ndarray | None = field(default=None, repr=False)

    @property
    def sps(self) -> int:
        return int(round(self.sample_rate * self.symbol_time))

    def pulse_samples(self) -> np.ndarray:
        if self._pulse_cache is None:
            self._pulse_cache = make_pulse(self.pulse, self.symbol_time, self.sample_rate)
        return self._pulse_cache

    def optical_pulse(self, n: int | None = None) -> np.ndarray:
        """Aggregate real pulse after modulator and transmit filter (centred, length n)."""
        p = self.pulse_samples()
        n = n or max(256 * self.sps, 2 * p.size)
        a = np.zeros(n // self.sps)
        a[0] = 1.0
        h = shape_symbols(a, p, self.sps).real
        if self.tx_filter is not None:
            H = gaussian_response(fft.fftfreq(n, 1 / self.sample_rate), self.tx_filter)
            h = fft.ifft(fft.fft(h) * H).real
        return np.roll(h, n // 2)

    def modulate(self, pam_i: np.ndarray, pam_q: np.ndarray) -> np.ndarray:
        """Optical field for one polarization from PAM level sequences."""
        p = self.pulse_samples()
        if self.pulse.kind == "RRC":
            # band-limited pulses have support > T: modelled as an ideal linear modulator
            field_ = shape_symbols(pam_i + 1j * pam_q, p, self.sps)
        else:
            peak = max(np.max(np.abs(pam_i)), np.max(np.abs(pam_q)))
            if self.predistort:
                di = 2 / np.pi * np.arcsin(pam_i / peak)
                dq = 2 / np.pi * np.arcsin(pam_q / peak)
            else:
                di, dq = pam_i / peak, pam_q / peak
            drive_i = shape_symbols(di, p, self.sps).real
            drive_q = shape_symbols(dq, p, self.sps).real
            field_ = mz_modulate(np.clip(drive_i, -1, 1), np.clip(drive_q, -1, 1))
        if self.tx_filter is not None:
            H = gaussian_response(fft.fftfreq(field_.size, 1 / self.sample_rate), self.tx_filter)
            field_ = fft.ifft(fft.fft(field_) * H)
        return field_

    def carrier_waveform(self, sym_x: np.ndarray, sym_y: np.ndarray) -> SampledWaveform:
        ex = self.modulate(sym_x.real, sym_x.imag)
        ey = self.modulate(sym_y.real, sym_y.imag)
        return SampledWaveform(ex, ey, self.sample_rate)


_HEADER = struct.Struct("<dQB")


def dump_waveform(path, w: SampledWaveform | None = None, *, arrays=None, sample_rate=None) -> None:
    """Write the debug dump: header {f64 sample_rate, u64 n, u8 pols} + complex64 blocks."""
    if w is not None:
        arrays, sample_rate = [w.samples_x, w.samples_y], w.sample_rate
    arrays = [np.asarray(a, dtype="<c8") for a in arrays]
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise ValueError("all sequences in a dump must have equal length")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(float(sample_rate), n, len(arrays)))
        for a in arrays:
            fh.write(a.tobytes())


def load_waveform(path) -> tuple[float, np.ndarray]:
    """Read a dump; returns (sample_rate, array of shape (pols, n))."""
    with open(path, "rb") as fh:
        fs, n, pols = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<c8")
    if data.size != n * pols:
        raise ValueError(f"truncated waveform dump: expected {n * pols} samples, found {data.size}")
    return fs, data.reshape(pols, n).astype(complex)
