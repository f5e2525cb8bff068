"""
Core value types: constellations, symbol frames, sampled waveforms.

All square M-QAM formats are handled as two independent Gray-labelled PAM
alphabets, one per quadrature. Symbol index ``i`` of an M-ary constellation
encodes the pair of PAM positions as ``i = pos_I * sqrt(M) + pos_Q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FORMATS = {"QPSK": 4, "QAM16": 16, "QAM64": 64, "QAM256": 256}


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; ``stream`` selects a disjoint counter range."""
    counter = np.zeros(4, dtype=np.uint64)
    counter[3] = np.uint64(stream)
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1), counter=counter))


def gray_code(n: np.ndarray | int) -> np.ndarray:
    n = np.asarray(n)
    return n ^ (n >> 1)


def inverse_gray_code(g: np.ndarray | int) -> np.ndarray:
    g = np.array(g, copy=True)
    shift = g >> 1
    while np.any(shift):
        g ^= shift
        shift >>= 1
    return g


@dataclass(frozen=True)
class Constellation:
    """Square M-QAM alphabet with unit average energy.

    Attributes
    ----------
    name : str
    points : ndarray of complex
        Indexed by ``pos_I * sqrt(M) + pos_Q``.
    pam_levels : ndarray of float
        Ascending per-quadrature alphabet.
    bits_per_symbol : int
    """

    name: str
    points: np.ndarray
    pam_levels: np.ndarray
    bits_per_symbol: int

    @property
    def M(self) -> int:
        return len(self.points)

    @property
    def P(self) -> int:
        """Size of the per-quadrature PAM alphabet."""
        return len(self.pam_levels)

    @property
    def bits_per_quadrature(self) -> int:
        return self.bits_per_symbol // 2

    def pam_labels(self) -> np.ndarray:
        """Gray label bits of each PAM position, shape (P, bits_per_quadrature)."""
        q = self.bits_per_quadrature
        lab = gray_code(np.arange(self.P))
        return ((lab[:, None] >> np.arange(q - 1, -1, -1)) & 1).astype(np.uint8)


def make_constellation(fmt: str) -> Constellation:
    """Gray-mapped square constellation normalized to unit average energy."""
    try:
        M = FORMATS[fmt]
    except KeyError:
        raise ValueError(f"unknown modulation format {fmt!r}; expected one of {sorted(FORMATS)}")
    P = int(round(np.sqrt(M)))
    levels = np.arange(-(P - 1), P, 2, dtype=float)
    # E|x|^2 = 2 * E[level^2] for independent quadratures
    levels /= np.sqrt(2.0 * np.mean(levels**2))
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    return Constellation(fmt, points, levels, int(np.log2(M)))


def bits_to_symbols(bits, c: Constellation) -> np.ndarray:
    """Map a bit stream to symbol indices; first half of each label is the I component."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    m = c.bits_per_symbol
    if bits.size % m:
        raise ValueError(f"bit count {bits.size} is not a multiple of {m}")
    q = c.bits_per_quadrature
    words = bits.reshape(-1, 2, q)
    weights = 1 << np.arange(q - 1, -1, -1)
    labels = words @ weights
    pos = inverse_gray_code(labels)
    return (pos[:, 0] * c.P + pos[:, 1]).astype(np.int64)


def symbols_to_bits(idx, c: Constellation) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64).ravel()
    lab = c.pam_labels()
    return np.concatenate([lab[idx // c.P], lab[idx % c.P]], axis=1).ravel()


def split_iq(symbols, c: Constellation, atol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Split complex symbols into their two PAM components.

    Raises ValueError if any component is not a level of ``c``.
    """
    symbols = np.asarray(symbols, dtype=complex)
    parts = (symbols.real, symbols.imag)
    for part in parts:
        d = np.abs(part[..., None] - c.pam_levels).min(axis=-1)
        if np.any(d > atol):
            raise ValueError("symbol not on the square constellation grid")
    return parts[0].copy(), parts[1].copy()


def pam_positions(values, c: Constellation) -> np.ndarray:
    """Index into ``c.pam_levels`` of the nearest level."""
    values = np.asarray(values, dtype=float)
    return np.abs(values[..., None] - c.pam_levels).argmin(axis=-1)


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


@dataclass(frozen=True)
class SymbolFrame:
    """Symbol indices for every carrier and polarization, shape (K, n_carriers, 2)."""

    symbols: np.ndarray
    training_len: int
    seed: int

    def __post_init__(self):
        if self.symbols.ndim != 3 or self.symbols.shape[2] != 2 or self.symbols.shape[0] <= 0:
            raise ValueError("symbols must have shape (K, n_carriers, 2) with K > 0")
        if not 0 <= self.training_len <= self.symbols.shape[0]:
            raise ValueError("training prefix longer than the frame")

    @property
    def K(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_carriers(self) -> int:
        return self.symbols.shape[1]


def make_frame(K: int, n_carriers: int, c: Constellation, seed: int, training_len: int = 0) -> SymbolFrame:
    """i.u.d. symbols for all carriers/polarizations; each (carrier, pol) uses its own stream."""
    out = np.empty((K, n_carriers, 2), dtype=np.int64)
    for ell in range(n_carriers):
        for pol in range(2):
            rng = make_rng(seed, stream=1 + 2 * ell + pol)
            out[:, ell, pol] = bits_to_symbols(random_bits(K * c.bits_per_symbol, rng), c)
    return SymbolFrame(out, training_len, seed)


@dataclass(frozen=True)
class SampledWaveform:
    """Dual-polarization complex baseband field (sqrt(W)) on a uniform grid."""

    samples_x: np.ndarray
    samples_y: np.ndarray
    sample_rate: float
    t0: float = 0.0
    center_freq_offset: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.samples_x.shape != self.samples_y.shape:
            raise ValueError("polarizations differ in length")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n(self) -> int:
        return self.samples_x.size

    @property
    def fields(self) -> np.ndarray:
        return np.stack([self.samples_x, self.samples_y])

    def with_fields(self, ex, ey, **changes) -> "SampledWaveform":
        kw = dict(sample_rate=self.sample_rate, t0=self.t0,
                  center_freq_offset=self.center_freq_offset, meta=dict(self.meta))
        kw.update(changes)
        return SampledWaveform(np.asarray(ex, dtype=complex), np.asarray(ey, dtype=complex), **kw)

    def time(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) / self.sample_rate


def power(w: SampledWaveform) -> float:
    """Mean total power over both polarizations, W."""
    return float(np.mean(np.abs(w.samples_x) ** 2 + np.abs(w.samples_y) ** 2))
