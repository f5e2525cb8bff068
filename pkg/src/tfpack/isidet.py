"""
ISI detection on the Ungerboeck observation model.

Tap sequences are stored centred: an array ``t`` of length ``2n + 1`` holds
the taps for indices ``-n..n`` with tap 0 at ``t[n]``. DTFTs follow
G(w) = sum_i g_i exp(-j w i).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft, linalg, signal

from ._kernels import bcjr_pam
from .sigkit import Constellation, pam_positions


def _center(t: np.ndarray) -> int:
    return (len(t) - 1) // 2


def _dtft(taps: np.ndarray, n_fft: int) -> np.ndarray:
    """DTFT of centred taps on the n_fft-point grid w_k = 2 pi k / n_fft."""
    n = _center(taps)
    buf = np.zeros(n_fft, dtype=complex)
    buf[: n + 1] = taps[n:]
    if n:
        buf[-n:] = taps[:n]
    return fft.fft(buf)


@dataclass(frozen=True)
class UngerboeckModel:
    """y = G x + n with E{n n^H} = 2 N0 G."""

    g: np.ndarray
    N0: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        if g.ndim != 1 or len(g) % 2 == 0:
            raise ValueError("taps must be a centred odd-length sequence")
        L = _center(g)
        if not g[L].real > 0:
            raise ValueError("g_0 must be positive")
        if not np.allclose(g[::-1], np.conj(g), atol=1e-12 * abs(g[L])):
            raise ValueError("taps are not Hermitian symmetric")
        g = 0.5 * (g + np.conj(g[::-1]))
        g[L] = g[L].real
        if np.max(np.abs(g.imag)) == 0:
            g = g.real
        object.__setattr__(self, "g", g)
        if not self.N0 > 0:
            raise ValueError("N0 must be positive")

    @property
    def L(self) -> int:
        return _center(self.g)

    def spectrum(self, n_fft: int) -> np.ndarray:
        return _dtft(self.g, n_fft).real

    def gaussian_ir(self, n_fft: int = 4096) -> float:
        """Full-memory Gaussian-input rate, bits per complex symbol."""
        G = np.maximum(self.spectrum(n_fft), 0.0)
        return float(np.mean(np.log2(1 + G / (2 * self.N0))))


def ungerboeck_taps(h: np.ndarray, T: float, sample_rate: float, L: int | None = None,
                    N0: float = 1.0, tol: float = 1e-4) -> UngerboeckModel:
    """g_i = integral h(t) h*(t - iT) dt for a pulse sampled at ``sample_rate``.

    With ``L=None`` the memory is the largest i with |g_i| > tol * g_0.
    """
    h = np.asarray(h)
    dt = 1.0 / sample_rate
    sps_f = T * sample_rate
    sps = int(round(sps_f))
    if abs(sps - sps_f) > 1e-9:
        raise ValueError("symbol time must be an integer number of samples")
    energy = np.sum(np.abs(h) ** 2) * dt
    if not energy > 1e-300:
        raise ValueError("pulse has (near) zero energy")
    n_max = (len(h) - 1) // sps
    taps = [energy]
    for i in range(1, n_max + 1):
        taps.append(np.sum(h[i * sps:] * np.conj(h[: len(h) - i * sps])) * dt)
    taps = np.array(taps)
    if L is None:
        big = np.nonzero(np.abs(taps) > tol * energy)[0]
        L = int(big.max()) if big.size else 0
    taps = np.concatenate([taps, np.zeros(max(0, L + 1 - len(taps)))])[: L + 1]
    g = np.concatenate([np.conj(taps[:0:-1]), taps])
    return UngerboeckModel(g, N0)


@dataclass(frozen=True)
class ShortenerSolution:
    """Channel shortener and target response (noise level absorbed).

    h_r : centred taps of the shortener H^r
    g_r : centred taps of the target response, length 2 L_r + 1
    objective : Gaussian-input achievable rate at the optimum, bits/symbol
    """

    h_r: np.ndarray
    g_r: np.ndarray
    L_r: int
    objective: float
    trivial: bool = False

    @property
    def g_causal(self) -> np.ndarray:
        """Taps g_0..g_{L_r}."""
        return self.g_r[self.L_r:]


def _gmi_terms(G, N0, Hr, Gr):
    # per-frequency Gaussian-input GMI (nats) of the auxiliary law (Hr, Gr)
    return 2 * G * Hr.real - Gr - np.abs(Hr) ** 2 * (G**2 + 2 * N0 * G) / (1 + Gr) + np.log(1 + Gr)


def gaussian_gmi(model: UngerboeckModel, h_r: np.ndarray, g_r: np.ndarray, n_fft: int = 4096) -> float:
    """Gaussian-input rate (bits/symbol) achieved by an arbitrary (H^r, G^r) pair."""
    G = model.spectrum(n_fft)
    Hr = _dtft(np.asarray(h_r, dtype=complex), n_fft)
    Gr = _dtft(np.asarray(g_r, dtype=complex), n_fft).real
    if np.any(1 + Gr <= 0):
        return -np.inf
    return float(np.mean(_gmi_terms(G, model.N0, Hr, Gr)) / np.log(2))


def _trim(taps: np.ndarray, rel: float, max_half: int) -> np.ndarray:
    """Centred taps from a circular ifft buffer, trimmed once the tail energy is negligible."""
    N = len(taps)
    half = min(max_half, N // 2 - 1)
    full = np.concatenate([taps[N - half:], taps[: half + 1]])
    e = np.abs(full) ** 2
    total = e.sum()
    n = half
    # shrink symmetric window while the discarded energy stays below rel * total
    cum_out = 0.0
    while n > 0:
        drop = e[half - n] + e[half + n]
        if cum_out + drop > rel * total:
            break
        cum_out += drop
        n -= 1
    return full[half - n: half + n + 1]


def channel_shorten(m: UngerboeckModel, L_r: int, n_fft: int | None = None,
                    tail: float = 1e-15, max_taps: int = 512) -> ShortenerSolution:
    """Optimal shortener/target pair for a detector of memory ``L_r``.

    With B(w) = 2N0 / (G(w) + 2N0) the rate-optimal target satisfies
    1 + G^r(w) = |C(w)|^2 / c_0 where c solves the (L_r+1)-order Toeplitz
    system of the Fourier coefficients of B (maximum-entropy extension),
    and H^r(w) = (1 + G^r(w)) / (G(w) + 2N0).
    """
    if L_r < 0:
        raise ValueError("L_r must be non-negative")
    n_fft = n_fft or max(4096, 1 << int(np.ceil(np.log2(64 * (m.L + L_r + 1)))))
    G = m.spectrum(n_fft)
    # tap truncation leaves tiny negative excursions; anything larger is a real violation
    if G.min() < -1e-6 * abs(G).max():
        raise ValueError("tap sequence is not positive semidefinite")
    G = np.maximum(G, 0.0)
    N0 = m.N0
    if L_r >= m.L:
        g_r = np.zeros(2 * L_r + 1, dtype=m.g.dtype)
        g_r[L_r - m.L: L_r + m.L + 1] = m.g / (2 * N0)
        h_r = np.array([1.0 / (2 * N0)])
        return ShortenerSolution(h_r, g_r, L_r, m.gaussian_ir(n_fft), trivial=True)

    B = 2 * N0 / (G + 2 * N0)
    b = fft.ifft(B)
    Tm = linalg.toeplitz(b[: L_r + 1], np.conj(b[: L_r + 1]))
    e0 = np.zeros(L_r + 1)
    e0[0] = 1.0
    c = linalg.solve(Tm, e0, assume_a="her")
    c0 = c[0].real
    u = np.array([np.sum(c[i:] * np.conj(c[: L_r + 1 - i])) for i in range(L_r + 1)]) / c0
    g_causal = u.copy()
    g_causal[0] = u[0].real - 1.0
    g_r = np.concatenate([np.conj(g_causal[:0:-1]), g_causal])
    if np.max(np.abs(g_r.imag)) < 1e-14 * np.max(np.abs(g_r)) and np.isrealobj(m.g):
        g_r = g_r.real
    U = 1 + _dtft(np.asarray(g_r, dtype=complex), n_fft).real
    Hr = U / (G + 2 * N0)
    h_r = _trim(fft.ifft(Hr), tail, max_taps)
    if np.isrealobj(m.g):
        h_r = h_r.real
    obj = float(np.mean(1 + np.log(U) - U * B) / np.log(2))
    return ShortenerSolution(h_r, g_r, L_r, obj)


def forney_solution(f: np.ndarray, sigma2: float) -> ShortenerSolution:
    """Auxiliary law of a white-noise model y_k = sum_i f_i x_{k-i} + w_k, E|w|^2 = sigma2.

    Expressed in the (H^r, G^r) form: H^r = F / sigma2, G^r = F^H F / sigma2.
    """
    f = np.asarray(f)
    n = len(f) - 1
    h_r = np.concatenate([np.zeros(n, dtype=f.dtype), f]) / sigma2
    auto = np.array([np.sum(np.conj(f[: len(f) - i]) * f[i:]) for i in range(n + 1)]) / sigma2
    g_r = np.concatenate([np.conj(auto[:0:-1]), auto])
    return ShortenerSolution(h_r, g_r, n, float("nan"))


def shortener_output(y: np.ndarray, s: ShortenerSolution) -> np.ndarray:
    """z = H^{rH} y, i.e. z_m = sum_j conj(h_j) y_{m+j}, truncated to the block."""
    y = np.asarray(y)
    h = s.h_r
    n = _center(h)
    kern = np.conj(h[::-1])
    full = signal.oaconvolve(y, kern) if y.size > 4096 and kern.size > 1 else np.convolve(y, kern)
    return full[n: n + y.size]


def _apply_toeplitz(taps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """v_k = sum_m t_{k-m} x_m for the K x K Toeplitz matrix of centred taps."""
    n = _center(taps)
    full = np.convolve(x, taps)
    return full[n: n + x.size]


def eval_aux_loglik(y: np.ndarray, x: np.ndarray, s: ShortenerSolution) -> float:
    """2 Re(y^H H^r x) - x^H G^r x (natural log, unnormalized)."""
    y = np.asarray(y)
    x = np.asarray(x)
    if y.shape != x.shape:
        raise ValueError("y and x must have equal length")
    v = _apply_toeplitz(s.h_r, x)
    quad = np.vdot(x, _apply_toeplitz(s.g_r, x))
    return float(2 * np.real(np.vdot(y, v)) - np.real(quad))


def loglik_from_statistics(z: np.ndarray, x: np.ndarray, g_r: np.ndarray) -> float:
    """Same metric written on the shortened statistic z = H^{rH} y."""
    quad = np.vdot(x, _apply_toeplitz(g_r, x))
    return float(2 * np.real(np.vdot(z, x)) - np.real(quad))


@dataclass(frozen=True)
class TrellisPosteriors:
    """Per-quadrature symbol posteriors.

    app : (2, K, P) a-posteriori PMFs (I then Q)
    log_ext : (2, K, P) normalized log extrinsic metrics (own prior removed)
    log_qp : log sum_x q(y|x) P(x) summed over both quadratures
    """

    app: np.ndarray
    log_ext: np.ndarray
    log_qp: float

    def hard_positions(self) -> np.ndarray:
        return self.app.argmax(axis=-1)

    def hard_symbols(self, c: Constellation) -> np.ndarray:
        pos = self.hard_positions()
        return c.pam_levels[pos[0]] + 1j * c.pam_levels[pos[1]]


def _real_target(g_r: np.ndarray, L_r: int) -> np.ndarray:
    g = np.asarray(g_r)[L_r:]
    if np.iscomplexobj(g):
        if np.max(np.abs(g.imag)) > 1e-9 * np.max(np.abs(g)):
            raise ValueError("per-quadrature detection needs a real-valued target response")
        g = g.real
    return np.ascontiguousarray(g, dtype=float)


def detect_statistics(z: np.ndarray, g_r: np.ndarray, L_r: int, c: Constellation,
                      priors: np.ndarray | None = None) -> TrellisPosteriors:
    """BCJR on the shortened statistic; ``priors`` has shape (2, K, P)."""
    z = np.asarray(z)
    K = z.size
    g = _real_target(g_r, L_r)
    if priors is None:
        logp = np.full((2, K, c.P), -np.log(c.P))
    else:
        priors = np.asarray(priors, dtype=float)
        if priors.shape != (2, K, c.P):
            raise ValueError(f"priors must have shape (2, {K}, {c.P})")
        if np.any(np.abs(priors.sum(axis=-1) - 1) > 1e-6):
            raise ValueError("prior rows must sum to 1")
        with np.errstate(divide="ignore"):
            logp = np.log(priors)
    levels = np.ascontiguousarray(c.pam_levels)
    apps, exts, lqp = [], [], 0.0
    for q, part in enumerate((z.real, z.imag)):
        la, le, lq = bcjr_pam(np.ascontiguousarray(part, dtype=float), g, levels,
                              np.ascontiguousarray(logp[q]))
        apps.append(np.exp(la))
        exts.append(le)
        lqp += lq
    app = np.stack(apps)
    app /= app.sum(axis=-1, keepdims=True)
    return TrellisPosteriors(app, np.stack(exts), float(lqp))


def bcjr_detect(y: np.ndarray, s: ShortenerSolution, c: Constellation,
                priors: np.ndarray | None = None) -> TrellisPosteriors:
    """MAP symbol detection for the auxiliary channel, two PAM trellises of P^L_r states."""
    return detect_statistics(shortener_output(y, s), s.g_r, s.L_r, c, priors)


def known_symbol_priors(x: np.ndarray, c: Constellation, known: np.ndarray) -> np.ndarray:
    """Uniform priors except at ``known`` positions, where the true PAM level gets mass 1."""
    K = x.size
    pri = np.full((2, K, c.P), 1.0 / c.P)
    for q, part in enumerate((x.real, x.imag)):
        pos = pam_positions(part[known], c)
        pri[q, known] = 0.0
        pri[q, np.nonzero(known)[0], pos] = 1.0
    return pri
