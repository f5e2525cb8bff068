"""Independent reference computations shared by the unit and acceptance tests."""
import itertools

import numpy as np
from scipy import optimize

from tfpack.isidet import UngerboeckModel, gaussian_gmi


def random_ungerboeck(n_taps: int, N0: float, seed: int) -> UngerboeckModel:
    """g = autocorrelation of a random real n_taps response (memory n_taps - 1)."""
    h = np.random.default_rng(seed).standard_normal(n_taps)
    g = np.correlate(h, h, mode="full")
    return UngerboeckModel(g / g[n_taps - 1], N0)


def brute_force_posteriors(z, g_r, c):
    """Exhaustive sum over every complex symbol sequence of the auxiliary metric.

    metric(x) = 2 Re(z^H x) - x^H G^r x - K log M, with G^r the K x K Toeplitz
    matrix of the centred target taps. Returns (app (2, K, P), log sum_x q P).
    """
    K = z.size
    pts = c.points
    M = pts.size
    L = (len(g_r) - 1) // 2
    Gm = np.zeros((K, K), dtype=complex)
    for i in range(-L, L + 1):
        Gm += np.diag(np.full(K - abs(i), g_r[L + i]), -i) if abs(i) < K else 0
    seqs = np.array(list(itertools.product(range(M), repeat=K)))
    xs = pts[seqs]
    quad = np.einsum("sk,kl,sl->s", xs.conj(), Gm, xs).real
    metric = 2 * (xs @ z.conj()).real - quad - K * np.log(M)
    m = metric.max()
    w = np.exp(metric - m)
    log_qp = m + np.log(w.sum())
    w /= w.sum()
    app = np.zeros((2, K, c.P))
    for q, part in enumerate((xs.real, xs.imag)):
        pos = np.abs(part[..., None] - c.pam_levels).argmin(axis=-1)
        for k in range(K):
            app[q, k] = np.bincount(pos[:, k], weights=w, minlength=c.P)
    return app, log_qp


def numerical_shortener(model: UngerboeckModel, L_r: int, n_h: int = 41, n_fft: int = 1024) -> float:
    """Maximize the Gaussian-input rate directly over real (h_r, g_r) by quasi-Newton search."""
    half = n_h // 2

    def unpack(p):
        g_c = p[:L_r + 1]
        g_r = np.concatenate([g_c[:0:-1], g_c])
        return p[L_r + 1:], g_r

    def neg(p):
        h, g_r = unpack(p)
        v = gaussian_gmi(model, h, g_r, n_fft)
        return 1e3 if not np.isfinite(v) else -v

    x0 = np.zeros(L_r + 1 + n_h)
    x0[0] = 1.0 / (2 * model.N0)
    x0[L_r + 1 + half] = 1.0 / (2 * model.N0)
    res = optimize.minimize(neg, x0, method="BFGS", options={"gtol": 1e-10, "maxiter": 20_000})
    return -res.fun


def awgn_mi_monte_carlo(c, snr_db: float, n: int, seed: int) -> float:
    """Mutual information of the uniform constellation over complex AWGN by direct sampling."""
    r = np.random.default_rng(seed)
    N0 = 10 ** (-snr_db / 10) / 2        # E|n|^2 = 2 N0, unit-energy symbols
    x = r.choice(c.points, n)
    y = x + np.sqrt(N0) * (r.standard_normal(n) + 1j * r.standard_normal(n))
    d = -np.abs(y[:, None] - c.points[None, :]) ** 2 / (2 * N0)
    own = -np.abs(y - x) ** 2 / (2 * N0)
    m = d.max(axis=1)
    lse = m + np.log(np.exp(d - m[:, None]).sum(axis=1))
    return float(np.log2(c.M) + np.mean(own - lse) / np.log(2))
