"""QPSK information rate over AWGN: simulated estimate against the closed form.

With a memoryless channel and L_r = 0 the mismatched-detection bound is the
true mutual information, so the two columns should agree to Monte-Carlo
accuracy.
"""
import numpy as np

from tfpack.infomax import estimate_ir, pam_mutual_information
from tfpack.isidet import UngerboeckModel, channel_shorten
from tfpack.sigkit import bits_to_symbols, make_constellation, make_rng

c = make_constellation("QPSK")
K = 50_000
rng = make_rng(3, stream=0)
x = c.points[bits_to_symbols(rng.integers(0, 2, 2 * K), c)]

print(" SNR dB   simulated   closed form")
for snr_db in (0.0, 3.0, 6.0, 9.0):
    es_n0 = 10 ** (snr_db / 10)
    n0 = 1 / es_n0
    noise = np.sqrt(n0 / 2) * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    s = channel_shorten(UngerboeckModel(np.array([1.0 + 0j]), n0 / 2), 0)
    ir = estimate_ir(x, x + noise, s, c, block_len=5000).ir
    exact = 2 * pam_mutual_information(c.pam_levels, n0 / 2)
    print(f"{snr_db:7.1f}   {ir:9.4f}   {exact:11.4f}")
