"""Threshold search and turbo BER trace for the bundled (3, 6)-regular LDPC code.

QPSK over AWGN without ISI. The threshold is the lowest grid SNR at which 200
codewords decode below BER 1e-2; the per-iteration trace then shows how
detector/decoder iterations drive the error rate down near threshold.
"""
import numpy as np

from tfpack.codedloop import (SystematicEncoder, TurboConfig, awgn_coded_run, find_threshold,
                              toy_code)
from tfpack.sigkit import make_constellation

H = toy_code()
enc = SystematicEncoder(H)
c = make_constellation("QPSK")
cfg = TurboConfig(max_iterations=10, inner_iters=20)

thr = find_threshold(H, c, np.arange(0.0, 4.01, 0.25), 200, seed=1, cfg=cfg, encoder=enc)
print(f"threshold: {thr:.2f} dB")
for snr in (thr - 0.25, thr, thr + 0.5):
    errors, total, trace = awgn_coded_run(H, c, snr, 200, seed=2, cfg=cfg, encoder=enc)
    steps = " ".join(f"{b:.1e}" for b in trace)
    print(f"{snr:5.2f} dB  BER {errors / total:.2e}  per iteration: {steps}")
