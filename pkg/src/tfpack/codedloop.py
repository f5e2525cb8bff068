"""
LDPC coding and iterative detection/decoding.

Bit LLRs follow the convention lambda = log P(b = 0) / P(b = 1).
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._kernels import ldpc_layered
from .isidet import (ShortenerSolution, UngerboeckModel, channel_shorten, detect_statistics,
                     shortener_output)
from .sigkit import Constellation, bits_to_symbols, make_rng

log = logging.getLogger(__name__)

_LLR_CLIP = 50.0


@dataclass(frozen=True)
class ParityCheck:
    """Sparse parity-check matrix stored as per-check column lists."""

    n: int
    checks: tuple

    def __post_init__(self):
        checks = tuple(np.asarray(sorted(set(int(v) for v in r)), dtype=np.int64) for r in self.checks)
        if not checks:
            raise ValueError("parity-check matrix has no rows")
        for r in checks:
            if r.size == 0:
                raise ValueError("empty check row")
            if r[0] < 0 or r[-1] >= self.n:
                raise ValueError("column index out of range")
        object.__setattr__(self, "checks", checks)

    @property
    def m(self) -> int:
        return len(self.checks)

    @property
    def rate(self) -> float:
        """Design rate 1 - m/n (full-rank assumption)."""
        return 1 - self.m / self.n

    def var_degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate(self.checks), minlength=self.n)

    def dense(self) -> np.ndarray:
        Hd = np.zeros((self.m, self.n), dtype=np.uint8)
        for i, r in enumerate(self.checks):
            Hd[i, r] = 1
        return Hd

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        """Check parities for bits of shape (..., n)."""
        bits = np.asarray(bits, dtype=np.uint8)
        return np.stack([np.bitwise_xor.reduce(bits[..., r], axis=-1) for r in self.checks], axis=-1)

    @classmethod
    def from_dense(cls, Hd) -> "ParityCheck":
        Hd = np.asarray(Hd)
        return cls(Hd.shape[1], tuple(np.nonzero(row)[0] for row in Hd))


def read_alist(path) -> ParityCheck:
    """Parse an alist file (1-based indices, zero padding allowed)."""
    path = Path(path)
    try:
        toks = path.read_text().split()
    except OSError as exc:
        raise OSError(f"cannot read alist file {path}: {exc}") from exc
    it = iter(int(t) for t in toks)
    try:
        n, m = next(it), next(it)
        max_col, max_row = next(it), next(it)
        col_deg = [next(it) for _ in range(n)]
        row_deg = [next(it) for _ in range(m)]
        for _ in range(n * max_col):
            next(it)
        rows = []
        for i in range(m):
            entries = [next(it) for _ in range(max_row)]
            rows.append([e - 1 for e in entries if e > 0])
            if len(rows[-1]) != row_deg[i]:
                raise ValueError(f"{path}: row {i + 1} degree mismatch")
    except StopIteration:
        raise ValueError(f"{path}: truncated alist file") from None
    H = ParityCheck(n, tuple(rows))
    if not np.array_equal(H.var_degrees(), col_deg):
        raise ValueError(f"{path}: column degrees disagree with the row lists")
    return H


def write_alist(H: ParityCheck, path) -> None:
    cols = [[] for _ in range(H.n)]
    for i, r in enumerate(H.checks):
        for j in r:
            cols[j].append(i)
    max_col = max(len(c) for c in cols)
    max_row = max(len(r) for r in H.checks)
    lines = [f"{H.n} {H.m}", f"{max_col} {max_row}",
             " ".join(str(len(c)) for c in cols),
             " ".join(str(len(r)) for r in H.checks)]
    # 1-based indices, rows shorter than the maximum degree padded with 0
    lines += [" ".join([str(v + 1) for v in c] + ["0"] * (max_col - len(c))) for c in cols]
    lines += [" ".join([str(int(v) + 1) for v in r] + ["0"] * (max_row - len(r))) for r in H.checks]
    Path(path).write_text("\n".join(lines) + "\n")


def peg_construct(n: int, m: int, var_degree: int, seed: int = 0) -> ParityCheck:
    """Progressive edge growth: each new edge goes to a check as far away as possible.

    Ties are broken by lowest current check degree, then at random.
    """
    rng = make_rng(seed, stream=7)
    var_adj = [[] for _ in range(n)]
    chk_adj = [[] for _ in range(m)]
    deg = np.zeros(m, dtype=np.int64)
    for v in range(n):
        for e in range(var_degree):
            if e == 0:
                cand = np.nonzero(deg == deg.min())[0]
            else:
                cand = _peg_far_checks(v, var_adj, chk_adj, m)
                cand = cand[deg[cand] == deg[cand].min()]
            c = int(cand[rng.integers(cand.size)])
            var_adj[v].append(c)
            chk_adj[c].append(v)
            deg[c] += 1
    return ParityCheck(n, tuple(chk_adj))


def _peg_far_checks(v, var_adj, chk_adj, m) -> np.ndarray:
    seen_c = np.zeros(m, dtype=bool)
    seen_v = {v}
    frontier = deque()
    for c in var_adj[v]:
        seen_c[c] = True
        frontier.append(c)
    last = np.nonzero(seen_c)[0]
    while True:
        nxt = deque()
        for c in frontier:
            for u in chk_adj[c]:
                if u in seen_v:
                    continue
                seen_v.add(u)
                for c2 in var_adj[u]:
                    if not seen_c[c2]:
                        seen_c[c2] = True
                        nxt.append(c2)
        if not nxt:
            # every reachable check is covered: pick among unreachable ones if any
            free = np.nonzero(~seen_c)[0]
            return free if free.size else last
        if seen_c.all():
            # the deepest layer is the farthest set
            return np.fromiter(nxt, dtype=np.int64)
        last = np.fromiter(nxt, dtype=np.int64)
        frontier = nxt


def toy_code() -> ParityCheck:
    """The bundled (3, 6)-regular rate-1/2 PEG code, n = 2000."""
    with resources.as_file(resources.files("tfpack") / "data" / "peg_n2000_r05.alist") as p:
        return read_alist(p)


@dataclass
class SystematicEncoder:
    """Encoder from a GF(2) reduction of H: parity bits = P @ info (mod 2)."""

    H: ParityCheck
    info_cols: np.ndarray = field(init=False)
    parity_cols: np.ndarray = field(init=False)
    P: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = self.H.dense().astype(bool)
        m, n = A.shape
        pivots = []
        r = 0
        for col in range(n):
            if r == m:
                break
            rows = np.nonzero(A[r:, col])[0]
            if rows.size == 0:
                continue
            p = r + rows[0]
            if p != r:
                A[[r, p]] = A[[p, r]]
            hit = np.nonzero(A[:, col])[0]
            hit = hit[hit != r]
            A[hit] ^= A[r]
            pivots.append(col)
            r += 1
        A = A[:r]
        self.parity_cols = np.array(pivots, dtype=np.int64)
        self.info_cols = np.setdiff1d(np.arange(n), self.parity_cols)
        self.P = A[:, self.info_cols].astype(np.uint8)

    @property
    def k(self) -> int:
        return self.info_cols.size

    def encode(self, info: np.ndarray) -> np.ndarray:
        info = np.atleast_2d(np.asarray(info, dtype=np.uint8))
        if info.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} information bits per codeword")
        cw = np.zeros(info.shape[:-1] + (self.H.n,), dtype=np.uint8)
        cw[..., self.info_cols] = info
        cw[..., self.parity_cols] = (info.astype(np.int64) @ self.P.T.astype(np.int64)) % 2
        return cw


# -- belief propagation -----------------------------------------------------

def _edge_table(H: ParityCheck) -> tuple[np.ndarray, np.ndarray]:
    dmax = max(r.size for r in H.checks)
    cols = np.zeros((H.m, dmax), dtype=np.int64)
    deg = np.array([r.size for r in H.checks], dtype=np.int64)
    for i, r in enumerate(H.checks):
        cols[i, : r.size] = r
    return cols, deg


@dataclass
class DecoderState:
    """Check-to-variable messages kept between calls (turbo operation)."""

    R: np.ndarray


@dataclass
class DecodeResult:
    bits: np.ndarray
    extrinsic: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    state: DecoderState = field(repr=False, default=None)


def ldpc_decode(llrs: np.ndarray, H: ParityCheck, inner_iters: int = 20,
                state: DecoderState | None = None, min_sum: bool = False,
                early_stop: bool = True) -> DecodeResult:
    """Row-layered sum-product decoding of one or more codewords.

    Parameters
    ----------
    llrs : ndarray, shape (n,) or (batch, n)
        Channel LLRs.
    state : DecoderState, optional
        Messages from a previous call; decoding resumes from them.

    Returns
    -------
    DecodeResult
        Hard bits, extrinsic LLRs (posterior minus channel input), per-codeword
        convergence flag (zero syndrome) and iterations used.
    """
    llrs = np.asarray(llrs, dtype=float)
    single = llrs.ndim == 1
    L_in = np.atleast_2d(llrs)
    if L_in.shape[-1] != H.n:
        raise ValueError(f"expected {H.n} LLRs per codeword, got {L_in.shape[-1]}")
    if inner_iters < 1:
        raise ValueError("inner_iters must be >= 1")
    cols, deg = _edge_table(H)
    nb = L_in.shape[0]
    R = np.zeros((nb, H.m, cols.shape[1])) if state is None else state.R.copy()
    if R.shape != (nb, H.m, cols.shape[1]):
        raise ValueError("decoder state does not match the batch")
    post = np.empty((nb, H.n))
    iters = np.zeros(nb, dtype=np.int64)
    conv = np.zeros(nb, dtype=np.bool_)
    ldpc_layered(np.ascontiguousarray(L_in), cols, deg, R, post, inner_iters, early_stop, min_sum, iters, conv)
    bits = (post < 0).astype(np.uint8)
    ext = post - L_in
    if single:
        return DecodeResult(bits[0], ext[0], conv[:1].copy(), iters[:1].copy(), DecoderState(R))
    return DecodeResult(bits, ext, conv, iters, DecoderState(R))


# -- bit/symbol conversion ---------------------------------------------------

def _label_bits(c: Constellation) -> np.ndarray:
    """(P, q) bits of the Gray label of each PAM position, MSB first."""
    return c.pam_labels()


def symbol_ext_to_bit_llrs(log_ext: np.ndarray, prior_llrs: np.ndarray | None, c: Constellation) -> np.ndarray:
    """Per-quadrature symbol extrinsics (2, K, P) to bit extrinsic LLRs.

    Output has shape (K, bits_per_symbol) in I-then-Q label order. Each bit's
    LLR uses the priors of the other bits of the same PAM label but not its own.
    """
    lab = _label_bits(c)
    q = c.bits_per_quadrature
    K = log_ext.shape[1]
    out = np.zeros((K, 2 * q))
    pri = None if prior_llrs is None else prior_llrs.reshape(K, 2, q)
    for quad in range(2):
        metric = log_ext[quad]
        if pri is not None:
            # log P(bit = label bit) up to a per-bit constant: -lambda * b
            lp = -(pri[:, quad, None, :] * lab[None, :, :])
        for b in range(q):
            mtr = metric.copy()
            if pri is not None:
                mtr = mtr + lp.sum(axis=-1) - lp[..., b]
            zero = lab[:, b] == 0
            out[:, quad * q + b] = (np.logaddexp.reduce(mtr[:, zero], axis=-1)
                                    - np.logaddexp.reduce(mtr[:, ~zero], axis=-1))
    return np.clip(out, -_LLR_CLIP, _LLR_CLIP)


def bit_llrs_to_symbol_priors(llrs: np.ndarray, c: Constellation) -> np.ndarray:
    """Bit LLRs (K, bits_per_symbol) to per-quadrature PAM priors (2, K, P)."""
    lab = _label_bits(c)
    q = c.bits_per_quadrature
    K = llrs.shape[0]
    l = np.clip(llrs, -_LLR_CLIP, _LLR_CLIP).reshape(K, 2, q)
    # log P(b) = -log(1 + exp(-lambda)) for b = 0 and -log(1 + exp(lambda)) for b = 1
    lp0 = -np.logaddexp(0, -l)
    lp1 = -np.logaddexp(0, l)
    out = np.empty((2, K, c.P))
    for quad in range(2):
        s = np.where(lab[None, :, :] == 0, lp0[:, quad, None, :], lp1[:, quad, None, :]).sum(axis=-1)
        s -= s.max(axis=-1, keepdims=True)
        p = np.exp(s)
        out[quad] = p / p.sum(axis=-1, keepdims=True)
    return out


# -- turbo loop ---------------------------------------------------------------

@dataclass(frozen=True)
class TurboConfig:
    max_iterations: int = 50
    inner_iters: int = 20
    early_stop: bool = True
    min_sum: bool = False

    def __post_init__(self):
        if self.max_iterations < 1 or self.inner_iters < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass(frozen=True)
class CodedMapping:
    """Codewords -> scrambled, interleaved bit stream -> symbols of one or more streams.

    The scrambler makes the transmitted symbols i.u.d. even when the
    codewords are all zero.
    """

    n_codewords: int
    n: int
    perm: np.ndarray
    scramble: np.ndarray

    @property
    def n_bits(self) -> int:
        return self.n_codewords * self.n

    def to_stream(self, codewords: np.ndarray) -> np.ndarray:
        flat = np.asarray(codewords, dtype=np.uint8).reshape(-1)
        return flat[self.perm] ^ self.scramble

    def from_stream_llrs(self, llrs: np.ndarray) -> np.ndarray:
        l = np.where(self.scramble == 1, -llrs, llrs)
        out = np.empty_like(l)
        out[self.perm] = l
        return out.reshape(self.n_codewords, self.n)

    def to_stream_llrs(self, llrs: np.ndarray) -> np.ndarray:
        l = np.asarray(llrs).reshape(-1)[self.perm]
        return np.where(self.scramble == 1, -l, l)


def make_mapping(n_codewords: int, n: int, seed: int) -> CodedMapping:
    N = n_codewords * n
    perm = make_rng(seed, stream=11).permutation(N)
    scr = make_rng(seed, stream=12).integers(0, 2, N, dtype=np.uint8)
    return CodedMapping(n_codewords, n, perm, scr)


def stream_to_symbols(bits: np.ndarray, c: Constellation, n_streams: int = 1) -> np.ndarray:
    """Bit stream to complex symbols, shape (n_streams, K)."""
    bps = c.bits_per_symbol
    if bits.size % (bps * n_streams):
        raise ValueError("bit stream does not fill a whole number of symbols per stream")
    idx = bits_to_symbols(bits, c)
    return c.points[idx].reshape(n_streams, -1)


@dataclass
class TurboResult:
    bits: np.ndarray                 # (n_codewords, n) decoded codewords
    iterations: int
    converged: np.ndarray
    trace: list                      # per outer iteration BER (when a reference is given)


def turbo_detect_decode(y: np.ndarray, s: ShortenerSolution, c: Constellation, H: ParityCheck,
                        cfg: TurboConfig, mapping: CodedMapping,
                        reference: np.ndarray | None = None) -> TurboResult:
    """Iterate BCJR detection and LDPC decoding with extrinsic exchange.

    y : received MF-domain samples, shape (K,) or (n_streams, K); the bit
        stream fills streams in order.
    reference : transmitted codewords, used only for the BER trace.
    """
    y = np.atleast_2d(np.asarray(y))
    n_streams, K = y.shape
    bps = c.bits_per_symbol
    if n_streams * K * bps != mapping.n_bits:
        raise ValueError("received length does not match the coded mapping")
    if mapping.n != H.n:
        raise ValueError("mapping and parity-check lengths differ")
    z = [shortener_output(yy, s) for yy in y]
    prior_stream = np.zeros(mapping.n_bits)
    state = None
    trace = []
    bits = None
    conv = np.zeros(mapping.n_codewords, dtype=bool)
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        det_llr = np.empty(mapping.n_bits)
        for st in range(n_streams):
            sl = slice(st * K * bps, (st + 1) * K * bps)
            pl = prior_stream[sl].reshape(K, bps)
            priors = bit_llrs_to_symbol_priors(pl, c) if it > 1 else None
            post = detect_statistics(z[st], s.g_r, s.L_r, c, priors)
            det_llr[sl] = symbol_ext_to_bit_llrs(post.log_ext, pl if it > 1 else None, c).reshape(-1)
        res = ldpc_decode(mapping.from_stream_llrs(det_llr), H, cfg.inner_iters, state,
                          cfg.min_sum, early_stop=cfg.early_stop)
        state = res.state
        bits = res.bits
        conv = res.converged
        if reference is not None:
            trace.append(float(np.mean(bits != reference)))
        prior_stream = mapping.to_stream_llrs(res.extrinsic)
        if cfg.early_stop and conv.all():
            break
    return TurboResult(bits, it, conv, trace)


def measure_ber(decoded: np.ndarray, reference: np.ndarray) -> tuple[float, int]:
    """Bit error rate and number of compared bits."""
    d = np.asarray(decoded).reshape(-1)
    r = np.asarray(reference).reshape(-1)
    if d.size != r.size:
        raise ValueError(f"length mismatch: {d.size} vs {r.size}")
    if d.size == 0:
        raise ValueError("no bits to compare")
    errors = int(np.count_nonzero(d != r))
    return errors / d.size, d.size


# -- AWGN coded runs ----------------------------------------------------------

def awgn_coded_run(H: ParityCheck, c: Constellation, snr_db: float, n_codewords: int, seed: int,
                   cfg: TurboConfig = TurboConfig(), encoder: SystematicEncoder | None = None,
                   batch: int = 250) -> tuple[int, int, list]:
    """Coded transmission over the ISI-free AWGN channel y = x + n.

    SNR is E_s / (2 N0) with E{|n|^2} = 2 N0 and unit-energy symbols.
    Returns (bit errors, bits compared, mean per-iteration BER trace).
    """
    N0 = 10 ** (-snr_db / 10) / 2
    s = channel_shorten(UngerboeckModel(np.array([1.0]), N0), 0)
    errors = 0
    total = 0
    traces = []
    done = 0
    b = 0
    while done < n_codewords:
        nb = min(batch, n_codewords - done)
        if (nb * H.n) % c.bits_per_symbol:
            raise ValueError("codeword batch does not fill whole symbols")
        rng = make_rng(seed, stream=20000 + 3 * b)
        if encoder is not None:
            cw = encoder.encode(rng.integers(0, 2, (nb, encoder.k), dtype=np.uint8))
        else:
            cw = np.zeros((nb, H.n), dtype=np.uint8)
        mp = make_mapping(nb, H.n, seed + 1_000_003 * (b + 1))
        x = stream_to_symbols(mp.to_stream(cw), c)
        nr = make_rng(seed, stream=20001 + 3 * b)
        y = x + np.sqrt(N0) * (nr.standard_normal(x.shape) + 1j * nr.standard_normal(x.shape))
        res = turbo_detect_decode(y, s, c, H, cfg, mp, reference=cw)
        errors += int(np.count_nonzero(res.bits != cw))
        total += cw.size
        tr = res.trace + [res.trace[-1]] * (cfg.max_iterations - len(res.trace))
        traces.append(np.array(tr) * nb)
        done += nb
        b += 1
    mean_trace = (np.sum(traces, axis=0) / done).tolist()
    return errors, total, mean_trace


def find_threshold(H: ParityCheck, c: Constellation, snr_grid_db, n_codewords: int, seed: int,
                   cfg: TurboConfig = TurboConfig(), encoder: SystematicEncoder | None = None,
                   target_ber: float = 1e-2) -> float:
    """Lowest grid SNR (dB) whose coded BER is below ``target_ber``."""
    for snr in sorted(snr_grid_db):
        e, t, _ = awgn_coded_run(H, c, snr, n_codewords, seed, cfg, encoder)
        log.info("threshold scan: %.2f dB -> BER %.3g", snr, e / t)
        if e / t < target_ber:
            return float(snr)
    raise ValueError("no grid SNR reaches the target BER")
