"""Compiled inner loops: log-domain BCJR on a PAM trellis and the LMS butterfly."""
import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def _lse(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True)
def bcjr_pam(z, g, levels, logprior):
    """Forward-backward on the Ungerboeck metric of one real PAM stream.

    Branch metric for symbol a at step k with past symbols s_1..s_L:
        2 a z_k - g_0 a^2 - 2 a sum_i g_i s_i + log P_k(a)
    Past symbols before k = 0 are zero (masked), so the sum of the metrics
    equals the unnormalized auxiliary log-likelihood exactly.

    Returns (log_app, log_ext, log_qp) with log_app/log_ext normalized per step.
    """
    K = z.shape[0]
    P = levels.shape[0]
    L = g.shape[0] - 1
    S = 1
    for _ in range(L):
        S *= P
    PL1 = S // P if L > 0 else 1

    # isi[m, s]: sum over the first m past symbols held in state s
    isi = np.zeros((L + 1, S))
    for s in range(S):
        acc = 0.0
        rem = s
        for i in range(1, L + 1):
            d = rem % P
            rem //= P
            acc += g[i] * levels[d]
            isi[i, s] = acc
    # next state for (s, a)
    nxt = np.zeros((S, P), dtype=np.int64)
    for s in range(S):
        for a in range(P):
            nxt[s, a] = a + P * (s % PL1) if L > 0 else 0

    alpha = np.empty((K + 1, S))
    for s in range(S):
        alpha[0, s] = -np.log(S)
    log_qp = 0.0
    gam = np.empty((S, P))
    for k in range(K):
        m = k if k < L else L
        for s in range(S):
            for a in range(P):
                lv = levels[a]
                gam[s, a] = 2 * lv * z[k] - g[0] * lv * lv - 2 * lv * isi[m, s] + logprior[k, a]
        row = np.full(S, NEG_INF)
        for s in range(S):
            if alpha[k, s] == NEG_INF:
                continue
            for a in range(P):
                row[nxt[s, a]] = _lse(row[nxt[s, a]], alpha[k, s] + gam[s, a])
        c = NEG_INF
        for s in range(S):
            c = _lse(c, row[s])
        for s in range(S):
            alpha[k + 1, s] = row[s] - c
        log_qp += c

    log_app = np.empty((K, P))
    log_ext = np.empty((K, P))
    beta = np.zeros(S)
    newb = np.empty(S)
    for k in range(K - 1, -1, -1):
        m = k if k < L else L
        app = np.full(P, NEG_INF)
        ext = np.full(P, NEG_INF)
        for s in range(S):
            acc = NEG_INF
            for a in range(P):
                lv = levels[a]
                chan = 2 * lv * z[k] - g[0] * lv * lv - 2 * lv * isi[m, s]
                b = beta[nxt[s, a]]
                acc = _lse(acc, chan + logprior[k, a] + b)
                if alpha[k, s] != NEG_INF:
                    app[a] = _lse(app[a], alpha[k, s] + chan + logprior[k, a] + b)
                    ext[a] = _lse(ext[a], alpha[k, s] + chan + b)
            newb[s] = acc
        ca = NEG_INF
        ce = NEG_INF
        for a in range(P):
            ca = _lse(ca, app[a])
            ce = _lse(ce, ext[a])
        for a in range(P):
            log_app[k, a] = app[a] - ca
            log_ext[k, a] = ext[a] - ce
        cb = NEG_INF
        for s in range(S):
            cb = _lse(cb, newb[s])
        for s in range(S):
            beta[s] = newb[s] - cb
    return log_app, log_ext, log_qp


@njit(cache=True)
def ffe_butterfly(u, taps, target, adapt, mu, sps, out, check_every, max_ratio, ref_power):
    """2x2 fractionally spaced FFE with LMS updates where ``adapt`` is set.

    out[p, k] = sum_q sum_n taps[p, q, n] * u[q, (sps*k + c - n) mod N]
    Returns -1 on success or the symbol index where divergence was detected.
    """
    N = u.shape[1]
    T = taps.shape[2]
    c = (T - 1) // 2
    K = out.shape[1]
    win = 0.0
    cnt = 0
    for k in range(K):
        base = sps * k + c
        for p in range(2):
            acc = 0j
            for q in range(2):
                for n in range(T):
                    acc += taps[p, q, n] * u[q, (base - n) % N]
            out[p, k] = acc
        if adapt[k]:
            for p in range(2):
                e = target[p, k] - out[p, k]
                for q in range(2):
                    for n in range(T):
                        taps[p, q, n] += mu * e * np.conj(u[q, (base - n) % N])
        win += (out[0, k].real ** 2 + out[0, k].imag ** 2 + out[1, k].real ** 2 + out[1, k].imag ** 2) / 2
        cnt += 1
        if cnt == check_every:
            if not np.isfinite(win) or win / cnt > max_ratio * ref_power:
                return k
            win = 0.0
            cnt = 0
    return -1


@njit(cache=True)
def ldpc_layered(llr_in, cols, deg, R, post, max_iter, early_stop, min_sum, iters, conv):
    """Row-layered sum-product (or min-sum) decoding, one codeword per row of llr_in.

    cols (m, dmax) holds the column indices of each check (first deg[i] valid).
    R (batch, m, dmax) are check-to-variable messages, updated in place; post
    receives the posterior LLRs.
    """
    nb, n = llr_in.shape
    m, dmax = cols.shape
    Q = np.empty(dmax)
    t = np.empty(dmax)
    pre = np.empty(dmax + 1)
    clip_t = 1 - 1e-15
    for b in range(nb):
        for j in range(n):
            post[b, j] = llr_in[b, j]
        for i in range(m):
            for e in range(deg[i]):
                post[b, cols[i, e]] += R[b, i, e]
        ok = False
        it = 0
        while it < max_iter:
            it += 1
            for i in range(m):
                d = deg[i]
                for e in range(d):
                    Q[e] = post[b, cols[i, e]] - R[b, i, e]
                if min_sum:
                    sgn = 1.0
                    m1 = np.inf
                    m2 = np.inf
                    arg = -1
                    for e in range(d):
                        a = abs(Q[e])
                        if Q[e] < 0:
                            sgn = -sgn
                        if a < m1:
                            m2 = m1
                            m1 = a
                            arg = e
                        elif a < m2:
                            m2 = a
                    for e in range(d):
                        s_e = sgn * (-1.0 if Q[e] < 0 else 1.0)
                        mag = m2 if e == arg else m1
                        R[b, i, e] = s_e * mag
                else:
                    for e in range(d):
                        q = Q[e]
                        if q > 50.0:
                            q = 50.0
                        elif q < -50.0:
                            q = -50.0
                        t[e] = np.tanh(q / 2)
                    pre[0] = 1.0
                    for e in range(d):
                        pre[e + 1] = pre[e] * t[e]
                    suf = 1.0
                    for e in range(d - 1, -1, -1):
                        v = pre[e] * suf
                        if v > clip_t:
                            v = clip_t
                        elif v < -clip_t:
                            v = -clip_t
                        R[b, i, e] = 2 * np.arctanh(v)
                        suf *= t[e]
                for e in range(d):
                    post[b, cols[i, e]] = Q[e] + R[b, i, e]
            ok = True
            for i in range(m):
                par = 0
                for e in range(deg[i]):
                    if post[b, cols[i, e]] < 0:
                        par ^= 1
                if par:
                    ok = False
                    break
            if ok and early_stop:
                break
        iters[b] = it
        conv[b] = ok
