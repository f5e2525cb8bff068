"""
Achievable information rate under mismatched detection, spectral efficiency,
SNR bookkeeping and the frequency-spacing / filter-bandwidth search.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .isidet import (ShortenerSolution, detect_statistics, known_symbol_priors,
                     loglik_from_statistics, shortener_output)
from .sigkit import Constellation

log = logging.getLogger(__name__)


@dataclass
class IRResult:
    """Achievable rate estimate for one operating point.

    ir is bits per channel use per polarization (mean over the polarizations
    evaluated), se aggregates both polarizations.
    """

    ir: float
    ir_pol: tuple
    se: float
    ci_rel: float
    blocks: int
    block_ir: np.ndarray = field(repr=False, default=None)
    operating_point: dict = field(default_factory=dict)
    flagged: bool = False


def spectral_efficiency(ir_x: float, ir_y: float, F: float, T: float) -> float:
    """(ir_x + ir_y) / (F T), b/s/Hz."""
    if not (F > 0 and T > 0):
        raise ValueError("F and T must be positive")
    return (ir_x + ir_y) / (F * T)


def snr_calibrate(P_c: float, N0: float, F: float) -> float:
    """SNR per carrier in dB: P_c / (2 N0 F)."""
    if not (P_c > 0 and N0 > 0 and F > 0):
        raise ValueError("P_c, N0 and F must be positive")
    return float(10 * np.log10(P_c / (2 * N0 * F)))


def delta_vs_reference(eta: float, eta_ref: float) -> float:
    if not eta_ref > 0:
        raise ValueError("reference SE must be positive")
    return (eta - eta_ref) / eta_ref


def _block_ir(z, x, s: ShortenerSolution, c: Constellation, guard: int) -> float:
    K = x.size
    known = np.zeros(K, dtype=bool)
    if guard:
        known[:guard] = True
        known[K - guard:] = True
    pri = known_symbol_priors(x, c, known) if guard else None
    post = detect_statistics(z, s.g_r, s.L_r, c, pri)
    lq = loglik_from_statistics(z, x, s.g_r)
    return (lq - post.log_qp) / ((K - 2 * guard) * np.log(2))


def estimate_ir(x: np.ndarray, y: np.ndarray, s: ShortenerSolution, c: Constellation,
                block_len: int, guard: int | None = None, F: float | None = None,
                T: float | None = None, ci_target: float = 0.02,
                operating_point: dict | None = None) -> IRResult:
    """Simulation-based lower bound on the information rate of one carrier.

    Parameters
    ----------
    x, y : ndarray, shape (K,) or (n_pol, K)
        Transmitted symbols and the aligned received MF-domain sequence.
    block_len : int
        Symbols per block (>= 1000); one rate sample per block.
    guard : int, optional
        Known symbols at each block edge; defaults to ``2 * L_r``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    if x.shape != y.shape:
        raise ValueError(f"x and y shapes differ: {x.shape} vs {y.shape}")
    if block_len < 1000:
        raise ValueError("block_len must be at least 1000 symbols")
    K = x.shape[1]
    nb = K // block_len
    if nb < 1:
        raise ValueError("sequence shorter than one block")
    guard = 2 * s.L_r if guard is None else guard
    per_pol = []
    blocks = []
    for xp, yp in zip(x, y):
        z = shortener_output(yp, s)
        vals = np.array([_block_ir(z[b * block_len:(b + 1) * block_len],
                                   xp[b * block_len:(b + 1) * block_len], s, c, guard)
                         for b in range(nb)])
        blocks.append(vals)
        per_pol.append(float(vals.mean()))
    blk = np.mean(blocks, axis=0)
    mean = float(blk.mean())
    if nb > 1 and mean > 0:
        ci_rel = float(1.96 * blk.std(ddof=1) / np.sqrt(nb) / mean)
    else:
        ci_rel = float("inf") if mean <= 0 else float("nan")
    ir_pol = tuple(max(v, 0.0) for v in per_pol)
    ir = float(np.mean(ir_pol))
    if F is not None and T is not None:
        pols = ir_pol if len(ir_pol) == 2 else (ir_pol[0], ir_pol[0])
        se = spectral_efficiency(pols[0], pols[1], F, T)
    else:
        se = float("nan")
    flagged = not (ci_rel < ci_target)
    if flagged:
        log.info("confidence interval %.3g above target %.3g", ci_rel, ci_target)
    return IRResult(ir, ir_pol, se, ci_rel, nb, blk, dict(operating_point or {}), flagged)


def pam_mutual_information(levels: np.ndarray, sigma2: float, n_points: int = 80) -> float:
    """I.u.d. PAM mutual information over real AWGN of variance sigma2 (Gauss-Hermite)."""
    t, wts = np.polynomial.hermite.hermgauss(n_points)
    levels = np.asarray(levels, dtype=float)
    P = levels.size
    total = 0.0
    for a in levels:
        yv = a + np.sqrt(2 * sigma2) * t
        d = -(yv[:, None] - levels[None, :]) ** 2 / (2 * sigma2) + (yv - a)[:, None] ** 2 / (2 * sigma2)
        m = d.max(axis=1, keepdims=True)
        lr = np.log2(np.exp(d - m).sum(axis=1)) + m[:, 0] / np.log(2)
        total += np.sum(wts * lr) / np.sqrt(np.pi)
    return float(np.log2(P) - total / P)


@dataclass(frozen=True)
class SweepGrid:
    """Operating points in units of 1/T (F, B, B_R) and dBm per carrier (power).

    TFP mode ties B_R = B. Nyquist-WDM mode sweeps B_R independently when
    ``B_R_values`` is given, optionally ties F = B, and rejects F < 1/T.
    """

    F_values: tuple
    B_values: tuple
    power_values: tuple
    mode: str = "TFP"
    B_R_values: tuple | None = None
    tie_spacing: bool = False

    def __post_init__(self):
        for name in ("F_values", "B_values", "power_values", "B_R_values"):
            raw = getattr(self, name)
            if raw is None:
                continue
            vals = tuple(float(v) for v in np.atleast_1d(raw))
            if not vals:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, vals)
        if self.mode not in ("TFP", "NyquistWDM", "RxDuobinary"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        if self.mode == "NyquistWDM":
            spacings = self.B_values if self.tie_spacing else self.F_values
            if min(spacings) < 1.0 - 1e-12:
                raise ValueError("Nyquist-WDM sweeps need F >= 1/T")

    def points(self) -> list[tuple[float, float, float]]:
        """(F, B, B_R) triples in units of 1/T."""
        pts = []
        for B in self.B_values:
            Fs = (B,) if self.tie_spacing else self.F_values
            BRs = (B,) if self.mode == "TFP" or self.B_R_values is None else self.B_R_values
            pts += [(F, B, BR) for F in Fs for BR in BRs]
        return pts


@dataclass
class FbOptimum:
    eta_max: float
    best: dict
    surface: list
    per_power: dict
    failures: list


def optimize_fb(grid: SweepGrid | list, scenario: Callable[..., IRResult],
                points: list | None = None) -> FbOptimum:
    """Grid search of SE over (F, B) for every launch power.

    ``scenario(F, B, B_R, power)`` runs the full pipeline for one point and
    returns an IRResult with ``se`` set; exceptions mark the point failed.
    """
    pts = points if points is not None else grid.points()
    surface, failures = [], []
    per_power = {}
    for p in grid.power_values:
        best = None
        for F, B, B_R in pts:
            try:
                res = scenario(F, B, B_R, p)
            except Exception as exc:  # noqa: BLE001 - a failed point is recorded, not fatal
                log.warning("grid point F=%s B=%s P=%s failed: %s", F, B, p, exc)
                failures.append({"F": F, "B": B, "B_R": B_R, "power": p, "error": repr(exc)})
                continue
            row = {"F": F, "B": B, "B_R": B_R, "power": p, "se": res.se, "result": res}
            surface.append(row)
            if best is None or res.se > best["se"]:
                best = row
        if best is not None:
            per_power[p] = best
    if not per_power:
        return FbOptimum(float("nan"), {}, surface, per_power, failures)
    top = max(per_power.values(), key=lambda r: r["se"])
    return FbOptimum(top["se"], top, surface, per_power, failures)
