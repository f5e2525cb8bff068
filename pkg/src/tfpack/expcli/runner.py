"""
Single operating-point pipeline and experiment sweeps.

transmitter -> fiber link -> [DBP] -> front end -> GVD compensation -> FFE
-> channel shortening -> BCJR -> information rate, centre carrier only.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..codedloop import (ParityCheck, SystematicEncoder, TurboConfig, make_mapping,
                         measure_ber, read_alist, toy_code, turbo_detect_decode)
from ..fiberlink import (TABLE1_SPANS_KM, FiberSpan, LinkSpec, SsfmControl, backpropagate,
                         propagate_link, uniform_link)
from ..infomax import IRResult, SweepGrid, estimate_ir, snr_calibrate
from ..isidet import UngerboeckModel, channel_shorten, forney_solution, ungerboeck_taps
from ..rxfront import (FfeState, RxConfig, duobinary_shape, ffe_equalize, front_end,
                       gvd_compensate, mf_target)
from ..sigkit import (Constellation, SymbolFrame, bits_to_symbols, make_constellation, make_frame,
                      make_rng)
from ..txchain import (CarrierPlan, CarrierTransmitter, OpticalFilterSpec, PulseSpec,
                       assemble_superchannel)
from .config import DESK, FULL_BLOCK_BITS, FULL_DATA_BITS, FULL_TRAINING_BITS, load_preset
from .results import ResultRow

log = logging.getLogger(__name__)

SYSTEMS = ("TFP", "NyquistWDM", "RxDuobinary")


def dbm_to_w(p_dbm: float) -> float:
    return 1e-3 * 10 ** (p_dbm / 10)


@dataclass(frozen=True)
class Scenario:
    """Everything fixed across one (F, B, B_R, power) sweep."""

    system: str
    modulation: str
    n_carriers: int
    symbol_time: float
    link: LinkSpec
    pulse: PulseSpec = PulseSpec("RZ50")
    L_r: int = 4
    dbp: bool = False
    n_symbols: int = 100_000
    training_symbols: int = 10_000
    block_symbols: int = 10_000
    seed: int = 0
    ssfm: SsfmControl = SsfmControl()
    ase: bool = True
    filter_order: int = 4
    ffe_taps: int = 25
    ffe_mu: float = 1e-3
    train_passes: int = 4
    sim_sps: int | None = None
    tap_tol: float = 1e-9
    ci_target: float = 0.02

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.training_symbols >= self.n_symbols:
            raise ValueError("training prefix must be shorter than the sequence")
        if self.block_symbols > self.n_symbols - self.training_symbols:
            raise ValueError("block longer than the data part of the sequence")

    @property
    def constellation(self) -> Constellation:
        return make_constellation(self.modulation)

    def samples_per_symbol(self, F: float, B: float) -> int:
        """Simulation oversampling: at least twice the superchannel width, never below 8."""
        if self.sim_sps:
            return self.sim_sps
        width = (self.n_carriers - 1) * F + max(B, 1.0) * 1.5
        sps = int(np.ceil(2 * width))
        return max(sps, 8)


@dataclass
class PointResult:
    F: float
    B: float
    B_R: float
    power_dbm: float
    snr_db: float
    N0: float
    ir: IRResult
    runtime_s: float
    seed: int
    extras: dict = field(default_factory=dict)

    @property
    def se(self) -> float:
        return self.ir.se


@dataclass(frozen=True)
class CodedSpec:
    """LDPC payload carried in the data part of the centre carrier."""

    H: ParityCheck
    n_codewords: int
    turbo: TurboConfig = TurboConfig()
    encoder: SystematicEncoder | None = None

    def symbols_per_pol(self, c: Constellation) -> int:
        n_bits = self.n_codewords * self.H.n
        if n_bits % (2 * c.bits_per_symbol):
            raise ValueError("coded block does not fill whole symbols on both polarizations")
        return n_bits // (2 * c.bits_per_symbol)


def _insert_codewords(sc: Scenario, frame: SymbolFrame, coded: CodedSpec):
    """Overwrite the centre-carrier data symbols with the interleaved codewords."""
    c = sc.constellation
    Kc = coded.symbols_per_pol(c)
    n_tr = sc.training_symbols
    if n_tr + Kc > sc.n_symbols:
        raise ValueError(f"{coded.n_codewords} codewords need {Kc} data symbols per polarization")
    n = coded.H.n
    rng = make_rng(sc.seed, stream=30)
    if coded.encoder is not None:
        cw = coded.encoder.encode(rng.integers(0, 2, (coded.n_codewords, coded.encoder.k), dtype=np.uint8))
    else:
        cw = np.zeros((coded.n_codewords, n), dtype=np.uint8)
    mapping = make_mapping(coded.n_codewords, n, sc.seed)
    idx = bits_to_symbols(mapping.to_stream(cw), c).reshape(2, Kc)
    sym = frame.symbols.copy()
    ctr = sc.n_carriers // 2
    for p in range(2):
        sym[n_tr:n_tr + Kc, ctr, p] = idx[p]
    return SymbolFrame(sym, frame.training_len, frame.seed), cw, mapping


def transmit(sc: Scenario, F: float, B: float, power_dbm: float, frame: SymbolFrame | None = None):
    """Build the superchannel; returns (waveform, frame, transmitter)."""
    c = sc.constellation
    T = sc.symbol_time
    sps = sc.samples_per_symbol(F, B)
    fs = sps / T
    if frame is None:
        frame = make_frame(sc.n_symbols, sc.n_carriers, c, sc.seed, sc.training_symbols)
    tx_filter = OpticalFilterSpec(B / T, sc.filter_order) if B is not None else None
    tx = CarrierTransmitter(sc.pulse, tx_filter, T, fs)
    carriers = []
    for ell in range(sc.n_carriers):
        sx = c.points[frame.symbols[:, ell, 0]]
        sy = c.points[frame.symbols[:, ell, 1]]
        carriers.append(tx.carrier_waveform(sx, sy))
    plan = CarrierPlan(sc.n_carriers, F / T, T, dbm_to_w(power_dbm))
    w = assemble_superchannel(carriers, plan, occupied_bandwidth=max(B, 1.0) / T)
    return w, frame, tx


def receive(sc: Scenario, w, F: float, B_R: float):
    """Front end of the centre carrier at 2 samples/symbol, dispersion removed."""
    cfg = RxConfig(B_R / sc.symbol_time, sc.symbol_time, F / sc.symbol_time, 0, sc.n_carriers,
                   2, sc.filter_order)
    r = front_end(w, cfg)
    if not sc.dbp:
        r = gvd_compensate(r, sc.link)
    return r


def _remove_mmse_bias(y: np.ndarray, ref: np.ndarray, n_tr: int) -> np.ndarray:
    """Undo the gain shrinkage of an MMSE-trained equalizer.

    The trained output behaves like beta * ref + noise with beta < 1; a
    least-squares gain per polarization over the training symbols restores
    unit gain so that the residual is an unbiased noise estimate.
    """
    out = np.empty_like(y)
    for p in range(y.shape[0]):
        t = ref[p, :n_tr]
        beta = np.vdot(t, y[p, :n_tr]) / np.vdot(t, t)
        out[p] = y[p] / beta
    return out


def evaluate_point(sc: Scenario, F: float, B: float, B_R: float, power_dbm: float,
                   coded: CodedSpec | None = None) -> PointResult:
    """Run the full chain for one operating point and estimate the rate.

    With ``coded`` the centre carrier carries LDPC codewords in its data part
    and the turbo detector/decoder reports a post-decoding BER in ``extras``.
    """
    t0 = time.perf_counter()
    c = sc.constellation
    T = sc.symbol_time
    if sc.system == "NyquistWDM" and F < 1.0 - 1e-12:
        raise ValueError("Nyquist-WDM requires F >= 1/T")
    frame = make_frame(sc.n_symbols, sc.n_carriers, c, sc.seed, sc.training_symbols)
    if coded is not None:
        frame, codewords, mapping = _insert_codewords(sc, frame, coded)
    w, frame, tx = transmit(sc, F, B, power_dbm, frame)
    w, N0 = propagate_link(w, sc.link, sc.ssfm, ase=sc.ase)
    if sc.dbp:
        w = backpropagate(w, sc.link, sc.ssfm)
    r = receive(sc, w, F, B_R)

    ctr = sc.n_carriers // 2
    x = np.stack([c.points[frame.symbols[:, ctr, p]] for p in range(2)])
    n_tr = sc.training_symbols
    state = FfeState(sc.ffe_taps, sc.ffe_mu)
    if sc.system == "RxDuobinary":
        target = x
    else:
        g_full = ungerboeck_taps(tx.optical_pulse(), T, tx.sample_rate, tol=sc.tap_tol).g
        g_full = g_full / g_full[len(g_full) // 2].real
        target = mf_target(x, g_full)
    y = ffe_equalize(r, state, target[:, :n_tr], train_passes=sc.train_passes)
    y = _remove_mmse_bias(y, target, n_tr)

    half = slice(n_tr // 2, n_tr)
    if sc.system == "RxDuobinary":
        y = duobinary_shape(y)
        shaped = duobinary_shape(x)
        sigma2 = float(np.mean(np.abs(y[:, half] - shaped[:, half]) ** 2))
        s = forney_solution(np.array([0.5, 0.5]), sigma2)
        model_n0 = sigma2 / 2
    else:
        resid = float(np.mean(np.abs(y[:, half] - target[:, half]) ** 2))
        model_n0 = resid / 2.0      # g normalized to g_0 = 1
        model = UngerboeckModel(g_full, model_n0)
        s = channel_shorten(model, sc.L_r)
    xd = x[:, n_tr:]
    yd = y[:, n_tr:]
    ir = estimate_ir(xd, yd, s, c, sc.block_symbols, F=F / T, T=T, ci_target=sc.ci_target,
                     operating_point={"F": F / T, "B": B / T, "B_R": B_R / T,
                                      "P_c": dbm_to_w(power_dbm)})
    snr = snr_calibrate(dbm_to_w(power_dbm), N0, F / T) if N0 > 0 else float("inf")
    ir.operating_point["snr_db"] = snr
    extras = {"model_n0": model_n0, "L_r": s.L_r,
              "ffe_mse": state.history[-1] if state.history else None}
    if coded is not None:
        Kc = coded.symbols_per_pol(c)
        res = turbo_detect_decode(y[:, n_tr:n_tr + Kc], s, c, coded.H, coded.turbo, mapping,
                                  reference=codewords)
        extras["ber"], extras["ber_bits"] = measure_ber(res.bits, codewords)
        extras["turbo_iterations"] = res.iterations
        extras["ber_trace"] = res.trace
        log.info("coded: BER %.3g over %d bits after %d iterations", extras["ber"],
                 extras["ber_bits"], res.iterations)
    rt = time.perf_counter() - t0
    log.info("%s %s F=%.3f B=%.3f P=%.1f dBm: SE %.3f b/s/Hz (ir %.3f, ci %.2g%%) %.1fs",
             sc.system, sc.modulation, F, B, power_dbm, ir.se, ir.ir, 100 * ir.ci_rel, rt)
    return PointResult(F, B, B_R, power_dbm, snr, N0, ir, rt, sc.seed, extras)


# -- config-driven experiments -------------------------------------------------

def _sequence_lengths(cfg) -> tuple[int, int, int]:
    """(n_symbols, training_symbols, block_symbols) after profile defaults and caps."""
    bpq = cfg.bits_per_symbol // 2
    seq = {"n_symbols": (FULL_DATA_BITS + FULL_TRAINING_BITS) // bpq,
           "training_symbols": FULL_TRAINING_BITS // bpq,
           "block_symbols": FULL_BLOCK_BITS // bpq}
    for key in seq:
        v = getattr(cfg, f"sequence_{key}")
        if v is not None:
            seq[key] = v
        if cfg.profile == "desk":
            seq[key] = min(seq[key], DESK[key])
    return seq["n_symbols"], seq["training_symbols"], seq["block_symbols"]


def span_counts(cfg) -> list[int | None]:
    """Distance sweep as span counts; ``[None]`` means the configured link as is."""
    counts = [int(n) for n in cfg.sweep_n_spans] or [None]
    if cfg.profile == "desk":
        counts = sorted({n if n is None else min(n, DESK["n_spans"]) for n in counts},
                        key=lambda n: -1 if n is None else n)
    return counts


def build_link(cfg, n_spans: int | None = None) -> LinkSpec:
    """Link for the configured preset, truncated or repeated to ``n_spans`` spans."""
    kw = {"dispersion": cfg.link_dispersion, "attenuation": cfg.link_attenuation,
          "gamma": cfg.link_gamma}
    nf = cfg.link_noise_figure
    if cfg.link_preset == "uniform100":
        n = cfg.link_n_spans if n_spans is None else n_spans
        if cfg.profile == "desk":
            n = min(n, DESK["n_spans"])
        return uniform_link(n, cfg.link_span_km, nf, **kw)
    lengths = TABLE1_SPANS_KM if cfg.link_preset == "table1" else tuple(cfg.link_spans_km)
    n = len(lengths) if n_spans is None else n_spans
    if n > len(lengths):
        raise ValueError(f"link has {len(lengths)} spans, {n} requested")
    if cfg.profile == "desk":
        n = min(n, DESK["n_spans"])
    return LinkSpec(tuple(FiberSpan(L, **kw) for L in lengths[:n]), nf)


def scenario_from_config(cfg, n_spans: int | None = None) -> Scenario:
    n_sym, n_tr, blk = _sequence_lengths(cfg)
    desk = cfg.profile == "desk"
    ssfm = SsfmControl(max(cfg.ssfm_max_step, DESK["max_step"]) if desk else cfg.ssfm_max_step,
                       max(cfg.ssfm_max_nl_phase, DESK["max_nl_phase"]) if desk else cfg.ssfm_max_nl_phase,
                       seed=cfg.seed)
    return Scenario(
        system=cfg.system, modulation=cfg.modulation,
        n_carriers=min(cfg.n_carriers, DESK["n_carriers"]) if desk else cfg.n_carriers,
        symbol_time=cfg.symbol_time, link=build_link(cfg, n_spans),
        pulse=PulseSpec(cfg.pulse_kind, cfg.pulse_rolloff), L_r=cfg.L_r, dbp=cfg.dbp,
        n_symbols=n_sym, training_symbols=n_tr, block_symbols=blk, seed=cfg.seed, ssfm=ssfm,
        ase=cfg.link_ase, filter_order=cfg.filter_order, ffe_taps=cfg.ffe_taps, ffe_mu=cfg.ffe_mu,
        train_passes=cfg.ffe_train_passes, sim_sps=cfg.sim_samples_per_symbol or None,
        ci_target=DESK["ci_target"] if desk else 0.02)


def coded_spec(cfg, sc: Scenario) -> CodedSpec | None:
    """LDPC payload for a config with ``coded.enabled``; alist paths resolve from the cwd."""
    if not cfg.coded_enabled:
        return None
    H = toy_code() if cfg.coded_alist == "toy" else read_alist(Path(cfg.coded_alist))
    c = sc.constellation
    n_cw = (sc.n_symbols - sc.training_symbols) * 2 * c.bits_per_symbol // H.n
    if cfg.profile == "desk":
        n_cw = min(n_cw, DESK["coded_codewords"])
    if n_cw < 1:
        raise ValueError(f"data part too short for one {H.n}-bit codeword")
    # dense GF(2) elimination is impractical for long codes; those carry scrambled all-zero words
    encoder = SystematicEncoder(H) if H.n <= _MAX_ENCODER_N else None
    turbo = TurboConfig(cfg.coded_max_iterations, cfg.coded_inner_iters, min_sum=cfg.coded_min_sum)
    return CodedSpec(H, n_cw, turbo, encoder)


_MAX_ENCODER_N = 20_000


def grid_points(cfg) -> list[tuple[float, float, float]]:
    """(F, B, B_R) triples of the config, in units of 1/T."""
    def values(key):
        v = getattr(cfg, key)
        return getattr(cfg, f"sweep_{key}") if v == "sweep" else [v]

    br = values("B_R") if cfg.system != "TFP" else None
    grid = SweepGrid(values("F"), values("B"), cfg.power_dbm, cfg.system, br, cfg.sweep_tie_spacing)
    return grid.points()


@dataclass(frozen=True)
class Job:
    cfg: object
    n_spans: int | None
    F: float
    B: float
    B_R: float
    power_dbm: float


def _run_job(job: Job) -> ResultRow:
    cfg = job.cfg
    base = dict(scenario=cfg.scenario_id, system=cfg.system, modulation=cfg.modulation,
                launch_dbm_per_carrier=job.power_dbm, F_norm=job.F, B_norm=job.B,
                B_R_norm=job.B_R, seed=cfg.seed)
    try:
        sc = scenario_from_config(cfg, job.n_spans)
        base.update(n_spans=len(sc.link.spans), distance_km=sc.link.length)
        pr = evaluate_point(sc, job.F, job.B, job.B_R, job.power_dbm, coded_spec(cfg, sc))
    except Exception as exc:  # noqa: BLE001 - recorded in the row, the run continues
        log.warning("%s F=%s B=%s P=%s failed: %s", cfg.scenario_id, job.F, job.B, job.power_dbm, exc)
        return ResultRow(**base, status="failed", error=f"{type(exc).__name__}: {exc}")
    ir = pr.ir
    pols = ir.ir_pol if len(ir.ir_pol) == 2 else (ir.ir_pol[0], ir.ir_pol[0])
    return ResultRow(**base, snr_db=pr.snr_db, ir_x=pols[0], ir_y=pols[1], se=pr.se,
                     ci_rel=ir.ci_rel, ber=pr.extras.get("ber"), ber_bits=pr.extras.get("ber_bits"),
                     status="ci_above_target" if ir.flagged else "ok", runtime_s=pr.runtime_s)


def experiment_configs(cfg) -> list:
    """The main config followed by its comparison presets on the same link and sweep."""
    shared = {k: v for k, v in cfg.to_flat().items()
              if k.split(".")[0] in _SHARED_GROUPS or k in ("seed", "dbp")}
    out = [cfg]
    for name in cfg.compare:
        out.append(load_preset(name, cfg.profile, extra=shared))
    return out


_SHARED_GROUPS = ("link", "power", "sequence", "ssfm", "sim")


def plan_jobs(cfg) -> list[Job]:
    jobs = []
    for sub in experiment_configs(cfg):
        for n in span_counts(sub):
            for p in sub.power_dbm:
                jobs += [Job(sub, n, F, B, BR, p) for F, B, BR in grid_points(sub)]
    return jobs


def run_experiment(cfg, workers: int | None = None) -> list[ResultRow]:
    """Evaluate every operating point of ``cfg`` (and its comparisons).

    Rows come back in plan order whatever the number of workers. All points
    share the config seed, so grid comparisons use common random numbers.
    """
    jobs = plan_jobs(cfg)
    workers = workers or cfg.workers
    log.info("%d operating points, %d worker(s), profile %s", len(jobs), workers, cfg.profile)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_job, jobs))
    else:
        rows = []
        for i, job in enumerate(jobs, 1):
            log.info("point %d/%d", i, len(jobs))
            rows.append(_run_job(job))
    return rows
