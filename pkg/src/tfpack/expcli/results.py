"""
Result rows and their persistence: results.csv, timing.csv, the run manifest
and the per-figure CSV files.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .. import __version__
from ..infomax import delta_vs_reference

ROW_SCHEMA_VERSION = 1

# scenario id used as the baseline of the relative-SE file
REFERENCE_SCENARIO = "NyquistWDM-QAM16"


@dataclass(frozen=True)
class ResultRow:
    """One operating point. Optional numeric fields are None when the point failed."""

    scenario: str
    system: str
    modulation: str
    launch_dbm_per_carrier: float
    F_norm: float
    B_norm: float
    B_R_norm: float
    seed: int
    n_spans: int | None = None
    distance_km: float | None = None
    snr_db: float | None = None
    ir_x: float | None = None
    ir_y: float | None = None
    se: float | None = None
    ci_rel: float | None = None
    ber: float | None = None
    ber_bits: int | None = None
    status: str = "ok"
    error: str = ""
    runtime_s: float | None = None

    @property
    def usable(self) -> bool:
        return self.status != "failed" and self.se is not None and math.isfinite(self.se)

    def sort_key(self) -> tuple:
        return (self.scenario, self.distance_km or 0.0, self.launch_dbm_per_carrier,
                self.F_norm, self.B_norm, self.B_R_norm)


# wall-clock time is kept out of results.csv so the file is reproducible byte for byte
RESULT_COLUMNS = ["schema_version"] + [f.name for f in fields(ResultRow) if f.name != "runtime_s"]
TIMING_COLUMNS = ["scenario", "distance_km", "launch_dbm_per_carrier", "F_norm", "B_norm",
                  "B_R_norm", "runtime_s"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def best_per_power(rows: list[ResultRow]) -> list[ResultRow]:
    """Highest-SE grid point for every (scenario, distance, power)."""
    best: dict = {}
    for r in rows:
        if not r.usable:
            continue
        key = (r.scenario, r.distance_km, r.launch_dbm_per_carrier)
        if key not in best or r.se > best[key].se:
            best[key] = r
    return sorted(best.values(), key=ResultRow.sort_key)


def best_per_distance(rows: list[ResultRow]) -> list[ResultRow]:
    """Maximum SE over power and grid for every (scenario, distance)."""
    best: dict = {}
    for r in best_per_power(rows):
        key = (r.scenario, r.distance_km)
        if key not in best or r.se > best[key].se:
            best[key] = r
    return sorted(best.values(), key=ResultRow.sort_key)


def delta_rows(rows: list[ResultRow], reference: str = REFERENCE_SCENARIO) -> list[list]:
    peaks = best_per_distance(rows)
    ref = {r.distance_km: r.se for r in peaks if r.scenario == reference}
    out = []
    for r in peaks:
        if r.scenario == reference or r.distance_km not in ref:
            continue
        out.append([r.scenario, reference, r.n_spans, r.distance_km, r.se, ref[r.distance_km],
                    delta_vs_reference(r.se, ref[r.distance_km])])
    return out


def emit_results(rows: list[ResultRow], out_dir, cfg=None) -> dict[str, Path]:
    """Write every output file of a run; returns the paths by role.

    Row order in the files does not depend on the order of ``rows``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    rows = sorted(rows, key=ResultRow.sort_key)
    paths = {k: out / f for k, f in (("results", "results.csv"), ("timing", "timing.csv"),
                                     ("manifest", "manifest.json"),
                                     ("se_vs_snr", "fig_se_vs_snr.csv"),
                                     ("se_vs_distance", "fig_se_vs_distance.csv"),
                                     ("delta_vs_distance", "fig_delta_vs_distance.csv"))}
    _write_csv(paths["results"], RESULT_COLUMNS,
               [[ROW_SCHEMA_VERSION] + [getattr(r, c) for c in RESULT_COLUMNS[1:]] for r in rows])
    _write_csv(paths["timing"], TIMING_COLUMNS, [[getattr(r, c) for c in TIMING_COLUMNS] for r in rows])
    fig_cols = ["scenario", "n_spans", "distance_km", "launch_dbm_per_carrier", "snr_db", "se",
                "F_norm", "B_norm", "B_R_norm"]
    _write_csv(paths["se_vs_snr"], fig_cols,
               [[getattr(r, c) for c in fig_cols] for r in best_per_power(rows)])
    _write_csv(paths["se_vs_distance"], fig_cols,
               [[getattr(r, c) for c in fig_cols] for r in best_per_distance(rows)])
    _write_csv(paths["delta_vs_distance"],
               ["scenario", "reference", "n_spans", "distance_km", "se", "se_ref", "delta"],
               delta_rows(rows))
    manifest = {
        "schema_version": ROW_SCHEMA_VERSION,
        "package": "tfpack",
        "version": __version__,
        "seed": getattr(cfg, "seed", None),
        "profile": getattr(cfg, "profile", None),
        "config": cfg.echo() if cfg is not None else None,
        "n_rows": len(rows),
        "n_failed": sum(r.status == "failed" for r in rows),
        "files": sorted(p.name for k, p in paths.items() if k != "manifest"),
    }
    try:
        paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {paths['manifest']}: {exc}") from exc
    return paths


def rows_as_dicts(rows: list[ResultRow]) -> list[dict]:
    return [asdict(r) for r in rows]
