"""
Experiment configuration: TOML files with dotted keys, bundled presets,
desk/full profiles and command-line overrides.

Precedence, lowest first: schema defaults, per-system defaults, preset,
config file, ``--override`` values, then the profile caps.
"""
from __future__ import annotations

import ast
import math
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from ..sigkit import FORMATS

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; message carries file and line context when known."""


# dotted key -> (python type, default); None default means "derived"
_SCHEMA: dict[str, tuple[type | tuple, Any]] = {
    "name": (str, ""),
    "preset": (str, ""),
    "system": (str, "TFP"),
    "modulation": (str, "QPSK"),
    "n_carriers": (int, 8),
    "bit_rate": (float, None),
    "baud": (float, None),
    "pulse.kind": (str, None),
    "pulse.rolloff": (float, 0.2),
    "filter_order": (int, 4),
    "F": ((float, str), "sweep"),
    "B": ((float, str), "sweep"),
    "B_R": ((float, str), None),
    "sweep.F": (list, [0.45, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
    "sweep.B": (list, [0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8, 1.0]),
    "sweep.B_R": (list, []),
    "sweep.tie_spacing": (bool, False),
    "sweep.n_spans": (list, []),
    "power.dbm": (list, [-2.0, 0.0, 2.0, 4.0, 6.0]),
    "link.preset": (str, "table1"),
    "link.spans_km": (list, []),
    "link.n_spans": (int, 10),
    "link.span_km": (float, 100.0),
    "link.noise_figure": (float, None),
    "link.dispersion": (float, 16.63),
    "link.attenuation": (float, 0.23),
    "link.gamma": (float, 1.3),
    "link.ase": (bool, True),
    "dbp": (bool, False),
    "L_r": (int, None),
    "sequence.n_symbols": (int, None),
    "sequence.training_symbols": (int, None),
    "sequence.block_symbols": (int, None),
    "ssfm.max_step": (float, 1.0),
    "ssfm.max_nl_phase": (float, 3e-3),
    "sim.samples_per_symbol": (int, 0),
    "ffe.taps": (int, 25),
    "ffe.mu": (float, 1e-3),
    "ffe.train_passes": (int, 4),
    "coded.enabled": (bool, False),
    "coded.alist": (str, "toy"),
    "coded.max_iterations": (int, 50),
    "coded.inner_iters": (int, 20),
    "coded.min_sum": (bool, False),
    "compare": (list, []),
    "seed": (int, 1),
    "workers": (int, 1),
}

SYSTEM_DEFAULTS = {
    "TFP": {"L_r": 4, "pulse.kind": "RZ50"},
    "NyquistWDM": {"L_r": 2, "pulse.kind": "NRZ"},
    "RxDuobinary": {"L_r": 1, "pulse.kind": "NRZ"},
}

LINK_PRESETS = ("table1", "uniform100", "inline")

# per-system noise figure defaults follow the link preset
_NF_DEFAULT = {"table1": 6.0, "uniform100": 5.0, "inline": 6.0}

# full profile: sequence budget in bits per quadrature
FULL_DATA_BITS = 900_000
FULL_TRAINING_BITS = 100_000
FULL_BLOCK_BITS = 50_000

DESK = {"n_carriers": 3, "n_spans": 5, "n_symbols": 100_000, "training_symbols": 10_000,
        "block_symbols": 10_000, "max_step": 2.0, "max_nl_phase": 0.01, "ci_target": 0.05,
        "coded_codewords": 200}
PROFILES = ("desk", "full")


def _field(key: str) -> str:
    return key.replace(".", "_")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; attribute names are dotted keys with '_'."""

    name: str
    preset: str
    system: str
    modulation: str
    n_carriers: int
    bit_rate: float | None
    baud: float | None
    pulse_kind: str
    pulse_rolloff: float
    filter_order: int
    F: float | str
    B: float | str
    B_R: float | str | None
    sweep_F: list
    sweep_B: list
    sweep_B_R: list
    sweep_tie_spacing: bool
    sweep_n_spans: list
    power_dbm: list
    link_preset: str
    link_spans_km: list
    link_n_spans: int
    link_span_km: float
    link_noise_figure: float
    link_dispersion: float
    link_attenuation: float
    link_gamma: float
    link_ase: bool
    dbp: bool
    L_r: int
    sequence_n_symbols: int | None
    sequence_training_symbols: int | None
    sequence_block_symbols: int | None
    ssfm_max_step: float
    ssfm_max_nl_phase: float
    sim_samples_per_symbol: int
    ffe_taps: int
    ffe_mu: float
    ffe_train_passes: int
    coded_enabled: bool
    coded_alist: str
    coded_max_iterations: int
    coded_inner_iters: int
    coded_min_sum: bool
    compare: list
    seed: int
    workers: int
    profile: str = "full"

    # -- derived quantities -------------------------------------------------
    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(FORMATS[self.modulation])))

    @property
    def symbol_time(self) -> float:
        """T from the per-carrier bit rate (both polarizations) or the baud rate."""
        if self.baud is not None:
            return 1.0 / self.baud
        return 2 * self.bits_per_symbol / self.bit_rate

    @property
    def scenario_id(self) -> str:
        return self.name or f"{self.system}-{self.modulation}"

    def to_flat(self) -> dict[str, Any]:
        out = {}
        for key in _SCHEMA:
            v = getattr(self, _field(key))
            if v is not None:
                out[key] = v
        return out

    def echo(self) -> str:
        """TOML text that loads back to this exact configuration (profile excluded)."""
        return tomli_w.dumps(_nest(self.to_flat()))


def _nest(flat: dict) -> dict:
    out: dict = {}
    for key, v in flat.items():
        parts = key.split(".")
        d = out
        for p in parts[:-1]:
            d = d.setdefault(p, {})
        d[parts[-1]] = v
    return out


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _line_of(text: str, key: str) -> int | None:
    leaf = re.escape(key.split(".")[-1])
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf'\s*("?[\w.]*"?\.)?"?{leaf}"?\s*=', line):
            return i
    return None


def _parse_text(text: str, origin: str) -> dict:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    flat = _flatten(data)
    for key in flat:
        if key not in _SCHEMA:
            line = _line_of(text, key)
            where = f"{origin}:{line}" if line else origin
            raise ConfigError(f"{where}: unknown key '{key}'")
    return flat


def preset_names() -> list[str]:
    root = resources.files("tfpack") / "data" / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_text(name: str) -> str:
    p = resources.files("tfpack") / "data" / "presets" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(preset_names())}")
    return p.read_text()


def parse_override(item: str) -> tuple[str, Any]:
    """'key=value' with a TOML-style value; bare words are taken as strings."""
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form key=value")
    key, raw = (s.strip() for s in item.split("=", 1))
    if key not in _SCHEMA:
        raise ConfigError(f"override: unknown key '{key}'")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        try:
            value = ast.literal_eval(raw)
        except (ValueError, SyntaxError):
            value = raw
    return key, value


def _coerce(key: str, v: Any, origin: str) -> Any:
    typ, _ = _SCHEMA[key]
    types = typ if isinstance(typ, tuple) else (typ,)
    if v is None:
        return None
    if float in types and isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    if list in types:
        if not isinstance(v, list):
            v = [v]
        return list(v)
    if isinstance(v, bool) and bool not in types:
        raise ConfigError(f"{origin}: '{key}' expects {types[0].__name__}, got a boolean")
    if not isinstance(v, types):
        raise ConfigError(f"{origin}: '{key}' expects {'/'.join(t.__name__ for t in types)}, "
                          f"got {type(v).__name__}")
    return v


def build_config(layers: list[tuple[str, dict]], profile: str = "full") -> ExperimentConfig:
    """Merge (origin, flat dict) layers over the defaults and validate."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile '{profile}'; expected one of {PROFILES}")
    vals: dict[str, Any] = {k: d for k, (_, d) in _SCHEMA.items()}
    origins: dict[str, str] = {}
    explicit: set[str] = set()
    merged: list[tuple[str, dict]] = []
    for origin, flat in layers:
        if flat.get("preset"):
            merged.append((f"preset {flat['preset']}", _parse_text(preset_text(flat["preset"]),
                                                                   f"preset {flat['preset']}")))
        merged.append((origin, flat))
    for origin, flat in merged:
        for k, v in flat.items():
            vals[k] = _coerce(k, v, origin)
            origins[k] = origin
            explicit.add(k)
    system = vals["system"]
    if system not in SYSTEM_DEFAULTS:
        raise ConfigError(f"{origins.get('system', 'defaults')}: unknown system '{system}'")
    for k, v in SYSTEM_DEFAULTS[system].items():
        if k not in explicit:
            vals[k] = v
    if "link.noise_figure" not in explicit:
        vals["link.noise_figure"] = _NF_DEFAULT.get(vals["link.preset"], 6.0)
    if vals["B_R"] is None:
        vals["B_R"] = vals["B"]
    cfg = ExperimentConfig(**{_field(k): v for k, v in vals.items()}, profile=profile)
    _validate(cfg, origins)
    return cfg


def _validate(cfg: ExperimentConfig, origins: dict) -> None:
    def where(key):
        return origins.get(key, "defaults")

    if cfg.modulation not in FORMATS:
        raise ConfigError(f"{where('modulation')}: unknown modulation '{cfg.modulation}'")
    if (cfg.bit_rate is None) == (cfg.baud is None):
        raise ConfigError("exactly one of 'bit_rate' and 'baud' must be given")
    rate = cfg.bit_rate if cfg.bit_rate is not None else cfg.baud
    if not rate > 0:
        raise ConfigError("bit_rate/baud must be positive")
    if cfg.n_carriers < 1:
        raise ConfigError(f"{where('n_carriers')}: n_carriers must be >= 1")
    if cfg.pulse_kind not in ("RZ50", "NRZ", "RRC"):
        raise ConfigError(f"{where('pulse.kind')}: unknown pulse '{cfg.pulse_kind}'")
    if cfg.link_preset not in LINK_PRESETS:
        raise ConfigError(f"{where('link.preset')}: unknown link preset '{cfg.link_preset}'")
    if cfg.link_preset == "inline" and not cfg.link_spans_km:
        raise ConfigError("inline link needs 'link.spans_km'")
    if cfg.link_noise_figure < 3:
        raise ConfigError(f"{where('link.noise_figure')}: noise figure below 3 dB")
    for key in ("F", "B", "B_R"):
        v = getattr(cfg, key)
        if isinstance(v, str) and v != "sweep":
            raise ConfigError(f"{where(key)}: '{key}' must be a number or \"sweep\"")
        if not isinstance(v, str) and not v > 0:
            raise ConfigError(f"{where(key)}: '{key}' must be positive")
    if not cfg.power_dbm:
        raise ConfigError(f"{where('power.dbm')}: empty power sweep")
    if cfg.system == "TFP" and cfg.B_R != cfg.B:
        raise ConfigError(f"{where('B_R')}: TFP ties the receive bandwidth to B (B_R = B)")
    if cfg.system == "RxDuobinary" and cfg.L_r != 1:
        raise ConfigError(f"{where('L_r')}: receiver-side duobinary detection has memory 1")
    if cfg.L_r < 0:
        raise ConfigError(f"{where('L_r')}: L_r must be >= 0")
    if cfg.system == "NyquistWDM":
        spacings = []
        if cfg.sweep_tie_spacing:
            spacings = list(cfg.sweep_B) if cfg.B == "sweep" else [cfg.B]
        elif cfg.F == "sweep":
            spacings = list(cfg.sweep_F)
        else:
            spacings = [cfg.F]
        if min(spacings) < 1.0 - 1e-12:
            key = "F" if not cfg.sweep_tie_spacing else "B"
            raise ConfigError(f"{where(key)}: Nyquist-WDM requires F >= 1/T")
    for name in cfg.compare:
        preset_text(name)
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")


def load_config(path, profile: str = "full", overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse, merge and validate a config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    layers = [(str(path), _parse_text(text, str(path)))]
    if overrides:
        layers.append(("--override", dict(parse_override(o) for o in overrides)))
    return build_config(layers, profile)


def load_preset(name: str, profile: str = "full", extra: dict | None = None) -> ExperimentConfig:
    layers = [(f"preset {name}", {"preset": name})]
    if extra:
        layers.append(("extra", dict(extra)))
    return build_config(layers, profile)


def with_values(cfg: ExperimentConfig, **flat) -> ExperimentConfig:
    """Copy with dotted-key values replaced (validated again)."""
    layers = [("base", cfg.to_flat()), ("update", {k.replace("__", "."): v for k, v in flat.items()})]
    return build_config(layers, cfg.profile)
