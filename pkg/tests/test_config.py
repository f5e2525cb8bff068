import pytest

from tfpack.expcli.config import (ConfigError, _parse_text, build_config, load_config, load_preset,
                                  parse_override, preset_names, with_values)
from tfpack.expcli.runner import build_link, scenario_from_config


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


MINIMAL = 'system = "TFP"\nmodulation = "QPSK"\nbit_rate = 140e9\nlink.preset = "table1"\n'


def test_minimal_tfp_loads_table1(tmp_path):
    cfg = load_config(_write(tmp_path, MINIMAL))
    assert cfg.L_r == 4 and cfg.pulse_kind == "RZ50"
    assert cfg.symbol_time == pytest.approx(1 / 35e9)
    link = build_link(cfg)
    assert len(link.spans) == 15
    assert link.spans[0].length == 70.8 and link.spans[-1].length == 99.4


def test_nwdm_preset():
    cfg = load_preset("nwdm_qam16")
    assert (cfg.F, cfg.B, cfg.B_R, cfg.pulse_kind, cfg.L_r) == (1.0, 1.1, 1.0, "NRZ", 2)


def test_nwdm_rejects_packed_spacing(tmp_path):
    p = _write(tmp_path, 'system = "NyquistWDM"\nmodulation = "QAM16"\nbaud = 35e9\nF = 0.9\nB = 1.0\n')
    with pytest.raises(ConfigError, match="F >= 1/T"):
        load_config(p)


def test_unknown_key_reports_line(tmp_path):
    p = _write(tmp_path, MINIMAL + "\nffe.tapz = 3\n")
    with pytest.raises(ConfigError, match=r"c\.toml:6: unknown key 'ffe\.tapz'"):
        load_config(p)


def test_unknown_key_in_table_reports_line(tmp_path):
    p = _write(tmp_path, MINIMAL + "[sequence]\nn_symbols = 10\nblocks = 3\n")
    with pytest.raises(ConfigError, match=r":7: unknown key 'sequence\.blocks'"):
        load_config(p)


def test_syntax_error(tmp_path):
    with pytest.raises(ConfigError, match="c.toml"):
        load_config(_write(tmp_path, "system = \n"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.toml")


@pytest.mark.parametrize("text,msg", [
    ('modulation = "QAM8"\nbaud = 1e10\n', "unknown modulation"),
    ('modulation = "QPSK"\nbaud = 1e10\nbit_rate = 2e10\n', "exactly one"),
    ('modulation = "QPSK"\n', "exactly one"),
    ('baud = 1e10\nlink.preset = "moon"\n', "unknown link preset"),
    ('baud = 1e10\nlink.noise_figure = 2.0\n', "noise figure"),
    ('baud = 1e10\nF = "wide"\n', "number or"),
    ('baud = 1e10\nB = 0.4\nB_R = 0.5\n', "B_R = B"),
    ('system = "RxDuobinary"\nbaud = 1e10\nL_r = 2\n', "memory 1"),
    ('baud = 1e10\ncompare = ["nope"]\n', "unknown preset"),
    ('baud = 1e10\nn_carriers = "many"\n', "expects int"),
    ('baud = 1e10\ndbp = 1\n', "expects bool"),
    ('baud = 1e10\nlink.preset = "inline"\n', "spans_km"),
])
def test_validation_errors(tmp_path, text, msg):
    with pytest.raises(ConfigError, match=msg):
        load_config(_write(tmp_path, text))


@pytest.mark.parametrize("name", preset_names())
def test_preset_roundtrip(name):
    cfg = load_preset(name)
    again = build_config([("echo", _parse_text(cfg.echo(), "echo"))])
    assert again == cfg


def test_overrides_and_precedence(tmp_path):
    p = _write(tmp_path, 'preset = "tfp_qpsk"\nseed = 5\n')
    cfg = load_config(p, overrides=["seed=9", "link.gamma=0", "power.dbm=[1, 2]", "system=TFP"])
    assert cfg.seed == 9 and cfg.link_gamma == 0.0 and cfg.power_dbm == [1.0, 2.0]
    assert cfg.name == "TFP-QPSK"
    with pytest.raises(ConfigError):
        parse_override("seed")
    with pytest.raises(ConfigError):
        parse_override("sede=3")


def test_with_values_revalidates():
    cfg = load_preset("nwdm_qam16")
    assert with_values(cfg, link__gamma=0.0).link_gamma == 0.0
    with pytest.raises(ConfigError):
        with_values(cfg, F=0.5)


def test_profiles():
    full = scenario_from_config(load_preset("tfp_qpsk", "full"))
    desk = scenario_from_config(load_preset("tfp_qpsk", "desk"))
    assert full.n_symbols == 1_000_000 and full.training_symbols == 100_000
    assert full.n_carriers == 8 and len(full.link.spans) == 15
    assert desk.n_symbols == 100_000 and desk.n_carriers == 3 and len(desk.link.spans) == 5
    assert desk.ci_target == 0.05 and full.ci_target == 0.02
    assert desk.ssfm.max_step >= 2.0
    qam = scenario_from_config(load_preset("nwdm_qam16", "full"))
    assert qam.n_symbols == 500_000
    with pytest.raises(ConfigError):
        load_preset("tfp_qpsk", "huge")


def test_uniform_distance_sweep():
    cfg = load_preset("tfp_qpsk", extra={"link.preset": "uniform100", "sweep.n_spans": [3, 6]})
    assert len(build_link(cfg, 6).spans) == 6
    assert build_link(cfg, 6).length == 600.0
    assert build_link(cfg).noise_figure == 5.0
