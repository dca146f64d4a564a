import math

import pytest

from twrsel.config import SchemeConfig, SweepSpec, dump_config_text, load_config, parse_config_text
from twrsel.core import ConfigurationError

TEXT = """
# PR scheme on 4-PAM
scheme     = pr-maxmin-rs
layout     = 1, 1, 1, 1
modulation = 4PAM   # any common spelling
p          = 1
upsilon    = auto
snr_grid   = 10, 15, 20
min_errors = 200
max_trials = 1e6
seed       = 42
"""


def test_parse_example():
    cfg, sweep = parse_config_text(TEXT)
    assert cfg.layout == (1, 1, 1, 1)
    assert cfg.modulation == "MPAM(4)"
    assert cfg.upsilon == "auto"
    assert cfg.upsilon_value == pytest.approx(math.pi / 2)
    assert sweep.snr_grid == (10.0, 15.0, 20.0)
    assert sweep.max_trials == 1_000_000
    assert sweep.seed == 42


def test_defaults():
    cfg, sweep = parse_config_text("")
    assert cfg == SchemeConfig()
    assert sweep == SweepSpec()
    assert sweep.min_errors == 100 and sweep.max_trials == 10_000_000


def test_round_trip(tmp_path):
    cfg, sweep = parse_config_text(TEXT)
    path = tmp_path / "c.cfg"
    path.write_text(dump_config_text(cfg.resolved(), sweep))
    cfg2, sweep2 = load_config(path)
    assert cfg2 == cfg.resolved()
    assert sweep2 == sweep


@pytest.mark.parametrize(
    "text",
    ["colour = red", "p = 0", "p = abc", "delta2 = -1", "layout = ", "layout = 2, 0",
     "scheme = random", "min_errors = 0", "max_trials = 1.5", "upsilon = left",
     "csi_error_scope = nowhere", "min_errors = 10\nmax_trials = 5", "workers = 0", "no equals sign here"],
)
def test_rejects_bad_configs(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_numeric_upsilon_and_uses_rotation():
    cfg = SchemeConfig("maxmin-rs-noPR", upsilon="0.5")
    assert cfg.upsilon == 0.5
    assert not cfg.uses_rotation
    assert SchemeConfig("maxmin-as").uses_rotation
