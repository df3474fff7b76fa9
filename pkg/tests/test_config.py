import math

import pytest
import yaml

from twoion.config import ConfigError, echo_document, echo_text, parse_config
from twoion.constants import TWO_PI
from twoion.demo import DEMOS

MINIMAL = """
experiment: SpectrumScan
trap:
  axial_frequency: 700 kHz
  radial_frequency_x: 1.8 MHz
"""


def test_minimal_config_applies_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.trap.omega_axial == pytest.approx(TWO_PI * 700e3)
    assert cfg.trap.omega_radial_y == cfg.trap.omega_radial_x
    assert cfg.doppler.geometry_factor == 2.1
    assert cfg.doppler.gamma_eff == pytest.approx(TWO_PI * 30e6)
    assert cfg.detection.thresholds == (31, 62)
    echo = echo_document(cfg)
    assert echo["trap"]["axial_frequency"] == "700.0 kHz"
    assert echo["trap"]["radial_frequency_x"] == "1.8 MHz"
    assert echo["doppler"]["geometry_factor"] == 2.1
    assert echo["detection"]["thresholds"] == "auto"


def test_units_are_converted():
    cfg = parse_config(MINIMAL.replace("700 kHz", "0.7 MHz") + "beam:\n  waist: 0.0037 mm\n")
    assert cfg.trap.omega_axial == pytest.approx(TWO_PI * 700e3, rel=1e-12)
    assert cfg.beam.waist == pytest.approx(3.7e-6, rel=1e-12)


def _error(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value


def test_missing_trap_frequency_names_path():
    err = _error("experiment: SpectrumScan\ntrap:\n  radial_frequency_x: 1.8 MHz\n")
    assert err.path == "trap.axial_frequency"


def test_unknown_key_names_path():
    err = _error(MINIMAL + "  colour: blue\n")
    assert err.path == "trap.colour"


def test_unit_violation_names_path():
    err = _error(MINIMAL.replace("700 kHz", "700 um"))
    assert err.path == "trap.axial_frequency" and "unit" in err.message


def test_radial_below_axial_reports_rocking():
    err = _error(MINIMAL.replace("1.8 MHz", "0.5 MHz"))
    assert err.path == "trap" and "rocking" in err.message


def test_unknown_experiment():
    assert _error(MINIMAL.replace("SpectrumScan", "Teleport")).path == "experiment"


def test_sampling_requires_seed():
    text = DEMOS["histogram"].replace("seed: 20260101\n", "")
    assert _error(text).path == "seed"
    assert parse_config(text, seed=3).seed == 3


def test_initial_map_must_cover_all_modes():
    text = DEMOS["rabi"].replace("    RadialCOM: 2.3             # both radial c.o.m. modes\n", "")
    assert _error(text).path.startswith("rabi_scan.initial.RadialCOM")


def test_cooling_needs_rates_or_targets():
    text = DEMOS["cooling"] + "  cool_rates:\n    RadialCOM_x: 1 /ms\n"
    assert _error(text).path == "cooling_schedule.cool_rates"


def test_bad_yaml():
    assert "YAML" in _error("a: [1,").message


@pytest.mark.parametrize("name", sorted(DEMOS))
def test_echo_round_trip(name):
    cfg = parse_config(DEMOS[name])
    again = parse_config(echo_text(cfg))
    assert again.document == cfg.document
    assert again.trap == cfg.trap and again.beam == cfg.beam and again.detection == cfg.detection
    assert echo_text(again) == echo_text(cfg)


def test_echo_is_plain_yaml():
    cfg = parse_config(DEMOS["cooling"])
    doc = yaml.safe_load(echo_text(cfg))
    assert doc["cooling_schedule"]["heating_rates"]["RadialCOM_y"] == "25.0 /s"
    assert doc["cooling_schedule"]["targets"]["AxialCOM"] == 0.05
    assert math.isclose(float(doc["cooling_schedule"]["pulse_duration"].split()[0]), 6.0)
