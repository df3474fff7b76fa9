import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from twoion.config import echo_text, parse_config
from twoion.constants import TWO_PI
from twoion.cooling import CoolingPulseParams, cool_pulse, heat_delay
from twoion.crystal import ModeLabel
from twoion.dynamics import (CoherenceModel, carrier_factors, carrier_flop, line_response, sideband_flop,
                             two_ion_carrier)
from twoion.experiments import run
from twoion.measurement import DetectionConfig, sample_shots
from twoion.output import emit
from twoion.phonon import thermal

NORM = 1e-9
n_bars = st.floats(0.0, 30.0)
etas = st.floats(0.0, 0.15)
times = st.lists(st.floats(0.0, 1e-3), min_size=1, max_size=20)
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


@SETTINGS
@given(n_bars)
def test_thermal_is_normalized(n_bar):
    assert abs(thermal(n_bar).probs.sum() - 1) < NORM


@SETTINGS
@given(n_bars, st.floats(0.0, 5e3), st.floats(0.0, 100.0), st.floats(0.0, 5e-3))
def test_cooling_preserves_normalization(n_bar, rate, heating, duration):
    d = cool_pulse(thermal(n_bar), CoolingPulseParams(ModeLabel.AXIAL_COM, duration, rate), heating)
    assert abs(d.probs.sum() - 1) < NORM
    assert np.all(d.probs >= 0)


@SETTINGS
@given(n_bars, st.floats(0.0, 200.0), st.floats(0.0, 0.1))
def test_heating_preserves_normalization(n_bar, heating, delay):
    d = heat_delay(thermal(n_bar), heating, delay)
    assert abs(d.probs.sum() - 1) < NORM


@SETTINGS
@given(st.lists(st.tuples(n_bars, etas), min_size=1, max_size=4), st.floats(1.0, 500.0))
def test_carrier_factor_weights_normalized(modes, phase):
    _, w = carrier_factors([thermal(n) for n, _ in modes], [e for _, e in modes], max_phase=phase)
    assert abs(w.sum() - 1) < NORM


@SETTINGS
@given(n_bars, etas, st.floats(0.0, TWO_PI * 300e3), times, st.floats(-TWO_PI * 1e6, TWO_PI * 1e6))
def test_flops_are_probabilities(n_bar, eta, rabi, t, det):
    d = thermal(n_bar)
    for p in (carrier_flop(d, eta, rabi, t, det), sideband_flop(d, eta, rabi, t, "red", det),
              sideband_flop(d, eta, rabi, t, "blue", det), line_response(rabi, det, np.array(t))):
        p = np.asarray(p)
        assert np.all((p >= 0) & (p <= 1))


@SETTINGS
@given(st.floats(0.0, 1e6), st.floats(0.0, 1e6), times, st.floats(1e-6, 1.0))
def test_two_ion_trace_bounds(w1, w2, t, tau):
    tr = two_ion_carrier(w1, w2, t, CoherenceModel(tau))
    for arr in (tr.p_up_1, tr.p_up_2, tr.mean_upper, tr.p_both_down, tr.p_one_up, tr.p_both_up):
        assert np.all((arr >= 0) & (arr <= 1 + 1e-15))


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_sampling_same_seed_same_shots(seed, p1, p2):
    a = sample_shots([p1, p2], DetectionConfig(), 200, seed)
    b = sample_shots([p1, p2], DetectionConfig(), 200, seed)
    assert a.counts.tobytes() == b.counts.tobytes()


@settings(max_examples=5, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 2**31))
def test_histogram_run_bytes_stable(tmp_path, seed):
    text = ("experiment: HistogramRun\ntrap: {axial_frequency: 700 kHz, radial_frequency_x: 1.8 MHz}\n"
            "histogram_run: {shots: 500}\n")
    cfg = parse_config(text, seed=seed)
    a = emit(run(cfg), "both", tmp_path / f"{seed}a")
    b = emit(run(cfg), "both", tmp_path / f"{seed}b")
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


@SETTINGS
@given(st.floats(100.0, 2000.0), st.floats(1.01, 3.0), st.floats(0.0, 90.0), st.floats(0.5, 20.0),
       st.sampled_from(["SpectrumScan", "RabiScan", "HeatingScan"]))
def test_config_echo_round_trip(f_ax, ratio, angle, waist, experiment):
    text = (f"experiment: {experiment}\ntrap:\n  axial_frequency: {f_ax!r} kHz\n"
            f"  radial_frequency_x: {f_ax * ratio / 1e3!r} MHz\n"
            f"beam:\n  angle_to_axis: {angle!r} deg\n  waist: {waist!r} um\n")
    cfg = parse_config(text)
    again = parse_config(echo_text(cfg))
    assert again.document == cfg.document
    assert again.trap == cfg.trap and again.beam == cfg.beam
