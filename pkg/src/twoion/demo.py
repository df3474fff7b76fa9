"""Annotated reference configs, one per experiment type."""

from __future__ import annotations

from pathlib import Path

_TRAP = """\
trap:
  axial_frequency: 700 kHz
  radial_frequency_x: 1.8 MHz
  # radial_frequency_y defaults to radial_frequency_x
  electrode_distance: 1.18 mm
species:
  mass: 40 amu                 # 40Ca+
  qubit_wavelength: 729 nm     # S1/2 - D5/2 quadrupole line
beam:
  angle_to_axis: 67.5 deg      # couples to axial and x-radial modes
  waist: 3.7 um
  peak_rabi: 100 kHz
"""

DEMOS: dict[str, str] = {
    "spectrum": f"""\
# Excitation spectrum after Doppler cooling: carrier plus first-order
# sidebands of every mode the beam couples to.
experiment: SpectrumScan
{_TRAP}doppler:
  gamma_eff: 30 MHz            # effective linewidth of the cooling transition
  geometry_factor: 2.1
spectrum_scan:
  detuning_start: -2500 kHz
  detuning_stop: 2500 kHz
  points: 2001
  probe_rabi: 50 kHz
  probe_duration: 30 us
  initial: doppler             # every mode at its Doppler limit
""",
    "rabi": f"""\
# Carrier flopping with spectator modes at their post-cooling occupation,
# plus the two-ion trace for a pair of unequal Rabi frequencies.
experiment: RabiScan
{_TRAP}rabi_scan:
  transition: carrier          # carrier | red | blue
  mode: AxialCOM               # sideband mode (ignored for the carrier)
  rabi: 100 kHz
  time_start: 0 us
  time_stop: 400 us
  points: 2001
  initial:                     # mean phonon number per mode
    AxialCOM: 0.05
    Breathing: 0.47
    Rocking: 0.65              # both rocking modes
    RadialCOM: 2.3             # both radial c.o.m. modes
  two_ion: true
  rabi_ion1: 80.75268817204301 kHz   # pair collapses at 75 us, revives at 155 us
  rabi_ion2: 74.08602150537634 kHz
  coherence_time: 303.43035429053873 us   # contrast 0.6 after 155 us
""",
    "cooling": f"""\
# Sequential sideband cooling of four modes. Rates are calibrated so the
# schedule ends at the target occupations; idle modes heat meanwhile.
experiment: CoolingSchedule
{_TRAP}doppler:
  gamma_eff: 30 MHz
  geometry_factor: 2.1
cooling_schedule:
  order: [RadialCOM_x, Rocking_x, Breathing, AxialCOM]
  pulse_duration: 6 ms
  initial: doppler
  heating_rates:               # phonons per second, applied whenever a mode is idle
    AxialCOM: 10 /s
    Breathing: 10 /s
    Rocking: 8 /s
    RadialCOM: 25 /s
  targets:                     # final mean phonon numbers (alternative: cool_rates in /ms)
    RadialCOM_x: 2.3
    Rocking_x: 0.65
    Breathing: 0.47
    AxialCOM: 0.05
  probe_rabi: 2 kHz            # weak probe for sideband thermometry
  probe_duration: 400 us
""",
    "heating-scan": f"""\
# Mean phonon number after increasing delays, then a linear fit.
experiment: HeatingScan
seed: 7
{_TRAP}heating_scan:
  mode: Breathing
  heating_rate: 10 /s
  initial_n_bar: 0.47
  delays: [0 ms, 25 ms, 50 ms, 75 ms, 100 ms]
  measurement_noise: 0.02      # gaussian noise on each mean, phonons
""",
    "histogram": f"""\
# Photon-count histogram for two ions, each shelved with probability 1/2.
experiment: HistogramRun
seed: 20260101
{_TRAP}detection:
  window: 11.8 ms
  background_mean: 19          # counts with both ions dark
  per_ion_bright_mean: 30      # extra counts per fluorescing ion
  thresholds: auto             # or [t1, t2]; a count equal to t classifies downward
histogram_run:
  p_dark: [0.5, 0.5]
  shots: 10000
""",
    "heating-analysis": f"""\
# Heating-rate table: normalize to 1 MHz and test the d^4 size scaling.
experiment: HeatingAnalysis
{_TRAP}heating_analysis:
  records: builtin             # or a path to a heating-records CSV
  checks:
    - name: Be+ c.o.m.
      ion: Be+
      com_only: true
      reference: 164
      reference_sigma: 38
    - name: Ca+ spherical
      ion: Ca+
      trap: spherical
      reference: 2.4
      reference_sigma: 1.5
""",
}

# subcommand -> experiment type
SUBCOMMANDS = {
    "spectrum": "SpectrumScan",
    "rabi": "RabiScan",
    "cooling": "CoolingSchedule",
    "heating-scan": "HeatingScan",
    "histogram": "HistogramRun",
    "heating-analysis": "HeatingAnalysis",
}


def write_demos(out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in DEMOS.items():
        p = out / f"{name}.yaml"
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
