"""Simulation toolkit for a two-ion crystal: normal modes, phonon
distributions, laser-driven dynamics, sideband cooling, heating and
fluorescence readout, orchestrated from declarative configs."""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, load_config, parse_config  # noqa: E402
from .crystal import BeamGeometry, IonSpecies, Mode, ModeLabel, TrapConfig, mode_spectrum  # noqa: E402
from .output import RunOutput, emit  # noqa: E402
from .phonon import FockDistribution, thermal  # noqa: E402

__all__ = [
    "BeamGeometry", "ConfigError", "ExperimentConfig", "FockDistribution", "IonSpecies", "Mode",
    "ModeLabel", "RunOutput", "TrapConfig", "emit", "load_config", "mode_spectrum", "parse_config",
    "thermal", "__version__",
]
