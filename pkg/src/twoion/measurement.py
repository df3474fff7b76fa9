"""Simulated fluorescence readout and sideband thermometry."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import poisson

from .crystal import BeamGeometry, rabi_at_position


class InvalidAsymmetry(ValueError):
    pass


def sideband_asymmetry(rsb_height: float, bsb_height: float, noise_floor: float = 1e-9) -> tuple[float, float]:
    """Ground-state population and mean phonon number from sideband heights.

    Negative red-sideband heights within ``noise_floor * bsb`` are clipped to
    zero. Returns ``(p0, n_bar)``; ``n_bar`` is inf when ``p0`` is 0.
    """
    if not bsb_height > 0:
        raise ValueError("blue sideband height must be positive")
    if rsb_height < 0:
        if rsb_height < -noise_floor * bsb_height:
            raise InvalidAsymmetry(f"negative red sideband height {rsb_height!r}")
        rsb_height = 0.0
    ratio = rsb_height / bsb_height
    if ratio > 1:
        raise InvalidAsymmetry(f"red sideband exceeds blue (ratio {ratio:.4g})")
    p0 = 1.0 - ratio
    n_bar = math.inf if p0 == 0 else 1.0 / p0 - 1.0
    return p0, n_bar


@dataclass(frozen=True)
class DetectionConfig:
    """Photon-count model for one detection window.

    ``thresholds=None`` places them at the crossings of adjacent Poisson
    distributions. A count equal to a threshold classifies downward.
    """
    window: float = 11.8e-3
    background_mean: float = 19.0
    per_ion_bright_mean: float = 30.0
    thresholds: tuple[int, int] | None = None
    n_ions: int = 2

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("detection window must be positive")
        if self.background_mean < 0 or self.per_ion_bright_mean < 0:
            raise ValueError("photon means must be non-negative")
        if self.thresholds is not None:
            t1, t2 = self.thresholds
            if not t1 < t2:
                raise ValueError("thresholds must satisfy t1 < t2")
            object.__setattr__(self, "thresholds", (int(t1), int(t2)))

    def class_means(self) -> tuple[float, ...]:
        """Expected counts with 0, 1, ... bright ions."""
        return tuple(self.background_mean + k * self.per_ion_bright_mean for k in range(self.n_ions + 1))

    @property
    def degenerate(self) -> bool:
        return self.per_ion_bright_mean == 0

    def resolved_thresholds(self) -> tuple[int, int]:
        return self.thresholds if self.thresholds is not None else default_thresholds(self)

    def with_auto_thresholds(self) -> DetectionConfig:
        return replace(self, thresholds=default_thresholds(self))


def _valley(lo: float, hi: float) -> int:
    """Largest count k with pmf(k; lo) >= pmf(k; hi)."""
    # pmf ratio crosses 1 at k* = (hi - lo) / ln(hi / lo)
    if lo == 0:
        return 0
    k = int(math.floor((hi - lo) / math.log(hi / lo)))
    while poisson.logpmf(k + 1, lo) >= poisson.logpmf(k + 1, hi):
        k += 1
    while k > 0 and poisson.logpmf(k, lo) < poisson.logpmf(k, hi):
        k -= 1
    return k


def default_thresholds(cfg: DetectionConfig) -> tuple[int, int]:
    if cfg.degenerate:
        raise ValueError("bright and dark ions give identical counts; no threshold separates them")
    m0, m1, m2 = cfg.class_means()[:3]
    return _valley(m0, m1), _valley(m1, m2)


def classify(count, cfg: DetectionConfig):
    """Number of bright ions for a photon count (0, 1 or 2)."""
    t1, t2 = cfg.resolved_thresholds()
    c = np.asarray(count)
    out = (c > t1).astype(int) + (c > t2).astype(int)
    return int(out) if out.ndim == 0 else out


@dataclass
class Histogram:
    bins: np.ndarray  # shots per photon count, index = count
    total: int

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(k), int(v)) for k, v in enumerate(self.bins)]

    def peaks(self, cfg: DetectionConfig, smooth: int = 2) -> list[int]:
        """Most populated count inside each classification window."""
        t1, t2 = cfg.resolved_thresholds()
        k = np.arange(self.bins.size)
        kernel = np.ones(2 * smooth + 1) / (2 * smooth + 1)
        s = np.convolve(self.bins, kernel, mode="same")
        out = []
        for sel in (k <= t1, (k > t1) & (k <= t2), k > t2):
            if np.any(sel) and s[sel].max() > 0:
                out.append(int(k[sel][np.argmax(s[sel])]))
        return out


@dataclass(frozen=True)
class ShotRecord:
    true_state: tuple[str, ...]  # "S" or "D" per ion
    photon_count: int
    classified_bright: int


@dataclass
class ShotBatch:
    histogram: Histogram
    records: list[ShotRecord] = field(repr=False)
    dark: np.ndarray = field(repr=False)  # bool (n_shots, n_ions)
    counts: np.ndarray = field(repr=False)
    classes: np.ndarray = field(repr=False)

    def class_fractions(self) -> np.ndarray:
        return np.bincount(self.classes, minlength=3)[:3] / self.classes.size


def sample_shots(p_dark: Sequence[float], cfg: DetectionConfig, n_shots: int,
                 seed: int | np.random.Generator) -> ShotBatch:
    """Sample electronic states and photon counts shot by shot.

    ``p_dark`` holds each ion's D-state probability. Bit-reproducible for a
    given integer seed.
    """
    p = np.asarray(p_dark, dtype=float)
    if p.ndim != 1 or p.size != cfg.n_ions:
        raise ValueError(f"need {cfg.n_ions} per-ion probabilities")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if n_shots <= 0:
        raise ValueError("n_shots must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dark = rng.random((n_shots, p.size)) < p
    n_bright = (~dark).sum(axis=1)
    counts = rng.poisson(cfg.background_mean + cfg.per_ion_bright_mean * n_bright)
    classes = np.asarray(classify(counts, cfg))
    bins = np.bincount(counts)
    records = [
        ShotRecord(tuple("D" if x else "S" for x in row), int(c), int(k))
        for row, c, k in zip(dark, counts, classes)
    ]
    return ShotBatch(Histogram(bins, n_shots), records, dark, counts, classes)


@dataclass(frozen=True)
class DiscriminationReport:
    per_state: tuple[float, ...]  # misclassification for 0, 1, 2 bright ions
    worst: float
    mean: float
    thresholds: tuple[int, int] | None
    degenerate: bool = False


def discrimination_error(cfg: DetectionConfig) -> DiscriminationReport:
    """Poisson misclassification probability of each bright-ion number.

    With no bright signal the classes cannot be told apart; the report is
    flagged degenerate and assumes every shot lands in one class.
    """
    if cfg.degenerate and cfg.thresholds is None:
        return DiscriminationReport((0.0, 1.0, 1.0), 1.0, 2.0 / 3.0, None, degenerate=True)
    t1, t2 = cfg.resolved_thresholds()
    m0, m1, m2 = cfg.class_means()[:3]
    e0 = poisson.sf(t1, m0)
    e1 = poisson.cdf(t1, m1) + poisson.sf(t2, m1)
    e2 = poisson.cdf(t2, m2)
    errs = tuple(float(x) for x in (e0, e1, e2))
    return DiscriminationReport(errs, max(errs), sum(errs) / 3, (t1, t2), degenerate=cfg.degenerate)


def addressing_check(beam: BeamGeometry, separation: float) -> tuple[float, float]:
    """Field and intensity at the neighbouring ion, relative to the addressed one."""
    centered = replace(beam, center_offset=0.0)
    if beam.peak_rabi == 0:
        centered = replace(centered, peak_rabi=1.0)
    field_ratio = rabi_at_position(centered, separation) / centered.peak_rabi
    return field_ratio, field_ratio**2


def confusion_matrix(cfg: DetectionConfig):
    """Probability of classifying k true bright ions as j (rows k, columns j)."""
    t1, t2 = cfg.resolved_thresholds()
    out = np.empty((3, 3))
    for k, m in enumerate(cfg.class_means()[:3]):
        lo = poisson.cdf(t1, m)
        mid = poisson.cdf(t2, m) - lo
        out[k] = (lo, mid, 1.0 - lo - mid)
    return out


def expected_class_fractions(p_dark: Sequence[float], cfg: DetectionConfig) -> np.ndarray:
    """Classification fractions for independent ions, including readout errors."""
    q1, q2 = (1.0 - float(p) for p in p_dark)  # bright probabilities
    truth = np.array([(1 - q1) * (1 - q2), q1 * (1 - q2) + q2 * (1 - q1), q1 * q2])
    return truth @ confusion_matrix(cfg)
