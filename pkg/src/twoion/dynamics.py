"""Coherent excitation of the S1/2 - D5/2 qubit transition.

Rabi convention: a resonant pulse of Rabi frequency ``rabi`` and duration
``t`` transfers ``sin(rabi * t / 2) ** 2`` of the population, so a pi pulse
lasts ``pi / rabi``. All frequencies are angular.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .crystal import Mode, ModeLabel
from .phonon import FockDistribution

EXACT_PRODUCT_MAX_NBAR = 10.0
EXACT_PRODUCT_MAX_MODES = 4
EXACT_PRODUCT_MAX_SIZE = 2_000_000
SPECTATOR_TAIL = 1e-6
FACTOR_PHASE_ERROR = 0.01
MERGE_PHASE_ERROR = 1e-4
MERGE_MIN_SIZE = 4096


class PulseKind(str, enum.Enum):
    CARRIER = "carrier"
    RED = "red"
    BLUE = "blue"
    DELAY = "delay"


@dataclass(frozen=True)
class Pulse:
    kind: PulseKind
    duration: float
    rabi: float = 0.0
    detuning: float = 0.0
    mode: ModeLabel | None = None

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("pulse duration must be non-negative")
        if not self.rabi >= 0:
            raise ValueError("pulse rabi frequency must be non-negative")
        if self.kind in (PulseKind.RED, PulseKind.BLUE) and self.mode is None:
            raise ValueError("sideband pulses need a target mode")


@dataclass(frozen=True)
class CoherenceModel:
    tau_coherence: float = math.inf

    def __post_init__(self):
        if not self.tau_coherence > 0:
            raise ValueError("tau_coherence must be positive (or inf)")

    def contrast(self, t):
        if math.isinf(self.tau_coherence):
            return np.ones_like(np.asarray(t, dtype=float))
        return np.exp(-np.asarray(t, dtype=float) / self.tau_coherence)

    @classmethod
    def from_contrast(cls, contrast: float, at_time: float) -> CoherenceModel:
        """Decay constant giving ``contrast`` after ``at_time``."""
        if not 0 < contrast < 1:
            raise ValueError("contrast must lie strictly between 0 and 1")
        return cls(at_time / math.log(1.0 / contrast))


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def line_response(rabi, detuning, t):
    """Exact two-level excitation probability for a detuned square pulse."""
    rabi = np.asarray(rabi, dtype=float)
    detuning = np.asarray(detuning, dtype=float)
    t = np.asarray(t, dtype=float)
    w2 = rabi**2 + detuning**2
    w = np.sqrt(w2)
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(w2 > 0, rabi**2 / np.where(w2 > 0, w2, 1.0), 0.0)
    return _scalar_or_array(amp * np.sin(w * t / 2.0) ** 2)


def _averaged(rabis: np.ndarray, weights: np.ndarray, detuning, t) -> np.ndarray | float:
    """sum_k weights[k] * line_response(rabis[k], detuning, t), broadcast over t."""
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.ravel()
    keep = weights > 0
    rabis, weights = rabis[keep], weights[keep]
    out = np.empty(flat.size)
    # bounded memory: chunk over time points
    chunk = max(1, 4_000_000 // max(1, rabis.size))
    for i in range(0, flat.size, chunk):
        tt = flat[i : i + chunk, None]
        out[i : i + chunk] = line_response(rabis[None, :], detuning, tt) @ weights
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if t_arr.ndim == 0 else out.reshape(t_arr.shape)


def carrier_flop(dist: FockDistribution, eta: float, rabi: float, t, detuning: float = 0.0):
    """Carrier excitation averaged over one mode's phonon distribution.

    Each Fock level n drives the carrier at ``rabi * (1 - eta**2 * n)``.
    """
    n = dist.n
    return _averaged(rabi * (1.0 - eta**2 * n), dist.probs, detuning, t)


def sideband_flop(dist: FockDistribution, eta: float, rabi: float, t, side: str | PulseKind,
                  detuning: float = 0.0):
    """Red or blue sideband excitation averaged over the phonon distribution."""
    side = PulseKind(side)
    n = dist.n.astype(float)
    if side is PulseKind.BLUE:
        rabis = eta * np.sqrt(n + 1.0) * rabi
        weights = dist.probs
    elif side is PulseKind.RED:
        rabis = eta * np.sqrt(n) * rabi
        weights = np.where(n >= 1, dist.probs, 0.0)
    else:
        raise ValueError(f"side must be red or blue, got {side}")
    return _averaged(rabis, weights, detuning, t)


def max_rabi_cycles(eta: float, n_bar: float) -> float:
    """Upper bound on resolvable Rabi cycles with a thermal spectator mode."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    if n_bar == 0:
        return math.inf
    return 1.0 / (2.0 * eta**2 * n_bar)


def _truncate(p: np.ndarray, tail: float) -> np.ndarray:
    """Drop the high-n tail holding at most ``tail`` probability."""
    remaining = 1.0 - np.cumsum(p)
    cut = int(np.argmax(remaining < tail)) + 1 if np.any(remaining < tail) else p.size
    return p[:cut] / p[:cut].sum()


def carrier_factors(dists: Sequence[FockDistribution], etas: Sequence[float],
                    max_phase: float = 2 * math.pi * 50):
    """Distribution of the carrier Rabi-frequency factor over several modes.

    Returns ``(factors, weights)`` such that the carrier Rabi frequency is
    ``rabi * factors[k]`` with probability ``weights[k]``.

    Up to four coupled modes with n_bar <= 10 are combined as the product
    of ``1 - eta_k**2 * n_k``; large products are pooled on a grid with
    phase error below 1e-4 rad. Hotter states use the first-order sum
    ``1 - sum_k eta_k**2 * n_k`` on a grid fine enough that the phase error
    stays below 0.01 rad for pulse areas up to ``max_phase``.
    """
    active = [(d, float(e)) for d, e in zip(dists, etas) if e * e > 0.0]
    if not active:
        return np.array([1.0]), np.array([1.0])
    truncated = [(_truncate(d.probs, SPECTATOR_TAIL), e) for d, e in active]
    size = math.prod(p.size for p, _ in truncated)
    hot = any(d.mean() > EXACT_PRODUCT_MAX_NBAR for d, _ in active)
    if not hot and len(active) <= EXACT_PRODUCT_MAX_MODES and size <= EXACT_PRODUCT_MAX_SIZE:
        factors = np.array([1.0])
        weights = np.array([1.0])
        for p, eta in truncated:
            f = 1.0 - eta**2 * np.arange(p.size)
            factors = np.multiply.outer(factors, f).ravel()
            weights = np.multiply.outer(weights, p).ravel()
        if factors.size > MERGE_MIN_SIZE:
            factors, weights = _merge(factors, weights, 2.0 * MERGE_PHASE_ERROR / max(max_phase, 1e-12))
        return factors, weights

    step = 2.0 * FACTOR_PHASE_ERROR / max(max_phase, 1e-12)
    combined = np.array([1.0])
    for p, eta in truncated:
        idx = np.rint(eta**2 * np.arange(p.size) / step).astype(np.int64)
        binned = np.bincount(idx, weights=p)
        combined = np.convolve(combined, binned)
    combined = np.clip(combined, 0.0, None)
    keep = combined > 1e-16
    x = np.nonzero(keep)[0] * step
    w = combined[keep]
    return 1.0 - x, w / w.sum()


def _merge(factors: np.ndarray, weights: np.ndarray, step: float):
    # pool factors within one grid cell at their weighted mean; keeps the first moment
    idx = np.floor((1.0 - factors) / step).astype(np.int64)
    idx -= idx.min()
    w = np.bincount(idx, weights=weights)
    fw = np.bincount(idx, weights=weights * factors)
    keep = w > 0
    return fw[keep] / w[keep], w[keep]


def carrier_flop_multi(dists: Sequence[FockDistribution], etas: Sequence[float], rabi: float, t,
                       detuning: float = 0.0):
    """Carrier excitation with several spectator modes (product state)."""
    max_phase = rabi * float(np.max(np.abs(t))) if np.size(t) else 0.0
    factors, weights = carrier_factors(dists, etas, max_phase=max(max_phase, 1.0))
    return _averaged(rabi * factors, weights, detuning, t)


def flop(pulse: Pulse, states: Mapping[ModeLabel, FockDistribution],
         etas: Mapping[ModeLabel, float], t=None):
    """Excitation probability after ``pulse`` (or after durations ``t``)."""
    t = pulse.duration if t is None else t
    if pulse.kind is PulseKind.DELAY:
        return _scalar_or_array(np.zeros_like(np.asarray(t, dtype=float)))
    if pulse.kind is PulseKind.CARRIER:
        labels = list(states)
        return carrier_flop_multi([states[m] for m in labels], [etas[m] for m in labels],
                                  pulse.rabi, t, pulse.detuning)
    return sideband_flop(states[pulse.mode], etas[pulse.mode], pulse.rabi, t, pulse.kind,
                         pulse.detuning)


@dataclass(frozen=True)
class SpectrumConfig:
    include_carrier: bool = True
    clip: bool = True


def spectrum(detunings, probe: Pulse, states: Mapping[ModeLabel, FockDistribution],
             modes: Sequence[Mode], etas: Mapping[ModeLabel, float],
             config: SpectrumConfig = SpectrumConfig()) -> np.ndarray:
    """Excitation probability vs. probe detuning from the carrier.

    Sums the carrier and every first-order red (at ``-w_mode``) and blue
    (at ``+w_mode``) sideband as incoherent line responses, each averaged
    over its mode's phonon distribution, and clips the total at 1.
    """
    d = np.asarray(detunings, dtype=float)
    if not np.all(np.isfinite(d)):
        raise ValueError("detuning grid must be finite")
    missing = [m.label for m in modes if m.label not in states]
    if missing:
        raise ValueError(f"no phonon state for modes {missing}")
    total = np.zeros_like(d)
    t = probe.duration
    if config.include_carrier:
        labels = [m.label for m in modes]
        factors, weights = carrier_factors([states[m] for m in labels], [etas[m] for m in labels],
                                           max_phase=max(probe.rabi * t, 1.0))
        total += _line_sum(probe.rabi * factors, weights, d, t)
    for mode in modes:
        eta = etas[mode.label]
        if eta == 0:
            continue
        dist = states[mode.label]
        n = dist.n.astype(float)
        total += _line_sum(eta * np.sqrt(n + 1) * probe.rabi, dist.probs, d - mode.frequency, t)
        red_w = np.where(n >= 1, dist.probs, 0.0)
        total += _line_sum(eta * np.sqrt(n) * probe.rabi, red_w, d + mode.frequency, t)
    return np.clip(total, 0.0, 1.0) if config.clip else total


def _line_sum(rabis, weights, detuning: np.ndarray, t: float) -> np.ndarray:
    keep = weights > 0
    rabis, weights = rabis[keep], weights[keep]
    out = np.empty(detuning.size)
    chunk = max(1, 4_000_000 // max(1, rabis.size))
    for i in range(0, detuning.size, chunk):
        dd = detuning[i : i + chunk, None]
        out[i : i + chunk] = line_response(rabis[None, :], dd, t) @ weights
    return out


def sideband_heights(probe: Pulse, states: Mapping[ModeLabel, FockDistribution],
                     modes: Sequence[Mode], etas: Mapping[ModeLabel, float],
                     config: SpectrumConfig = SpectrumConfig()) -> dict[ModeLabel, tuple[float, float]]:
    """Spectrum heights at each coupled mode's red and blue line centers."""
    out = {}
    for mode in modes:
        if etas[mode.label] == 0:
            continue
        rsb, bsb = spectrum([-mode.frequency, mode.frequency], probe, states, modes, etas, config)
        out[mode.label] = (float(rsb), float(bsb))
    return out


@dataclass(frozen=True)
class TwoIonTrace:
    p_up_1: np.ndarray
    p_up_2: np.ndarray
    mean_upper: np.ndarray
    p_both_down: np.ndarray
    p_one_up: np.ndarray
    p_both_up: np.ndarray


def two_ion_carrier(omega1: float, omega2: float, t, coh: CoherenceModel = CoherenceModel()) -> TwoIonTrace:
    """Independent carrier flopping of two ions starting in |down, down>.

    The coherent part of each ion's oscillation decays with the contrast of
    ``coh``; populations relax toward 1/2.
    """
    if omega1 < 0 or omega2 < 0:
        raise ValueError("Rabi frequencies must be non-negative")
    t = np.asarray(t, dtype=float)
    c = coh.contrast(t)
    p1 = c * np.sin(omega1 * t / 2) ** 2 + (1 - c) / 2
    p2 = c * np.sin(omega2 * t / 2) ** 2 + (1 - c) / 2
    return TwoIonTrace(
        p_up_1=p1,
        p_up_2=p2,
        mean_upper=(p1 + p2) / 2,
        p_both_down=(1 - p1) * (1 - p2),
        p_one_up=p1 * (1 - p2) + p2 * (1 - p1),
        p_both_up=p1 * p2,
    )


def beating_pair(collapse_time: float, revival_time: float, cycles: int = 12) -> tuple[float, float]:
    """Two Rabi frequencies that collapse and revive like a beat note.

    The difference puts the per-ion phases pi/2 apart at ``collapse_time``,
    so the mean upper population sits at exactly 1/2 there. The mean
    frequency completes ``cycles`` full periods by ``revival_time``, which
    leaves both ions near the upper state at that time.
    """
    if not 0 < collapse_time < revival_time:
        raise ValueError("need 0 < collapse_time < revival_time")
    diff = math.pi / collapse_time
    mean = 2 * math.pi * cycles / revival_time
    if mean <= diff / 2:
        raise ValueError("too few cycles for the requested collapse time")
    return mean + diff / 2, mean - diff / 2


def cycle_contrasts(t: np.ndarray, p: np.ndarray, period: float) -> np.ndarray:
    """Peak-to-trough swing of ``p`` within each full period window."""
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    n_cycles = int(np.floor((t[-1] - t[0]) / period + 1e-9))
    out = np.empty(n_cycles)
    for k in range(n_cycles):
        sel = (t >= t[0] + k * period - 1e-15) & (t <= t[0] + (k + 1) * period + 1e-15)
        out[k] = p[sel].max() - p[sel].min()
    return out


def count_visible_oscillations(t: np.ndarray, p: np.ndarray, min_swing: float) -> int:
    """Number of local maxima whose rise from the preceding minimum is at least ``min_swing``."""
    p = np.asarray(p, dtype=float)
    count = 0
    last_min = p[0]
    for i in range(1, p.size - 1):
        if p[i] <= p[i - 1] and p[i] < p[i + 1]:
            last_min = p[i]
        elif p[i] >= p[i - 1] and p[i] > p[i + 1]:
            if p[i] - last_min >= min_swing:
                count += 1
    return count
