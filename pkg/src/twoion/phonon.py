"""Phonon-number distributions of a single motional mode."""

from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np

from .crystal import Mode, ModeLabel

TAIL_TOLERANCE = 1e-9
MIN_NMAX = 32
NORM_TOLERANCE = 1e-12


class FockDistribution:
    """Truncated phonon-number probabilities p_0 .. p_nmax.

    The probability vector is copied, normalized and frozen on construction.
    """

    __slots__ = ("_probs",)

    def __init__(self, probs, normalize: bool = True):
        p = np.array(probs, dtype=float).ravel()
        if p.size == 0:
            raise ValueError("empty distribution")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        total = p.sum()
        if normalize:
            if total <= 0:
                raise ValueError("distribution has zero total weight")
            p = p / total
        elif abs(total - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"distribution not normalized (sum = {total!r})")
        p.setflags(write=False)
        self._probs = p

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def n_max(self) -> int:
        return self._probs.size - 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(self._probs.size)

    def mean(self) -> float:
        return mean_phonon(self)

    def __len__(self):
        return self._probs.size

    def __repr__(self):
        return f"FockDistribution(n_max={self.n_max}, mean={self.mean():.6g})"

    def padded(self, n_max: int) -> np.ndarray:
        """Writable copy of the probabilities, zero-padded to ``n_max``."""
        out = np.zeros(max(n_max, self.n_max) + 1)
        out[: self._probs.size] = self._probs
        return out

    def pairs(self) -> list[tuple[int, float]]:
        """(n, p_n) rows for serialization."""
        return [(int(n), float(p)) for n, p in enumerate(self._probs)]


def thermal_nmax(n_bar: float, tail: float = TAIL_TOLERANCE, minimum: int = MIN_NMAX) -> int:
    """Smallest n_max whose analytic thermal tail (q^(n_max+1)) is below ``tail``."""
    if n_bar <= 0:
        return minimum
    q = n_bar / (n_bar + 1.0)
    n = math.ceil(math.log(tail) / math.log(q)) - 1
    return max(minimum, n)


def thermal(n_bar: float, n_max: int = 0) -> FockDistribution:
    """Thermal (geometric) distribution with mean ``n_bar``.

    ``n_max=0`` picks the truncation automatically; an explicit ``n_max`` is
    raised if it would leave a tail above 1e-9.
    """
    if not n_bar >= 0 or not math.isfinite(n_bar):
        raise ValueError(f"n_bar must be a non-negative finite number, got {n_bar!r}")
    n_max = max(int(n_max), thermal_nmax(n_bar))
    if n_bar == 0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return FockDistribution(p)
    n = np.arange(n_max + 1)
    q = n_bar / (n_bar + 1.0)
    # log form avoids underflow for large n
    p = np.exp(n * math.log(q)) / (n_bar + 1.0)
    return FockDistribution(p)


def fock(n: int, n_max: int = 0) -> FockDistribution:
    p = np.zeros(max(n, n_max, MIN_NMAX) + 1)
    p[n] = 1.0
    return FockDistribution(p)


def mean_phonon(d: FockDistribution) -> float:
    return float(np.dot(d.n, d.probs))


def ground_pop(d: FockDistribution) -> float:
    return float(d.probs[0])


def variance(d: FockDistribution) -> float:
    m = mean_phonon(d)
    return float(np.dot(d.n.astype(float) ** 2, d.probs) - m * m)


ModeStateSet = dict  # ModeLabel -> FockDistribution


def validate_state_set(states: Mapping[ModeLabel, FockDistribution], modes: list[Mode]) -> None:
    """Check that ``states`` holds exactly one distribution per mode."""
    wanted = {m.label for m in modes}
    have = set(states)
    if have != wanted:
        missing = sorted(str(x) for x in wanted - have)
        extra = sorted(str(x) for x in have - wanted)
        raise ValueError(f"mode state set mismatch: missing={missing} extra={extra}")
    for label, d in states.items():
        if not isinstance(d, FockDistribution):
            raise TypeError(f"state for {label} is not a FockDistribution")


def thermal_state_set(n_bars: Mapping[ModeLabel, float]) -> dict[ModeLabel, FockDistribution]:
    return {label: thermal(nb) for label, nb in n_bars.items()}


def state_means(states: Mapping[ModeLabel, FockDistribution]) -> dict[ModeLabel, float]:
    return {label: mean_phonon(d) for label, d in states.items()}
