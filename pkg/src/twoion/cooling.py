"""Doppler limit, resolved-sideband cooling, heating and heating-rate analysis.

Sideband cooling of one mode is a birth-death process on its Fock ladder:

    level n -> n-1 at rate (R + h) * n
    level n -> n+1 at rate h * (n + 1)

with cooling rate R and heating rate h (phonons/s). The mean obeys
dn/dt = -R n + h, a thermal state stays thermal, and the steady state is
thermal with mean h / R.
"""

from __future__ import annotations

import csv
import io
import math
import os
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import optimize, sparse, stats

from .crystal import ModeLabel, mode_label
from .phonon import MIN_NMAX, FockDistribution, mean_phonon, thermal_nmax

MAX_TAIL = 1e-6
TRIM_TAIL = 1e-15
STEP_FRACTION = 0.1
STEPS_PER_CHUNK = 2000


class TruncationError(RuntimeError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class DopplerParams:
    gamma_eff: float = 2 * math.pi * 30e6
    geometry_factor: float = 2.1

    def __post_init__(self):
        if not self.gamma_eff > 0:
            raise ValueError("gamma_eff must be positive")
        if not self.geometry_factor >= 1:
            raise ValueError("geometry_factor must be >= 1")


def doppler_limit(params: DopplerParams, omega_mode: float) -> float:
    """Mean phonon number at the Doppler limit kT = hbar*gamma/2, times G."""
    if not omega_mode > 0:
        raise ValueError("mode frequency must be positive")
    return params.geometry_factor * params.gamma_eff / (2.0 * omega_mode)


@dataclass(frozen=True)
class CoolingPulseParams:
    mode: ModeLabel
    duration: float
    cool_rate: float
    steady_n: float = 0.0

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("duration must be non-negative")
        if not self.cool_rate >= 0:
            raise ValueError("cool_rate must be non-negative")
        if not self.steady_n >= 0:
            raise ValueError("steady_n must be non-negative")


def cool_rate_from_laser(eta: float, rabi: float, gamma_quench: float) -> float:
    """Phonon-removal rate for a red-sideband drive of Rabi frequency ``rabi``."""
    return eta**2 * rabi**2 / gamma_quench


def _step_matrix(size: int, cool_rate: float, heat_rate: float, dt: float):
    n = np.arange(size, dtype=float)
    up = heat_rate * (n + 1.0)
    up[-1] = 0.0  # reflecting top level
    down = (cool_rate + heat_rate) * n
    a = sparse.diags(
        [up[:-1], -(up + down), down[1:]], offsets=[-1, 0, 1], shape=(size, size), format="csr"
    )
    ha = a * dt
    # classical RK4 for an autonomous linear system is this degree-4 polynomial
    term = sparse.identity(size, format="csr")
    m = term.copy()
    for k in range(1, 5):
        term = (term @ ha) / k
        m = m + term
    return m.tocsr()


def _needed_size(mean_bound: float) -> int:
    return max(MIN_NMAX, thermal_nmax(mean_bound, tail=1e-12)) + 1


def _trim(p: np.ndarray, min_size: int) -> np.ndarray:
    tail = np.cumsum(p[::-1])[::-1]
    keep = np.nonzero(tail >= TRIM_TAIL)[0]
    size = max(min_size, (keep[-1] + 2) if keep.size else 1)
    return p[:size] if size < p.size else p


def _evolve(dist: FockDistribution, cool_rate: float, heat_rate: float, duration: float) -> FockDistribution:
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if cool_rate < 0 or heat_rate < 0:
        raise ValueError("rates must be non-negative")
    if duration == 0 or (cool_rate == 0 and heat_rate == 0):
        return dist
    floor = heat_rate / cool_rate if cool_rate > 0 else math.inf

    def mean_bound(mean, t_left):
        # the mean relaxes monotonically toward the floor and grows no faster than the heating rate
        return min(max(mean, floor), mean + heat_rate * t_left) + 1.0

    p = dist.padded(_needed_size(mean_bound(mean_phonon(dist), duration)) - 1)
    t_left = duration
    while t_left > duration * 1e-12:
        n = np.arange(p.size, dtype=float)
        max_rate = float(((cool_rate + heat_rate) * n + heat_rate * (n + 1)).max())
        dt_max = STEP_FRACTION / max_rate
        steps = max(1, min(STEPS_PER_CHUNK, math.ceil(t_left / dt_max - 1e-9)))
        span = min(t_left, steps * dt_max)
        step = _step_matrix(p.size, cool_rate, heat_rate, span / steps)
        for _ in range(steps):
            p = step @ p
        t_left -= span
        if p[-1] > MAX_TAIL:
            raise TruncationError(
                f"probability {p[-1]:.3g} at truncation level n={p.size - 1} exceeds {MAX_TAIL}"
            )
        if t_left > 0:
            mean = float(np.dot(np.arange(p.size), p))
            p = _trim(p, _needed_size(mean_bound(mean, t_left)))
    if np.any(p < 0):
        raise RuntimeError("integration produced negative probabilities")
    return FockDistribution(p)


def cool_pulse(dist: FockDistribution, p: CoolingPulseParams, heating: float = 0.0) -> FockDistribution:
    """Evolve one mode under a red-sideband cooling pulse with background heating."""
    effective_heating = heating + p.cool_rate * p.steady_n
    return _evolve(dist, p.cool_rate, effective_heating, p.duration)


def heat_delay(dist: FockDistribution, heating: float, t_delay: float) -> FockDistribution:
    """Free evolution with all lasers off; the mean grows by ``heating * t_delay``."""
    return _evolve(dist, 0.0, heating, t_delay)


def cooling_mean(n0: float, cool_rate: float, heating: float, t, steady_n: float = 0.0):
    """Closed-form mean phonon number during a cooling pulse."""
    t = np.asarray(t, dtype=float)
    if cool_rate == 0:
        out = n0 + heating * t
    else:
        n_ss = steady_n + heating / cool_rate
        out = n_ss + (n0 - n_ss) * np.exp(-cool_rate * t)
    return float(out) if out.ndim == 0 else out


@dataclass
class ScheduleStep:
    pulse_index: int
    mode: ModeLabel
    duration: float
    n_bar_after: dict[ModeLabel, float]


@dataclass
class ScheduleResult:
    states: dict[ModeLabel, FockDistribution]
    log: list[ScheduleStep] = field(default_factory=list)

    def final_means(self) -> dict[ModeLabel, float]:
        return {k: mean_phonon(v) for k, v in self.states.items()}


def run_schedule(states: Mapping[ModeLabel, FockDistribution], pulses: Sequence[CoolingPulseParams],
                 heating_rates: Mapping[ModeLabel, float] | None = None,
                 order: Sequence[ModeLabel] | None = None) -> ScheduleResult:
    """Apply cooling pulses one after another.

    While one mode is cooled, every other mode heats at its own rate for the
    duration of that pulse. ``order`` optionally reorders ``pulses`` by mode.
    """
    heating_rates = dict(heating_rates or {})
    if order is not None:
        by_mode = {}
        for p in pulses:
            if p.mode in by_mode:
                raise ValueError(f"duplicate pulse for {p.mode} when reordering")
            by_mode[p.mode] = p
        pulses = [by_mode[mode_label(m)] for m in order]
    current = dict(states)
    for p in pulses:
        if p.mode not in current:
            raise KeyError(f"pulse targets {p.mode}, which has no phonon state")
    result = ScheduleResult(states=current)
    for i, p in enumerate(pulses):
        for label, dist in list(current.items()):
            h = heating_rates.get(label, 0.0)
            if label == p.mode:
                current[label] = cool_pulse(dist, p, h)
            else:
                current[label] = heat_delay(dist, h, p.duration)
        result.log.append(ScheduleStep(i, p.mode, p.duration,
                                       {k: mean_phonon(v) for k, v in current.items()}))
    result.states = current
    return result


def predict_schedule_means(initial: Mapping[ModeLabel, float], pulses: Sequence[CoolingPulseParams],
                           heating_rates: Mapping[ModeLabel, float]) -> dict[ModeLabel, float]:
    """Closed-form final means for :func:`run_schedule`."""
    means = dict(initial)
    for p in pulses:
        for label in means:
            h = heating_rates.get(label, 0.0)
            if label == p.mode:
                means[label] = cooling_mean(means[label], p.cool_rate, h, p.duration, p.steady_n)
            else:
                means[label] = means[label] + h * p.duration
    return means


def calibrate_cooling_rates(initial: Mapping[ModeLabel, float], targets: Mapping[ModeLabel, float],
                            heating_rates: Mapping[ModeLabel, float], order: Sequence[ModeLabel],
                            duration: float) -> dict[ModeLabel, float]:
    """Cooling rate per mode so that a schedule ends at ``targets``.

    Uses the closed-form mean, so the heating a mode picks up before and
    after its own pulse is accounted for.
    """
    order = [mode_label(m) for m in order]
    total = len(order)
    rates = {}
    for k, label in enumerate(order):
        h = heating_rates.get(label, 0.0)
        n_start = initial[label] + h * duration * k
        after = h * duration * (total - k - 1)
        goal = targets[label] - after
        if goal <= 0:
            raise ValueError(f"target for {label} is below the heating accumulated after its pulse")

        def residual(log_r):
            return cooling_mean(n_start, math.exp(log_r), h, duration) - goal

        lo, hi = math.log(1e-3), math.log(1e9)
        if residual(lo) < 0:
            raise ValueError(f"target for {label} is above its uncooled value")
        if residual(hi) > 0:
            raise ValueError(f"target for {label} is below the heating floor during its pulse")
        rates[label] = math.exp(optimize.brentq(residual, lo, hi, xtol=1e-14, rtol=1e-14))
    return rates


@dataclass(frozen=True)
class CoolingFit:
    tau: float
    n_initial: float
    n_floor: float
    time_to_one: float
    rms_residual: float


def fit_cooling_time(t, n_bar) -> CoolingFit:
    """Fit n(t) = n_floor + (n_initial - n_floor) * exp(-t / tau).

    ``time_to_one`` is the time where the fitted curve crosses one phonon
    (0 if it starts below one, inf if the floor is at or above one).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(n_bar, dtype=float)
    if t.size < 3 or t.size != y.size:
        raise ValueError("need at least three (time, n_bar) samples")
    if np.any(y <= 0):
        raise ValueError("mean phonon numbers must be positive")
    order = np.argsort(t)
    t, y = t[order], y[order]
    if not y[0] > y[-1]:
        raise FitError("data do not decay; no cooling time can be fitted")

    def model(tt, n0, n_ss, tau):
        return n_ss + (n0 - n_ss) * np.exp(-tt / tau)

    span = max(t[-1] - t[0], 1e-30)
    guess_tau = span / max(math.log(y[0] / y[-1]), 0.5)
    try:
        popt, _ = optimize.curve_fit(model, t, y, p0=(y[0], min(y) * 0.5, guess_tau),
                                     bounds=([0, 0, span * 1e-6], [np.inf, np.inf, span * 1e6]),
                                     xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"cooling fit failed: {exc}") from exc
    n0, n_ss, tau = (float(x) for x in popt)
    if not n0 > n_ss:
        raise FitError("fitted curve does not decay")
    if n_ss >= 1:
        t1 = math.inf
    elif n0 <= 1:
        t1 = 0.0
    else:
        t1 = tau * math.log((n0 - n_ss) / (1 - n_ss))
    res = y - model(t, *popt)
    return CoolingFit(tau, n0, n_ss, t1, float(np.sqrt(np.mean(res**2))))


@dataclass(frozen=True)
class HeatingFit:
    rate: float
    stderr: float
    intercept: float


def fit_heating_rate(t, n_bar) -> HeatingFit:
    """Least-squares slope of mean phonon number against delay time."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(n_bar, dtype=float)
    if t.size < 2 or t.size != y.size:
        raise ValueError("need at least two (delay, n_bar) samples")
    if np.ptp(t) == 0:
        raise ValueError("all delay times are identical; slope undefined")
    res = stats.linregress(t, y)
    stderr = float(res.stderr) if t.size > 2 else 0.0
    return HeatingFit(float(res.slope), stderr, float(res.intercept))


def normalize_heating(rate, frequency_mhz):
    """Heating rate rescaled to a 1 MHz trap (constant absorbed power)."""
    if np.any(np.asarray(frequency_mhz) <= 0):
        raise ValueError("frequency must be positive")
    return rate * frequency_mhz


@dataclass(frozen=True)
class HeatingRecord:
    trap_name: str
    ion: str
    size_d_mm: float
    mode: str
    frequency: float | None = None  # MHz
    rate: float | None = None  # phonons/s
    normalized_rate: float | None = None
    upper_limit: bool = False

    def __post_init__(self):
        if not self.size_d_mm > 0:
            raise ValueError(f"{self.trap_name}: size_d_mm must be positive")
        if self.frequency is not None and not self.frequency > 0:
            raise ValueError(f"{self.trap_name}: frequency must be positive")
        if self.rate is not None and not self.rate >= 0:
            raise ValueError(f"{self.trap_name}: rate must be non-negative")
        if self.normalized_rate is None and (self.rate is None or self.frequency is None):
            raise ValueError(f"{self.trap_name}/{self.mode}: need rate and frequency, or normalized_rate")

    @property
    def is_com(self) -> bool:
        return "c.o.m" in self.mode.lower() or "com" == self.mode.lower()

    def normalized(self) -> float:
        """Tabulated normalized rate if present, else computed from rate and frequency."""
        if self.normalized_rate is not None:
            return self.normalized_rate
        return normalize_heating(self.rate, self.frequency)


_FIELDS = ("trap", "ion", "size_mm", "mode", "frequency_MHz", "rate", "normalized_rate", "upper_limit")


def _opt_float(text):
    text = (text or "").strip()
    return float(text) if text else None


def parse_heating_records(text: str) -> list[HeatingRecord]:
    """Read comma-separated heating records with a header row.

    Required columns: trap, size_mm, mode, and either frequency_MHz + rate or
    normalized_rate. Optional: ion, upper_limit (true/false).
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ValueError("heating records: empty file")
    header = [h.strip() for h in reader.fieldnames]
    unknown = set(header) - set(_FIELDS)
    if unknown:
        raise ValueError(f"heating records: unknown columns {sorted(unknown)}")
    for need in ("trap", "size_mm", "mode"):
        if need not in header:
            raise ValueError(f"heating records: missing column {need!r}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
        if not any(row.values()):
            continue
        try:
            records.append(HeatingRecord(
                trap_name=row["trap"],
                ion=row.get("ion", ""),
                size_d_mm=float(row["size_mm"]),
                mode=row["mode"],
                frequency=_opt_float(row.get("frequency_MHz")),
                rate=_opt_float(row.get("rate")),
                normalized_rate=_opt_float(row.get("normalized_rate")),
                upper_limit=row.get("upper_limit", "").lower() in ("1", "true", "yes"),
            ))
        except ValueError as exc:
            raise ValueError(f"heating records line {lineno}: {exc}") from exc
    return records


def load_heating_records(path: str | os.PathLike | None = None) -> list[HeatingRecord]:
    """Load records from ``path``, or the bundled reference table if None."""
    if path is None:
        text = resources.files("twoion").joinpath("data/heating_records.csv").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_heating_records(text)


@dataclass(frozen=True)
class D4Result:
    c: float
    std: float
    n: int
    terms: tuple[float, ...]


def d4_coefficient(records: Iterable[HeatingRecord],
                   select: Callable[[HeatingRecord], bool] | None = None,
                   include_limits: bool = False) -> D4Result:
    """Mean of normalized rate times d^4 (d in mm) over the selected records."""
    terms = [r.normalized() * r.size_d_mm**4 for r in records
             if (select is None or select(r)) and (include_limits or not r.upper_limit)]
    if not terms:
        raise ValueError("no heating records selected")
    arr = np.array(terms)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return D4Result(float(arr.mean()), std, arr.size, tuple(float(x) for x in arr))


@dataclass(frozen=True)
class D4Check:
    name: str
    computed: D4Result
    reference: float
    reference_sigma: float

    @property
    def discrepant(self) -> bool:
        return abs(self.computed.c - self.reference) > self.reference_sigma


def record_selector(ion: str | None = None, trap: str | None = None, com_only: bool = False):
    def select(r: HeatingRecord) -> bool:
        if ion is not None and r.ion != ion:
            return False
        if trap is not None and r.trap_name != trap:
            return False
        return not com_only or r.is_com
    return select


def check_d4(name: str, records: Iterable[HeatingRecord], reference: float, reference_sigma: float,
             select=None, include_limits: bool = False) -> D4Check:
    """Compare a computed d^4 coefficient against a reference value and flag disagreement."""
    return D4Check(name, d4_coefficient(records, select, include_limits), reference, reference_sigma)
