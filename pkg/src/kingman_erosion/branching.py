"""Critical binary branching: total-progeny law and a simulator.

The process starts from one particle; each particle splits in two and dies
at the same per-capita rate, so the population is absorbed at 0 almost
surely.  Total progeny counts the initial particle plus every birth.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

log = logging.getLogger(__name__)

EXACT_PMF_MAX_K = 64


class EventBudgetExceeded(RuntimeError):
    """A run used more than its allowed number of events."""


@dataclass(frozen=True)
class ProgenyOutcome:
    progeny: int
    extinction_time: float

    def __post_init__(self):
        if self.progeny < 1:
            raise ValueError("progeny must be at least 1")
        if not self.extinction_time > 0:
            raise ValueError("extinction time must be positive")


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def total_progeny_pmf_exact(k: int) -> Fraction:
    """P(J = k) as an exact rational, Catalan(k-1) / 2**(2k-1)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return Fraction(math.comb(2 * (k - 1), k - 1), k * 2 ** (2 * k - 1))


def total_progeny_pmf(k: int) -> float:
    """P(J = k) = 2**-(2k-1) * C(2(k-1), k-1) / k."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k <= EXACT_PMF_MAX_K:
        return float(total_progeny_pmf_exact(k))
    logp = (
        math.lgamma(2 * k - 1)
        - 2 * math.lgamma(k)
        - math.log(k)
        - (2 * k - 1) * math.log(2.0)
    )
    return math.exp(logp)


def total_progeny_pmf_array(k_max: int) -> np.ndarray:
    """``out[k-1] = P(J = k)`` for ``k = 1..k_max``."""
    return np.array([total_progeny_pmf(k) for k in range(1, k_max + 1)])


def total_progeny_tail(k: int) -> float:
    """P(J > k)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    # P(J > k) = C(2k, k) / 4**k, the probability a symmetric walk from 1 survives 2k-1 steps
    if k <= 500:
        return float(Fraction(math.comb(2 * k, k), 4**k))
    return math.exp(math.lgamma(2 * k + 1) - 2 * math.lgamma(k + 1) - 2 * k * math.log(2.0))


@numba.njit(cache=True)
def _progeny_kernel(rate, max_events, rng):
    k = 1
    births = 0
    events = 0
    t = 0.0
    while k > 0:
        if events >= max_events:
            return births + 1, t, False
        t += rng.standard_exponential() / (2.0 * rate * k)
        if rng.random() < 0.5:
            k += 1
            births += 1
        else:
            k -= 1
        events += 1
    return births + 1, t, True


@numba.njit(cache=True)
def _progeny_batch_kernel(rate, max_events, size, rng, progeny, times, ok):
    for r in range(size):
        j, t, good = _progeny_kernel(rate, max_events, rng)
        progeny[r] = j
        times[r] = t
        ok[r] = good


def simulate_total_progeny(rate: float, max_events: int, rng: np.random.Generator) -> ProgenyOutcome:
    """One run of the population count from 1 until extinction.

    Birth and death each happen at per-capita rate ``rate``.  Raises
    :class:`EventBudgetExceeded` if the run is still alive after
    ``max_events`` events.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    if max_events < 1:
        raise ValueError("max_events must be positive")
    j, t, ok = _progeny_kernel(float(rate), int(max_events), rng)
    if not ok:
        raise EventBudgetExceeded(f"run still alive after {max_events} events (progeny so far {j})")
    return ProgenyOutcome(int(j), float(t))


@dataclass
class ProgenyBatch:
    progeny: np.ndarray
    extinction_time: np.ndarray
    completed: np.ndarray

    @property
    def excluded(self) -> int:
        return int((~self.completed).sum())

    @property
    def excluded_fraction(self) -> float:
        return self.excluded / self.completed.size

    def completed_progeny(self) -> np.ndarray:
        return self.progeny[self.completed]


def simulate_total_progeny_batch(
    rate: float, max_events: int, size: int, rng: np.random.Generator
) -> ProgenyBatch:
    """``size`` independent runs; over-budget runs are flagged, not raised."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    progeny = np.empty(size, dtype=np.int64)
    times = np.empty(size, dtype=np.float64)
    ok = np.empty(size, dtype=np.bool_)
    _progeny_batch_kernel(float(rate), int(max_events), int(size), rng, progeny, times, ok)
    batch = ProgenyBatch(progeny, times, ok)
    if batch.excluded:
        log.info("excluded %d of %d runs over the %d-event budget", batch.excluded, size, max_events)
    return batch
