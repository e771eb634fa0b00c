"""Kingman's coalescent with immigration: block counts and the ancestral process.

Blocks merge pairwise at rate 1 and singletons immigrate at rate ``d_imm``.
The number of blocks is a reversible birth-death chain with closed-form
stationary law ``nu_k ∝ (2d)^k / (k! (k-1)!)``.  Looking backwards from a
stationary time, the ancestors of a few sampled blocks form a multitype
birth-death system whose per-particle rates depend only on the total count.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numba
import numpy as np

from .branching import EventBudgetExceeded

log = logging.getLogger(__name__)

TAIL_TOL = 1e-12
DEFAULT_MAX_EVENTS = 10**8


@dataclass(frozen=True)
class ImmigrationParams:
    d_imm: float

    def __post_init__(self):
        if not self.d_imm > 0:
            raise ValueError("immigration rate must be positive")


@dataclass(frozen=True)
class AncestralState:
    typed_counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        if any(a < 0 for a in self.typed_counts):
            raise ValueError("typed counts must be non-negative")
        if self.total < 1:
            raise ValueError("total must be at least 1")
        if sum(self.typed_counts) > self.total:
            raise ValueError("typed counts exceed the total")

    @property
    def untyped(self) -> int:
        return self.total - sum(self.typed_counts)


@dataclass(frozen=True)
class ProgenyRecord:
    """Backward history of one sampled block.

    ``deaths`` is the block size (every backward death is one immigrant) and
    ``lifetime`` the backward time until its last ancestor immigrated.  The
    one block that absorbs the entire past is ``immortal``: it has infinite
    size and lifetime, and ``deaths``/``lifetime`` then hold the values
    reached when immortality became certain.
    """

    deaths: int
    lifetime: float
    immortal: bool = False

    @property
    def size(self) -> float:
        return math.inf if self.immortal else self.deaths


# --------------------------------------------------------------------------
# block-count chain


def _log_terms(d_imm: float, k_max: int) -> np.ndarray:
    k = np.arange(1, k_max)
    log_ratio = math.log(2.0 * d_imm) - np.log(k) - np.log(k + 1.0)
    return np.concatenate([[0.0], np.cumsum(log_ratio)])


def default_k_max(d_imm: float) -> int:
    mode = math.sqrt(2.0 * d_imm)
    return int(math.ceil(mode + 40.0 * math.sqrt(mode + 1.0) + 40.0))


def block_count_stationary_pmf(d_imm: float, k_max: int | None = None) -> np.ndarray:
    """``out[k-1] = nu_k`` for ``k = 1..k_max``.

    Terms follow the recurrence ``nu_{k+1} = nu_k * 2d / (k (k+1))``, carried
    in log space.  Raises if the neglected tail exceeds 1e-12.
    """
    if not d_imm > 0:
        raise ValueError("immigration rate must be positive")
    if k_max is None:
        k_max = default_k_max(d_imm)
    if k_max < 1:
        raise ValueError("k_max must be positive")
    logt = _log_terms(d_imm, k_max)
    top = logt.max()
    w = np.exp(logt - top)
    z = w.sum()
    # the ratio is decreasing in k, so the tail is dominated by a geometric series
    r = 2.0 * d_imm / (k_max * (k_max + 1.0))
    if r >= 1.0:
        raise ValueError(f"k_max={k_max} is below the mode; tail not negligible")
    tail = w[-1] * r / (1.0 - r)
    if tail / z > TAIL_TOL:
        raise ValueError(f"k_max={k_max} leaves tail mass {tail / z:.3g}")
    return w / z


def detailed_balance_error(d_imm: float, k_max: int = 50) -> float:
    """Largest relative gap in ``d nu_k = k(k+1)/2 nu_{k+1}`` over ``k <= k_max``."""
    nu = block_count_stationary_pmf(d_imm, max(default_k_max(d_imm), k_max + 1))
    k = np.arange(1, k_max + 1)
    lhs = d_imm * nu[: k_max]
    rhs = k * (k + 1) / 2.0 * nu[1 : k_max + 1]
    scale = np.maximum(np.abs(lhs), np.finfo(float).tiny)
    return float(np.max(np.abs(lhs - rhs) / scale))


def block_count_mean(d_imm: float) -> float:
    nu = block_count_stationary_pmf(d_imm)
    return float(np.dot(np.arange(1, nu.size + 1), nu))


def sample_block_count(d_imm: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Independent draws from the stationary block-count law."""
    nu = block_count_stationary_pmf(d_imm)
    return rng.choice(np.arange(1, nu.size + 1), size=size, p=nu)


@numba.njit(cache=True)
def _block_count_kernel(d_imm, t_end, initial, rng):
    cap = 1024
    times = np.empty(cap)
    values = np.empty(cap, np.int64)
    times[0] = 0.0
    values[0] = initial
    count = 1
    k = initial
    t = 0.0
    while True:
        down = k * (k - 1) / 2.0
        total = d_imm + down
        t += rng.standard_exponential() / total
        if t >= t_end:
            break
        if rng.random() * total < d_imm:
            k += 1
        else:
            k -= 1
        if count == cap:
            cap *= 2
            nt = np.empty(cap)
            nv = np.empty(cap, np.int64)
            nt[:count] = times[:count]
            nv[:count] = values[:count]
            times = nt
            values = nv
        times[count] = t
        values[count] = k
        count += 1
    return times[:count], values[:count]


@dataclass(frozen=True)
class BlockCountPath:
    times: np.ndarray
    values: np.ndarray
    t_end: float

    def occupancy(self, k_max: int | None = None) -> np.ndarray:
        """Fraction of time spent at each level: ``out[k-1]`` for ``k = 1..k_max``."""
        durations = np.diff(np.append(self.times, self.t_end))
        k_max = int(self.values.max()) if k_max is None else k_max
        occ = np.bincount(self.values - 1, weights=durations, minlength=k_max)
        return occ / self.t_end

    def up_step_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Per level: number of departures and how many of them went up."""
        src = self.values[:-1]
        up = np.diff(self.values) > 0
        top = int(self.values.max()) + 1
        return np.bincount(src, minlength=top), np.bincount(src[up], minlength=top)


def simulate_block_count(d_imm: float, t_end: float, initial: int, rng: np.random.Generator) -> BlockCountPath:
    """Birth-death path with up-rate ``d_imm`` and down-rate ``k(k-1)/2``."""
    if initial < 1:
        raise ValueError("initial block count must be at least 1")
    if not d_imm > 0 or not t_end > 0:
        raise ValueError("d_imm and t_end must be positive")
    times, values = _block_count_kernel(float(d_imm), float(t_end), int(initial), rng)
    return BlockCountPath(times, values, float(t_end))


# --------------------------------------------------------------------------
# ancestral process

# status codes written by the kernel
_DONE, _IMMORTAL, _OVER_BUDGET = 0, 1, 2


@numba.njit(cache=True)
def _ancestral_kernel(p, d_imm, cdf, max_events, rng, deaths, lifetime, immortal, check):
    # stationary total count, conditioned on having at least p blocks
    rejections = 0
    while True:
        k = np.searchsorted(cdf, rng.random(), side="right") + 1
        if k >= p:
            break
        rejections += 1
    a = np.ones(p, np.int64)
    for i in range(p):
        deaths[i] = 0
        lifetime[i] = 0.0
        immortal[i] = False
    typed = p
    alive = p
    t = 0.0
    events = 0
    status = _DONE
    while alive > 0:
        if typed == k and alive == 1:
            # no untyped particle is left and the only living type holds every
            # particle; the total never reaches 0, so this type never dies out
            for i in range(p):
                if a[i] > 0:
                    immortal[i] = True
                    lifetime[i] = math.inf
            status = _IMMORTAL
            break
        if events >= max_events:
            status = _OVER_BUDGET
            break
        down = (k - 1) / 2.0
        total = d_imm + down * k
        t += rng.standard_exponential() / total
        birth = rng.random() * total < d_imm
        who = rng.integers(0, k)
        i = 0
        while i < p and who >= a[i]:
            who -= a[i]
            i += 1
        if birth:
            k += 1
            if i < p:
                a[i] += 1
                typed += 1
        else:
            k -= 1
            if i < p:
                a[i] -= 1
                typed -= 1
                deaths[i] += 1
                if a[i] == 0:
                    lifetime[i] = t
                    alive -= 1
        events += 1
        if check:
            s = 0
            for j in range(p):
                s += a[j]
            if s != typed or typed > k or k < 1:
                raise AssertionError("ancestral state invariant violated")
    return status, rejections, events


@numba.njit(cache=True)
def _ancestral_batch(p, d_imm, cdf, max_events, size, rng, deaths, lifetime, immortal, status, rejections):
    for r in range(size):
        s, rej, _ = _ancestral_kernel(
            p, d_imm, cdf, max_events, rng, deaths[r], lifetime[r], immortal[r], False
        )
        status[r] = s
        rejections[r] = rej


def _cdf(d_imm: float, p: int) -> np.ndarray:
    nu = block_count_stationary_pmf(d_imm)
    if p > nu.size:
        raise ValueError(f"p={p} blocks is beyond the support of the block-count law")
    cdf = np.cumsum(nu)
    cdf[-1] = 1.0
    return cdf


def simulate_ancestral(
    p: int,
    d_imm: float,
    rng: np.random.Generator,
    max_events: int = DEFAULT_MAX_EVENTS,
    check_invariants: bool = False,
) -> list[ProgenyRecord]:
    """Backward ancestral process of ``p`` uniformly sampled blocks.

    The total count starts from the stationary block-count law (resampled
    until it holds at least ``p`` blocks); each sampled block starts as one
    particle of its own type.  Returns one record per sampled block.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    deaths = np.zeros(p, np.int64)
    lifetime = np.zeros(p)
    immortal = np.zeros(p, np.bool_)
    status, rejections, _ = _ancestral_kernel(
        int(p), float(d_imm), _cdf(d_imm, p), int(max_events), rng, deaths, lifetime, immortal, check_invariants
    )
    if rejections:
        log.info("resampled the initial block count %d times to reach p=%d", rejections, p)
    if status == _OVER_BUDGET:
        raise EventBudgetExceeded(f"ancestral process still running after {max_events} events")
    return [ProgenyRecord(int(n), float(t), bool(f)) for n, t, f in zip(deaths, lifetime, immortal)]


@dataclass
class AncestralBatch:
    deaths: np.ndarray  # (replicates, p)
    lifetime: np.ndarray
    immortal: np.ndarray
    status: np.ndarray
    rejections: np.ndarray

    @property
    def over_budget(self) -> np.ndarray:
        return self.status == _OVER_BUDGET

    @property
    def excluded_fraction(self) -> float:
        return float(self.over_budget.mean())

    @property
    def rejection_rate(self) -> float:
        """Fraction of initial-count draws that were rejected."""
        rej = int(self.rejections.sum())
        return rej / (rej + self.rejections.size)

    def sizes(self, type_index: int = 0) -> np.ndarray:
        """Block sizes of one type over valid replicates; immortal blocks are ``inf``."""
        ok = ~self.over_budget
        s = self.deaths[ok, type_index].astype(float)
        s[self.immortal[ok, type_index]] = math.inf
        return s


def simulate_ancestral_batch(
    p: int, d_imm: float, replicates: int, rng: np.random.Generator, max_events: int = DEFAULT_MAX_EVENTS
) -> AncestralBatch:
    if p < 1:
        raise ValueError("p must be at least 1")
    deaths = np.zeros((replicates, p), np.int64)
    lifetime = np.zeros((replicates, p))
    immortal = np.zeros((replicates, p), np.bool_)
    status = np.zeros(replicates, np.int64)
    rejections = np.zeros(replicates, np.int64)
    _ancestral_batch(
        int(p), float(d_imm), _cdf(d_imm, p), int(max_events), int(replicates), rng,
        deaths, lifetime, immortal, status, rejections,
    )
    batch = AncestralBatch(deaths, lifetime, immortal, status, rejections)
    over = int(batch.over_budget.sum())
    if over:
        log.info("excluded %d of %d ancestral runs over the event budget", over, replicates)
    if rejections.any():
        log.info("initial block-count rejection rate %.4f", batch.rejection_rate)
    return batch


# --------------------------------------------------------------------------
# block-count scaling


@dataclass(frozen=True)
class ScalingRow:
    n: int
    mean_scaled: float
    stderr: float
    target: float


def rescaled_block_count_check(
    n_values: list[int], d: float, replicates: int, rng: np.random.Generator
) -> list[ScalingRow]:
    """Mean of ``M / sqrt(n)`` for stationary block counts at immigration rate ``n d``."""
    rows = []
    for n in n_values:
        m = sample_block_count(n * d, replicates, rng) / math.sqrt(n)
        se = float(m.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.nan
        rows.append(ScalingRow(int(n), float(m.mean()), se, math.sqrt(2 * d)))
    return rows
