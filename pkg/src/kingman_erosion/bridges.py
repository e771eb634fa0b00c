"""Exchangeable bridges, the standard flow of bridges, and a flow-based
stationary sampler for the erosion chain.

A bridge is ``B(u) = drift * u + sum_i mass_i * 1{u >= loc_i}``.  Increments of
the standard flow over a time span ``t`` have zero drift, ``N_t`` atoms at
i.i.d. uniform locations and Dirichlet(1, ..., 1) masses, where ``N_t`` is the
pure-death chain (``k -> k-1`` at rate ``k(k-1)/2``) come down from infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .partitions import Partition

MASS_TOL = 1e-12
DEFAULT_EPS = 1e-3
DEFAULT_WINDOW_SD = 10.0
EXACT_MIN_LEVEL = 40
MAX_ATOMS = 10**7


@dataclass(frozen=True, eq=False)
class Bridge:
    """Non-decreasing right-continuous map of [0, 1] onto [0, 1].

    ``locations`` are sorted and pairwise distinct; ``cumulative[j]`` is the
    total jump mass at or below ``locations[j]`` and is what evaluation reads,
    so composed bridges evaluate exactly like the composition.
    """

    locations: np.ndarray
    masses: np.ndarray
    drift: float = 0.0
    cumulative: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        mass = np.asarray(self.masses, dtype=float)
        if loc.shape != mass.shape or loc.ndim != 1:
            raise ValueError("locations and masses must be 1-D of equal length")
        order = np.argsort(loc, kind="stable")
        if not np.array_equal(order, np.arange(loc.size)):
            loc, mass = loc[order], mass[order]
            if self.cumulative is not None:
                raise ValueError("explicit cumulative masses need sorted locations")
        if loc.size and (loc[0] < 0 or loc[-1] > 1):
            raise ValueError("atom locations must lie in [0, 1]")
        if np.any(np.diff(loc) <= 0):
            raise ValueError("atom locations must be distinct")
        if np.any(mass < 0) or self.drift < 0:
            raise ValueError("masses and drift must be non-negative")
        total = self.drift + math.fsum(mass)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"drift + masses = {total!r}, expected 1")
        cum = np.cumsum(mass) if self.cumulative is None else np.asarray(self.cumulative, dtype=float)
        if cum.shape != mass.shape:
            raise ValueError("cumulative must match masses")
        if self.drift == 0 and cum.size:
            cum = cum.copy()
            cum[-1] = 1.0
        for name, arr in (("locations", loc), ("masses", mass), ("cumulative", cum)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "drift", float(self.drift))

    @classmethod
    def identity(cls) -> "Bridge":
        return cls(np.empty(0), np.empty(0), 1.0)

    @classmethod
    def single_atom(cls, location: float) -> "Bridge":
        return cls(np.array([location]), np.array([1.0]), 0.0)

    def __len__(self) -> int:
        return self.locations.size

    def __call__(self, u):
        return bridge_eval(self, u)


def _check_unit(u: np.ndarray) -> None:
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise ValueError("argument must lie in [0, 1]")


def bridge_eval(b: Bridge, u):
    """``B(u) = drift * u + sum of masses at locations <= u``."""
    ua = np.asarray(u, dtype=float)
    _check_unit(ua)
    idx = np.searchsorted(b.locations, ua, side="right") - 1
    jumps = np.where(idx >= 0, b.cumulative[np.maximum(idx, 0)] if b.cumulative.size else 0.0, 0.0)
    out = b.drift * ua + jumps if b.drift else jumps
    out = np.where(ua == 1.0, 1.0, out)
    return float(out) if np.ndim(u) == 0 else out


def bridge_inverse(b: Bridge, u):
    """``inf{t : B(t) > u}`` for ``u < 1`` and 1 at ``u = 1``."""
    ua = np.asarray(u, dtype=float)
    _check_unit(ua)
    # pieces [start_j, start_{j+1}) with start_0 = 0 and start_j = loc_{j-1}
    starts = np.concatenate([[0.0], b.locations])
    base = np.concatenate([[0.0], b.cumulative])  # jump mass accumulated on piece j
    ends = np.append(b.locations, 1.0)
    right = b.drift * ends + base  # left limit of B at the end of each piece
    left = b.drift * starts + base
    j = np.searchsorted(right, ua, side="right")
    j = np.minimum(j, starts.size - 1)
    if b.drift > 0:
        inside = (ua - base[j]) / b.drift
        out = np.where(left[j] > ua, starts[j], inside)
    else:
        out = starts[j]
    out = np.where(ua >= 1.0, 1.0, out)
    return float(out) if np.ndim(u) == 0 else out


def compose(outer: Bridge, inner: Bridge) -> Bridge:
    """The bridge ``u -> outer(inner(u))``, for zero-drift bridges."""
    if outer.drift > 0 or inner.drift > 0:
        raise ValueError("composition is only supported for zero-drift bridges")
    values = np.asarray(bridge_eval(outer, inner.cumulative)) if len(inner) else np.empty(0)
    start = bridge_eval(outer, 0.0)
    prev = np.concatenate([[start], values[:-1]])
    keep = values > prev
    loc = inner.locations[keep]
    cum = values[keep]
    if start > 0 and not (loc.size and loc[0] == 0.0):
        # outer has an atom at 0, so the composition already jumps at 0
        loc = np.concatenate([[0.0], loc])
        cum = np.concatenate([[start], cum])
    masses = np.diff(np.concatenate([[0.0], cum]))
    return Bridge(loc, masses, 0.0, cum)


# --------------------------------------------------------------------------
# pure-death chain from infinity


@numba.njit(cache=True)
def _tail_inv_sq(m):
    # sum over i >= m of 1/i^2 (Euler-Maclaurin, error below 1/(42 m^7))
    x = float(m)
    return 1.0 / x + 0.5 / x**2 + 1.0 / (6.0 * x**3) - 1.0 / (30.0 * x**5)


@numba.njit(cache=True)
def _descent_moments(a, b):
    """Mean and variance of the time the chain takes to go from level b to level a."""
    a = float(a)
    b = float(b)
    mean = 2.0 / a - 2.0 / b
    if a > 10000.0:
        # the exact form cancels badly here; midpoint integral of 4/x^4 (1 + 2/x + 3/x^2 + 4/x^3)
        lo = 1.0 / (a + 0.5)
        hi = 1.0 / (b + 0.5)
        var = 4.0 * (
            (lo**3 - hi**3) / 3.0 + (lo**4 - hi**4) / 2.0 + 0.6 * (lo**5 - hi**5) + (lo**6 - hi**6) / 1.5
        )
    else:
        var = 4.0 * (
            (_tail_inv_sq(a) - _tail_inv_sq(b))
            + (_tail_inv_sq(a + 1) - _tail_inv_sq(b + 1))
            - 2.0 * (1.0 / a - 1.0 / b)
        )
    return mean, var


@numba.njit(cache=True)
def _death_count_kernel(t, eps, window_sd, rng):
    k0 = 4.0 / (eps * t)
    k = int(math.ceil(k0)) if k0 < 4e18 else 4000000000000000000
    # started at k at time 0, the chain crosses t near level 2/(t + 2/k),
    # with standard deviation about sqrt(2/(3t)) for small t
    lim = 2.0 / (t + 2.0 / k) + window_sd * math.sqrt(2.0 / (3.0 * t))
    k_exact = int(math.ceil(lim)) if lim < k else k
    if k_exact < EXACT_MIN_LEVEL:
        k_exact = EXACT_MIN_LEVEL
    s = 0.0
    # far above the typical value 2/t, cross halving runs of levels with one
    # gamma draw matching the exact mean and variance
    while k > k_exact:
        a = k // 2
        if a < k_exact:
            a = k_exact
        mean, var = _descent_moments(a, k)
        g = rng.gamma(mean * mean / var, var / mean)
        if s + g > t:
            break
        s += g
        k = a
    while k > 1:
        s += rng.standard_exponential() / (0.5 * float(k) * float(k - 1))
        if s > t:
            return k
        k -= 1
    return 1


def sample_death_count_from_infinity(
    t: float, eps: float = DEFAULT_EPS, rng: np.random.Generator | None = None, window_sd: float = DEFAULT_WINDOW_SD
) -> int:
    """Value at time ``t`` of the pure-death chain started from infinity.

    The chain is started at ``K0 = ceil(4 / (eps t))``; the neglected entrance
    time from infinity to ``K0`` has mean ``2 / K0 <= eps t / 2``.  Levels
    within ``window_sd`` standard deviations above the typical crossing level ``2 / (t + 2 / K0)``
    (and all levels below 40) are walked one exponential at a time.  Higher
    levels are crossed in halving runs, each with one gamma draw matching the
    exact mean and variance of its descent time; with the default window a
    run straddles time ``t`` with negligible probability, and if one does it
    is discarded and walked exactly.  ``window_sd=inf`` walks every level.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if rng is None:
        raise TypeError("rng is required")
    return int(_death_count_kernel(float(t), float(eps), float(window_sd), rng))


def sample_standard_bridge(
    t: float, rng: np.random.Generator, eps: float = DEFAULT_EPS, max_atoms: int = MAX_ATOMS
) -> Bridge:
    """Increment of the standard flow over a span ``t``."""
    n_atoms = sample_death_count_from_infinity(t, eps, rng)
    if n_atoms > max_atoms:
        raise MemoryError(f"bridge over span {t:.3g} has {n_atoms} atoms (> {max_atoms})")
    e = rng.standard_exponential(n_atoms)
    masses = e / e.sum()
    loc = np.sort(rng.random(n_atoms))
    return Bridge(loc, masses, 0.0)


# --------------------------------------------------------------------------
# stationary erosion partition from the flow


@numba.njit(cache=True)
def _lazy_inverse(vals, n_atoms, rng, atom_out):
    """Apply ``B^{-1}`` of a fresh standard bridge with ``n_atoms`` atoms to ``vals``.

    Only the atoms hit by the queries are drawn: the cumulative masses are the
    order statistics of ``n_atoms - 1`` uniforms, so counts below sorted
    queries are sequential binomials, and the locations of the hit atoms are
    sequential beta order statistics of ``n_atoms`` uniforms.
    """
    q = vals.shape[0]
    order = np.argsort(vals)
    prev_u = 0.0
    below = 0  # breakpoints <= prev_u
    atom = np.empty(q, np.int64)
    for r in range(q):
        u = vals[order[r]]
        if u > prev_u:
            rest = n_atoms - 1 - below
            if rest > 0:
                below += rng.binomial(rest, (u - prev_u) / (1.0 - prev_u))
            prev_u = u
        atom[r] = below
    prev_j = -1
    prev_v = 0.0
    for r in range(q):
        j = atom[r]
        if j != prev_j:
            if prev_j < 0:
                prev_v = rng.beta(j + 1, n_atoms - j)
            else:
                prev_v = prev_v + (1.0 - prev_v) * rng.beta(j - prev_j, n_atoms - j)
            prev_j = j
        vals[order[r]] = prev_v
        atom_out[order[r]] = j


@numba.njit(cache=True)
def _flow_kernel(n, d, eps, window_sd, rng, out):
    age = np.empty(n)
    for i in range(n):
        age[i] = rng.standard_exponential() / d
    pos = np.empty(n)
    for i in range(n):
        pos[i] = rng.random()
    order = np.argsort(-age, kind="mergesort")
    vals = np.empty(n)
    atom = np.empty(n, np.int64)
    for k in range(n):
        vals[k] = pos[order[k]]
        span = age[order[k]] - (age[order[k + 1]] if k + 1 < n else 0.0)
        if span <= 0.0:
            continue
        n_atoms = _death_count_kernel(span, eps, window_sd, rng)
        _lazy_inverse(vals[: k + 1], n_atoms, rng, atom[: k + 1])
    remap = np.full(n, -1, np.int64)
    # atom indices of the last increment identify the ancestors
    seen_atoms = np.empty(n, np.int64)
    seen_ids = np.empty(n, np.int64)
    n_seen = 0
    lab_of = np.empty(n, np.int64)
    for k in range(n):
        a = atom[k]
        found = -1
        for s in range(n_seen):
            if seen_atoms[s] == a:
                found = seen_ids[s]
                break
        if found < 0:
            seen_atoms[n_seen] = a
            seen_ids[n_seen] = n_seen
            found = n_seen
            n_seen += 1
        lab_of[order[k]] = found
    nxt = 0
    for x in range(n):
        b = lab_of[x]
        if remap[b] < 0:
            remap[b] = nxt
            nxt += 1
        out[x] = remap[b]
    return nxt


@numba.njit(cache=True)
def _flow_batch(n, d, eps, window_sd, size, rng, out):
    for r in range(size):
        _flow_kernel(n, d, eps, window_sd, rng, out[r])


def _materialized_flow(n: int, d: float, rng: np.random.Generator, eps: float) -> np.ndarray:
    age = rng.standard_exponential(n) / d
    pos = rng.random(n)
    order = np.argsort(-age, kind="stable")
    vals = np.empty(0)
    atoms = np.empty(0, np.int64)
    for k in range(n):
        vals = np.append(vals, pos[order[k]])
        span = age[order[k]] - (age[order[k + 1]] if k + 1 < n else 0.0)
        if span <= 0:
            continue
        b = sample_standard_bridge(span, rng, eps)
        vals = np.asarray(bridge_inverse(b, vals))
        atoms = np.searchsorted(b.locations, vals)
    labels = np.empty(n, np.int64)
    labels[order] = atoms
    return labels


def sample_stationary_erosion_via_flow(
    n: int,
    d: float,
    rng: np.random.Generator,
    method: str = "lazy",
    eps: float = DEFAULT_EPS,
    window_sd: float = DEFAULT_WINDOW_SD,
) -> Partition:
    """Stationary erosion partition of ``[n]`` read off the standard flow.

    Integer ``i`` was last eroded ``T_i ~ Exp(d)`` ago at a uniform position
    ``U_i``; its ancestor at time 0 is ``B^{-1}_{-T_i,0}(U_i)``, obtained by
    pushing ``U_i`` through the inverses of independent flow increments over
    the gaps between the sorted ``T``'s, oldest first.  Integers sharing an
    ancestor share a block.  ``method="materialized"`` builds every increment
    bridge explicitly; ``"lazy"`` draws only the atoms the queries hit.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not d > 0:
        raise ValueError("d must be positive")
    if method == "lazy":
        out = np.empty(n, np.int64)
        _flow_kernel(int(n), float(d), float(eps), float(window_sd), rng, out)
        return Partition.from_labels(out)
    if method == "materialized":
        return Partition.from_labels(_materialized_flow(n, d, rng, eps))
    raise ValueError(f"unknown method {method!r}")


def sample_flow_labels(
    n: int, d: float, size: int, rng: np.random.Generator, eps: float = DEFAULT_EPS, window_sd: float = DEFAULT_WINDOW_SD
) -> np.ndarray:
    """``size`` flow-based stationary draws as canonical block indices."""
    out = np.empty((size, n), np.int64)
    _flow_batch(int(n), float(d), float(eps), float(window_sd), int(size), rng, out)
    return out
