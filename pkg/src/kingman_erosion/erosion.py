"""The n-Kingman coalescent with erosion.

Pairs of blocks merge at rate 1; each integer is eroded (moved to a fresh
singleton) at rate ``d``.  This module has a transient path simulator, an
exact stationary sampler built on the coupling with the coalescent with
immigration, and a brute-force generator solve used as an oracle for small n.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np

from .partitions import Partition, enumerate_partitions

ORACLE_MAX_N = 8


@dataclass(frozen=True)
class ErosionParams:
    n: int
    d: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.d > 0:
            raise ValueError("d must be positive")


class AbsorbingState(RuntimeError):
    """No transition is possible from the current state."""


def _erodible(p: Partition) -> list[int]:
    return [x for b in p.blocks if len(b) >= 2 for x in b]


def total_event_rate(p: Partition, d: float) -> float:
    """Rate of leaving ``p``: ``m(m-1)/2 + d * #(elements in non-singleton blocks)``."""
    m = p.block_count
    return m * (m - 1) / 2 + d * len(_erodible(p))


def step(p: Partition, d: float, rng: np.random.Generator) -> tuple[float, Partition]:
    """Holding time in ``p`` and the next state of the chain."""
    m = p.block_count
    merge_rate = m * (m - 1) / 2
    erodible = _erodible(p)
    total = merge_rate + d * len(erodible)
    if total <= 0:
        raise AbsorbingState(f"{p} is absorbing")
    hold = rng.exponential(1.0 / total)
    if rng.random() * total < merge_rate:
        i, j = rng.choice(m, size=2, replace=False)
        return hold, p.merge(int(i), int(j))
    x = erodible[int(rng.integers(len(erodible)))]
    return hold, p.erode(x)


# --------------------------------------------------------------------------
# path simulation


@numba.njit(cache=True)
def _canon_into(lab, out):
    n = lab.shape[0]
    remap = np.full(n, -1, np.int64)
    nxt = 0
    for x in range(n):
        b = lab[x]
        if remap[b] < 0:
            remap[b] = nxt
            nxt += 1
        out[x] = remap[b]


@numba.njit(cache=True)
def _path_kernel(init_labels, d, t_end, rng):
    n = init_labels.shape[0]
    lab = init_labels.copy()
    size = np.zeros(n, np.int64)
    for x in range(n):
        size[lab[x]] += 1
    cap = 1024
    times = np.empty(cap)
    states = np.empty((cap, n), np.int64)
    times[0] = 0.0
    _canon_into(lab, states[0])
    count = 1
    t = 0.0
    blocks = np.empty(n, np.int64)
    while True:
        m = 0
        for b in range(n):
            if size[b] > 0:
                blocks[m] = b
                m += 1
        e = 0
        for x in range(n):
            if size[lab[x]] >= 2:
                e += 1
        merge_rate = m * (m - 1) / 2.0
        total = merge_rate + d * e
        if total <= 0.0:
            break
        t += rng.standard_exponential() / total
        if t >= t_end:
            break
        if rng.random() * total < merge_rate:
            i = rng.integers(0, m)
            j = rng.integers(0, m - 1)
            if j >= i:
                j += 1
            bi = blocks[i]
            bj = blocks[j]
            for x in range(n):
                if lab[x] == bj:
                    lab[x] = bi
            size[bi] += size[bj]
            size[bj] = 0
        else:
            r = rng.integers(0, e)
            for x in range(n):
                if size[lab[x]] >= 2:
                    if r == 0:
                        free = 0
                        while size[free] > 0:
                            free += 1
                        size[lab[x]] -= 1
                        lab[x] = free
                        size[free] = 1
                        break
                    r -= 1
        if count == cap:
            cap *= 2
            nt = np.empty(cap)
            ns = np.empty((cap, n), np.int64)
            nt[:count] = times[:count]
            ns[:count] = states[:count]
            times = nt
            states = ns
        times[count] = t
        _canon_into(lab, states[count])
        count += 1
    return times[:count], states[:count]


@dataclass(frozen=True)
class ErosionPathSample:
    """Jump times and states of a path on ``[0, t_end]``.

    ``labels[k]`` holds the canonical block index of each integer during
    ``[times[k], times[k+1])``; the last state lasts until ``t_end``.
    """

    times: np.ndarray
    labels: np.ndarray
    t_end: float

    @cached_property
    def states(self) -> list[Partition]:
        return [Partition.from_labels(row) for row in self.labels]

    def __len__(self) -> int:
        return self.times.shape[0]

    def state_at(self, t: float) -> Partition:
        if not 0 <= t <= self.t_end:
            raise ValueError("t outside the simulated window")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return Partition.from_labels(self.labels[k])

    @property
    def final(self) -> Partition:
        return Partition.from_labels(self.labels[-1])

    def occupancy(self) -> dict[Partition, float]:
        """Fraction of ``[0, t_end]`` spent in each partition."""
        durations = np.diff(np.append(self.times, self.t_end))
        keys, inverse = np.unique(self.labels, axis=0, return_inverse=True)
        weight = np.bincount(inverse.ravel(), weights=durations, minlength=keys.shape[0])
        return {Partition.from_labels(k): float(w / self.t_end) for k, w in zip(keys, weight)}


def simulate(params: ErosionParams, initial: Partition, t_end: float, rng: np.random.Generator) -> ErosionPathSample:
    """Gillespie path of the erosion chain started from ``initial``."""
    if initial.ground != tuple(range(1, params.n + 1)):
        raise ValueError(f"initial state must be a partition of [{params.n}]")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    times, labels = _path_kernel(initial.labels(), float(params.d), float(t_end), rng)
    return ErosionPathSample(times, labels, float(t_end))


# --------------------------------------------------------------------------
# exact stationary sampler


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _coupling_kernel(n, d, rng, out):
    # backward time since each integer's last erosion
    age = np.empty(n)
    for i in range(n):
        age[i] = rng.standard_exponential() / d
    # oldest first; equal ages keep index order
    order = np.argsort(-age, kind="mergesort")
    parent = np.arange(n)
    active = np.empty(n, np.int64)
    m = 0
    t = -age[order[0]]
    for k in range(n):
        t_next = -age[order[k]]
        while m >= 2:
            w = rng.standard_exponential() / (m * (m - 1) / 2.0)
            if t + w >= t_next:
                break
            t += w
            i = rng.integers(0, m)
            j = rng.integers(0, m - 1)
            if j >= i:
                j += 1
            parent[active[j]] = active[i]
            m -= 1
            active[j] = active[m]
        t = t_next
        active[m] = order[k]
        m += 1
    while m >= 2:
        w = rng.standard_exponential() / (m * (m - 1) / 2.0)
        if t + w >= 0.0:
            break
        t += w
        i = rng.integers(0, m)
        j = rng.integers(0, m - 1)
        if j >= i:
            j += 1
        parent[active[j]] = active[i]
        m -= 1
        active[j] = active[m]
    remap = np.full(n, -1, np.int64)
    nxt = 0
    for x in range(n):
        r = _find(parent, x)
        if remap[r] < 0:
            remap[r] = nxt
            nxt += 1
        out[x] = remap[r]
    return nxt


@numba.njit(cache=True)
def _coupling_batch(n, d, size, rng, out):
    for r in range(size):
        _coupling_kernel(n, d, rng, out[r])


def sample_stationary(params: ErosionParams, rng: np.random.Generator) -> Partition:
    """Exact draw from the stationary law of the erosion chain on ``[n]``.

    Each integer's last erosion happened an Exp(d) time ago; integers enter as
    singletons at those times and the blocks present coalesce pairwise at
    rate 1 until the present.
    """
    out = np.empty(params.n, np.int64)
    _coupling_kernel(params.n, float(params.d), rng, out)
    return Partition.from_labels(out)


def sample_stationary_labels(params: ErosionParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` stationary draws as a ``(size, n)`` array of canonical block indices."""
    out = np.empty((size, params.n), np.int64)
    _coupling_batch(params.n, float(params.d), int(size), rng, out)
    return out


# --------------------------------------------------------------------------
# generator oracle


def generator_matrix(params: ErosionParams) -> tuple[list[Partition], np.ndarray]:
    """States (all partitions of ``[n]``) and the dense generator of the chain."""
    if params.n > ORACLE_MAX_N:
        raise ValueError(f"oracle limited to n <= {ORACLE_MAX_N}, got {params.n}")
    states = enumerate_partitions(params.n)
    index = {p: k for k, p in enumerate(states)}
    q = np.zeros((len(states), len(states)))
    for k, p in enumerate(states):
        for i, j in itertools.combinations(range(p.block_count), 2):
            q[k, index[p.merge(i, j)]] += 1.0
        for x in _erodible(p):
            q[k, index[p.erode(x)]] += params.d
        q[k, k] = -q[k].sum()
    return states, q


def stationary_pmf_small_n(params: ErosionParams) -> dict[Partition, float]:
    """Stationary law by a dense solve of ``pi Q = 0, sum(pi) = 1``."""
    states, q = generator_matrix(params)
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(len(states))
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    resid = np.abs(pi @ q).max()
    if resid > 1e-10 or abs(pi.sum() - 1) > 1e-10:
        raise ArithmeticError(f"stationary solve inaccurate (residual {resid:.3g})")
    return dict(zip(states, pi.tolist()))


def two_state_together_probability(d: float) -> float:
    """P({1,2} together) for n = 2: balance of 1 (merge) against 2d (erosion)."""
    return 1.0 / (1.0 + 2.0 * d)
