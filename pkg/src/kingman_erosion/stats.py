"""Empirical distributions, goodness-of-fit tests, distances and rng streams."""
from __future__ import annotations

import math
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, NamedTuple

import numpy as np
from scipy import stats as sps

NORM_TOL = 1e-9


@dataclass(frozen=True)
class EmpiricalPmf:
    counts: Mapping[Hashable, int]
    total: int = field(default=-1)

    def __post_init__(self):
        counts = dict(self.counts)
        if any(c < 0 for c in counts.values()):
            raise ValueError("counts must be non-negative")
        s = sum(counts.values())
        total = s if self.total < 0 else self.total
        if total != s:
            raise ValueError(f"counts sum to {s}, not {total}")
        if total <= 0:
            raise ValueError("empirical pmf needs at least one observation")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "total", total)

    @classmethod
    def from_samples(cls, samples: Iterable[Hashable]) -> "EmpiricalPmf":
        if isinstance(samples, np.ndarray):
            values, counts = np.unique(samples, return_counts=True)
            return cls({v.item(): int(c) for v, c in zip(values, counts)})
        return cls(Counter(samples))

    def pmf(self) -> dict[Hashable, float]:
        return {k: c / self.total for k, c in self.counts.items()}

    def __getitem__(self, key: Hashable) -> int:
        return self.counts.get(key, 0)


class TestResult(NamedTuple):
    statistic: float
    dof: int
    p_value: float


def _merge_small_cells(obs: np.ndarray, exp: np.ndarray, min_cell: float):
    """Pool every cell with expected count below ``min_cell`` into one tail cell."""
    small = exp < min_cell
    if not small.any():
        return obs, exp
    o_big, e_big = obs[~small], exp[~small]
    o_tail, e_tail = obs[small].sum(), exp[small].sum()
    if e_tail < min_cell and e_big.size:
        # still too thin: fold it into the smallest remaining cell
        j = int(np.argmin(e_big))
        o_big = o_big.copy()
        e_big = e_big.copy()
        o_big[j] += o_tail
        e_big[j] += e_tail
        return o_big, e_big
    return np.append(o_big, o_tail), np.append(e_big, e_tail)


def chi_square_gof(e: EmpiricalPmf, expected: Mapping[Hashable, float], min_cell: int = 5) -> TestResult:
    """Pearson goodness-of-fit of observed counts against a pmf.

    Mass that ``expected`` leaves unassigned, together with observed outcomes
    it does not list, forms an extra "other" cell.
    """
    keys = list(expected)
    probs = np.array([expected[k] for k in keys], dtype=float)
    if (probs < 0).any():
        raise ValueError("expected probabilities must be non-negative")
    rest = 1.0 - probs.sum()
    if rest < -NORM_TOL:
        raise ValueError("expected probabilities sum to more than 1")
    obs = np.array([e[k] for k in keys], dtype=float)
    o_rest = e.total - obs.sum()
    if rest > NORM_TOL or o_rest > 0:
        probs = np.append(probs, max(rest, 0.0))
        obs = np.append(obs, o_rest)
    exp = probs * e.total
    impossible = bool((obs[exp <= 0] > 0).any())
    obs, exp = _merge_small_cells(obs[exp > 0], exp[exp > 0], min_cell)
    if obs.size < 2:
        raise ValueError("fewer than two cells after merging")
    if impossible:
        # an outcome of probability zero was observed
        return TestResult(math.inf, obs.size - 1, 0.0)
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = obs.size - 1
    return TestResult(stat, dof, float(sps.chi2.sf(stat, dof)))


def chi_square_two_sample(a: EmpiricalPmf, b: EmpiricalPmf, min_cell: int = 5) -> TestResult:
    """Chi-square test of homogeneity for two samples over a shared outcome set.

    Outcomes whose pooled expected count is below ``min_cell`` in either row
    are pooled into one cell.
    """
    keys = sorted(set(a.counts) | set(b.counts), key=repr)
    table = np.array([[a[k] for k in keys], [b[k] for k in keys]], dtype=float)
    col = table.sum(axis=0)
    frac = np.array([a.total, b.total], dtype=float) / (a.total + b.total)
    thin = col * frac.min() < min_cell
    if thin.any():
        tail = table[:, thin].sum(axis=1, keepdims=True)
        table = table[:, ~thin]
        if tail.sum() * frac.min() >= min_cell or table.shape[1] == 0:
            table = np.hstack([table, tail])
        else:
            j = int(np.argmin(table.sum(axis=0)))
            table[:, j] += tail[:, 0]
    if table.shape[1] < 2:
        raise ValueError("fewer than two cells after merging")
    stat, p, dof, _ = sps.chi2_contingency(table, correction=False)
    return TestResult(float(stat), int(dof), float(p))


def _as_pmf_dict(a) -> dict:
    if isinstance(a, Mapping):
        return dict(a)
    return {k: float(v) for k, v in enumerate(np.asarray(a, dtype=float))}


def tv_distance(a, b, tol: float = NORM_TOL) -> float:
    """Total variation distance between two normalized pmfs (mappings or arrays)."""
    a, b = _as_pmf_dict(a), _as_pmf_dict(b)
    for name, x in (("a", a), ("b", b)):
        s = math.fsum(x.values())
        if abs(s - 1.0) > tol:
            raise ValueError(f"pmf {name} sums to {s}, not 1")
    keys = set(a) | set(b)
    return 0.5 * math.fsum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def ks_two_sample(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("samples must be non-empty")
    res = sps.ks_2samp(x, y, method="asymp")
    return float(res.statistic), float(res.pvalue)


def wasserstein1(x, y) -> float:
    """Wasserstein-1 distance between the empirical laws of two real samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("samples must be non-empty")
    return float(sps.wasserstein_distance(x, y))


def stream_key(name: str) -> int:
    """Stable integer key for an experiment name."""
    return zlib.crc32(name.encode("utf-8"))


def split_rng(master_seed: int, stream_id: int | str, *more: int | str) -> np.random.Generator:
    """Independent, reproducible generator for ``(master_seed, stream_id, ...)``.

    String ids are hashed with :func:`stream_key`, so streams may be keyed by
    experiment name and replicate index; adding replicates never changes the
    streams of existing ones.
    """
    key = tuple(stream_key(s) if isinstance(s, str) else int(s) for s in (stream_id, *more))
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def binomial_ci(successes: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    """Wilson score interval."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return centre - half, centre + half


def mean_and_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
