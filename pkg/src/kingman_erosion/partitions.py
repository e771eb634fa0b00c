"""Finite set partitions, mass partitions and the paintbox sampler.

A :class:`Partition` is an immutable value: blocks are stored in canonical
order (sorted by least element, elements ascending), so two partitions are
equal exactly when they have the same blocks.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

MASS_TOL = 1e-12


def _canonical(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    out = [tuple(sorted(int(x) for x in b)) for b in blocks]
    out.sort(key=lambda b: b[0] if b else math.inf)
    return tuple(out)


@dataclass(frozen=True)
class Partition:
    """A partition of a finite set of integer labels."""

    blocks: tuple[tuple[int, ...], ...]
    ground: tuple[int, ...]

    def __init__(self, blocks: Iterable[Iterable[int]], ground: Iterable[int] | None = None):
        canon = _canonical(blocks)
        seen: set[int] = set()
        for b in canon:
            if not b:
                raise ValueError("blocks must be non-empty")
            for x in b:
                if x in seen:
                    raise ValueError(f"label {x} appears in more than one block")
                seen.add(x)
        if ground is None:
            ground_t = tuple(sorted(seen))
        else:
            ground_t = tuple(sorted(int(x) for x in ground))
            if set(ground_t) != seen:
                raise ValueError("union of blocks must equal the ground set")
        object.__setattr__(self, "blocks", canon)
        object.__setattr__(self, "ground", ground_t)

    # -- constructors -------------------------------------------------
    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls([[i] for i in range(1, n + 1)])

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        return cls([list(range(1, n + 1))])

    @classmethod
    def from_labels(cls, labels: Sequence[int] | np.ndarray) -> "Partition":
        """Partition of ``[n]`` where ``i ~ j`` iff ``labels[i-1] == labels[j-1]``."""
        labels = np.asarray(labels)
        n = labels.shape[0]
        if n == 0:
            return cls([])
        _, inverse = np.unique(labels, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        counts = np.bincount(inverse)
        groups = np.split(order + 1, np.cumsum(counts)[:-1])
        return cls([g.tolist() for g in groups])

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        return cls(json.loads(text))

    # -- basic queries ------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.ground)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def block_sizes(self) -> list[int]:
        return [len(b) for b in self.blocks]

    def block_index(self, x: int) -> int:
        for k, b in enumerate(self.blocks):
            if x in b:
                return k
        raise KeyError(f"label {x} not in ground set")

    def labels(self) -> np.ndarray:
        """Block index of each ground element, in ground order."""
        pos = {x: i for i, x in enumerate(self.ground)}
        out = np.empty(len(self.ground), dtype=np.int64)
        for k, b in enumerate(self.blocks):
            for x in b:
                out[pos[x]] = k
        return out

    def to_json(self) -> str:
        return json.dumps([list(b) for b in self.blocks])

    def __str__(self) -> str:
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"

    # -- transitions --------------------------------------------------
    def merge(self, i: int, j: int) -> "Partition":
        m = len(self.blocks)
        if not (0 <= i < m and 0 <= j < m):
            raise IndexError(f"block index out of range for {m} blocks")
        if i == j:
            raise ValueError("cannot merge a block with itself")
        rest = [b for k, b in enumerate(self.blocks) if k != i and k != j]
        rest.append(self.blocks[i] + self.blocks[j])
        return Partition(rest, self.ground)

    def erode(self, x: int) -> "Partition":
        """Move ``x`` to a singleton block; a singleton ``x`` is left alone."""
        k = self.block_index(x)
        block = self.blocks[k]
        if len(block) == 1:
            return self
        rest = list(self.blocks[:k]) + list(self.blocks[k + 1 :])
        rest.append(tuple(y for y in block if y != x))
        rest.append((x,))
        return Partition(rest, self.ground)

    def restrict(self, m: int) -> "Partition":
        """Restriction to ``[m]``; requires the ground set to be ``[n]``."""
        n = len(self.ground)
        if self.ground != tuple(range(1, n + 1)):
            raise ValueError("restrict needs a ground set of the form [n]")
        if m < 1 or m > n:
            raise ValueError(f"m must lie in [1, {n}], got {m}")
        kept = (tuple(x for x in b if x <= m) for b in self.blocks)
        return Partition([b for b in kept if b])

    def relabel(self, perm: Sequence[int]) -> "Partition":
        """Image under ``i -> perm[i-1]`` for a permutation of ``[n]``."""
        return Partition([[perm[x - 1] for x in b] for b in self.blocks])


@dataclass(frozen=True)
class MassPartition:
    """Non-increasing non-negative weights with total mass at most one."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if any(x < 0 for x in w):
            raise ValueError("weights must be non-negative")
        if any(a < b for a, b in zip(w, w[1:])):
            raise ValueError("weights must be non-increasing")
        if math.fsum(w) > 1 + MASS_TOL:
            raise ValueError("weights must sum to at most 1")

    @classmethod
    def from_unsorted(cls, values: Iterable[float]) -> "MassPartition":
        return cls(tuple(sorted((float(v) for v in values), reverse=True)))

    @property
    def dust(self) -> float:
        return max(0.0, 1.0 - math.fsum(self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, k: int) -> float:
        return self.weights[k]


def paintbox(mp: MassPartition, n: int, rng: np.random.Generator) -> Partition:
    """Exchangeable partition of ``[n]`` painted from the mass partition ``mp``.

    Each integer draws colour ``k`` with probability ``mp[k]``; otherwise it
    keeps a private (dust) colour and ends up in a singleton.
    """
    if n < 1:
        raise ValueError("n must be positive")
    w = np.asarray(mp.weights, dtype=float)
    u = rng.random(n)
    if w.size == 0:
        colours = -np.arange(1, n + 1)
    else:
        colours = np.searchsorted(np.cumsum(w), u, side="right")
        dust = colours >= w.size
        colours = np.where(dust, -np.arange(1, n + 1), colours)
    return Partition.from_labels(colours)


def empirical_frequencies(p: Partition) -> MassPartition:
    """Block sizes over ``|ground|`` in non-increasing order."""
    n = p.n
    sizes = sorted(p.block_sizes(), reverse=True)
    return MassPartition(tuple(float(Fraction(s, n)) for s in sizes))


def enumerate_partitions(n: int) -> list[Partition]:
    """All partitions of ``[n]`` (Bell(n) of them), via restricted growth strings."""
    if n < 1:
        raise ValueError("n must be positive")
    out: list[Partition] = []
    rgs = [0] * n

    def rec(i: int, m: int) -> None:
        if i == n:
            out.append(Partition.from_labels(rgs))
            return
        for c in range(m + 1):
            rgs[i] = c
            rec(i + 1, max(m, c + 1))

    rgs[0] = 0
    rec(1, 1)
    return out


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel so block ids are 0, 1, ... in order of least element (row-wise for 2-D)."""
    labels = np.asarray(labels)
    if labels.ndim == 1:
        return _canon_row(labels)
    return np.stack([_canon_row(r) for r in labels])


def _canon_row(row: np.ndarray) -> np.ndarray:
    _, first, inverse = np.unique(row, return_index=True, return_inverse=True)
    rank = np.empty_like(first)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inverse]


# --------------------------------------------------------------------------
# summaries of batches of canonical label rows


def block_counts(labels: np.ndarray) -> np.ndarray:
    """Number of blocks in each row of canonical labels."""
    return np.asarray(labels).max(axis=1) + 1


def pooled_block_sizes(labels: np.ndarray) -> np.ndarray:
    """``out[k]`` = number of blocks of size ``k`` summed over all rows."""
    labels = np.asarray(labels)
    n = labels.shape[1]
    out = np.zeros(n + 1, np.int64)
    for row in labels:
        out += np.bincount(np.bincount(row), minlength=n + 1)
    return out


def top_frequencies(labels: np.ndarray, m: int) -> np.ndarray:
    """``(rows, m)`` array of the ``m`` largest block frequencies, zero-padded."""
    labels = np.asarray(labels)
    n = labels.shape[1]
    out = np.zeros((labels.shape[0], m))
    for r, row in enumerate(labels):
        s = np.sort(np.bincount(row))[::-1][:m]
        out[r, : s.size] = s / n
    return out


def size_of_block_containing_first(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels == labels[:, :1]).sum(axis=1)


def partition_counts(labels: np.ndarray) -> dict[Partition, int]:
    """Occurrences of each distinct partition among rows of canonical labels."""
    rows, counts = np.unique(np.asarray(labels), axis=0, return_counts=True)
    return {Partition.from_labels(r): int(c) for r, c in zip(rows, counts)}
