"""Hierarchy of time-changed conditioned Wright-Fisher diffusions.

Each level runs ``dY = (1 - Y) dt + sqrt(Y (1 - Y)) dW`` from 0 (the neutral
diffusion conditioned to fix at 1).  Level ``i + 1`` takes the mass left
over by levels ``1..i`` and runs on the clock
``tau_i(t) = int_0^t ds / residual_i(s)``:

    Z_1 = Y_1,   Z_{i+1}(t) = residual_i(t) * Y_{i+1}(tau_i(t)),
    residual_i = 1 - Z_1 - ... - Z_i.

Integrating each ``Z_i`` against ``d exp(-d t)`` gives a sample of the
asymptotic block frequencies of the erosion chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .partitions import MassPartition

FIX_TOL = 1e-12
RESIDUAL_FLOOR = 1e-10
KERNEL_TAIL_MAX = 1e-6
MASS_TOL = 1e-9


def default_horizon(d: float) -> float:
    return max(20.0, 14.0 / d)


def _grid_size(dt: float, horizon: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not horizon >= dt:
        raise ValueError("horizon must be at least dt")
    steps = int(round(horizon / dt))
    if abs(steps * dt - horizon) > 1e-9 * horizon:
        raise ValueError(f"horizon {horizon} is not a whole number of steps of {dt}")
    return steps


@dataclass(frozen=True, eq=False)
class DiffusionPath:
    """Values on the uniform grid ``0, dt, ..., horizon``."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a path needs at least two grid points")
        if (v < 0).any() or (v > 1).any():
            raise ValueError("path values must lie in [0, 1]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    @property
    def horizon(self) -> float:
        return (self.values.size - 1) * self.dt

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class HierarchyState:
    """Levels ``Z_1..Z_K``, the leftover mass and the clocks ``tau_1..tau_K``.

    ``tau[i]`` is the clock driving level ``i + 2``; it is ``inf`` from the
    first grid time at which ``residual_{i+1}`` falls below 1e-10.
    """

    z_paths: tuple[DiffusionPath, ...]
    residual: DiffusionPath
    tau: np.ndarray

    def __post_init__(self):
        z = np.array([p.values for p in self.z_paths])
        total = z.sum(axis=0) + self.residual.values
        err = np.abs(total - 1.0).max()
        if err > MASS_TOL:
            raise ValueError(f"levels and residual do not sum to 1 (error {err:.3g})")
        tau = np.asarray(self.tau, dtype=float)
        if tau.shape != z.shape:
            raise ValueError("need one clock per level on the same grid")
        if (tau[:, 1:] < tau[:, :-1]).any() or (tau[:, 0] != 0).any():
            raise ValueError("clocks must start at 0 and be non-decreasing")
        object.__setattr__(self, "tau", tau)

    @property
    def K(self) -> int:
        return len(self.z_paths)

    @property
    def dt(self) -> float:
        return self.residual.dt

    def z_matrix(self) -> np.ndarray:
        return np.array([p.values for p in self.z_paths])


# --------------------------------------------------------------------------
# kernels


@numba.njit(cache=True)
def _wf_advance(y, h, dt, rng):
    """Advance a level by clock time ``h`` in Euler steps no longer than ``dt``."""
    if y >= 1.0 - FIX_TOL:
        return 1.0
    m = int(math.ceil(h / dt - 1e-9))
    if m < 1:
        m = 1
    step = h / m
    sq = math.sqrt(step)
    for _ in range(m):
        y = y + (1.0 - y) * step + math.sqrt(y * (1.0 - y)) * sq * rng.standard_normal()
        if y <= 0.0:
            y = 0.0
        elif y >= 1.0 - FIX_TOL:
            return 1.0
    return y


@numba.njit(cache=True)
def _wf_path_kernel(y0, dt, steps, rng):
    out = np.empty(steps + 1)
    y = y0
    if y >= 1.0 - FIX_TOL:
        y = 1.0
    out[0] = y
    for j in range(1, steps + 1):
        y = _wf_advance(y, dt, dt, rng)
        out[j] = y
    return out


@numba.njit(cache=True)
def _hierarchy_kernel(K, dt, steps, d, rng, store, z_out, res_out, tau_out):
    """One hierarchy on the grid.

    Returns the unsorted ``z_i`` (trapezoid integrals against ``d exp(-d t)``).
    With ``store`` set, fills ``z_out[i, j]``, ``res_out[j]`` and ``tau_out[i, j]``.
    """
    y = np.zeros(K)  # y[i] is the current value of Y_{i+1} on its own clock
    r_prev = np.ones(K)  # residual_{i+1} at the previous grid time
    r_now = np.ones(K)
    tau = np.zeros(K)
    zcur = np.zeros(K)
    zint = np.zeros(K)
    # t = 0 adds nothing to the integrals: every level starts at 0
    for j in range(1, steps + 1):
        y[0] = _wf_advance(y[0], dt, dt, rng)
        zcur[0] = y[0]
        r_now[0] = 1.0 - y[0]
        live = 1
        for i in range(1, K):
            rp = r_prev[i - 1]
            rn = r_now[i - 1]
            if tau[i - 1] == np.inf or rn < RESIDUAL_FLOOR:
                # clock has exploded: this level holds whatever is left
                tau[i - 1] = np.inf
                y[i] = 1.0
            else:
                h = 0.5 * dt * (1.0 / rp + 1.0 / rn)
                tau[i - 1] += h
                y[i] = _wf_advance(y[i], h, dt, rng)
            zcur[i] = rn * y[i]
            r_now[i] = rn - zcur[i]
            live = i + 1
            if r_now[i] == 0.0 and r_prev[i] == 0.0:
                break
        for i in range(live, K):
            zcur[i] = 0.0
            r_now[i] = 0.0
            tau[i - 1] = np.inf
        if K >= 1 and (tau[K - 1] != np.inf):
            rp = r_prev[K - 1]
            rn = r_now[K - 1]
            if rn < RESIDUAL_FLOOR:
                tau[K - 1] = np.inf
            else:
                tau[K - 1] += 0.5 * dt * (1.0 / rp + 1.0 / rn)
        w = d * math.exp(-d * j * dt) * dt
        if j == steps:
            w *= 0.5
        for i in range(K):
            zint[i] += w * zcur[i]
            r_prev[i] = r_now[i]
        if store:
            for i in range(K):
                z_out[i, j] = zcur[i]
                tau_out[i, j] = tau[i]
            res_out[j] = r_now[K - 1]
        elif y[0] == 1.0:
            # everything is frozen: Z_1 = 1 and deeper levels are empty
            rest = 0.0
            for jj in range(j + 1, steps + 1):
                ww = d * math.exp(-d * jj * dt) * dt
                if jj == steps:
                    ww *= 0.5
                rest += ww
            zint[0] += rest
            break
    return zint


@numba.njit(cache=True)
def _hierarchy_batch(K, dt, steps, d, size, rng, out):
    dummy2 = np.empty((0, 0))
    dummy1 = np.empty(0)
    for r in range(size):
        out[r] = _hierarchy_kernel(K, dt, steps, d, rng, False, dummy2, dummy1, dummy2)


# --------------------------------------------------------------------------
# public api


def simulate_conditioned_wf(y0: float, dt: float, horizon: float, rng: np.random.Generator) -> DiffusionPath:
    """Euler-Maruyama path of the Wright-Fisher diffusion conditioned to fix at 1.

    Values are clamped to [0, 1] after each step and frozen once within 1e-12 of 1.
    """
    if not 0.0 <= y0 <= 1.0:
        raise ValueError("y0 must lie in [0, 1]")
    steps = _grid_size(dt, horizon)
    return DiffusionPath(float(dt), _wf_path_kernel(float(y0), float(dt), steps, rng))


def build_hierarchy(K: int, dt: float, horizon: float, rng: np.random.Generator) -> HierarchyState:
    """Simulate ``Z_1..Z_K`` on the grid, keeping full paths.

    A deeper level is advanced by the actual clock increment of its grid
    interval, split into Euler steps of length at most ``dt``.
    """
    if int(K) != K or K < 1:
        raise ValueError("K must be a positive integer")
    steps = _grid_size(dt, horizon)
    z = np.zeros((K, steps + 1))
    tau = np.zeros((K, steps + 1))
    res = np.ones(steps + 1)
    # d only enters the integrals, which are discarded here
    _hierarchy_kernel(int(K), float(dt), steps, 1.0, rng, True, z, res, tau)
    np.clip(z, 0.0, 1.0, out=z)
    np.clip(res, 0.0, 1.0, out=res)
    paths = tuple(DiffusionPath(float(dt), row) for row in z)
    return HierarchyState(paths, DiffusionPath(float(dt), res), tau)


def _check_kernel_tail(d: float, horizon: float):
    if not d > 0:
        raise ValueError("d must be positive")
    if not math.exp(-d * horizon) < KERNEL_TAIL_MAX:
        raise ValueError(
            f"horizon {horizon} too short for d={d}: kernel tail exp(-d*horizon) must be below {KERNEL_TAIL_MAX}"
        )


def _kernel_weights(d: float, dt: float, steps: int) -> np.ndarray:
    w = d * np.exp(-d * dt * np.arange(steps + 1)) * dt
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def unsorted_frequencies(h: HierarchyState, d: float) -> np.ndarray:
    """``z_i = int d exp(-d t) Z_i(t) dt`` by the trapezoid rule, in level order."""
    steps = len(h.residual) - 1
    _check_kernel_tail(d, h.residual.horizon)
    return h.z_matrix() @ _kernel_weights(d, h.dt, steps)


def frequencies_from_hierarchy(h: HierarchyState, d: float) -> MassPartition:
    """Non-increasing reordering of the kernel-weighted level masses."""
    return MassPartition.from_unsorted(np.clip(unsorted_frequencies(h, d), 0.0, 1.0))


def sample_unsorted_frequencies(
    K: int, d: float, size: int, rng: np.random.Generator, dt: float = 1e-3, horizon: float | None = None
) -> np.ndarray:
    """``(size, K)`` array of unsorted ``z`` from independent hierarchies.

    Integrates on the fly without storing paths; the run of a hierarchy stops
    as soon as ``Z_1`` has fixed, the remaining kernel mass going to ``z_1``.
    """
    if int(K) != K or K < 1:
        raise ValueError("K must be a positive integer")
    horizon = default_horizon(d) if horizon is None else horizon
    _check_kernel_tail(d, horizon)
    steps = _grid_size(dt, horizon)
    out = np.empty((int(size), int(K)))
    _hierarchy_batch(int(K), float(dt), steps, float(d), int(size), rng, out)
    return out


def sample_frequencies(
    K: int, d: float, size: int, rng: np.random.Generator, dt: float = 1e-3, horizon: float | None = None
) -> np.ndarray:
    """Like :func:`sample_unsorted_frequencies` with each row sorted non-increasingly."""
    z = sample_unsorted_frequencies(K, d, size, rng, dt, horizon)
    return -np.sort(-z, axis=1)
