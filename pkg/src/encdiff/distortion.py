"""Distortion-guided point removal.

A latent tensor X is split as X = Y + Z with disjoint supports: Y keeps the
high-information elements (bound for encryption), Z collects the elements
whose combined removal distortion stays within a budget.  Per-element
distortion is rho * |x| for a cost matrix rho computed from X alone, and
the budget is threshold * (total distortion of zeroing everything).
Removal is greedy by ascending distortion, ties broken in row-major order,
and never exceeds the budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

# High-pass residual kernel followed by 3x3 / 15x15 averaging windows; the
# usual texture-adaptive construction: cheap to modify where the residual is
# busy, expensive on smooth regions.
HIGH_PASS_KERNEL = np.array(
    [[-1.0, 2.0, -1.0], [2.0, -4.0, 2.0], [-1.0, 2.0, -1.0]]
)
COST_FLOOR = 1e-6
COST_CEILING = 1e6


def _as_channels(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None]
    if x.ndim == 3:
        return x
    raise ValueError(f"expected a (H,W) or (C,H,W) tensor, got shape {x.shape}")


def hill_cost(x: np.ndarray) -> np.ndarray:
    """Texture-adaptive per-element modification costs, computed per channel."""
    channels = _as_channels(x)
    if not np.all(np.isfinite(channels)):
        raise ValueError("input tensor must be finite")
    out = np.empty_like(channels)
    avg3 = np.full((3, 3), 1.0 / 9.0)
    avg15 = np.full((15, 15), 1.0 / 225.0)
    for c, plane in enumerate(channels):
        residual = convolve2d(plane, HIGH_PASS_KERNEL, mode="same", boundary="symm")
        suitability = convolve2d(np.abs(residual), avg3, mode="same", boundary="symm")
        with np.errstate(divide="ignore"):
            inv = 1.0 / suitability
        rho = convolve2d(inv, avg15, mode="same", boundary="symm")
        out[c] = np.clip(rho, COST_FLOOR, COST_CEILING)
    return out.reshape(np.asarray(x).shape)


def uniform_cost(x: np.ndarray) -> np.ndarray:
    """All-ones costs; distortion reduces to sum of |x|."""
    return np.ones_like(np.asarray(x, dtype=np.float64))


COST_FUNCTIONS = {"hill": hill_cost, "uniform": uniform_cost}


def distortion_matrix(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Per-element removal distortion d = rho * |x|."""
    x = np.asarray(x, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    if x.shape != rho.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {rho.shape}")
    return rho * np.abs(x)


def whole_distortion(x: np.ndarray, rho: np.ndarray) -> float:
    """Total distortion of removing every element (the budget normalizer)."""
    return float(np.sum(distortion_matrix(x, rho)))


@dataclass(frozen=True)
class RemovalResult:
    removed_indices: np.ndarray  # flat indices, in removal order
    spent_distortion: float
    whole_distortion: float


@dataclass(frozen=True)
class SplitPair:
    y: np.ndarray  # kept elements (encryption bound)
    z: np.ndarray  # removed elements, plaintext side


def _check_inputs(x: np.ndarray, threshold: float) -> None:
    if not 0 <= threshold < 1:
        raise ValueError(f"threshold {threshold} outside [0, 1)")
    if not np.all(np.isfinite(x)):
        raise ValueError("input tensor must be finite")


def remove_points_basic(x: np.ndarray, rho: np.ndarray, threshold: float) -> RemovalResult:
    """Reference removal loop: repeatedly delete the cheapest element.

    Stops before any removal would push the spent distortion past
    threshold * whole_distortion.  Quadratic; kept as the oracle for the
    vectorized variant.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_inputs(x, threshold)
    d = distortion_matrix(x, rho).ravel().copy()
    whole = float(np.sum(d))
    budget = threshold * whole
    removed: list[int] = []
    spent = 0.0
    for _ in range(d.size):
        pos = int(np.argmin(d))  # first minimum == row-major tie break
        if spent + d[pos] > budget:
            break
        spent = spent + float(d[pos])
        removed.append(pos)
        d[pos] = np.inf
    return RemovalResult(
        removed_indices=np.array(removed, dtype=np.int64),
        spent_distortion=spent,
        whole_distortion=whole,
    )


def remove_points_fast(x: np.ndarray, rho: np.ndarray, threshold: float) -> RemovalResult:
    """Vectorized removal: one stable sort plus a cumulative-sum cutoff.

    The removed set is the maximal prefix of the (distortion asc, index asc)
    order whose running total fits the budget.  The running total is a
    sequential accumulate in the same order the basic loop adds, so the two
    variants agree bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_inputs(x, threshold)
    d = distortion_matrix(x, rho).ravel()
    whole = float(np.sum(d))
    budget = threshold * whole
    order = np.argsort(d, kind="stable")
    running = np.add.accumulate(d[order])
    count = int(np.searchsorted(running, budget, side="right"))
    removed = order[:count].astype(np.int64)
    spent = float(running[count - 1]) if count else 0.0
    return RemovalResult(
        removed_indices=removed, spent_distortion=spent, whole_distortion=whole
    )


def split(x: np.ndarray, removal: RemovalResult) -> SplitPair:
    """Materialize the (kept, removed) pair; y + z == x exactly."""
    x = np.asarray(x, dtype=np.float64)
    idx = removal.removed_indices
    if idx.size and (idx.min() < 0 or idx.max() >= x.size):
        raise IndexError("removal index out of bounds")
    y = x.copy()
    z = np.zeros_like(x)
    y.flat[idx] = 0.0
    z.flat[idx] = x.flat[idx]
    return SplitPair(y=y, z=z)


def sparsity(x: np.ndarray, removal: RemovalResult) -> float:
    """Fraction of elements not kept on the encrypted side."""
    return removal.removed_indices.size / np.asarray(x).size
