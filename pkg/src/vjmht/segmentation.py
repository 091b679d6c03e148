"""Kernel temporal segmentation (KTS) of frame-feature sequences.

Boundaries are 0-based and half-open: ``cuts = [0, b_1, ..., M]`` and shot
``i`` covers frames ``cuts[i]:cuts[i+1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


def check_cuts(cuts: Sequence[int], n_frames: int | None = None) -> list[int]:
    """Validate a boundary list and return it as plain ints."""
    out = [int(c) for c in cuts]
    if len(out) < 2:
        raise ValueError("boundaries need at least a start and an end")
    if out[0] != 0:
        raise ValueError(f"boundaries must start at 0, got {out[0]}")
    if any(b <= a for a, b in zip(out[:-1], out[1:])):
        raise ValueError(f"boundaries must be strictly increasing: {out}")
    if n_frames is not None and out[-1] != n_frames:
        raise ValueError(f"boundaries end at {out[-1]} but the video has {n_frames} frames")
    return out


def shot_lengths(cuts: Sequence[int]) -> np.ndarray:
    return np.diff(check_cuts(cuts))


def to_one_based_ranges(cuts: Sequence[int]) -> list[tuple[int, int]]:
    """Closed 1-based ``(first, last)`` frame range of every shot."""
    cuts = check_cuts(cuts)
    return [(a + 1, b) for a, b in zip(cuts[:-1], cuts[1:])]


def from_one_based_ranges(ranges: Sequence[tuple[int, int]]) -> list[int]:
    cuts = [0]
    for first, last in ranges:
        if first != cuts[-1] + 1 or last < first:
            raise ValueError(f"ranges are not contiguous at {(first, last)}")
        cuts.append(last)
    return check_cuts(cuts)


@dataclass
class KtsConfig:
    max_segments: int = 40
    penalty_coefficient: float = 1.0
    kernel: str = "linear"
    sigma: float = 1.0

    def __post_init__(self):
        if self.max_segments < 1:
            raise ValueError("max_segments must be at least 1")
        if self.penalty_coefficient < 0:
            raise ValueError("penalty_coefficient must be non-negative")
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


def gram_matrix(features, kernel: str = "linear", sigma: float = 1.0) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("features must be a non-empty (M, d) array")
    if kernel == "linear":
        return x @ x.T
    if kernel == "rbf":
        sq = (x * x).sum(axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
        return np.exp(-d2 / (2.0 * sigma * sigma))
    raise ValueError(f"unknown kernel {kernel!r}")


class ScatterTable:
    """Prefix sums of a kernel matrix giving O(1) within-segment scatter."""

    def __init__(self, K):
        K = np.asarray(K, dtype=np.float64)
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 1:
            raise ValueError("kernel matrix must be square and non-empty")
        m = K.shape[0]
        self.n = m
        self.diag = np.concatenate([[0.0], np.cumsum(np.diag(K))])
        self.block = np.zeros((m + 1, m + 1))
        self.block[1:, 1:] = K.cumsum(axis=0).cumsum(axis=1)

    def cost(self, a: int, b: int) -> float:
        if not 0 <= a < b <= self.n:
            raise ValueError(f"empty or out-of-range segment [{a}, {b})")
        S = self.block
        inner = S[b, b] - S[a, b] - S[b, a] + S[a, a]
        return float((self.diag[b] - self.diag[a]) - inner / (b - a))

    def matrix(self) -> np.ndarray:
        """``J[a, b] = cost(a, b)`` for ``a < b``; ``inf`` elsewhere."""
        S = self.block
        a = np.arange(self.n + 1)[:, None]
        b = np.arange(self.n + 1)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = S[b, b] - S[a, b] - S[b, a] + S[a, a]
            J = (self.diag[b] - self.diag[a]) - inner / (b - a)
        J[b <= a] = np.inf
        return J


def segment_cost(K, a: int, b: int) -> float:
    """Kernel scatter of frames ``[a, b)``: trace minus block sum over length."""
    table = K if isinstance(K, ScatterTable) else ScatterTable(K)
    return table.cost(a, b)


def penalty(m: int, n_frames: int, coefficient: float = 1.0) -> float:
    return coefficient * m * (math.log(n_frames / m) + 1.0)


def kts_dp(K, max_segments: int) -> tuple[np.ndarray, list[list[int]]]:
    """Optimal segmentation cost for every segment count ``1..max_segments``.

    Returns ``(costs, cuts)`` where ``costs[m-1]`` is the minimum summed
    scatter with exactly ``m`` segments and ``cuts[m-1]`` the boundaries
    achieving it.  Among equal-cost placements the lexicographically
    smallest cut list wins.  Counts larger than the frame count are dropped.
    """
    table = K if isinstance(K, ScatterTable) else ScatterTable(K)
    M = table.n
    m_max = min(int(max_segments), M)
    J = table.matrix()
    # best[a] = min cost of splitting [a, M) into k segments (suffix form so
    # that argmin's first-hit rule picks the earliest next cut)
    best = np.full(M + 1, np.inf)
    best[:M] = J[:M, M]
    choice = [None]
    costs = [best[0]]
    for k in range(2, m_max + 1):
        cand = J[:M, :] + best[None, :]
        nxt = np.argmin(cand, axis=1)
        new = cand[np.arange(M), nxt]
        new[M - k + 1:] = np.inf
        new = np.concatenate([new, [np.inf]])
        choice.append(nxt)
        best = new
        costs.append(best[0])
    all_cuts = []
    for m in range(1, m_max + 1):
        cuts, a = [0], 0
        for k in range(m, 1, -1):
            a = int(choice[k - 1][a])
            cuts.append(a)
        cuts.append(M)
        all_cuts.append(cuts)
    return np.array(costs), all_cuts


def kts(features, cfg: KtsConfig | None = None, n_segments: int | None = None) -> list[int]:
    """Segment ``features`` into shots.

    The segment count minimises ``C(m) + c * m * (log(M/m) + 1)`` unless
    ``n_segments`` forces it.
    """
    cfg = cfg or KtsConfig()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("KTS needs at least one frame")
    M = x.shape[0]
    K = gram_matrix(x, cfg.kernel, cfg.sigma)
    limit = cfg.max_segments if n_segments is None else n_segments
    if n_segments is not None and not 1 <= n_segments <= M:
        raise ValueError(f"cannot cut {M} frames into {n_segments} segments")
    costs, cuts = kts_dp(K, limit)
    if n_segments is not None:
        return cuts[n_segments - 1]
    scores = [costs[m - 1] + penalty(m, M, cfg.penalty_coefficient) for m in range(1, len(costs) + 1)]
    return cuts[int(np.argmin(scores))]
