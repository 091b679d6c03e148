"""Budgeted key-shot selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .segmentation import check_cuts


def _better(cand: tuple, best: tuple) -> bool:
    # (value, weight, sorted index tuple): higher value, then lighter, then lexicographically smaller
    if cand[0] != best[0]:
        return cand[0] > best[0]
    if cand[1] != best[1]:
        return cand[1] < best[1]
    return cand[2] < best[2]


def knapsack_select(values: Sequence[float], weights: Sequence[int], capacity: int) -> list[int]:
    """0/1 knapsack by dynamic programming over (item, capacity).

    Returns the sorted indices of the chosen items.  Ties on total value go
    to the smaller total weight, then to the lexicographically smaller index
    list.  Values are accumulated in index order, so the reported optimum is
    reproducible by summing ``values`` over the returned indices.
    """
    if len(values) != len(weights):
        raise ValueError(f"{len(values)} values but {len(weights)} weights")
    w = [int(x) for x in weights]
    if any(x < 0 for x in w):
        raise ValueError("weights must be non-negative")
    if any(int(x) != x for x in weights):
        raise ValueError("weights must be integer counts")
    v = [float(x) for x in values]
    if not all(math.isfinite(x) for x in v):
        raise ValueError("values must be finite")
    capacity = int(capacity)
    if capacity < 0:
        raise ValueError("capacity must be non-negative")

    # best[c] = best (value, weight, items) using the items seen so far with weight <= c
    best = [(0.0, 0, ())] * (capacity + 1)
    for i, (vi, wi) in enumerate(zip(v, w)):
        if wi > capacity:
            continue
        new = list(best)
        for c in range(wi, capacity + 1):
            val, wt, items = best[c - wi]
            cand = (val + vi, wt + wi, items + (i,))
            if _better(cand, new[c]):
                new[c] = cand
        best = new
    return list(best[capacity][2])


def summary_capacity(n_frames: int, gamma: float) -> int:
    """``floor(gamma * M)``, with a tiny guard so 0.15 * 20 is not read as 2.999..."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    return int(math.floor(gamma * n_frames + 1e-9))


@dataclass
class SummaryMask:
    y: np.ndarray
    selected_shots: list[int]
    gamma: float = 0.15
    cuts: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int8)
        if self.y.sum() > summary_capacity(len(self.y), self.gamma):
            raise ValueError("summary exceeds its length budget")

    def run_length(self) -> list[list[int]]:
        """``[start, length]`` pairs of the selected frame runs."""
        runs = []
        for j, on in enumerate(self.y):
            if on and (not runs or runs[-1][0] + runs[-1][1] != j):
                runs.append([j, 0])
            if on:
                runs[-1][1] += 1
        return runs


def rle_decode(runs: Sequence[Sequence[int]], n_frames: int) -> np.ndarray:
    y = np.zeros(n_frames, dtype=np.int8)
    for start, length in runs:
        y[start:start + length] = 1
    return y


def shot_values(frame_scores, cuts: Sequence[int], value_mode: str = "mean") -> list[float]:
    scores = np.asarray(frame_scores, dtype=np.float64).reshape(-1)
    cuts = check_cuts(cuts, len(scores))
    if value_mode == "mean":
        return [float(scores[a:b].mean()) for a, b in zip(cuts[:-1], cuts[1:])]
    if value_mode == "sum":
        return [float(scores[a:b].sum()) for a, b in zip(cuts[:-1], cuts[1:])]
    raise ValueError(f"unknown value mode {value_mode!r}")


def generate_summary(frame_scores, cuts: Sequence[int], gamma: float = 0.15,
                     value_mode: str = "mean") -> SummaryMask:
    """Pick whole shots maximising total shot value within ``floor(gamma * M)`` frames."""
    scores = np.asarray(frame_scores, dtype=np.float64).reshape(-1)
    cuts = check_cuts(cuts, len(scores))
    values = shot_values(scores, cuts, value_mode)
    lengths = np.diff(cuts).tolist()
    chosen = knapsack_select(values, lengths, summary_capacity(len(scores), gamma))
    y = np.zeros(len(scores), dtype=np.int8)
    for i in chosen:
        y[cuts[i]:cuts[i + 1]] = 1
    return SummaryMask(y, chosen, gamma, cuts)
