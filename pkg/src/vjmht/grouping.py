"""Video grouping for joint training: representations, k-means, batches, folds."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def clustering_representation(record, params=None) -> np.ndarray:
    """Video descriptor used for clustering.

    With a trained model this is the video representation of a single-video
    pass; without one it is the mean frame feature.
    """
    if params is None:
        return np.asarray(record.features, dtype=np.float64).mean(axis=0)
    from .hierarchy import forward_single

    return forward_single(record, params).video_reps[0].data[0].copy()


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: list[float] = field(default_factory=list)  # after every assignment step
    n_iter: int = 0


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total == 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100, n_init: int = 1) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds.

    Stops at an assignment fixpoint or after ``max_iter`` rounds.  A cluster
    that loses all its members is restarted at the point farthest from its
    current centroid.  With ``n_init > 1`` the run with the lowest final
    inertia among that many seeded starts is returned.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        run = _lloyd(x, k, rng, max_iter)
        if best is None or run.inertia[-1] < best.inertia[-1]:
            best = run
    return best


def _lloyd(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int) -> KMeansResult:
    n = len(x)
    centroids = _kmeans_pp(x, k, rng)
    assign = None
    inertia = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new == c):
                far = int(np.argmax(d2[np.arange(n), new]))
                new[far] = c
                d2[far] = ((x[far] - centroids) ** 2).sum(axis=1)
        inertia.append(float(d2[np.arange(n), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        centroids = np.array([x[assign == c].mean(axis=0) for c in range(k)])
    final = float(((x - centroids[assign]) ** 2).sum())
    inertia.append(final)
    return KMeansResult(assign, centroids, inertia, it)


PAIR_MODES = ("intra_cluster", "inter_cluster", "random", "none")


def sample_pairs(assignments: Sequence[int], pair_mode: str, n_videos: int = 2,
                 seed: int = 0, epoch: int = 0) -> list[list[int]]:
    """Batches of video indices for one epoch.

    Every video leads exactly one batch (the lead carries the reconstruction
    term); lead order is reshuffled each epoch.  In ``intra_cluster`` mode a
    video whose cluster is too small to fill a batch leads a singleton batch
    and is never drawn as a partner.
    """
    if pair_mode not in PAIR_MODES:
        raise ValueError(f"unknown pair mode {pair_mode!r}")
    if n_videos < 1:
        raise ValueError("batches need at least one video")
    assignments = [int(a) for a in assignments]
    clusters: dict[int, list[int]] = defaultdict(list)
    for i, c in enumerate(assignments):
        clusters[c].append(i)
    sizes = {c: len(v) for c, v in sorted(clusters.items())}

    if pair_mode == "intra_cluster" and n_videos > 1 and max(sizes.values()) < n_videos:
        raise ValueError(f"no cluster holds {n_videos} videos; cluster sizes {sizes}")
    if pair_mode == "inter_cluster" and len(clusters) < n_videos:
        raise ValueError(f"need {n_videos} clusters for inter-cluster batches; cluster sizes {sizes}")
    if pair_mode == "random" and len(assignments) < n_videos:
        raise ValueError(f"need {n_videos} videos for random batches, have {len(assignments)}")

    rng = np.random.default_rng([seed, epoch])
    leads = rng.permutation(len(assignments)).tolist()
    batches = []
    for lead in leads:
        if pair_mode == "none" or n_videos == 1:
            batches.append([lead])
            continue
        if pair_mode == "intra_cluster":
            pool = [i for i in clusters[assignments[lead]] if i != lead]
            if len(pool) < n_videos - 1:
                batches.append([lead])
                continue
            mates = rng.choice(pool, size=n_videos - 1, replace=False).tolist()
        elif pair_mode == "inter_cluster":
            others = [c for c in sorted(clusters) if c != assignments[lead]]
            picked = rng.choice(others, size=n_videos - 1, replace=False).tolist()
            mates = [int(rng.choice(clusters[c])) for c in picked]
        else:
            pool = [i for i in range(len(assignments)) if i != lead]
            mates = rng.choice(pool, size=n_videos - 1, replace=False).tolist()
        batches.append([lead] + [int(m) for m in mates])
    return batches


def five_fold_split(video_ids: Sequence[str], seed: int = 0, n_folds: int = 5) -> list[list[str]]:
    """Seeded shuffle, then deal the videos round-robin into test folds."""
    ids = list(video_ids)
    if len(ids) < n_folds:
        raise ValueError(f"{n_folds}-fold split needs at least {n_folds} videos, got {len(ids)}")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return [shuffled[f::n_folds] for f in range(n_folds)]
