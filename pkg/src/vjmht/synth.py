"""Synthetic videos with planted shots, concepts and importance."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import DatasetManifest, ManifestEntry, write_vjmf
from .summarize import summary_capacity


def _split_length(rng, total: int, parts: int, min_len: int) -> list[int]:
    spare = total - parts * min_len
    if spare < 0:
        raise ValueError(f"cannot split {total} frames into {parts} shots of >= {min_len}")
    cuts = np.sort(rng.integers(0, spare + 1, size=parts - 1))
    extra = np.diff(np.concatenate([[0], cuts, [spare]]))
    return [min_len + int(e) for e in extra]


def synth_videos(seed: int, n_videos: int, n_frames: int, dim: int, n_clusters: int,
                 concepts_per_cluster: int = 4, shots_range=(3, 4), noise: float = 0.1,
                 gamma: float = 0.15) -> list[dict]:
    """Generate videos in memory.

    Each cluster owns a pool of concept centroids scattered around a cluster
    centre; the first concept of every pool is the important one.  A video
    draws its cluster round-robin and contains exactly one important shot,
    short enough to fit the ``gamma`` budget, among shots of unimportant
    concepts (adjacent shots never share a concept).  Frame features are the
    shot's concept centroid plus Gaussian noise.
    """
    if min(n_videos, n_frames, dim, n_clusters, concepts_per_cluster) < 1:
        raise ValueError("all sizes must be positive")
    if concepts_per_cluster < 3:
        raise ValueError("need an important concept and two unimportant ones per cluster")
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, 3.0, size=(n_clusters, dim))
    pools = centres[:, None, :] + rng.normal(0.0, 1.0, size=(n_clusters, concepts_per_cluster, dim))
    cap = summary_capacity(n_frames, gamma)
    lo, hi = shots_range
    videos = []
    for v in range(n_videos):
        c = v % n_clusters
        n_shots = int(rng.integers(lo, hi + 1))
        imp_len = int(rng.integers(max(2, cap - 2), cap + 1))
        rest = _split_length(rng, n_frames - imp_len, n_shots - 1, max(2, imp_len))
        imp_at = int(rng.integers(n_shots))
        lengths = rest[:imp_at] + [imp_len] + rest[imp_at:]
        concepts = []
        for i in range(n_shots):
            if i == imp_at:
                concepts.append(0)
                continue
            choices = [k for k in range(1, concepts_per_cluster) if not concepts or k != concepts[-1]]
            concepts.append(int(rng.choice(choices)))
        feats, gt, cuts = [], [], [0]
        for length, k in zip(lengths, concepts):
            feats.append(pools[c, k] + rng.normal(0.0, noise, size=(length, dim)))
            gt.append(np.full(length, 1.0 if k == 0 else 0.0))
            cuts.append(cuts[-1] + length)
        videos.append({
            "video_id": f"synth_{v:03d}",
            "features": np.concatenate(feats).astype(np.float32),
            "gt_scores": np.concatenate(gt).astype(np.float32),
            "cuts": cuts,
            "concepts": concepts,
            "cluster": c,
        })
    return videos


def synth_dataset(seed: int, n_videos: int, n_frames: int, dim: int, n_clusters: int,
                  out_dir, **kwargs) -> DatasetManifest:
    """Write a synthetic dataset (VJMF files + ``manifest.json``) under ``out_dir``.

    The user summary of every video is its planted important shot.  Planted
    cuts and cluster labels are kept in the manifest as ``planted_cuts`` and
    ``planted_cluster``; ``cluster_id`` is left for the clustering step.
    """
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    entries = []
    for v in synth_videos(seed, n_videos, n_frames, dim, n_clusters, **kwargs):
        vid = v["video_id"]
        write_vjmf(out / "features" / f"{vid}.vjmf", v["features"])
        write_vjmf(out / "features" / f"{vid}.gt.vjmf", v["gt_scores"][:, None])
        write_vjmf(out / "features" / f"{vid}.user.vjmf", v["gt_scores"][:, None])
        entries.append(ManifestEntry(
            video_id=vid,
            features_path=f"features/{vid}.vjmf",
            gt_scores_path=f"features/{vid}.gt.vjmf",
            user_summaries_path=f"features/{vid}.user.vjmf",
            fps_after_subsample=2.0,
            extra={"planted_cuts": v["cuts"], "planted_cluster": v["cluster"]},
        ))
    manifest = DatasetManifest(entries, out)
    (out / "manifest.json").write_text(json.dumps(manifest.to_json(), indent=2))
    return manifest
