"""Training loop for supervised and unsupervised joint summarisation."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .data import DatasetManifest, VideoRecord, ensure_boundaries, load_manifest, load_records
from .grouping import PAIR_MODES, clustering_representation, kmeans, sample_pairs
from .hierarchy import (
    VjmhtConfig,
    VjmhtParams,
    forward,
    init_params,
    reconstruction_loss,
    regularization_loss,
    supervised_loss,
    total_loss,
)
from .optim import AdamState, adam_step
from .segmentation import KtsConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    mode: str = "supervised"
    alpha: float = 0.01
    beta: float = 0.1
    epsilon: float = 0.5
    epochs: int = 60
    batch_videos: int = 2
    lr_initial: float = 1e-5
    lr_after_epoch_30: float = 1e-6
    lr_drop_epoch: int = 30
    seed: int = 0
    pair_mode: str = "intra_cluster"
    n_clusters: int = 25
    d_s: int = 512
    d_v: int = 512
    f_layers: int = 2
    s_layers: int = 3
    f_ffn: int = 4096
    s_ffn: int = 2048
    f_heads: int = 2
    s_heads: int = 2
    kts_max_segments: int = 40
    kts_penalty: float = 1.0

    def __post_init__(self):
        if self.mode not in ("supervised", "unsupervised"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.batch_videos < 1:
            raise ValueError("batch_videos must be at least 1")
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"unknown pair mode {self.pair_mode!r}")

    @property
    def supervised(self) -> bool:
        return self.mode == "supervised"

    def model_config(self, d_f: int) -> VjmhtConfig:
        return VjmhtConfig(d_f=d_f, d_s=self.d_s, d_v=self.d_v, f_layers=self.f_layers,
                           s_layers=self.s_layers, f_ffn=self.f_ffn, s_ffn=self.s_ffn,
                           f_heads=self.f_heads, s_heads=self.s_heads)

    def lr_at(self, epoch: int) -> float:
        return self.lr_initial if epoch < self.lr_drop_epoch else self.lr_after_epoch_30

    @classmethod
    def from_json(cls, path_or_dict, **overrides) -> "TrainConfig":
        doc = path_or_dict if isinstance(path_or_dict, dict) else json.loads(Path(path_or_dict).read_text())
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        return cls(**doc)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class BatchLoss:
    total: ad.Tensor
    rec: float
    reg: float
    sup: float | None


def batch_loss(videos: Sequence[VideoRecord], params: VjmhtParams, cfg: TrainConfig) -> BatchLoss:
    """Loss of one joint batch; the first video carries the reconstruction term.

    Supervision and regularisation are averaged over the videos in the batch.
    """
    out = forward(videos, params, reconstruct=[0])
    n = len(out.frame_scores)
    reg = None
    sup = None
    for v, fs in zip(videos, out.frame_scores):
        r = regularization_loss(fs, cfg.epsilon)
        reg = r if reg is None else ad.add(reg, r)
        if cfg.supervised:
            if v.gt_scores is None:
                raise ValueError(f"{v.video_id}: supervised training needs ground-truth scores")
            s = supervised_loss(fs, v.gt_scores)
            sup = s if sup is None else ad.add(sup, s)
    reg = ad.scale(reg, 1.0 / n)
    if sup is not None:
        sup = ad.scale(sup, 1.0 / n)
    rec = reconstruction_loss([out.summary_reps[0]], [out.video_reps[0]])
    total = total_loss(sup, rec, reg, cfg.alpha, cfg.beta, cfg.supervised)
    return BatchLoss(total, rec.item(), reg.item(), None if sup is None else sup.item())


def assign_clusters(records: Sequence[VideoRecord], cfg: TrainConfig,
                    params: VjmhtParams | None = None) -> list[int]:
    """Cluster labels for the records, reusing manifest labels when all are present."""
    if all(r.cluster_id is not None for r in records):
        return [int(r.cluster_id) for r in records]
    reps = np.stack([clustering_representation(r, params) for r in records])
    k = min(cfg.n_clusters, len(records))
    labels = kmeans(reps, k, seed=cfg.seed, n_init=10).assignments.tolist()
    for r, c in zip(records, labels):
        r.cluster_id = int(c)
    return labels


@dataclass
class TrainResult:
    params: VjmhtParams
    epochs: list[dict] = field(default_factory=list)
    steps: list[dict] = field(default_factory=list)

    def save_log(self, path) -> None:
        Path(path).write_text(json.dumps({"epochs": self.epochs, "steps": self.steps}, indent=1))


def train(data, cfg: TrainConfig, params: VjmhtParams | None = None,
          max_steps: int | None = None, callback=None) -> TrainResult:
    """Train on a manifest (path or object) or a list of :class:`VideoRecord`.

    Every epoch visits each video once as the lead of a joint batch; one
    batch is one optimizer step.  ``callback(epoch, result)`` runs after
    every epoch and may return True to stop early.
    """
    manifest = None
    if isinstance(data, (str, Path)):
        data = load_manifest(data)
    if isinstance(data, DatasetManifest):
        manifest = data
        records = load_records(manifest)
    else:
        records = list(data)
    if not records:
        raise ValueError("no training videos")
    ensure_boundaries(records, manifest, KtsConfig(cfg.kts_max_segments, cfg.kts_penalty))
    if cfg.supervised:
        missing = [r.video_id for r in records if r.gt_scores is None]
        if missing:
            raise ValueError(f"supervised training needs ground truth for {missing}")

    labels = [0] * len(records)
    if cfg.pair_mode in ("intra_cluster", "inter_cluster"):
        labels = assign_clusters(records, cfg)

    if params is None:
        params = init_params(cfg.model_config(records[0].features.shape[1]), seed=cfg.seed)
    plist = params.parameters()
    state = AdamState()
    result = TrainResult(params)
    step = 0
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        sums = {"total": 0.0, "rec": 0.0, "reg": 0.0, "sup": 0.0}
        batches = sample_pairs(labels, cfg.pair_mode, cfg.batch_videos, cfg.seed, epoch)
        n = 0
        for batch in batches:
            ad.zero_grads(plist)
            loss = batch_loss([records[i] for i in batch], params, cfg)
            total = loss.total.item()
            if not np.isfinite(total):
                raise ad.NonFiniteError(f"non-finite loss at epoch {epoch}")
            loss.total.backward()
            adam_step(plist, [p.grad for p in plist], state, lr)
            entry = {"step": step, "epoch": epoch, "total": total, "rec": loss.rec, "reg": loss.reg}
            if cfg.supervised:
                entry["sup"] = loss.sup
            result.steps.append(entry)
            for k in sums:
                if k in entry:
                    sums[k] += entry[k]
            step += 1
            n += 1
            if max_steps is not None and step >= max_steps:
                break
        summary = {"epoch": epoch, "lr": lr, "total": sums["total"] / n,
                   "rec": sums["rec"] / n, "reg": sums["reg"] / n}
        if cfg.supervised:
            summary["sup"] = sums["sup"] / n
        result.epochs.append(summary)
        log.info("epoch %d: %s", epoch, summary)
        if max_steps is not None and step >= max_steps:
            break
        if callback is not None and callback(epoch, result):
            break
    return result
