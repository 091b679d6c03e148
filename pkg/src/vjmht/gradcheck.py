"""Central finite-difference check of the full training loss on a toy model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .data import VideoRecord
from .hierarchy import VjmhtConfig, VjmhtParams, init_params
from .training import TrainConfig, batch_loss

TOY_CONFIG = VjmhtConfig(d_f=8, d_s=6, d_v=6, f_layers=1, s_layers=2, f_ffn=12, s_ffn=10,
                         f_heads=2, s_heads=2)


def toy_videos(seed: int = 0, n_videos: int = 2, n_shots: int = 2, shot_len: int = 3,
               d_f: int = 8) -> list[VideoRecord]:
    rng = np.random.default_rng(seed)
    out = []
    for v in range(n_videos):
        m = n_shots * shot_len
        out.append(VideoRecord(
            video_id=f"toy{v}",
            features=rng.normal(size=(m, d_f)),
            gt_scores=rng.uniform(size=m),
            boundaries=list(range(0, m + 1, shot_len)),
        ))
    return out


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


@dataclass
class GradcheckReport:
    mode: str
    n_coords: int
    max_rel_error: float
    worst: tuple[str, tuple, float, float]

    def to_dict(self) -> dict:
        name, idx, a, n = self.worst
        return {"mode": self.mode, "n_coords": self.n_coords, "max_rel_error": self.max_rel_error,
                "worst": {"param": name, "index": list(idx), "analytic": a, "numeric": n}}


def gradcheck_total_loss(mode: str = "supervised", n_coords: int = 200, h: float = 1e-5,
                         seed: int = 0, params: VjmhtParams | None = None,
                         videos: list[VideoRecord] | None = None) -> GradcheckReport:
    """Compare backprop gradients of the batch loss with central differences.

    ``n_coords`` parameter coordinates are sampled uniformly over all
    parameter tensors (every tensor contributes at least one).
    """
    params = params or init_params(TOY_CONFIG, seed=seed)
    videos = videos or toy_videos(seed, d_f=params.config.d_f)
    cfg = TrainConfig(mode=mode)
    named = params.named_parameters()
    ad.zero_grads(p for _, p in named)
    batch_loss(videos, params, cfg).total.backward()

    rng = np.random.default_rng(seed + 1)
    picks = [(i, tuple(rng.integers(0, s) for s in t.shape)) for i, (_, t) in enumerate(named)]
    sizes = np.array([t.data.size for _, t in named], dtype=float)
    for i in rng.choice(len(named), size=max(0, n_coords - len(named)), p=sizes / sizes.sum()):
        t = named[i][1]
        picks.append((int(i), tuple(rng.integers(0, s) for s in t.shape)))

    def loss_value() -> float:
        return batch_loss(videos, params, cfg).total.item()

    worst = ("", (), 0.0, 0.0)
    max_err = 0.0
    for i, idx in picks:
        name, t = named[i]
        analytic = float(t.grad[idx])
        orig = t.data[idx]
        t.data[idx] = orig + h
        up = loss_value()
        t.data[idx] = orig - h
        down = loss_value()
        t.data[idx] = orig
        numeric = (up - down) / (2 * h)
        err = relative_error(analytic, numeric)
        if err >= max_err:
            max_err, worst = err, (name, tuple(int(j) for j in idx), analytic, numeric)
    return GradcheckReport(mode, len(picks), max_err, worst)
