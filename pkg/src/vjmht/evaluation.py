"""F-measure against user summaries and rank correlation against score curves."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


@dataclass
class EvalReport:
    precision: float | None
    recall: float | None
    f_measure: float | None
    kendall_tau: float | None = None
    spearman_rho: float | None = None
    aggregation_mode: str = "mean"

    def to_dict(self) -> dict:
        return asdict(self)


def _binary(x) -> np.ndarray:
    y = getattr(x, "y", x)
    return np.asarray(y).reshape(-1).astype(bool)


def f_measure(pred, gt) -> tuple[float, float, float]:
    """Frame-overlap precision, recall and their harmonic mean.

    An empty prediction scores zero precision; an empty ground truth is a
    malformed annotation and raises.
    """
    p, g = _binary(pred), _binary(gt)
    if p.shape != g.shape:
        raise ValueError(f"prediction has {p.size} frames, ground truth {g.size}")
    n_gt = int(g.sum())
    if n_gt == 0:
        raise ValueError("ground-truth summary selects no frames")
    overlap = int((p & g).sum())
    n_pred = int(p.sum())
    precision = overlap / n_pred if n_pred else 0.0
    recall = overlap / n_gt
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def f_measure_multi(pred, gts: Sequence, mode: str = "mean") -> float:
    return f_measure_multi_report(pred, gts, mode)[2]


def f_measure_multi_report(pred, gts: Sequence, mode: str = "mean") -> tuple[float, float, float]:
    """(P, R, F) against several annotators.

    ``max`` reports the annotator with the best F; ``mean`` averages each
    quantity over annotators.
    """
    if len(gts) == 0:
        raise ValueError("need at least one annotator")
    scores = np.array([f_measure(pred, g) for g in gts])
    if mode == "max":
        return tuple(float(x) for x in scores[int(np.argmax(scores[:, 2]))])
    if mode == "mean":
        return tuple(float(x) for x in scores.mean(axis=0))
    raise ValueError(f"unknown aggregation mode {mode!r}")


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("rank correlation needs at least two observations")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise ValueError("rank correlation is undefined for a constant sequence")
    return a, b


def kendall_tau(a, b) -> float:
    """Kendall's tau-b with the usual tie correction, by direct pair counting."""
    a, b = _pair(a, b)
    iu = np.triu_indices(a.size, k=1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    s = float((sa * sb).sum())  # n_c - n_d
    untied_a = float(np.count_nonzero(sa))  # n_0 - n_1
    untied_b = float(np.count_nonzero(sb))  # n_0 - n_2
    return s / np.sqrt(untied_a * untied_b)


def spearman_rho(a, b) -> float:
    """Pearson correlation of average-tie ranks."""
    a, b = _pair(a, b)
    ra = rankdata(a) - (a.size + 1) / 2.0
    rb = rankdata(b) - (b.size + 1) / 2.0
    return float((ra * rb).sum() / np.sqrt((ra * ra).sum() * (rb * rb).sum()))


def rank_correlations(pred, gt) -> tuple[float, float]:
    return kendall_tau(pred, gt), spearman_rho(pred, gt)


def human_baseline(annotations: Sequence) -> tuple[float, float]:
    """Leave-one-out agreement: each annotator against the mean of the rest."""
    ann = [np.asarray(x, dtype=np.float64).reshape(-1) for x in annotations]
    if len(ann) < 2:
        raise ValueError("leave-one-out needs at least two annotators")
    stack = np.stack(ann)
    taus, rhos = [], []
    for i in range(len(ann)):
        rest = np.delete(stack, i, axis=0).mean(axis=0)
        taus.append(kendall_tau(stack[i], rest))
        rhos.append(spearman_rho(stack[i], rest))
    return float(np.mean(taus)), float(np.mean(rhos))


def evaluate_video(pred_summary, pred_scores, user_summaries: Sequence | None = None,
                   gt_scores=None, mode: str = "mean") -> EvalReport:
    """Bundle F-measure and rank correlations for one video.

    Either reference may be missing; the corresponding fields are then left
    as ``None``.
    """
    p = r = f = None
    if user_summaries is not None and len(user_summaries):
        p, r, f = f_measure_multi_report(pred_summary, user_summaries, mode)
    tau = rho = None
    if gt_scores is not None:
        tau, rho = rank_correlations(pred_scores, gt_scores)
    return EvalReport(p, r, f, tau, rho, mode)
