"""Command-line entry point: ``vjmht <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import ensure_boundaries, load_features, load_manifest, load_records
from .evaluation import evaluate_video
from .gradcheck import gradcheck_total_loss
from .grouping import clustering_representation, kmeans
from .hierarchy import load_params, predict_frame_scores, save_params
from .segmentation import KtsConfig, kts
from .summarize import generate_summary, rle_decode
from .synth import synth_dataset
from .training import TrainConfig, train

GRADCHECK_TOL = 1e-4


def _emit(obj, out_dir: str | None, filename: str) -> None:
    text = json.dumps(obj, indent=2)
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / filename).write_text(text + "\n")
    print(text)


def _train_config(args) -> TrainConfig:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    overrides = {"seed": args.seed}
    for key in ("epochs", "mode", "pair_mode"):
        overrides[key] = getattr(args, key, None)
    return TrainConfig.from_json(doc, **overrides)


def _kts_config(args, cfg: TrainConfig) -> KtsConfig:
    return KtsConfig(
        max_segments=args.max_segments if args.max_segments is not None else cfg.kts_max_segments,
        penalty_coefficient=args.penalty if args.penalty is not None else cfg.kts_penalty,
        kernel=args.kernel,
        sigma=args.sigma,
    )


def cmd_segment(args) -> int:
    cfg = _train_config(args)
    kcfg = _kts_config(args, cfg)
    if args.manifest:
        manifest = load_manifest(args.manifest)
        records = load_records(manifest)
        ensure_boundaries(records, manifest, kcfg)
        _emit({r.video_id: r.boundaries for r in records}, args.out, "cuts.json")
    elif args.features:
        _emit(kts(load_features(args.features), kcfg), args.out, "cuts.json")
    else:
        raise SystemExit("segment: give a features file or --manifest")
    return 0


def cmd_cluster(args) -> int:
    cfg = _train_config(args)
    manifest = load_manifest(args.manifest)
    records = load_records(manifest)
    params = load_params(args.model) if args.model else None
    if params is not None:
        ensure_boundaries(records, manifest, KtsConfig(cfg.kts_max_segments, cfg.kts_penalty))
    reps = np.stack([clustering_representation(r, params) for r in records])
    k = min(args.k if args.k is not None else cfg.n_clusters, len(records))
    labels = kmeans(reps, k, seed=cfg.seed, n_init=10).assignments.tolist()
    mapping = {r.video_id: int(c) for r, c in zip(records, labels)}
    if args.write:
        for e in manifest.entries:
            e.cluster_id = mapping[e.video_id]
        manifest.save(args.manifest)
    _emit(mapping, args.out, "clusters.json")
    return 0


def cmd_train(args) -> int:
    cfg = _train_config(args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    result = train(args.manifest, cfg)
    save_params(result.params, out / "model.vjmp")
    result.save_log(out / "loss_log.json")
    (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=2) + "\n")
    print(json.dumps({"model": str(out / "model.vjmp"), "final_epoch": result.epochs[-1]}, indent=2))
    return 0


def cmd_summarize(args) -> int:
    cfg = _train_config(args)
    manifest = load_manifest(args.manifest)
    records = load_records(manifest)
    ensure_boundaries(records, manifest, KtsConfig(cfg.kts_max_segments, cfg.kts_penalty))
    params = load_params(args.model)
    wanted = set(args.videos) if args.videos else None
    preds = []
    for r in records:
        if wanted is not None and r.video_id not in wanted:
            continue
        scores = predict_frame_scores(r, params)
        summary = generate_summary(scores, r.boundaries, args.gamma, args.value_mode)
        preds.append({
            "video_id": r.video_id,
            "gamma": args.gamma,
            "selected_shots": summary.selected_shots,
            "y": summary.run_length(),
            "n_frames": r.n_frames,
            "cuts": r.boundaries,
            "frame_scores": [float(s) for s in scores],
        })
    _emit(preds, args.out, "predictions.json")
    return 0


def evaluate_predictions(manifest, predictions: list[dict], mode: str = "mean") -> dict:
    records = {r.video_id: r for r in load_records(manifest)}
    per_video = []
    for p in predictions:
        r = records.get(p["video_id"])
        if r is None:
            raise KeyError(f"prediction for unknown video {p['video_id']!r}")
        y = rle_decode(p["y"], r.n_frames)
        scores = np.asarray(p["frame_scores"]) if "frame_scores" in p else None
        report = evaluate_video(y, scores, r.user_summaries,
                                r.gt_scores if scores is not None else None, mode).to_dict()
        if r.user_summaries is not None:
            report["f_measure_by_mode"] = {
                m: evaluate_video(y, None, r.user_summaries, None, m).f_measure for m in ("max", "mean")
            }
        report["video_id"] = r.video_id
        per_video.append(report)

    def avg(key):
        vals = [v[key] for v in per_video if v.get(key) is not None and np.isfinite(v[key])]
        return float(np.mean(vals)) if vals else None

    aggregate = {k: avg(k) for k in ("precision", "recall", "f_measure", "kendall_tau", "spearman_rho")}
    aggregate["aggregation_mode"] = mode
    aggregate["n_videos"] = len(per_video)
    return {"videos": per_video, "aggregate": aggregate}


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    predictions = json.loads(Path(args.predictions).read_text())
    _emit(evaluate_predictions(manifest, predictions, args.mode), args.out, "eval.json")
    return 0


def cmd_synth(args) -> int:
    if not args.out:
        raise SystemExit("synth: --out is required")
    seed = args.seed if args.seed is not None else 7
    synth_dataset(seed, args.n_videos, args.frames, args.dim, args.clusters, args.out)
    print(str(Path(args.out) / "manifest.json"))
    return 0


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    modes = ["supervised", "unsupervised"] if args.mode == "both" else [args.mode]
    reports = [gradcheck_total_loss(m, args.coords, args.h, seed).to_dict() for m in modes]
    ok = all(r["max_rel_error"] < GRADCHECK_TOL for r in reports)
    _emit({"tolerance": GRADCHECK_TOL, "passed": ok, "reports": reports}, args.out, "gradcheck.json")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=default, help="random seed")
        g.add_argument("--config", default=default, help="JSON file with TrainConfig fields")
        g.add_argument("--out", default=default, help="output directory")
        return g

    # flags are accepted before or after the command; the copy on each
    # command must not clobber a value given before it
    common = global_flags(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="vjmht", parents=[global_flags(None)],
                                     description="Hierarchical Transformer video co-summarisation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def kts_flags(p):
        p.add_argument("--max-segments", type=int, default=None)
        p.add_argument("--penalty", type=float, default=None)
        p.add_argument("--kernel", choices=["linear", "rbf"], default="linear")
        p.add_argument("--sigma", type=float, default=1.0)

    p = sub.add_parser("segment", parents=[common], help="KTS shot boundaries as a JSON array")
    p.add_argument("features", nargs="?", help="VJMF feature file")
    p.add_argument("--manifest")
    kts_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("cluster", parents=[common], help="group videos with k-means")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", default=None, help="parameter file for model-based representations")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--write", action="store_true", help="store cluster_id back into the manifest")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--mode", choices=["supervised", "unsupervised"], default=None)
    p.add_argument("--pair-mode", dest="pair_mode", default=None,
                   choices=["intra_cluster", "inter_cluster", "random", "none"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("summarize", parents=[common], help="knapsack summaries from a trained model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float, default=0.15)
    p.add_argument("--value-mode", choices=["mean", "sum"], default="mean")
    p.add_argument("--videos", nargs="*", default=None)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval", parents=[common], help="F-measure and rank correlations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--mode", choices=["mean", "max"], default="mean")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    p.add_argument("--n-videos", type=int, default=8)
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--clusters", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check on a toy model")
    p.add_argument("--coords", type=int, default=200)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--mode", choices=["supervised", "unsupervised", "both"], default="both")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
