"""Hierarchical shot/video encoder with cross-video joint attention.

Frames of each shot go through the frame-level encoder (``f_stack``) behind a
learnable shot token; the shot token's output, projected to ``d_s``, is the
shot embedding.  Shot embeddings of one or more videos are then encoded
together by the shot-level encoder (``s_stack``), each video preceded by a
shared learnable video token whose attention is confined to its own shots.
An affine head on ``[shot rep, video rep]`` scores every shot.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .segmentation import check_cuts
from .transformer import (
    EncoderStackParams,
    encoder_stack,
    full_mask,
    init_encoder_stack,
    sinusoidal_positional_encoding,
    xavier_uniform,
)


@dataclass
class VjmhtConfig:
    d_f: int = 1024
    d_s: int = 512
    d_v: int = 512
    f_layers: int = 2
    s_layers: int = 3
    f_ffn: int = 4096
    s_ffn: int = 2048
    f_heads: int = 2
    s_heads: int = 2

    def __post_init__(self):
        for name in ("d_f", "d_s", "d_v"):
            if getattr(self, name) % 2:
                raise ValueError(f"{name} must be even for sinusoidal encodings")
        if self.d_f % self.f_heads or self.d_s % self.s_heads:
            raise ValueError("head counts must divide the encoder dimensions")


@dataclass
class VjmhtParams:
    config: VjmhtConfig
    shot_token: Tensor
    video_token: Tensor
    f_stack: EncoderStackParams
    s_stack: EncoderStackParams
    proj_fs_w: Tensor
    proj_fs_b: Tensor
    proj_sv_w: Tensor
    proj_sv_b: Tensor
    score_w: Tensor
    score_b: Tensor

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("shot_token", self.shot_token), ("video_token", self.video_token)]
        out += self.f_stack.named_parameters("f_stack.")
        out += self.s_stack.named_parameters("s_stack.")
        out += [("proj_fs.w", self.proj_fs_w), ("proj_fs.b", self.proj_fs_b),
                ("proj_sv.w", self.proj_sv_w), ("proj_sv.b", self.proj_sv_b),
                ("score.w", self.score_w), ("score.b", self.score_b)]
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]


def init_params(config: VjmhtConfig | None = None, seed: int = 0) -> VjmhtParams:
    config = config or VjmhtConfig()
    rng = np.random.default_rng(seed)
    c = config

    def w(fi, fo):
        return Tensor(xavier_uniform(rng, fi, fo), requires_grad=True)

    def zeros(n):
        return Tensor(np.zeros((1, n)), requires_grad=True)

    return VjmhtParams(
        config=c,
        shot_token=w(1, c.d_f),
        video_token=w(1, c.d_s),
        f_stack=init_encoder_stack(rng, c.f_layers, c.d_f, c.f_heads, c.f_ffn),
        s_stack=init_encoder_stack(rng, c.s_layers, c.d_s, c.s_heads, c.s_ffn),
        proj_fs_w=w(c.d_f, c.d_s),
        proj_fs_b=zeros(c.d_s),
        proj_sv_w=w(c.d_s, c.d_v),
        proj_sv_b=zeros(c.d_v),
        score_w=w(2 * c.d_v, 1),
        score_b=Tensor(np.zeros((1, 1)), requires_grad=True),
    )


# ---------------------------------------------------------------------------
# frame level


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.add_row(ad.matmul(x, w), b)


def encode_shot(frames, params: VjmhtParams) -> Tensor:
    """Encode one shot of ``L`` frames into a ``(1, d_s)`` embedding."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("a shot needs at least one frame")
    L = frames.shape[0]
    pe = sinusoidal_positional_encoding(1 + L, params.config.d_f)
    x = ad.add(ad.concat_rows([params.shot_token, Tensor(frames)]), Tensor(pe))
    out = encoder_stack(x, full_mask(1 + L), params.f_stack)
    return _linear(ad.rows(out, 0, 1), params.proj_fs_w, params.proj_fs_b)


def encode_shots(shots: Sequence[np.ndarray], params: VjmhtParams) -> Tensor:
    """Encode many shots in one pass, returning a ``(len(shots), d_s)`` tensor.

    The shots are laid end to end, each behind its own copy of the shot token
    and with positions restarting at 0, under a block-diagonal mask.  This is
    the same computation as calling :func:`encode_shot` on every shot, just
    with far fewer graph nodes.
    """
    if not shots:
        raise ValueError("no shots to encode")
    d_f = params.config.d_f
    pieces, pe_blocks, heads = [], [], []
    offset = 0
    for frames in shots:
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("a shot needs at least one frame")
        n = frames.shape[0] + 1
        pieces += [params.shot_token, Tensor(frames)]
        pe_blocks.append(sinusoidal_positional_encoding(n, d_f))
        heads.append(offset)
        offset += n
    mask = np.zeros((offset, offset), dtype=bool)
    for start, pe in zip(heads, pe_blocks):
        stop = start + pe.shape[0]
        mask[start:stop, start:stop] = True
    x = ad.add(ad.concat_rows(pieces), Tensor(np.concatenate(pe_blocks)))
    out = encoder_stack(x, mask, params.f_stack)
    return _linear(ad.take_rows(out, heads), params.proj_fs_w, params.proj_fs_b)


def split_shots(features: np.ndarray, cuts: Sequence[int]) -> list[np.ndarray]:
    cuts = check_cuts(cuts, len(features))
    return [features[a:b] for a, b in zip(cuts[:-1], cuts[1:])]


# ---------------------------------------------------------------------------
# shot level


@dataclass
class TokenLayout:
    """Where each video's token and shots sit in the concatenated sequence."""

    video_pos: list[int]
    shot_pos: list[list[int]]

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "TokenLayout":
        video_pos, shot_pos = [], []
        t = 0
        for p in counts:
            if p < 1:
                raise ValueError("every video needs at least one shot")
            video_pos.append(t)
            shot_pos.append(list(range(t + 1, t + 1 + p)))
            t += 1 + p
        return cls(video_pos, shot_pos)

    @property
    def n_tokens(self) -> int:
        return len(self.video_pos) + sum(len(s) for s in self.shot_pos)

    def positions(self) -> np.ndarray:
        """Per-token positional index; restarts at 0 on every video token."""
        pos = np.empty(self.n_tokens, dtype=np.intp)
        for v, shots in zip(self.video_pos, self.shot_pos):
            pos[v] = 0
            pos[shots] = np.arange(1, len(shots) + 1)
        return pos


def build_joint_mask(layout: TokenLayout) -> np.ndarray:
    """Cross-video attention mask.

    A video token sees itself and its own shots only.  A shot sees every
    shot of every video plus its own video token.
    """
    n = layout.n_tokens
    allowed = np.zeros((n, n), dtype=bool)
    all_shots = [i for shots in layout.shot_pos for i in shots]
    for v, shots in zip(layout.video_pos, layout.shot_pos):
        allowed[v, v] = True
        allowed[v, shots] = True
        for s in shots:
            allowed[s, all_shots] = True
            allowed[s, v] = True
    return allowed


@dataclass
class JointEncoding:
    layout: TokenLayout
    reps: Tensor
    video_reps: list[Tensor]
    shot_reps: list[Tensor]


def joint_encode(shot_embs: Sequence[Tensor], params: VjmhtParams,
                 record: list | None = None) -> JointEncoding:
    """Run the shot-level encoder over N videos at once.

    ``shot_embs[n]`` holds the ``(P_n, d_s)`` embeddings of video n.
    """
    if not shot_embs:
        raise ValueError("joint_encode needs at least one video")
    layout = TokenLayout.from_counts([e.shape[0] for e in shot_embs])
    pieces = []
    for e in shot_embs:
        pieces += [params.video_token, e]
    pe = sinusoidal_positional_encoding(int(layout.positions().max()) + 1, params.config.d_s)
    x = ad.add(ad.concat_rows(pieces), Tensor(pe[layout.positions()]))
    out = encoder_stack(x, build_joint_mask(layout), params.s_stack, record)
    reps = _linear(out, params.proj_sv_w, params.proj_sv_b)
    video_reps = [ad.rows(reps, v, v + 1) for v in layout.video_pos]
    shot_reps = [ad.rows(reps, s[0], s[-1] + 1) for s in layout.shot_pos]
    return JointEncoding(layout, reps, video_reps, shot_reps)


def predict_scores(shot_reps: Tensor, video_rep: Tensor, params: VjmhtParams) -> Tensor:
    """Affine score head on ``[r_i, r]``; returns ``(P, 1)`` unsquashed scores."""
    p = shot_reps.shape[0]
    paired = ad.concat_cols([shot_reps, ad.take_rows(video_rep, [0] * p)])
    return ad.add_row(ad.matmul(paired, params.score_w), params.score_b)


def expand_scores(shot_scores: Tensor, cuts: Sequence[int]) -> Tensor:
    """Broadcast ``(P, 1)`` shot scores to ``(M, 1)`` frame scores."""
    cuts = check_cuts(cuts)
    if len(cuts) - 1 != shot_scores.shape[0]:
        raise ValueError(f"{len(cuts) - 1} shots in boundaries but {shot_scores.shape[0]} scores")
    owner = np.repeat(np.arange(len(cuts) - 1), np.diff(cuts))
    return ad.take_rows(shot_scores, owner)


def encode_summary(shot_embs: Tensor, shot_scores: Tensor, params: VjmhtParams) -> Tensor:
    """Representation of the score-weighted shot sequence of a single video."""
    if shot_embs.shape[0] != shot_scores.shape[0]:
        raise ValueError("shot embeddings and scores are not aligned")
    weighted = ad.scale_rows(shot_embs, shot_scores)
    n = 1 + shot_embs.shape[0]
    x = ad.add(ad.concat_rows([params.video_token, weighted]),
               Tensor(sinusoidal_positional_encoding(n, params.config.d_s)))
    out = encoder_stack(x, full_mask(n), params.s_stack)
    return _linear(ad.rows(out, 0, 1), params.proj_sv_w, params.proj_sv_b)


# ---------------------------------------------------------------------------
# losses


def reconstruction_loss(summary_reps: Sequence[Tensor], video_reps: Sequence[Tensor]) -> Tensor:
    """``sum_n ||r_sum^n - r^n||^2 / (d_v * N)`` over the videos supplied."""
    if isinstance(summary_reps, Tensor):
        summary_reps, video_reps = [summary_reps], [video_reps]
    if len(summary_reps) != len(video_reps) or not summary_reps:
        raise ValueError("need matching, non-empty lists of representations")
    total = None
    for a, b in zip(summary_reps, video_reps):
        if a.shape != b.shape:
            raise ad.ShapeError(f"representation shapes differ: {a.shape} vs {b.shape}")
        term = ad.sum_all(ad.square(ad.sub(a, b)))
        total = term if total is None else ad.add(total, term)
    d_v = summary_reps[0].data.size
    return ad.scale(total, 1.0 / (d_v * len(summary_reps)))


def supervised_loss(frame_scores: Tensor, gt) -> Tensor:
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 1)
    if gt.shape != frame_scores.shape:
        raise ValueError(f"{frame_scores.shape[0]} predicted frames but {gt.shape[0]} ground-truth")
    return ad.mse(frame_scores, Tensor(gt))


def regularization_loss(frame_scores: Tensor, epsilon: float) -> Tensor:
    return ad.square(ad.add_scalar(ad.mean(frame_scores), -epsilon))


def total_loss(l_sup: Tensor | None, l_rec: Tensor, l_reg: Tensor,
               alpha: float = 0.01, beta: float = 0.1, supervised: bool = True) -> Tensor:
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    out = ad.add(ad.scale(l_rec, alpha), ad.scale(l_reg, beta))
    if supervised:
        if l_sup is None:
            raise ValueError("supervised objective needs L_sup")
        out = ad.add(l_sup, out)
    return out


# ---------------------------------------------------------------------------
# full forward pass


@dataclass
class ModelOutput:
    shot_scores: list[Tensor]
    frame_scores: list[Tensor]
    video_reps: list[Tensor]
    shot_reps: list[Tensor]
    shot_embeddings: list[Tensor]
    summary_reps: dict[int, Tensor] = field(default_factory=dict)
    attention: list | None = None


def forward(videos: Sequence, params: VjmhtParams, reconstruct: Sequence[int] = (),
            record_attention: bool = False) -> ModelOutput:
    """Score a joint batch of videos.

    Each element of ``videos`` is either ``(features, cuts)`` or an object
    with ``features`` and ``boundaries`` attributes; ``None`` slots are
    skipped.  ``reconstruct`` lists the batch positions whose summary
    representation should be computed.
    """
    items = []
    for v in videos:
        if v is None:
            continue
        if isinstance(v, tuple):
            feats, cuts = v
        else:
            feats, cuts = v.features, v.boundaries
        feats = np.asarray(feats, dtype=np.float64)
        items.append((feats, check_cuts(cuts, feats.shape[0])))
    if not items:
        raise ValueError("empty batch")

    shots = [s for feats, cuts in items for s in split_shots(feats, cuts)]
    all_embs = encode_shots(shots, params)
    embs, start = [], 0
    for _, cuts in items:
        p = len(cuts) - 1
        embs.append(ad.rows(all_embs, start, start + p))
        start += p

    record = [] if record_attention else None
    enc = joint_encode(embs, params, record)
    shot_scores, frame_scores = [], []
    for (_, cuts), sr, vr in zip(items, enc.shot_reps, enc.video_reps):
        s = predict_scores(sr, vr, params)
        shot_scores.append(s)
        frame_scores.append(expand_scores(s, cuts))
    out = ModelOutput(shot_scores, frame_scores, enc.video_reps, enc.shot_reps, embs,
                      attention=record)
    for n in reconstruct:
        out.summary_reps[n] = encode_summary(embs[n], shot_scores[n], params)
    return out


def forward_single(video, params: VjmhtParams, record_attention: bool = False) -> ModelOutput:
    """Plain single-video pass, the only path used at inference time."""
    return forward([video], params, record_attention=record_attention)


def predict_frame_scores(video, params: VjmhtParams) -> np.ndarray:
    return forward_single(video, params).frame_scores[0].data[:, 0].copy()


# ---------------------------------------------------------------------------
# parameter file: u32 LE header length, JSON header, float32 LE payload


def save_params(params: VjmhtParams, path) -> None:
    named = params.named_parameters()
    header = {
        "format": "vjmht-params",
        "version": 1,
        "config": asdict(params.config),
        "params": [{"name": n, "shape": list(t.shape)} for n, t in named],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(t.data.astype("<f4").tobytes() for _, t in named)
    Path(path).write_bytes(struct.pack("<I", len(head)) + head + payload)


def load_params(path) -> VjmhtParams:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise ValueError(f"{path}: too short for a parameter file")
    (n,) = struct.unpack_from("<I", raw, 0)
    try:
        header = json.loads(raw[4:4 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"{path}: unreadable header ({e})") from None
    if header.get("format") != "vjmht-params" or header.get("version") != 1:
        raise ValueError(f"{path}: not a version-1 vjmht parameter file")
    params = init_params(VjmhtConfig(**header["config"]), seed=0)
    named = dict(params.named_parameters())
    offset = 4 + n
    for entry in header["params"]:
        t = named.pop(entry["name"], None)
        shape = tuple(entry["shape"])
        if t is None or t.shape != shape:
            raise ValueError(f"{path}: unexpected parameter {entry['name']} {shape}")
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(raw):
            raise ValueError(f"{path}: truncated at byte {len(raw)}, expected {end}")
        t.data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if named:
        raise ValueError(f"{path}: missing parameters {sorted(named)}")
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return params
