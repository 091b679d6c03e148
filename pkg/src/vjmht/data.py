"""Feature containers, dataset manifests and per-video records.

VJMF layout (all little-endian)::

    0..3    b"VJMF"
    4..5    u16 version (1)
    6..7    u16 reserved (0)
    8..11   u32 rows M
    12..15  u32 columns d
    16..    M * d float32, row-major
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .segmentation import KtsConfig, check_cuts, kts

log = logging.getLogger(__name__)

MAGIC = b"VJMF"
VERSION = 1
_HEADER = struct.Struct("<4sHHII")


class FormatError(ValueError):
    """A VJMF file is malformed."""


def write_vjmf(path, array) -> None:
    arr = np.asarray(array)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"VJMF stores 2-D arrays, got shape {arr.shape}")
    data = arr.astype("<f4")
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite values")
    m, d = data.shape
    Path(path).write_bytes(_HEADER.pack(MAGIC, VERSION, 0, m, d) + data.tobytes())


def read_vjmf(path) -> np.ndarray:
    """Return the stored matrix as float32 exactly as written."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: header truncated at byte {len(raw)}, expected {_HEADER.size}")
    magic, version, reserved, m, d = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    if reserved != 0:
        raise FormatError(f"{path}: reserved field is {reserved} at byte 6, expected 0")
    expected = _HEADER.size + 4 * m * d
    if len(raw) != expected:
        raise FormatError(f"{path}: file is {len(raw)} bytes, expected {expected} for {m}x{d}")
    arr = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(m, d)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr.reshape(-1)))[0])
        raise FormatError(f"{path}: non-finite value at byte {_HEADER.size + 4 * bad}")
    return arr.astype(np.float32)


def load_features(path) -> np.ndarray:
    return read_vjmf(path).astype(np.float64)


@dataclass
class ManifestEntry:
    video_id: str
    features_path: str
    gt_scores_path: str | None = None
    user_summaries_path: str | None = None
    fps_after_subsample: float = 2.0
    cluster_id: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("video_id", "features_path", "gt_scores_path",
                                             "user_summaries_path", "fps_after_subsample",
                                             "cluster_id")}
        out.update(self.extra)
        return out


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path = Path(".")

    def __post_init__(self):
        ids = [e.video_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("video ids in a manifest must be unique")

    def resolve(self, rel: str | None) -> Path | None:
        if rel is None:
            return None
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def to_json(self) -> dict:
        return {"videos": [e.to_dict() for e in self.entries]}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


_KNOWN = {"video_id", "features_path", "gt_scores_path", "user_summaries_path",
          "fps_after_subsample", "cluster_id"}


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    videos = doc["videos"] if isinstance(doc, dict) else doc
    entries = []
    for v in videos:
        entries.append(ManifestEntry(
            video_id=str(v["video_id"]),
            features_path=v["features_path"],
            gt_scores_path=v.get("gt_scores_path"),
            user_summaries_path=v.get("user_summaries_path"),
            fps_after_subsample=float(v.get("fps_after_subsample", 2.0)),
            cluster_id=v.get("cluster_id"),
            extra={k: val for k, val in v.items() if k not in _KNOWN},
        ))
    manifest = DatasetManifest(entries, path.parent)
    for e in entries:
        if e.fps_after_subsample <= 0:
            raise ValueError(f"{e.video_id}: fps_after_subsample must be positive")
        if e.fps_after_subsample != 2.0:
            log.warning("%s declares %.3g fps; features are expected at 2 fps",
                        e.video_id, e.fps_after_subsample)
        if check_files:
            for rel in (e.features_path, e.gt_scores_path, e.user_summaries_path):
                p = manifest.resolve(rel)
                if p is not None and not p.exists():
                    raise FileNotFoundError(f"{e.video_id}: missing file {p}")
    return manifest


@dataclass
class VideoRecord:
    video_id: str
    features: np.ndarray
    gt_scores: np.ndarray | None = None
    user_summaries: np.ndarray | None = None  # (annotators, M) of 0/1
    boundaries: list[int] | None = None
    cluster_id: int | None = None

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]


def normalize_scores(scores) -> np.ndarray:
    """Scale a score curve into [0, 1] by its maximum (left alone if the max is 0)."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.min() < 0:
        raise ValueError("importance scores must be non-negative")
    top = s.max()
    return s / top if top > 0 else s


def cuts_cache_path(manifest: DatasetManifest, video_id: str) -> Path:
    return manifest.root / "cuts" / f"{video_id}.json"


def load_record(manifest: DatasetManifest, entry: ManifestEntry) -> VideoRecord:
    feats = load_features(manifest.resolve(entry.features_path))
    m = feats.shape[0]
    gt = users = None
    if entry.gt_scores_path:
        g = read_vjmf(manifest.resolve(entry.gt_scores_path))
        if g.shape != (m, 1):
            raise FormatError(f"{entry.video_id}: gt scores have shape {g.shape}, expected ({m}, 1)")
        gt = normalize_scores(g[:, 0])
    if entry.user_summaries_path:
        u = read_vjmf(manifest.resolve(entry.user_summaries_path))
        if u.shape[0] != m:
            raise FormatError(f"{entry.video_id}: user summaries cover {u.shape[0]} of {m} frames")
        if not np.isin(u, (0.0, 1.0)).all():
            raise FormatError(f"{entry.video_id}: user summaries must be 0/1")
        users = u.T.astype(np.int8)
    cuts = None
    cache = cuts_cache_path(manifest, entry.video_id)
    if cache.exists():
        cuts = check_cuts(json.loads(cache.read_text()), m)
    return VideoRecord(entry.video_id, feats, gt, users, cuts, entry.cluster_id)


def load_records(manifest: DatasetManifest) -> list[VideoRecord]:
    return [load_record(manifest, e) for e in manifest.entries]


def ensure_boundaries(records: list[VideoRecord], manifest: DatasetManifest | None = None,
                      cfg: KtsConfig | None = None) -> None:
    """Segment every record lacking boundaries, caching cuts beside the manifest."""
    for r in records:
        if r.boundaries is not None:
            continue
        r.boundaries = kts(r.features, cfg)
        if manifest is not None:
            path = cuts_cache_path(manifest, r.video_id)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(r.boundaries))
