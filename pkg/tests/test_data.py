import json
import logging
import struct

import numpy as np
import pytest

from vjmht.data import (
    DatasetManifest,
    FormatError,
    ManifestEntry,
    ensure_boundaries,
    load_features,
    load_manifest,
    load_records,
    normalize_scores,
    read_vjmf,
    write_vjmf,
)
from vjmht.segmentation import KtsConfig, kts
from vjmht.synth import synth_dataset, synth_videos


class TestVjmf:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        a = rng.normal(size=(7, 5)).astype(np.float32)
        write_vjmf(tmp_path / "a.vjmf", a)
        b = read_vjmf(tmp_path / "a.vjmf")
        assert b.dtype == np.float32
        assert a.tobytes() == b.tobytes()
        write_vjmf(tmp_path / "b.vjmf", b)
        assert (tmp_path / "a.vjmf").read_bytes() == (tmp_path / "b.vjmf").read_bytes()

    def test_hand_built_bytes(self, tmp_path):
        raw = b"VJMF" + struct.pack("<HHII", 1, 0, 3, 2)
        raw += struct.pack("<6f", 1.0, -2.0, 0.5, 0.25, 3.0, 1e-3)
        (tmp_path / "h.vjmf").write_bytes(raw)
        expect = np.array([[1.0, -2.0], [0.5, 0.25], [3.0, 1e-3]], dtype=np.float32)
        np.testing.assert_array_equal(read_vjmf(tmp_path / "h.vjmf"), expect)
        assert load_features(tmp_path / "h.vjmf").dtype == np.float64

    def test_header_layout(self, tmp_path):
        write_vjmf(tmp_path / "x.vjmf", np.zeros((3, 2)))
        raw = (tmp_path / "x.vjmf").read_bytes()
        assert raw[:4] == b"VJMF"
        assert raw[4:8] == b"\x01\x00\x00\x00"
        assert struct.unpack("<II", raw[8:16]) == (3, 2)
        assert len(raw) == 16 + 24

    def test_truncated(self, tmp_path):
        write_vjmf(tmp_path / "t.vjmf", np.ones((4, 3)))
        p = tmp_path / "t.vjmf"
        p.write_bytes(p.read_bytes()[:-5])
        with pytest.raises(FormatError, match="expected 64"):
            read_vjmf(p)

    def test_truncated_header(self, tmp_path):
        (tmp_path / "t.vjmf").write_bytes(b"VJMF\x01")
        with pytest.raises(FormatError, match="byte 5"):
            read_vjmf(tmp_path / "t.vjmf")

    @pytest.mark.parametrize("offset, value, message", [(0, b"XJMF", "magic"),
                                                         (4, b"\x02\x00", "version"),
                                                         (6, b"\x01\x00", "reserved")])
    def test_bad_header_fields(self, tmp_path, offset, value, message):
        write_vjmf(tmp_path / "b.vjmf", np.ones((1, 1)))
        raw = bytearray((tmp_path / "b.vjmf").read_bytes())
        raw[offset:offset + len(value)] = value
        (tmp_path / "b.vjmf").write_bytes(bytes(raw))
        with pytest.raises(FormatError, match=message):
            read_vjmf(tmp_path / "b.vjmf")

    def test_non_finite_reported_with_offset(self, tmp_path):
        raw = b"VJMF" + struct.pack("<HHII", 1, 0, 1, 2) + struct.pack("<2f", 0.0, float("nan"))
        (tmp_path / "n.vjmf").write_bytes(raw)
        with pytest.raises(FormatError, match="byte 20"):
            read_vjmf(tmp_path / "n.vjmf")

    def test_one_dimensional_becomes_column(self, tmp_path):
        write_vjmf(tmp_path / "s.vjmf", [0.5, 1.0])
        assert read_vjmf(tmp_path / "s.vjmf").shape == (2, 1)


class TestManifest:
    def test_load_synth(self, synth_dir):
        m = load_manifest(synth_dir / "manifest.json")
        assert len(m.entries) == 8
        assert m.entries[0].extra["planted_cuts"][0] == 0

    def test_unique_ids(self):
        e = ManifestEntry("a", "a.vjmf")
        with pytest.raises(ValueError):
            DatasetManifest([e, ManifestEntry("a", "b.vjmf")])

    def test_missing_file(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"videos": [{"video_id": "x", "features_path": "x.vjmf"}]}))
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path / "m.json")
        assert load_manifest(tmp_path / "m.json", check_files=False).entries[0].video_id == "x"

    def test_fps_warning(self, tmp_path, caplog):
        write_vjmf(tmp_path / "x.vjmf", np.ones((2, 2)))
        doc = [{"video_id": "x", "features_path": "x.vjmf", "fps_after_subsample": 4}]
        (tmp_path / "m.json").write_text(json.dumps(doc))
        with caplog.at_level(logging.WARNING):
            load_manifest(tmp_path / "m.json")
        assert "2 fps" in caplog.text

    def test_save_round_trip(self, synth_dir, tmp_path):
        m = load_manifest(synth_dir / "manifest.json")
        m.entries[0].cluster_id = 3
        m.save(tmp_path / "copy.json")
        doc = json.loads((tmp_path / "copy.json").read_text())
        assert doc["videos"][0]["cluster_id"] == 3
        assert doc["videos"][0]["planted_cluster"] == m.entries[0].extra["planted_cluster"]


class TestRecords:
    def test_contents(self, synth_records):
        r = synth_records[0]
        assert r.features.dtype == np.float64 and r.features.shape == (64, 32)
        assert r.gt_scores.max() == 1.0
        assert r.user_summaries.shape == (1, 64)
        assert r.boundaries is None

    def test_normalize(self):
        np.testing.assert_array_equal(normalize_scores([1, 2, 4]), [0.25, 0.5, 1.0])
        np.testing.assert_array_equal(normalize_scores([0, 0]), [0, 0])
        with pytest.raises(ValueError):
            normalize_scores([-1, 2])

    def test_boundaries_cached(self, tmp_path):
        synth_dataset(3, 2, 32, 8, 1, tmp_path)
        manifest = load_manifest(tmp_path / "manifest.json")
        records = load_records(manifest)
        ensure_boundaries(records, manifest, KtsConfig(max_segments=8))
        assert (tmp_path / "cuts" / "synth_000.json").exists()
        again = load_records(manifest)
        assert again[0].boundaries == records[0].boundaries

    def test_gt_shape_checked(self, tmp_path):
        write_vjmf(tmp_path / "f.vjmf", np.ones((4, 2)))
        write_vjmf(tmp_path / "g.vjmf", np.ones((3, 1)))
        doc = [{"video_id": "x", "features_path": "f.vjmf", "gt_scores_path": "g.vjmf"}]
        (tmp_path / "m.json").write_text(json.dumps(doc))
        with pytest.raises(FormatError):
            load_records(load_manifest(tmp_path / "m.json"))


class TestSynth:
    def test_same_seed_same_bytes(self, tmp_path):
        synth_dataset(11, 3, 40, 6, 2, tmp_path / "a")
        synth_dataset(11, 3, 40, 6, 2, tmp_path / "b")
        for f in sorted((tmp_path / "a").rglob("*")):
            if f.is_file():
                assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()

    def test_gt_piecewise_constant(self):
        for v in synth_videos(5, 6, 64, 8, 3):
            cuts, gt = v["cuts"], v["gt_scores"]
            for a, b in zip(cuts[:-1], cuts[1:]):
                assert np.all(gt[a:b] == gt[a])
            assert gt.sum() <= 9

    def test_kts_recovers_planted_cuts(self):
        for v in synth_videos(7, 8, 64, 32, 4):
            cuts = kts(v["features"], n_segments=len(v["cuts"]) - 1)
            assert np.max(np.abs(np.array(cuts) - v["cuts"])) <= 1
