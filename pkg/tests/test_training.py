import json

import numpy as np
import pytest

from vjmht.gradcheck import gradcheck_total_loss, relative_error
from vjmht.hierarchy import init_params, predict_frame_scores
from vjmht.training import TrainConfig, batch_loss, train

from .conftest import small_config


class TestConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.alpha, cfg.beta, cfg.epsilon, cfg.epochs) == (0.01, 0.1, 0.5, 60)
        assert (cfg.lr_initial, cfg.lr_after_epoch_30, cfg.batch_videos) == (1e-5, 1e-6, 2)
        assert cfg.lr_at(29) == 1e-5 and cfg.lr_at(30) == 1e-6

    def test_json_round_trip(self, tmp_path):
        cfg = small_config(seed=4)
        (tmp_path / "c.json").write_text(json.dumps(cfg.to_json()))
        assert TrainConfig.from_json(tmp_path / "c.json") == cfg
        assert TrainConfig.from_json(cfg.to_json(), seed=9, epochs=None).seed == 9

    @pytest.mark.parametrize("bad", [{"alpha": -1}, {"epsilon": 1.0}, {"mode": "semi"},
                                     {"pair_mode": "all"}, {"batch_videos": 0}])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            TrainConfig(**bad)

    def test_unknown_field(self):
        with pytest.raises(ValueError, match="learning_rate"):
            TrainConfig.from_json({"learning_rate": 0.1})


class TestBatchLoss:
    def test_components(self, synth_records):
        cfg = small_config()
        for r, cuts in zip(synth_records, ([0, 20, 40, 64], [0, 32, 64])):
            r.boundaries = cuts
        params = init_params(cfg.model_config(32), seed=0)
        loss = batch_loss(synth_records[:2], params, cfg)
        expect = loss.sup + cfg.alpha * loss.rec + cfg.beta * loss.reg
        assert abs(loss.total.item() - expect) < 1e-12
        un = batch_loss(synth_records[:2], params, small_config(mode="unsupervised"))
        assert un.sup is None
        assert abs(un.total.item() - (cfg.alpha * un.rec + cfg.beta * un.reg)) < 1e-12


class TestTrain:
    def test_zero_lr_is_constant(self, synth_dir):
        cfg = small_config(lr_initial=0.0, lr_after_epoch_30=0.0, epochs=3, pair_mode="none")
        res = train(synth_dir / "manifest.json", cfg)
        totals = [e["total"] for e in res.epochs]
        assert totals[0] == totals[1] == totals[2]

    def test_unsupervised_log_schema(self, synth_dir):
        res = train(synth_dir / "manifest.json", small_config(mode="unsupervised", epochs=1))
        assert "sup" not in res.epochs[0]
        assert all("sup" not in s for s in res.steps)
        assert set(res.epochs[0]) == {"epoch", "lr", "total", "rec", "reg"}

    def test_same_seed_same_losses(self, synth_dir):
        a = train(synth_dir / "manifest.json", small_config(epochs=1))
        b = train(synth_dir / "manifest.json", small_config(epochs=1))
        assert [s["total"] for s in a.steps] == [s["total"] for s in b.steps]

    def test_supervised_first_epochs_decrease(self, synth_dir):
        res = train(synth_dir / "manifest.json", small_config(epochs=6))
        totals = [e["total"] for e in res.epochs]
        assert all(b < a for a, b in zip(totals, totals[1:]))

    def test_large_beta_pulls_mean_to_epsilon(self, synth_dir, synth_records):
        cfg = small_config(mode="unsupervised", alpha=0.0, beta=100.0, epochs=200)

        def close_enough(epoch, result):
            return result.epochs[-1]["reg"] < 1e-4

        res = train(synth_dir / "manifest.json", cfg, callback=close_enough)
        assert len(res.epochs) <= 200
        for r in synth_records:
            r.boundaries = json.loads((synth_dir / "cuts" / f"{r.video_id}.json").read_text())
        mean = np.mean([predict_frame_scores(r, res.params).mean() for r in synth_records])
        assert abs(mean - 0.5) <= 0.05

    def test_missing_ground_truth(self, synth_records):
        synth_records[1].gt_scores = None
        with pytest.raises(ValueError, match="synth_001"):
            train(synth_records, small_config(epochs=1, pair_mode="none"))

    def test_max_steps(self, synth_dir):
        res = train(synth_dir / "manifest.json", small_config(epochs=3), max_steps=5)
        assert len(res.steps) == 5

    def test_log_file(self, synth_dir, tmp_path):
        res = train(synth_dir / "manifest.json", small_config(epochs=1, pair_mode="random"))
        res.save_log(tmp_path / "log.json")
        doc = json.loads((tmp_path / "log.json").read_text())
        assert len(doc["steps"]) == 8 and doc["epochs"][0]["epoch"] == 0


class TestGradcheck:
    def test_relative_error_floor(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1e-9, 0.0) == 1e-3
        assert relative_error(2.0, 1.0) == 0.5

    def test_small_run(self):
        rep = gradcheck_total_loss("unsupervised", n_coords=40)
        assert rep.n_coords >= 40
        assert rep.max_rel_error < 1e-4
        assert rep.to_dict()["mode"] == "unsupervised"
