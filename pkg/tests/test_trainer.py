import numpy as np
import pytest
from PIL import Image

from terraseg.checkpoint import load_checkpoint
from terraseg.data import Manifest, scan_dataset
from terraseg.errors import DatasetError, TrainingDiverged
from terraseg.metrics import MetricTriple
from terraseg.model import UNetConfig, init_params
from terraseg.trainer import CSV_HEADER, TrainConfig, Trainer, evaluate, predict, train

SMALL = UNetConfig(depth=1, base_width=2, img_size=16)


class ScriptedTrainer(Trainer):
    """Replaces gradient steps and validation with a fixed loss script."""

    def __init__(self, config, val_losses):
        params = {"w": np.zeros(3, np.float32)}
        super().__init__(config, Manifest([]), Manifest([]), params=params)
        self.val_losses = val_losses

    def train_epoch(self, epoch):
        self.params["w"][:] = epoch  # parameters differ every epoch
        return 1.0 / epoch, 0.5, 0.5

    def validate(self):
        return MetricTriple(accuracy=0.5, loss=self.val_losses[len(self.history)], iou=0.5)


def scripted_config(tmp_path, **kw):
    return TrainConfig(out_dir=tmp_path / "out", img_size=16, model=SMALL, **kw)


def test_plateau_after_26_stops_at_35(tmp_path, monkeypatch):
    monkeypatch.setattr("terraseg.trainer.save_checkpoint", lambda p, c, path: path.write_text(str(p["w"][0])))
    losses = [1.0 - 0.01 * e for e in range(1, 27)] + [0.9] * 24
    best, history = ScriptedTrainer(scripted_config(tmp_path), losses).run()
    assert len(history) == 35
    np.testing.assert_array_equal(best["w"], 26.0)
    assert (tmp_path / "out" / "best.ckpt").read_text() == "26.0"
    lines = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 36


def test_decreasing_runs_all_epochs(tmp_path, monkeypatch):
    monkeypatch.setattr("terraseg.trainer.save_checkpoint", lambda *a: None)
    losses = [1.0 / e for e in range(1, 51)]
    _, history = ScriptedTrainer(scripted_config(tmp_path), losses).run()
    assert len(history) == 50 and [h.epoch for h in history] == list(range(1, 51))


@pytest.fixture
def manifest(tiny_dataset):
    return scan_dataset(tiny_dataset)


def test_zero_logit_accuracy_is_foreground_fraction(manifest):
    params = {k: np.zeros_like(v) for k, v in init_params(SMALL, 0).items()}
    result = evaluate(params, SMALL, manifest, batch_size=4)
    masks = [np.asarray(Image.open(e.mask_path)) >= 128 for e in manifest]
    # per-batch accuracies weighted by sample count == overall fraction for equal-size images
    assert result.accuracy == pytest.approx(np.mean(masks), abs=1e-12)
    assert result.loss == pytest.approx(np.log(2), rel=1e-6)


def test_evaluate_is_pure(manifest):
    params = init_params(SMALL, 0)
    before = {k: v.tobytes() for k, v in params.items()}
    a = evaluate(params, SMALL, manifest, 4)
    b = evaluate(params, SMALL, manifest, 4)
    assert a == b
    assert {k: v.tobytes() for k, v in params.items()} == before


def test_evaluate_empty():
    with pytest.raises(DatasetError):
        evaluate(init_params(SMALL, 0), SMALL, Manifest([]))


def test_short_real_run(tiny_dataset, tmp_path):
    cfg = TrainConfig(data_root=tiny_dataset, out_dir=tmp_path / "out", img_size=16, model=SMALL,
                      max_epochs=3, train_batch=2, val_batch=3, seed=4)
    best, history = train(cfg)
    assert len(history) == 3
    rows = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
    assert len(rows) == 4
    best_epoch = min(history, key=lambda h: h.val_loss).epoch
    ckpt, ckpt_cfg = load_checkpoint(tmp_path / "out" / "best.ckpt")
    assert ckpt_cfg == SMALL
    for k in best:
        assert ckpt[k].tobytes() == best[k].tobytes()
    assert all(0 <= h.train_acc <= 1 and 0 <= h.val_iou <= 1 for h in history)
    assert best_epoch >= 1


def test_diverged_loss_aborts(tiny_dataset, tmp_path):
    cfg = TrainConfig(data_root=tiny_dataset, out_dir=tmp_path / "o", img_size=16, model=SMALL, max_epochs=2)
    params = init_params(SMALL, 0)
    params["head.b"][:] = np.nan
    trainer = Trainer(cfg, params=params)
    with pytest.raises(TrainingDiverged, match="epoch 1, batch 0"):
        trainer.run()


def test_img_size_mismatch():
    from terraseg.errors import ConfigurationError
    with pytest.raises(ConfigurationError):
        TrainConfig(img_size=32, model=SMALL)


def test_predict(tmp_path, rs):
    Image.fromarray(rs.integers(0, 256, (40, 24, 3)).astype(np.uint8)).save(tmp_path / "in.png")
    params = init_params(SMALL, 2)
    predict(params, SMALL, tmp_path / "in.png", tmp_path / "a.png")
    predict(params, SMALL, tmp_path / "in.png", tmp_path / "b.png")
    out = np.asarray(Image.open(tmp_path / "a.png"))
    assert out.shape == (16, 16) and set(np.unique(out)) <= {0, 255}
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
