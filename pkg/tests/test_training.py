import json
import math

import numpy as np
import pytest
import torch

from tgif.errors import ConfigError, DivergedError
from tgif.models import StudentConfig, load_checkpoint
from tgif.synth import SynthConfig, build_manifest
from tgif.training import (
    ManifestAudioDataset,
    PlateauController,
    TrainConfig,
    overfit_probe,
    pretrain,
)

from conftest import SR

TINY_STUDENT = dict(
    encoder_filters=16, encoder_kernel=16, hidden_size=8, embed_dim=8
)


@pytest.fixture(scope="module")
def tiny_dataset(asset_library, tmp_path_factory):
    out = tmp_path_factory.mktemp("train_ds")
    cfg = SynthConfig(
        sample_rate=SR,
        duration_s=1.0,
        k_range=(1, 2),
        hours=0.0033,  # 12 scenes -> ~11 train / 1 val
        splits={"train": 10.0, "val": 1.0},
        seed=21,
    )
    return build_manifest(cfg, asset_library, out)


class TestPlateauController:
    def test_stagnant_stream_halving_and_stop(self):
        ctrl = PlateauController(1e-3, factor=0.5, lr_patience=20, stop_patience=120)
        events = [ctrl.observe(1.0) for _ in range(121)]
        assert events[0].improved and events[0].lr == 1e-3
        # first halving lands exactly on validation 21
        assert [e.index for e in events if e.halved][:2] == [21, 41]
        assert events[19].lr == 1e-3 and events[20].lr == 5e-4
        # stop fires exactly at 120 consecutive non-improving validations
        stop = [e for e in events if e.should_stop]
        assert stop and stop[0].index == 121 and stop[0].bad_count == 120
        assert not events[119].should_stop

    def test_improvement_resets_counters(self):
        ctrl = PlateauController(1e-3, lr_patience=3, stop_patience=10)
        losses = [5.0, 4.0, 4.0, 4.0, 3.0, 3.0, 3.0, 3.0]
        events = [ctrl.observe(v) for v in losses]
        assert [e.halved for e in events] == [False, False, False, False, False, False, False, True]
        assert ctrl.best == 3.0 and ctrl.best_index == 5

    def test_lr_sequence_non_increasing(self):
        ctrl = PlateauController(1e-3, lr_patience=2, stop_patience=50)
        rng = np.random.default_rng(0)
        lrs = [ctrl.observe(float(v)).lr for v in rng.uniform(1, 2, size=40)]
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))

    def test_equal_loss_is_not_improvement(self):
        ctrl = PlateauController(1e-3, lr_patience=5, stop_patience=7)
        ctrl.observe(2.0)
        for _ in range(6):
            assert not ctrl.observe(2.0).improved
        assert ctrl.observe(2.0).should_stop


class TestDataset:
    def test_batches_deterministic(self, tiny_dataset):
        ds = ManifestAudioDataset(tiny_dataset, "train", crop_s=0.5, seed=3)
        a = [b["mixture"] for b in ds.epoch_batches(epoch=2, batch_size=4)]
        b = [b["mixture"] for b in ds.epoch_batches(epoch=2, batch_size=4)]
        for x, y in zip(a, b):
            assert torch.equal(x, y)

    def test_crops_change_across_epochs(self, tiny_dataset):
        ds = ManifestAudioDataset(tiny_dataset, "train", crop_s=0.5, seed=3)
        a = next(iter(ds.epoch_batches(epoch=1, batch_size=4, shuffle=False)))
        b = next(iter(ds.epoch_batches(epoch=2, batch_size=4, shuffle=False)))
        assert not torch.equal(a["mixture"], b["mixture"])

    def test_mixture_target_alignment(self, tiny_dataset):
        # same crop offset for mixture and target: a K=1 noise-heavy scene
        # keeps mixture-target correlation high only if windows align
        ds_full = ManifestAudioDataset(tiny_dataset, "train", crop_s=None, seed=0)
        ds_crop = ManifestAudioDataset(tiny_dataset, "train", crop_s=0.5, seed=0)
        full = ds_full.items[0]
        batch = next(iter(ds_crop.epoch_batches(epoch=5, batch_size=1, shuffle=False)))
        mix, tgt = batch["mixture"][0].numpy(), batch["target"][0].numpy()
        n = len(mix)
        found = False
        for off in range(len(full["mixture"]) - n + 1):
            if np.array_equal(full["mixture"][off : off + n], mix):
                assert np.array_equal(full["target"][off : off + n], tgt)
                found = True
        assert found

    def test_labels_from_inventory(self, tiny_dataset):
        ds = ManifestAudioDataset(tiny_dataset, "train", crop_s=None, seed=0)
        inv = ds.speakers
        ds2 = ManifestAudioDataset(tiny_dataset, "train", inventory=inv, crop_s=None, seed=0)
        for item in ds2.items:
            assert inv[item["label"]] == item["record"].target_speaker

    def test_empty_split_rejected(self, tiny_dataset):
        with pytest.raises(ConfigError):
            ManifestAudioDataset(tiny_dataset, "test")


@pytest.mark.slow
class TestPretrain:
    def test_smoke_single_epoch(self, tiny_dataset, tmp_path):
        cfg = StudentConfig(**TINY_STUDENT)
        result = pretrain(
            "student", cfg, tiny_dataset, tiny_dataset, tmp_path,
            train_cfg=TrainConfig(max_epochs=1, crop_s=0.5, seed=1),
        )
        assert result.epochs_run == 1
        assert math.isfinite(result.best_val_loss)
        ck = load_checkpoint(result.best_checkpoint, expected_role="student")
        assert ck.meta.epoch == 1
        assert ck.meta.lineage == "pretrain"
        assert ck.meta.best_val_loss == pytest.approx(result.best_val_loss)

    def test_log_schema_and_decomposition(self, tiny_dataset, tmp_path):
        result = pretrain(
            "teacher",
            __import__("tgif.models", fromlist=["TeacherConfig"]).TeacherConfig(
                encoder_kernels=(8, 16, 32), encoder_filters=8,
                separator_blocks=4, hidden_size=8, embed_dim=8,
            ),
            tiny_dataset, tiny_dataset, tmp_path,
            train_cfg=TrainConfig(max_epochs=2, crop_s=0.5, seed=2),
        )
        lines = [json.loads(l) for l in result.log_path.read_text().splitlines()]
        assert {l["split"] for l in lines} == {"train", "val"}
        for l in lines:
            assert set(l) == {"epoch", "split", "loss", "si_sdr_term", "ce_term", "lr", "wall_s"}
            assert l["loss"] == pytest.approx(l["si_sdr_term"] + 0.5 * l["ce_term"], abs=1e-9)

    def test_best_checkpoint_is_min_of_trajectory(self, tiny_dataset, tmp_path):
        result = pretrain(
            "student", StudentConfig(**TINY_STUDENT), tiny_dataset, tiny_dataset, tmp_path,
            train_cfg=TrainConfig(max_epochs=4, crop_s=0.5, seed=3),
        )
        val_losses = [t["val_loss"] for t in result.trajectory]
        assert result.best_val_loss == min(val_losses)

    def test_reproducible_trajectory(self, tiny_dataset, tmp_path):
        kwargs = dict(
            train_manifest=tiny_dataset, val_manifest=tiny_dataset,
            train_cfg=TrainConfig(max_epochs=3, crop_s=0.5, seed=11),
        )
        r1 = pretrain("student", StudentConfig(**TINY_STUDENT), out_dir=tmp_path / "a", **kwargs)
        r2 = pretrain("student", StudentConfig(**TINY_STUDENT), out_dir=tmp_path / "b", **kwargs)
        for a, b in zip(r1.trajectory, r2.trajectory):
            assert a["train_loss"] == pytest.approx(b["train_loss"], rel=1e-5)
            assert a["val_loss"] == pytest.approx(b["val_loss"], rel=1e-5)

    def test_divergence_aborts_with_code(self, tiny_dataset, tmp_path):
        # absurd learning rate reliably produces a non-finite loss quickly
        with pytest.raises(DivergedError):
            pretrain(
                "student", StudentConfig(**TINY_STUDENT), tiny_dataset, tiny_dataset,
                tmp_path, train_cfg=TrainConfig(max_epochs=50, lr0=1e18, crop_s=0.5, seed=4),
            )


@pytest.mark.slow
class TestOverfitProbe:
    def test_frozen_weights_flat_curve(self, tmp_path):
        result = overfit_probe(
            n_items=2, out_dir=tmp_path, freeze=True, budget_epochs=10, eval_every=2,
            model_cfg=StudentConfig(**TINY_STUDENT),
        )
        scores = [s for _, s in result.curve]
        assert max(scores) - min(scores) < 1e-6
        assert not result.reached

    def test_single_item_memorization_trend(self, tmp_path):
        # tiny-model smoke: no threshold claim, just a rising curve
        result = overfit_probe(
            n_items=1, out_dir=tmp_path, budget_epochs=60, eval_every=10,
            model_cfg=StudentConfig(**TINY_STUDENT), threshold_db=60.0,
        )
        scores = [s for _, s in result.curve]
        assert scores[-1] > scores[0]
        assert result.epochs_run == 60  # budget exhausted -> report, not raise

    def test_rejects_large_probe(self, tmp_path):
        with pytest.raises(ConfigError):
            overfit_probe(n_items=100, out_dir=tmp_path)
