import math
from pathlib import Path

import numpy as np
import pytest
import torch

from tgif.audio import AudioClip
from tgif.errors import AssetNotFoundError, ConfigError, RoleMismatchError
from tgif.evaluate import (
    evaluate,
    identity_model,
    mean_si_sdri,
    read_records,
    write_records,
)
from tgif.adapt import AdaptConfig, adapt, distill_targets, run_group_suite
from tgif.manifest import read_manifest
from tgif.models import (
    StudentConfig,
    TeacherConfig,
    load_checkpoint,
    save_checkpoint,
)
from tgif.models.checkpoint import build_model
from tgif.synth import SynthConfig, build_manifest
from tgif.wavio import read_wav

from conftest import SR

TINY_STUDENT = StudentConfig(
    encoder_filters=16, encoder_kernel=16, hidden_size=8, embed_dim=8, inventory_size=6
)
TINY_TEACHER = TeacherConfig(
    encoder_kernels=(10, 20, 40), encoder_filters=12, separator_blocks=4,
    hidden_size=16, embed_dim=8, inventory_size=6,
)


@pytest.fixture(scope="module")
def group_manifest(asset_library, tmp_path_factory):
    out = tmp_path_factory.mktemp("group_ds")
    cfg = SynthConfig.group_default(
        sample_rate=SR,
        duration_s=0.5,
        k_range=(1, 3),
        enrollment_duration_s=1.0,
        hours=(10 - 0.5) * 0.5 / 3600.0,  # 10 scenes -> 4/2/4 adapt/val/test
        seed=31,
    )
    return build_manifest(cfg, asset_library, out, group=asset_library.group(1))


@pytest.fixture(scope="module")
def student_ckpt(tmp_path_factory):
    torch.manual_seed(100)
    model = build_model("student", TINY_STUDENT)
    path = tmp_path_factory.mktemp("ckpt") / "student.pt"
    inventory = [f"spk{i}" for i in range(6)]
    save_checkpoint(path, model, "student", TINY_STUDENT, epoch=3,
                    best_val_loss=2.0, inventory=inventory)
    return path


@pytest.fixture(scope="module")
def teacher_ckpt(tmp_path_factory):
    torch.manual_seed(200)
    model = build_model("teacher", TINY_TEACHER)
    path = tmp_path_factory.mktemp("ckpt") / "teacher.pt"
    save_checkpoint(path, model, "teacher", TINY_TEACHER, epoch=3,
                    best_val_loss=1.5, inventory=[f"spk{i}" for i in range(6)])
    return path


def dry_copy_stub(manifest_path):
    """A stand-in 'teacher' that returns the scene's dry target."""

    def fn(mixture: AudioClip, enrollment: AudioClip) -> AudioClip:
        dry_path = Path(mixture.source_id.replace(".mixture.wav", ".dry_target.wav"))
        return read_wav(dry_path)

    return fn


class TestEvaluate:
    def test_identity_model_zero_improvement(self, group_manifest):
        records = evaluate(identity_model, group_manifest, "test", model_id="identity")
        assert records
        for r in records:
            assert r.error is None
            assert r.si_sdri_db == pytest.approx(0.0, abs=1e-12)

    def test_oracle_model_clamped_output(self, group_manifest):
        records = evaluate(dry_copy_stub(group_manifest), group_manifest, "test", model_id="oracle")
        for r in records:
            assert r.output_si_sdr_db == 60.0  # +inf sentinel, clamped

    def test_two_models_same_input_side(self, group_manifest, student_ckpt, teacher_ckpt):
        a = evaluate(student_ckpt, group_manifest, "test", model_id="student")
        b = evaluate(teacher_ckpt, group_manifest, "test", model_id="teacher")
        for ra, rb in zip(a, b):
            assert ra.scene_id == rb.scene_id
            assert ra.K == rb.K and ra.group_id == rb.group_id
            assert ra.input_si_sdr_db == rb.input_si_sdr_db
            assert ra.input_sdr_db == rb.input_sdr_db
            assert ra.model_id != rb.model_id

    def test_sisdri_identity(self, group_manifest, student_ckpt):
        records = evaluate(student_ckpt, group_manifest, "test")
        for r in records:
            assert r.si_sdri_db == pytest.approx(
                r.output_si_sdr_db - r.input_si_sdr_db, abs=1e-9
            )
        mean_out = np.mean([r.output_si_sdr_db for r in records])
        mean_in = np.mean([r.input_si_sdr_db for r in records])
        assert mean_si_sdri(records) == pytest.approx(mean_out - mean_in, abs=1e-9)

    def test_error_rows_do_not_abort(self, group_manifest):
        def broken(mixture, enrollment):
            if mixture.source_id.endswith("000008.mixture.wav"):
                raise AssetNotFoundError("synthetic failure")
            return mixture

        records = evaluate(broken, group_manifest, "test", model_id="broken")
        errors = [r for r in records if r.error is not None]
        good = [r for r in records if r.error is None]
        assert len(errors) == 1 and "synthetic failure" in errors[0].error
        assert len(good) == len(records) - 1

    def test_reeval_identical(self, group_manifest, student_ckpt):
        a = evaluate(student_ckpt, group_manifest, "test")
        b = evaluate(student_ckpt, group_manifest, "test")
        assert a == b

    def test_records_roundtrip(self, group_manifest, tmp_path):
        records = evaluate(identity_model, group_manifest, "test")
        path = write_records(records, tmp_path / "records.jsonl")
        assert read_records(path) == records


class TestDistill:
    def test_stub_teacher_bitwise_dry_copy(self, group_manifest):
        n = distill_targets(dry_copy_stub(group_manifest), group_manifest)
        records = read_manifest(group_manifest)
        in_scope = [r for r in records if r.split in ("adapt", "val")]
        assert n == len(in_scope) == 6
        for r in in_scope:
            pseudo = r.resolve(group_manifest, "pseudo_target")
            dry = r.resolve(group_manifest, "dry_target")
            assert pseudo.read_bytes() == dry.read_bytes()
        # records outside the distilled splits stay untouched
        for r in records:
            if r.split == "test":
                assert "pseudo_target" not in r.paths

    def test_real_teacher_lengths_and_idempotency(self, group_manifest, teacher_ckpt):
        distill_targets(teacher_ckpt, group_manifest)
        records = [r for r in read_manifest(group_manifest) if r.split == "adapt"]
        first = {r.scene_id: r.resolve(group_manifest, "pseudo_target").read_bytes() for r in records}
        for r in records:
            mix = read_wav(r.resolve(group_manifest, "mixture"))
            pseudo = read_wav(r.resolve(group_manifest, "pseudo_target"))
            assert len(pseudo) == len(mix)
        distill_targets(teacher_ckpt, group_manifest)  # re-run overwrites identically
        for r in read_manifest(group_manifest):
            if r.split == "adapt":
                assert r.resolve(group_manifest, "pseudo_target").read_bytes() == first[r.scene_id]

    def test_student_checkpoint_rejected(self, group_manifest, student_ckpt):
        with pytest.raises(RoleMismatchError):
            distill_targets(student_ckpt, group_manifest)


@pytest.mark.slow
class TestAdapt:
    def test_kd_oracle_identity_when_targets_equal(self, group_manifest, student_ckpt, tmp_path):
        # make pseudo targets bitwise equal to dry targets
        distill_targets(dry_copy_stub(group_manifest), group_manifest)
        common = dict(lr=1e-4, epochs=3, seed=5, log_group_val=False)
        kd = adapt(student_ckpt, group_manifest, AdaptConfig(mode="kd", **common), tmp_path / "kd")
        oracle = adapt(student_ckpt, group_manifest, AdaptConfig(mode="oracle", **common), tmp_path / "or")
        assert len(kd.step_losses) == len(oracle.step_losses) > 0
        for a, b in zip(kd.step_losses, oracle.step_losses):
            assert abs(a - b) <= 1e-9

    def test_zero_lr_keeps_weights_bitwise(self, group_manifest, student_ckpt, tmp_path):
        result = adapt(
            student_ckpt, group_manifest,
            AdaptConfig(mode="oracle", lr=0.0, epochs=2, seed=1, log_group_val=False),
            tmp_path,
        )
        before = load_checkpoint(student_ckpt).model.state_dict()
        after = load_checkpoint(result.checkpoint_path).model.state_dict()
        for k in before:
            assert torch.equal(before[k], after[k]), k

    def test_exact_epoch_count_and_lineage(self, group_manifest, student_ckpt, tmp_path):
        cfg = AdaptConfig(mode="oracle", lr=1e-4, epochs=4, seed=2, log_group_val=True)
        result = adapt(student_ckpt, group_manifest, cfg, tmp_path)
        assert result.epochs_run == 4
        assert len(result.epoch_losses) == 4
        assert len(result.val_si_sdri) == 4  # logged every epoch, never acted on
        meta = load_checkpoint(result.checkpoint_path).meta
        parent = load_checkpoint(student_ckpt).meta
        assert meta.lineage == f"adapted-from:{parent.config_hash}"
        assert meta.group_id == 1
        assert meta.epoch == 4

    def test_adapting_teacher_rejected(self, group_manifest, teacher_ckpt, tmp_path):
        with pytest.raises(RoleMismatchError):
            adapt(teacher_ckpt, group_manifest, AdaptConfig(mode="oracle", epochs=1), tmp_path)

    def test_kd_mode_never_reads_dry_targets(self, group_manifest, student_ckpt, tmp_path, monkeypatch):
        distill_targets(dry_copy_stub(group_manifest), group_manifest)
        import tgif.training as training_mod

        loaded: list[str] = []
        real = training_mod.read_wav

        def spy(path, *a, **kw):
            loaded.append(str(path))
            return real(path, *a, **kw)

        monkeypatch.setattr(training_mod, "read_wav", spy)
        adapt(
            student_ckpt, group_manifest,
            AdaptConfig(mode="kd", lr=1e-4, epochs=1, seed=3, log_group_val=False),
            tmp_path,
        )
        assert loaded, "dataset should load stems through the audited reader"
        assert not [p for p in loaded if ".dry_target.wav" in p]

    def test_mode_validation(self):
        with pytest.raises(ConfigError):
            AdaptConfig(mode="nope")


@pytest.mark.slow
class TestGroupSuite:
    def test_rows_and_error_isolation(self, asset_library, tmp_path, student_ckpt, teacher_ckpt):
        manifests = {}
        for gid in (1, 2):
            cfg = SynthConfig.group_default(
                sample_rate=SR, duration_s=0.5, k_range=(1, 3),
                enrollment_duration_s=1.0,
                hours=(5 - 0.5) * 0.5 / 3600.0, seed=40 + gid,
            )
            manifests[gid] = build_manifest(
                cfg, asset_library, tmp_path / f"g{gid}", group=asset_library.group(gid)
            )
        # break group 2's manifest to prove isolation
        bad = manifests[2].read_text().replace(".mixture.wav", ".missing.wav")
        manifests[2].write_text(bad)
        rows = run_group_suite(
            teacher_ckpt, student_ckpt, manifests,
            AdaptConfig(lr=1e-4, epochs=1, log_group_val=False),
            out_dir=tmp_path / "suite", include_oracle=True, jobs=1,
        )
        assert [r.group_id for r in rows] == [1, 2]
        ok, bad_row = rows
        assert ok.status == "ok"
        assert math.isfinite(ok.si_sdri_generalist)
        assert math.isfinite(ok.si_sdri_kd)
        assert math.isfinite(ok.si_sdri_oracle)
        kd_meta = load_checkpoint(ok.kd_checkpoint).meta
        assert kd_meta.group_id == 1
        assert bad_row.status == "error" and bad_row.error
