import shutil

import pytest

from tgif.cli import main
from tgif.manifest import read_manifest

CONFIG_TMPL = """
[run]
seed = 5
out_dir = {out_dir}

[assets]
sample_rate = 8000
utterance_s = 2.0
utterances_per_speaker = 2
generic_speakers = 6
group_speakers = 4
generic_rooms = 1
group_rooms = 2
rirs_per_room = 1
noise_clips_per_domain = 2
noise_s = 2.0
n_groups = 2
group_size = 2

[synth]
sample_rate = 8000
duration_s = 0.5
k_range = 1, 2
enrollment_duration_s = 1.0
hours = 0.0011
splits = train:4, val:1

[synth.group]
hours = 0.0011

[model.student]
encoder_filters = 16
encoder_kernel = 16
hidden_size = 8
embed_dim = 8

[model.teacher]
encoder_kernels = 8, 16, 32
encoder_filters = 8
separator_blocks = 4
hidden_size = 8
embed_dim = 8

[train]
max_epochs = 1
crop_s = 0.5

[adapt]
lr = 0.0001
epochs = 1
log_group_val = false

[report]
baseline = student
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out_dir = root / "run"
    config = root / "run.ini"
    config.write_text(CONFIG_TMPL.format(out_dir=out_dir))
    return {"config": str(config), "out": out_dir}


@pytest.mark.slow
class TestPipelineCli:
    def test_01_synth_generic(self, workdir, capsys):
        assert main(["synth", "--config", workdir["config"], "--role", "generic"]) == 0
        manifest = workdir["out"] / "data" / "generic" / "manifest.jsonl"
        assert manifest.is_file()
        assert len(read_manifest(manifest)) == 8
        assert (workdir["out"] / "resolved_config.synth.ini").is_file()

    def test_02_synth_rerun_noop(self, workdir, capsys):
        manifest = workdir["out"] / "data" / "generic" / "manifest.jsonl"
        before = manifest.read_bytes()
        assert main(["synth", "--config", workdir["config"], "--role", "generic"]) == 0
        assert "up to date" in capsys.readouterr().out
        assert manifest.read_bytes() == before

    def test_03_synth_rebuild_identical(self, workdir):
        manifest = workdir["out"] / "data" / "generic" / "manifest.jsonl"
        before = manifest.read_bytes()
        shutil.rmtree(workdir["out"] / ".stamps")
        assert main(["synth", "--config", workdir["config"], "--role", "generic"]) == 0
        assert manifest.read_bytes() == before

    def test_04_synth_groups(self, workdir):
        assert main(["synth", "--config", workdir["config"], "--role", "group"]) == 0
        for gid in (1, 2):
            manifest = workdir["out"] / "data" / f"group{gid}" / "manifest.jsonl"
            records = read_manifest(manifest)
            assert records
            assert all(r.group_id == gid for r in records)

    def test_05_pretrain_both_roles(self, workdir):
        assert main(["pretrain", "--config", workdir["config"], "--role", "student"]) == 0
        assert main(["pretrain", "--config", workdir["config"], "--role", "teacher"]) == 0
        assert (workdir["out"] / "models" / "student" / "best.pt").is_file()
        assert (workdir["out"] / "models" / "teacher" / "best.pt").is_file()

    def test_06_pretrain_rerun_noop(self, workdir, capsys):
        assert main(["pretrain", "--config", workdir["config"], "--role", "student"]) == 0
        assert "up to date" in capsys.readouterr().out

    def test_07_distill(self, workdir):
        assert main(["distill", "--config", workdir["config"], "--group-id", "1"]) == 0
        manifest = workdir["out"] / "data" / "group1" / "manifest.jsonl"
        records = read_manifest(manifest)
        assert all("pseudo_target" in r.paths for r in records if r.split in ("adapt", "val"))

    def test_08_adapt_single_group(self, workdir):
        assert main([
            "adapt", "--config", workdir["config"],
            "--group-id", "1", "--mode", "kd",
        ]) == 0
        assert (workdir["out"] / "adapt" / "group1" / "specialist_kd.pt").is_file()

    def test_09_eval_and_report(self, workdir):
        student = workdir["out"] / "models" / "student" / "best.pt"
        specialist = workdir["out"] / "adapt" / "group1" / "specialist_kd.pt"
        manifest = workdir["out"] / "data" / "group1" / "manifest.jsonl"
        assert main([
            "eval", "--config", workdir["config"], "--ckpt", str(student),
            "--manifest", str(manifest), "--model-id", "student",
        ]) == 0
        assert main([
            "eval", "--config", workdir["config"], "--ckpt", str(specialist),
            "--manifest", str(manifest), "--model-id", "kd",
        ]) == 0
        assert main(["report", "--config", workdir["config"]]) == 0
        report_dir = workdir["out"] / "report"
        assert (report_dir / "breakdown_by_k.csv").is_file()
        assert (report_dir / "input_sdr_curve.csv").is_file()
        assert (report_dir / "breakdown_by_k.png").is_file()
        assert (report_dir / "input_sdr_curve.png").is_file()

    def test_10_report_rerun_noop(self, workdir, capsys):
        assert main(["report", "--config", workdir["config"]]) == 0
        assert "up to date" in capsys.readouterr().out


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[synth]\nbanana = 1\n")
        assert main(["synth", "--config", str(bad), "--role", "generic"]) == 2

    def test_missing_config_is_2(self, tmp_path):
        assert main(["synth", "--config", str(tmp_path / "nope.ini"), "--role", "generic"]) == 2

    def test_asset_error_is_3(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text(f"[run]\nout_dir = {tmp_path / 'o'}\n")
        # pretrain before synth: the generic manifest is missing
        assert main(["pretrain", "--config", str(cfg), "--role", "student"]) == 3

    def test_diverged_is_4(self, workdir, tmp_path, capsys):
        import os

        env_backup = dict(os.environ)
        os.environ["TGIF_TRAIN_LR0"] = "1e18"
        os.environ["TGIF_TRAIN_MAX_EPOCHS"] = "40"
        os.environ["TGIF_RUN_OUT_DIR"] = str(tmp_path / "diverge")
        try:
            # fresh out_dir: reuse synth, then attempt the absurd-lr pretrain
            assert main(["synth", "--config", workdir["config"], "--role", "generic"]) == 0
            code = main(["pretrain", "--config", workdir["config"], "--role", "student"])
        finally:
            os.environ.clear()
            os.environ.update(env_backup)
        assert code == 4
