"""The bundled end-to-end desk-scale preset.

One call produces everything from procedural assets to the final report:

1. generate a procedural corpus (generic pool + one fixed talker group),
2. synthesize the generic dataset and pretrain a tiny teacher (several times
   the student's parameter count) and a tiny student as generalists,
3. per trend seed: synthesize the group dataset, distill teacher pseudo
   targets, adapt kd and oracle specialists, evaluate all three models on
   the group test split,
4. aggregate the 3-seed means and render the report tables.

The generalists are pretrained once and shared across the trend seeds; each
seed re-draws the group data and the adaptation stream.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .adapt import AdaptConfig, adapt, distill_targets
from .assets import AssetGenConfig, AssetLibrary, generate_assets
from .evaluate import EvalRecord, evaluate, mean_si_sdri, write_records
from .models import StudentConfig, TeacherConfig, load_checkpoint, parameter_count
from .report import bin_by_input_sdr, breakdown_by_k, render_report
from .seeding import mix_seed
from .synth import SynthConfig, build_manifest
from .training import TrainConfig, pretrain


@dataclass
class QuickstartScale:
    """Desk-scale knobs; defaults finish in well under half an hour on a
    small CPU while still showing the familiarization trend."""

    sample_rate: int = 8000
    duration_s: float = 1.0
    enrollment_s: float = 1.0
    k_max: int = 3
    generic_speakers: int = 20
    group_size: int = 3
    utterances_per_speaker: int = 4
    utterance_s: float = 3.0
    generic_hours: float = 0.06     # train+val, split 10:1
    group_hours: float = 0.035      # adapt/val/test, split 2:1:2
    pretrain_epochs: int = 30
    adapt_epochs: int = 40
    adapt_lr: float = 3e-4
    student: StudentConfig = field(
        default_factory=lambda: StudentConfig(
            encoder_filters=32, encoder_kernel=16, hidden_size=24, embed_dim=32
        )
    )
    teacher: TeacherConfig = field(
        default_factory=lambda: TeacherConfig(
            encoder_kernels=(10, 40, 80), encoder_filters=48,
            hidden_size=64, embed_dim=64,
        )
    )


@dataclass
class SeedOutcome:
    seed: int
    generalist_k2: float
    kd_k2: float
    oracle_k2: float
    generalist_overall: float
    kd_overall: float
    oracle_overall: float


@dataclass
class QuickstartResult:
    out_dir: Path
    teacher_params: int
    student_params: int
    seeds: list[SeedOutcome]
    mean_generalist_k2: float
    mean_kd_k2: float
    mean_oracle_k2: float
    kd_beats_generalist: bool
    oracle_geq_kd: bool
    teacher_checkpoint: Path | None = None
    student_checkpoint: Path | None = None
    report_paths: dict = field(default_factory=dict)
    wall_s: float = 0.0

    def summary_dict(self) -> dict:
        return {
            "teacher_params": self.teacher_params,
            "student_params": self.student_params,
            "mean_si_sdri_k2plus": {
                "generalist": self.mean_generalist_k2,
                "kd_specialist": self.mean_kd_k2,
                "oracle_specialist": self.mean_oracle_k2,
            },
            "kd_beats_generalist": self.kd_beats_generalist,
            "oracle_geq_kd": self.oracle_geq_kd,
            "seeds": [dataclasses.asdict(s) for s in self.seeds],
            "wall_s": self.wall_s,
        }


def run_quickstart(
    out_dir: str | Path,
    seeds: tuple[int, ...] = (0, 1, 2),
    scale: QuickstartScale | None = None,
    base_seed: int = 1000,
    progress: bool = True,
) -> QuickstartResult:
    scale = scale or QuickstartScale()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    def say(msg: str) -> None:
        if progress:
            print(f"[quickstart +{time.monotonic() - started:7.1f}s] {msg}", flush=True)

    say("generating procedural assets")
    assets_dir = generate_assets(
        out_dir / "assets",
        AssetGenConfig(
            sample_rate=scale.sample_rate,
            utterance_s=scale.utterance_s,
            utterances_per_speaker=scale.utterances_per_speaker,
            generic_speakers=scale.generic_speakers,
            group_speakers=scale.group_size,
            generic_rooms=3,
            group_rooms=1,
            rirs_per_room=3,
            noise_clips_per_domain=4,
            noise_s=scale.utterance_s,
            n_groups=1,
            group_size=scale.group_size,
            seed=base_seed,
        ),
    )
    library = AssetLibrary(assets_dir, scale.sample_rate)

    say("synthesizing the generic dataset")
    generic_cfg = SynthConfig(
        sample_rate=scale.sample_rate,
        duration_s=scale.duration_s,
        k_range=(1, scale.k_max),
        enrollment_duration_s=scale.enrollment_s,
        hours=scale.generic_hours,
        splits={"train": 10.0, "val": 1.0},
        seed=mix_seed(base_seed, "generic"),
    )
    generic_manifest = build_manifest(generic_cfg, library, out_dir / "data" / "generic")

    train_cfg = TrainConfig(
        max_epochs=scale.pretrain_epochs,
        lr_patience=8,
        early_stop_patience=scale.pretrain_epochs,  # no premature stop at this scale
        crop_s=None,
        seed=base_seed,
    )

    say("pretraining the teacher generalist")
    teacher_run = pretrain(
        "teacher", scale.teacher, generic_manifest, generic_manifest,
        out_dir / "models" / "teacher", train_cfg=train_cfg,
    )
    say("pretraining the student generalist")
    student_run = pretrain(
        "student", scale.student, generic_manifest, generic_manifest,
        out_dir / "models" / "student", train_cfg=train_cfg,
    )
    teacher_ck = load_checkpoint(teacher_run.best_checkpoint)
    student_ck = load_checkpoint(student_run.best_checkpoint)
    t_params = parameter_count(teacher_ck.model)
    s_params = parameter_count(student_ck.model)
    say(f"teacher {t_params} params, student {s_params} params")

    group = library.group(1)
    outcomes: list[SeedOutcome] = []
    pooled: list[EvalRecord] = []
    for seed in seeds:
        say(f"seed {seed}: synthesizing the group dataset")
        group_cfg = SynthConfig.group_default(
            sample_rate=scale.sample_rate,
            duration_s=scale.duration_s,
            k_range=(1, scale.k_max),
            enrollment_duration_s=scale.enrollment_s,
            hours=scale.group_hours,
            seed=mix_seed(base_seed, "group", seed),
        )
        seed_dir = out_dir / f"seed{seed}"
        manifest = build_manifest(group_cfg, library, seed_dir / "group1", group=group)

        say(f"seed {seed}: distilling pseudo targets")
        distill_targets(teacher_run.best_checkpoint, manifest, splits=("adapt",))

        common = dict(
            lr=scale.adapt_lr, epochs=scale.adapt_epochs,
            seed=mix_seed(seed, "adapt"), log_group_val=False, group_id=1,
        )
        say(f"seed {seed}: kd adaptation")
        kd = adapt(student_ck, manifest, AdaptConfig(mode="kd", **common), seed_dir)
        say(f"seed {seed}: oracle adaptation")
        oracle = adapt(student_ck, manifest, AdaptConfig(mode="oracle", **common), seed_dir)

        say(f"seed {seed}: evaluating on the group test split")
        recs_gen = evaluate(student_ck, manifest, "test", model_id="student_generalist")
        recs_kd = evaluate(kd.checkpoint_path, manifest, "test", model_id="kd_specialist")
        recs_or = evaluate(oracle.checkpoint_path, manifest, "test", model_id="oracle_specialist")
        recs_teacher = evaluate(teacher_ck, manifest, "test", model_id="teacher")
        for recs, name in (
            (recs_gen, "student_generalist"), (recs_kd, "kd_specialist"),
            (recs_or, "oracle_specialist"), (recs_teacher, "teacher"),
        ):
            write_records(recs, seed_dir / "eval" / f"{name}.jsonl")
        pooled.extend(recs_gen + recs_kd + recs_or + recs_teacher)
        outcomes.append(
            SeedOutcome(
                seed=seed,
                generalist_k2=mean_si_sdri(recs_gen, min_k=2),
                kd_k2=mean_si_sdri(recs_kd, min_k=2),
                oracle_k2=mean_si_sdri(recs_or, min_k=2),
                generalist_overall=mean_si_sdri(recs_gen),
                kd_overall=mean_si_sdri(recs_kd),
                oracle_overall=mean_si_sdri(recs_or),
            )
        )
        say(
            f"seed {seed}: K>=2 SI-SDRi generalist {outcomes[-1].generalist_k2:+.2f} dB, "
            f"kd {outcomes[-1].kd_k2:+.2f} dB, oracle {outcomes[-1].oracle_k2:+.2f} dB"
        )

    mean = lambda xs: float(sum(xs) / len(xs))
    result = QuickstartResult(
        out_dir=out_dir,
        teacher_params=t_params,
        student_params=s_params,
        seeds=outcomes,
        mean_generalist_k2=mean([o.generalist_k2 for o in outcomes]),
        mean_kd_k2=mean([o.kd_k2 for o in outcomes]),
        mean_oracle_k2=mean([o.oracle_k2 for o in outcomes]),
        kd_beats_generalist=False,
        oracle_geq_kd=False,
        teacher_checkpoint=teacher_run.best_checkpoint,
        student_checkpoint=student_run.best_checkpoint,
    )
    result.kd_beats_generalist = result.mean_kd_k2 > result.mean_generalist_k2
    result.oracle_geq_kd = result.mean_oracle_k2 >= result.mean_kd_k2

    say("rendering the report")
    baselines = {
        "kd_specialist": "student_generalist",
        "oracle_specialist": "student_generalist",
        "student_generalist": "student_generalist",
    }
    result.report_paths = {
        k: str(v)
        for k, v in render_report(
            breakdown_by_k(pooled, baselines=baselines),
            bin_by_input_sdr(pooled),
            out_dir / "report",
        ).items()
    }
    result.wall_s = round(time.monotonic() - started, 1)
    (out_dir / "summary.json").write_text(json.dumps(result.summary_dict(), indent=2) + "\n")
    say(
        f"done: mean K>=2 SI-SDRi generalist {result.mean_generalist_k2:+.2f} dB, "
        f"kd {result.mean_kd_k2:+.2f} dB, oracle {result.mean_oracle_k2:+.2f} dB"
    )
    return result
