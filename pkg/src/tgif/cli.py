"""Command-line entry point tying the pipeline together.

Verbs: ``synth``, ``pretrain``, ``distill``, ``adapt``, ``eval``, ``report``,
``quickstart``. Every verb loads one declarative config file (plus
``TGIF_<SECTION>_<KEY>`` environment overrides), writes a resolved-config
snapshot next to its outputs, and is resumable: re-running a completed stage
with unchanged inputs is a no-op thanks to content-hash stamps.

Exit codes: 0 success, 2 configuration error, 3 asset/IO error,
4 numerical failure (divergence), 1 any other pipeline error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .adapt import adapt, distill_targets, run_group_suite
from .assets import AssetLibrary, generate_assets
from .config import RunConfig
from .errors import (
    AssetNotFoundError,
    ConfigError,
    DivergedError,
    RateMismatchError,
    TgifError,
)
from .evaluate import evaluate, mean_si_sdri, read_records, write_records
from .manifest import read_manifest
from .quickstart import run_quickstart
from .report import bin_by_input_sdr, breakdown_by_k, render_report
from .stamps import StageStamp, inputs_digest
from .synth import build_manifest
from .training import pretrain


def _generic_manifest(cfg: RunConfig) -> Path:
    return cfg.out_dir / "data" / "generic" / "manifest.jsonl"


def _group_manifest(cfg: RunConfig, group_id: int) -> Path:
    return cfg.out_dir / "data" / f"group{group_id}" / "manifest.jsonl"


def _default_ckpt(cfg: RunConfig, role: str) -> Path:
    return cfg.out_dir / "models" / role / "best.pt"


def _ensure_assets(cfg: RunConfig) -> AssetLibrary:
    assets_dir = cfg.assets_dir
    if not (assets_dir / "groups.json").is_file():
        if not cfg.generate_assets:
            raise AssetNotFoundError(
                f"{assets_dir} has no assets and [assets] generate = false"
            )
        generate_assets(assets_dir, cfg.asset_gen_config())
    sample_rate = cfg.get("synth", "sample_rate", 16000)
    return AssetLibrary(assets_dir, sample_rate)


def _manifest_digest_without_pseudo(path: Path) -> str:
    """Manifest digest that ignores distilled pseudo-target paths, so adding
    them does not invalidate upstream stamps."""
    rows = []
    for rec in read_manifest(path):
        d = rec.to_dict()
        d["paths"].pop("pseudo_target", None)
        rows.append(d)
    return hashlib.sha256(json.dumps(rows, sort_keys=True).encode()).hexdigest()


def _snapshot(cfg: RunConfig, command: str) -> None:
    cfg.write_snapshot(cfg.out_dir / f"resolved_config.{command}.ini")


# -- commands ----------------------------------------------------------------


def cmd_synth(cfg: RunConfig, args) -> int:
    _snapshot(cfg, "synth")
    library = _ensure_assets(cfg)
    if args.role == "generic":
        targets = [(None, _generic_manifest(cfg))]
    else:
        if args.group_id == "all":
            targets = [(g.group_id, _group_manifest(cfg, g.group_id)) for g in library.groups()]
        else:
            gid = int(args.group_id)
            targets = [(gid, _group_manifest(cfg, gid))]
    for gid, manifest in targets:
        synth_cfg = cfg.synth_config(args.role, group_id=gid)
        stage = f"synth.{'generic' if gid is None else f'group{gid}'}"
        stamp = StageStamp(cfg.out_dir, stage)
        digest = inputs_digest(
            {"synth": synth_cfg.__dict__, "role": args.role, "group": gid},
            trees=[cfg.assets_dir],
        )
        if stamp.is_current(digest, [manifest]):
            print(f"{stage}: up to date ({manifest})")
            continue
        group = library.group(gid) if gid is not None else None
        path = build_manifest(synth_cfg, library, manifest.parent, group=group)
        stamp.record(digest, [path])
        print(f"{stage}: wrote {len(read_manifest(path))} records to {path}")
    return 0


def cmd_pretrain(cfg: RunConfig, args) -> int:
    _snapshot(cfg, f"pretrain.{args.role}")
    manifest = _generic_manifest(cfg)
    if not manifest.is_file():
        raise AssetNotFoundError(f"{manifest} missing; run `tgif synth --role generic` first")
    out_dir = cfg.out_dir / "models" / args.role
    train_cfg = cfg.train_config(args.role)
    model_cfg = (
        cfg.teacher_config() if args.role == "teacher" else cfg.student_config()
    )
    stamp = StageStamp(cfg.out_dir, f"pretrain.{args.role}")
    digest = inputs_digest(
        {
            "train": train_cfg.__dict__,
            "model": str(model_cfg),
            "gamma": cfg.loss_config(args.role).gamma,
        },
        files=[manifest],
    )
    best = out_dir / "best.pt"
    if stamp.is_current(digest, [best]):
        print(f"pretrain.{args.role}: up to date ({best})")
        return 0
    result = pretrain(
        args.role, model_cfg, manifest, manifest, out_dir,
        train_cfg=train_cfg, loss_cfg=cfg.loss_config(args.role),
    )
    stamp.record(digest, [result.best_checkpoint])
    print(
        f"pretrain.{args.role}: best val loss {result.best_val_loss:.3f} "
        f"at epoch {result.best_epoch}/{result.epochs_run} -> {result.best_checkpoint}"
    )
    return 0


def cmd_distill(cfg: RunConfig, args) -> int:
    _snapshot(cfg, "distill")
    teacher = Path(args.teacher) if args.teacher else _default_ckpt(cfg, "teacher")
    manifest = _group_manifest(cfg, args.group_id)
    if not manifest.is_file():
        raise AssetNotFoundError(f"{manifest} missing; run `tgif synth --role group` first")
    stamp = StageStamp(cfg.out_dir, f"distill.group{args.group_id}")
    digest = inputs_digest(
        {"manifest": _manifest_digest_without_pseudo(manifest), "group": args.group_id},
        files=[teacher],
    )
    if stamp.is_current(digest, [manifest]):
        print(f"distill.group{args.group_id}: up to date")
        return 0
    n = distill_targets(teacher, manifest)
    stamp.record(digest, [manifest])
    print(f"distill.group{args.group_id}: wrote {n} pseudo targets")
    return 0


def cmd_adapt(cfg: RunConfig, args) -> int:
    _snapshot(cfg, "adapt")
    student = Path(args.student) if args.student else _default_ckpt(cfg, "student")
    if args.group_id == "all":
        library = _ensure_assets(cfg)
        manifests = {
            g.group_id: _group_manifest(cfg, g.group_id) for g in library.groups()
        }
        missing = [str(m) for m in manifests.values() if not m.is_file()]
        if missing:
            raise AssetNotFoundError(f"group manifests missing: {missing}")
        teacher = Path(args.teacher) if args.teacher else _default_ckpt(cfg, "teacher")
        rows = run_group_suite(
            teacher, student, manifests,
            cfg.adapt_config(args.mode),
            out_dir=cfg.out_dir / "adapt",
            include_oracle=args.mode == "kd",
            jobs=args.jobs,
        )
        for row in rows:
            if row.status == "ok":
                print(
                    f"group {row.group_id}: generalist {row.si_sdri_generalist:+.2f} dB, "
                    f"kd {row.si_sdri_kd:+.2f} dB, oracle {row.si_sdri_oracle:+.2f} dB"
                )
            else:
                print(f"group {row.group_id}: FAILED ({row.error})")
        (cfg.out_dir / "adapt" / "suite_summary.json").write_text(
            json.dumps([row.__dict__ for row in rows], indent=2, default=str) + "\n"
        )
        return 0

    gid = int(args.group_id)
    manifest = _group_manifest(cfg, gid)
    if not manifest.is_file():
        raise AssetNotFoundError(f"{manifest} missing; run `tgif synth --role group` first")
    adapt_cfg = cfg.adapt_config(args.mode, group_id=gid)
    out_dir = cfg.out_dir / "adapt" / f"group{gid}"
    stamp = StageStamp(cfg.out_dir, f"adapt.group{gid}.{args.mode}")
    digest = inputs_digest(
        {"adapt": adapt_cfg.__dict__},
        files=[student, manifest],
    )
    ckpt = out_dir / f"specialist_{args.mode}.pt"
    if stamp.is_current(digest, [ckpt]):
        print(f"adapt.group{gid}.{args.mode}: up to date ({ckpt})")
        return 0
    result = adapt(student, manifest, adapt_cfg, out_dir)
    stamp.record(digest, [result.checkpoint_path])
    print(
        f"adapt.group{gid}.{args.mode}: {result.epochs_run} epochs, "
        f"final loss {result.epoch_losses[-1]:.3f} -> {result.checkpoint_path}"
    )
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    _snapshot(cfg, "eval")
    ckpt = Path(args.ckpt)
    manifest = Path(args.manifest)
    model_id = args.model_id or ckpt.stem
    split = args.split or cfg.get("eval", "split", "test")
    out_path = cfg.out_dir / "eval" / f"{model_id}.jsonl"
    stamp = StageStamp(cfg.out_dir, f"eval.{model_id}")
    digest = inputs_digest({"split": split}, files=[ckpt, manifest])
    if stamp.is_current(digest, [out_path]):
        print(f"eval.{model_id}: up to date ({out_path})")
        return 0
    records = evaluate(ckpt, manifest, split, model_id=model_id)
    write_records(records, out_path)
    stamp.record(digest, [out_path])
    good = [r for r in records if r.error is None]
    print(
        f"eval.{model_id}: {len(good)}/{len(records)} scenes, "
        f"mean SI-SDRi {mean_si_sdri(records):+.2f} dB -> {out_path}"
    )
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    _snapshot(cfg, "report")
    if args.records:
        record_files = [Path(p) for p in args.records]
    else:
        record_files = sorted((cfg.out_dir / "eval").glob("*.jsonl"))
    if not record_files:
        raise AssetNotFoundError("no evaluation record files to report on")
    records = []
    for path in record_files:
        records.extend(read_records(path))
    baseline = cfg.get("report", "baseline")
    models = list(dict.fromkeys(r.model_id for r in records))
    baselines = {m: baseline for m in models} if baseline in models else None
    out_dir = cfg.out_dir / "report"
    stamp = StageStamp(cfg.out_dir, "report")
    digest = inputs_digest(
        {"baseline": baseline, "bin": cfg.get("report", "bin_width_db", 1.0)},
        files=record_files,
    )
    outputs = [out_dir / "breakdown_by_k.csv", out_dir / "input_sdr_curve.csv"]
    if stamp.is_current(digest, outputs):
        print(f"report: up to date ({out_dir})")
        return 0
    table = breakdown_by_k(records, baselines=baselines)
    curve = bin_by_input_sdr(records, cfg.get("report", "bin_width_db", 1.0))
    written = render_report(table, curve, out_dir)
    stamp.record(digest, outputs)
    print(table.render_text())
    for name, path in written.items():
        print(f"report: {name} -> {path}")
    return 0


def cmd_quickstart(cfg: RunConfig, args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else cfg.out_dir / "quickstart"
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else (0, 1, 2)
    stamp = StageStamp(out_dir, "quickstart")
    digest = inputs_digest({"seeds": list(seeds), "version": __version__})
    summary = out_dir / "summary.json"
    if stamp.is_current(digest, [summary]):
        print(f"quickstart: up to date ({summary})")
        return 0
    result = run_quickstart(out_dir, seeds=seeds)
    stamp.record(digest, [summary])
    print(json.dumps(result.summary_dict()["mean_si_sdri_k2plus"], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tgif",
        description="Talker group-informed familiarization of target-speaker extraction",
    )
    parser.add_argument("--version", action="version", version=f"tgif {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_config=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument(
            "--config", default=None,
            required=needs_config, help="declarative INI config file",
        )
        return p

    p = add("synth", "synthesize a dataset and its manifest")
    p.add_argument("--role", choices=("generic", "group"), required=True)
    p.add_argument("--group-id", default="all", help="group id or 'all' (role=group)")

    p = add("pretrain", "pretrain a generalist on the generic dataset")
    p.add_argument("--role", choices=("teacher", "student"), required=True)

    p = add("distill", "cache teacher pseudo targets for one group")
    p.add_argument("--teacher", default=None, help="teacher checkpoint (.pt)")
    p.add_argument("--group-id", type=int, required=True)

    p = add("adapt", "fine-tune the student on a talker group")
    p.add_argument("--student", default=None, help="student checkpoint (.pt)")
    p.add_argument("--teacher", default=None, help="teacher checkpoint (for --group-id all)")
    p.add_argument("--group-id", default="all", help="group id or 'all'")
    p.add_argument("--mode", choices=("kd", "oracle"), default="kd")
    p.add_argument("--jobs", type=int, default=1, help="parallel groups (with 'all')")

    p = add("eval", "evaluate a checkpoint on a manifest")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--model-id", default=None)

    p = add("report", "aggregate evaluation records into tables and plots")
    p.add_argument("--records", nargs="*", default=None, help="record files (default: <out_dir>/eval/*.jsonl)")

    p = add("quickstart", "full desk-scale pipeline end to end", needs_config=False)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seeds", default=None, help="comma-separated trend seeds (default 0,1,2)")

    return parser


COMMANDS = {
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "distill": cmd_distill,
    "adapt": cmd_adapt,
    "eval": cmd_eval,
    "report": cmd_report,
    "quickstart": cmd_quickstart,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AssetNotFoundError, RateMismatchError) as exc:
        print(f"asset error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except DivergedError as exc:
        print(
            f"numerical failure: {exc}"
            + (f" (last good checkpoint: {exc.last_good})" if exc.last_good else ""),
            file=sys.stderr,
        )
        return 4
    except TgifError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
