"""Aggregation into report tables and their CSV/plot renderings.

``breakdown_by_k`` reproduces the familiar per-speaker-count layout: one row
per model, and for each bucket (overall plus K = 1..5) a mean SI-SDR, a
parenthetical delta against a designated baseline model, and a mean SI-SDRi.
``bin_by_input_sdr`` produces the SI-SDRi-vs-input-SDR curve table with
floor-based half-open 1 dB bins. CSV output is byte-stable; plots are
regenerated from the CSV files only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadInputError
from .evaluate import EvalRecord

BUCKETS = ("overall", "k1", "k2", "k3", "k4", "k5")


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


@dataclass
class BucketCell:
    si_sdr: float | None = None
    delta: float | None = None
    si_sdri: float | None = None
    count: int = 0


@dataclass
class BreakdownTable:
    models: list[str]
    cells: dict[tuple[str, str], BucketCell]  # (model, bucket) -> cell

    @classmethod
    def from_bucket_means(
        cls,
        means: dict[str, dict[str, tuple[float, float]]],
        baselines: dict[str, str] | None = None,
        counts: dict[str, dict[str, int]] | None = None,
    ) -> "BreakdownTable":
        """Build the table from per-bucket (mean SI-SDR, mean SI-SDRi) pairs.

        ``baselines`` maps a model to the row its delta column is measured
        against; models without a baseline get empty delta cells.
        """
        baselines = baselines or {}
        models = list(means)
        cells: dict[tuple[str, str], BucketCell] = {}
        for model in models:
            for bucket in BUCKETS:
                cell = BucketCell()
                if bucket in means[model]:
                    cell.si_sdr, cell.si_sdri = (
                        float(v) for v in means[model][bucket]
                    )
                    cell.count = (counts or {}).get(model, {}).get(bucket, 0)
                    base = baselines.get(model)
                    if base is not None and bucket in means.get(base, {}):
                        cell.delta = cell.si_sdr - float(means[base][bucket][0])
                cells[(model, bucket)] = cell
        return cls(models=models, cells=cells)

    def to_csv_text(self) -> str:
        header = ["model"]
        for bucket in BUCKETS:
            header += [f"si_sdr_{bucket}", f"delta_{bucket}", f"si_sdri_{bucket}"]
        lines = [",".join(header)]
        for model in self.models:
            row = [model]
            for bucket in BUCKETS:
                cell = self.cells[(model, bucket)]
                row += [_fmt(cell.si_sdr), _fmt(cell.delta), _fmt(cell.si_sdri)]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def render_text(self) -> str:
        """Two-decimal console rendering (for demos and logs)."""
        widths = 22
        out = ["model".ljust(widths) + " | " + " | ".join(b.center(22) for b in BUCKETS)]
        for model in self.models:
            parts = []
            for bucket in BUCKETS:
                c = self.cells[(model, bucket)]
                if c.si_sdr is None:
                    parts.append("n/a".center(22))
                else:
                    delta = f"({c.delta:+.2f})" if c.delta is not None else "       "
                    parts.append(f"{c.si_sdr:6.2f} {delta} {c.si_sdri:6.2f}")
            out.append(model.ljust(widths) + " | " + " | ".join(parts))
        return "\n".join(out)


def _bucket_of(record: EvalRecord) -> str:
    return f"k{record.K}"


def breakdown_by_k(
    records: list[EvalRecord],
    baselines: dict[str, str] | None = None,
) -> BreakdownTable:
    """Aggregate evaluation records into the overall + K=1..5 table."""
    good = [r for r in records if r.error is None]
    if not good:
        raise BadInputError("no usable evaluation records")
    models = list(dict.fromkeys(r.model_id for r in good))
    means: dict[str, dict[str, tuple[float, float]]] = {}
    counts: dict[str, dict[str, int]] = {}
    for model in models:
        rows = [r for r in good if r.model_id == model]
        per_bucket: dict[str, list[EvalRecord]] = {"overall": rows}
        for r in rows:
            per_bucket.setdefault(_bucket_of(r), []).append(r)
        means[model] = {}
        counts[model] = {}
        for bucket, rs in per_bucket.items():
            if bucket not in BUCKETS:
                continue
            means[model][bucket] = (
                float(np.mean([r.output_si_sdr_db for r in rs])),
                float(np.mean([r.si_sdri_db for r in rs])),
            )
            counts[model][bucket] = len(rs)
    return BreakdownTable.from_bucket_means(means, baselines, counts)


@dataclass
class CurveTable:
    """Per-bin record counts and per-model mean SI-SDRi across input SDR."""

    bin_width_db: float
    models: list[str]
    bin_centers: list[float]
    counts: list[int]
    mean_si_sdri: dict[str, list[float | None]] = field(default_factory=dict)

    def to_csv_text(self) -> str:
        header = ["bin_center_db", "count"] + [f"si_sdri_{m}" for m in self.models]
        lines = [",".join(header)]
        for i, center in enumerate(self.bin_centers):
            row = [_fmt(center), str(self.counts[i])]
            row += [_fmt(self.mean_si_sdri[m][i]) for m in self.models]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def bin_by_input_sdr(records: list[EvalRecord], bin_width_db: float = 1.0) -> CurveTable:
    """Half-open [n*w, (n+1)*w) binning by floor of the input SDR."""
    if bin_width_db <= 0:
        raise BadInputError("bin width must be positive")
    good = [r for r in records if r.error is None]
    models = list(dict.fromkeys(r.model_id for r in good))
    by_bin: dict[int, list[EvalRecord]] = {}
    for r in good:
        by_bin.setdefault(int(math.floor(r.input_sdr_db / bin_width_db)), []).append(r)
    bins = sorted(by_bin)
    table = CurveTable(
        bin_width_db=bin_width_db,
        models=models,
        bin_centers=[(b + 0.5) * bin_width_db for b in bins],
        counts=[len(by_bin[b]) for b in bins],
    )
    for model in models:
        col: list[float | None] = []
        for b in bins:
            vals = [r.si_sdri_db for r in by_bin[b] if r.model_id == model]
            col.append(float(np.mean(vals)) if vals else None)
        table.mean_si_sdri[model] = col
    return table


# -- rendering ---------------------------------------------------------------


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open() as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def plot_breakdown_csv(csv_path: str | Path, png_path: str | Path) -> Path:
    """Bar chart of mean SI-SDRi per K bucket, drawn from the CSV alone."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, rows = _read_csv(Path(csv_path))
    buckets = [b for b in BUCKETS if b != "overall"]
    cols = {name: i for i, name in enumerate(header)}
    fig, ax = plt.subplots(figsize=(8, 4))
    x = np.arange(len(buckets))
    width = 0.8 / max(len(rows), 1)
    for i, row in enumerate(rows):
        vals = [
            float(row[cols[f"si_sdri_{b}"]]) if row[cols[f"si_sdri_{b}"]] else np.nan
            for b in buckets
        ]
        ax.bar(x + i * width, vals, width, label=row[0])
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([b.upper() for b in buckets])
    ax.set_ylabel("mean SI-SDRi (dB)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return Path(png_path)


def plot_curve_csv(csv_path: str | Path, png_path: str | Path) -> Path:
    """SI-SDRi trend across input SDR with the sample-density histogram."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, rows = _read_csv(Path(csv_path))
    centers = [float(r[0]) for r in rows]
    counts = [int(r[1]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax2 = ax.twinx()
    ax2.bar(centers, counts, width=0.9, color="#c6dbef", zorder=0)
    ax2.set_ylabel("samples per bin")
    for i, name in enumerate(header[2:], start=2):
        ys = [float(r[i]) if r[i] else np.nan for r in rows]
        ax.plot(centers, ys, marker="o", markersize=3, label=name.removeprefix("si_sdri_"), zorder=3)
    ax.set_xlabel("input SDR (dB)")
    ax.set_ylabel("mean SI-SDRi (dB)")
    ax.legend(fontsize=8)
    ax.set_zorder(ax2.get_zorder() + 1)
    ax.patch.set_visible(False)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return Path(png_path)


def render_report(
    breakdown: BreakdownTable | None,
    curve: CurveTable | None,
    out_dir: str | Path,
) -> dict[str, Path]:
    """Write byte-stable CSVs, then regenerate the plot images from them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if breakdown is not None:
        csv_path = out_dir / "breakdown_by_k.csv"
        csv_path.write_text(breakdown.to_csv_text())
        written["breakdown_csv"] = csv_path
        written["breakdown_png"] = plot_breakdown_csv(csv_path, out_dir / "breakdown_by_k.png")
    if curve is not None:
        csv_path = out_dir / "input_sdr_curve.csv"
        csv_path.write_text(curve.to_csv_text())
        written["curve_csv"] = csv_path
        written["curve_png"] = plot_curve_csv(csv_path, out_dir / "input_sdr_curve.png")
    return written
