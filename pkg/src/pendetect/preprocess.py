"""Sequence length harmonization and train-fitted normalization.

The length policy fixes every sequence to a common cutoff, the rounded
mean of the training lengths: shorter sequences get zero rows appended,
longer ones lose their tail. Normalization clips each column to fitted
percentile bounds and then z-scores it; statistics always come from the
training split alone and travel to the other splits as an explicit
NormalizationStats value, so there is no way to leak test data into the
fit. Padding is applied after fitting, which means the all-zero rows are
normalized like any other value at apply time.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ColumnMismatch, EmptyDataset, IoError, ParseError
from .features import FeatureMatrix

STD_FLOOR = 1e-8
STATS_FILE_VERSION = "pendetect-normalization v1"


@dataclass(frozen=True)
class LengthPolicy:
    cutoff: int
    padding: str = "post_zero"
    truncation: str = "tail_cut"

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.padding != "post_zero":
            raise ValueError(f"unsupported padding mode {self.padding!r}")
        if self.truncation != "tail_cut":
            raise ValueError(f"unsupported truncation mode {self.truncation!r}")


@dataclass
class NormalizationStats:
    column_names: list[str]
    mean: np.ndarray
    std: np.ndarray
    low_clip: np.ndarray
    high_clip: np.ndarray
    fitted_on: int

    def __post_init__(self):
        m = len(self.column_names)
        for field_name in ("mean", "std", "low_clip", "high_clip"):
            arr = np.asarray(getattr(self, field_name), dtype=np.float64)
            setattr(self, field_name, arr)
            if arr.shape != (m,):
                raise ColumnMismatch(
                    f"{field_name} has shape {arr.shape}, expected ({m},)"
                )
        if (self.std <= 0).any():
            raise ValueError("std entries must be positive after flooring")
        if (self.low_clip > self.high_clip).any():
            raise ValueError("low_clip must not exceed high_clip")


def compute_cutoff(train: list[FeatureMatrix]) -> LengthPolicy:
    """Cutoff = round-half-up mean of the training sequence lengths."""
    if not train:
        raise EmptyDataset("cannot compute a cutoff from zero sequences")
    mean = sum(fm.length for fm in train) / len(train)
    return LengthPolicy(cutoff=int(np.floor(mean + 0.5)))


def fit_length(fm: FeatureMatrix, policy: LengthPolicy) -> FeatureMatrix:
    """Pad with zero rows or cut the tail so the output has cutoff rows."""
    t = fm.length
    if t == policy.cutoff:
        values = fm.values.copy()
    elif t > policy.cutoff:
        values = fm.values[: policy.cutoff].copy()
    else:
        values = np.zeros((policy.cutoff, fm.m), dtype=np.float64)
        values[:t] = fm.values
    return FeatureMatrix(
        values=values,
        column_names=list(fm.column_names),
        column_groups=list(fm.column_groups),
        label=fm.label,
        subject_id=fm.subject_id,
        task_id=fm.task_id,
    )


def fit_normalization(
    train: list[FeatureMatrix],
    clip_low_pct: float = 5.0,
    clip_high_pct: float = 90.0,
) -> NormalizationStats:
    """Fit per-column clip bounds and post-clip z-score statistics.

    Percentiles follow the linear-interpolation definition. The boundary
    request (0, 100) turns clipping off entirely (bounds at ±inf) rather
    than clamping unseen data to the training min/max.
    """
    if not train:
        raise EmptyDataset("cannot fit normalization on zero sequences")
    if not (0 <= clip_low_pct < clip_high_pct <= 100):
        raise ValueError(
            f"need 0 <= low < high <= 100, got ({clip_low_pct}, {clip_high_pct})"
        )
    names = list(train[0].column_names)
    for fm in train[1:]:
        if list(fm.column_names) != names:
            raise ColumnMismatch(
                f"matrix for {fm.subject_id}/{fm.task_id} has different columns"
            )
    stacked = np.concatenate([fm.values for fm in train], axis=0)

    m = len(names)
    if clip_low_pct == 0:
        low = np.full(m, -np.inf)
    else:
        low = np.percentile(stacked, clip_low_pct, axis=0)
    if clip_high_pct == 100:
        high = np.full(m, np.inf)
    else:
        high = np.percentile(stacked, clip_high_pct, axis=0)

    clipped = np.clip(stacked, low, high)
    mean = clipped.mean(axis=0)
    std = clipped.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return NormalizationStats(
        column_names=names,
        mean=mean,
        std=std,
        low_clip=low,
        high_clip=high,
        fitted_on=len(train),
    )


def apply_normalization(fm: FeatureMatrix, stats: NormalizationStats) -> FeatureMatrix:
    if list(fm.column_names) != list(stats.column_names):
        raise ColumnMismatch(
            f"matrix columns {fm.column_names} do not match fitted columns "
            f"{stats.column_names}"
        )
    values = (np.clip(fm.values, stats.low_clip, stats.high_clip) - stats.mean) / stats.std
    return FeatureMatrix(
        values=values,
        column_names=list(fm.column_names),
        column_groups=list(fm.column_groups),
        label=fm.label,
        subject_id=fm.subject_id,
        task_id=fm.task_id,
    )


# ---------------------------------------------------------------------------
# stats file round-trip

def save_stats(stats: NormalizationStats, path: str | Path) -> None:
    """Write stats as a small versioned text file, one column per line."""
    lines = [STATS_FILE_VERSION, f"fitted_on {stats.fitted_on}"]
    for j, name in enumerate(stats.column_names):
        lines.append(
            "\t".join(
                [
                    name,
                    repr(float(stats.mean[j])),
                    repr(float(stats.std[j])),
                    repr(float(stats.low_clip[j])),
                    repr(float(stats.high_clip[j])),
                ]
            )
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc), path=str(path)) from exc


def load_stats(path: str | Path) -> NormalizationStats:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(str(exc), path=str(path)) from exc
    if not lines or lines[0] != STATS_FILE_VERSION:
        raise ParseError(
            f"expected version line {STATS_FILE_VERSION!r}", path=str(path)
        )
    if len(lines) < 2 or not lines[1].startswith("fitted_on "):
        raise ParseError("missing fitted_on line", path=str(path))
    fitted_on = int(lines[1].split()[1])
    names, mean, std, low, high = [], [], [], [], []
    for line in lines[2:]:
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ParseError(f"bad stats line {line!r}", path=str(path))
        names.append(parts[0])
        mean.append(float(parts[1]))
        std.append(float(parts[2]))
        low.append(float(parts[3]))
        high.append(float(parts[4]))
    return NormalizationStats(
        column_names=names,
        mean=np.array(mean),
        std=np.array(std),
        low_clip=np.array(low),
        high_clip=np.array(high),
        fitted_on=fitted_on,
    )
