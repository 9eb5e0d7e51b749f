"""Evaluation protocols, metrics, and experiment reports.

Two protocols are supported: stratified k-fold cross-validation and a
repeated stratified train/val/test holdout. Both split subject-wise so
that all samples of one subject land on the same side of every split
boundary. An experiment run produces an :class:`ExperimentReport` that
embeds the resolved configuration, per-fold raw numbers, and aggregate
metrics; reports serialize to canonical JSON and a fixed-width table.

Folds are independent of each other (any could run concurrently); they
are executed sequentially here so that a report is reproducible down to
the byte, with all timing recorded in ``wall_clock_*`` fields that are
excluded from determinism comparisons.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from itertools import groupby
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError, SingleClass, TooSmall, TrainingError
from .features import FeatureGroupSelection, FeatureMatrix, assemble_features
from .preprocess import (
    NormalizationStats,
    apply_normalization,
    compute_cutoff,
    fit_length,
    fit_normalization,
)
from .nn import (
    LABEL_TO_Y,
    ModelSpec,
    SequenceClassifier,
    TrainConfig,
    train_model,
)

HOLDOUT_ROUNDING = "per-class: round-half-up train, floor val, remainder test"
CARVEOUT_FRACTION = 0.10
ROC_FILE_VERSION = "pendetect-roc v1"


# ---------------------------------------------------------------------------
# split plans


@dataclass(frozen=True)
class SplitPlan:
    """Either k-fold CV or a repeated train/val/test holdout.

    Splits are always stratified by label and grouped by subject.
    """

    kind: str
    seed: int
    k: int | None = None
    train_frac: float | None = None
    val_frac: float | None = None
    test_frac: float | None = None
    n_runs: int | None = None
    stratified: bool = True

    def __post_init__(self):
        if not self.stratified:
            raise ValueError("splits are always stratified")
        if self.kind == "kfold":
            if self.k is None or self.k < 2:
                raise ValueError("kfold needs k >= 2")
        elif self.kind == "holdout":
            fracs = (self.train_frac, self.val_frac, self.test_frac)
            if any(f is None or f < 0 for f in fracs):
                raise ValueError("holdout needs three non-negative fractions")
            if abs(sum(fracs) - 1.0) > 1e-9:
                raise ValueError(f"holdout fractions {fracs} must sum to 1")
            if self.n_runs is None or self.n_runs < 1:
                raise ValueError("holdout needs n_runs >= 1")
        else:
            raise ValueError(f"unknown split kind {self.kind!r}")

    @classmethod
    def kfold(cls, k: int, seed: int) -> "SplitPlan":
        return cls(kind="kfold", seed=seed, k=k)

    @classmethod
    def holdout(
        cls,
        train_frac: float,
        val_frac: float,
        test_frac: float,
        n_runs: int,
        seed: int,
    ) -> "SplitPlan":
        return cls(
            kind="holdout",
            seed=seed,
            train_frac=train_frac,
            val_frac=val_frac,
            test_frac=test_frac,
            n_runs=n_runs,
        )

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "seed": self.seed, "stratified": self.stratified}
        if self.kind == "kfold":
            doc["k"] = self.k
        else:
            doc.update(
                train_frac=self.train_frac,
                val_frac=self.val_frac,
                test_frac=self.test_frac,
                n_runs=self.n_runs,
            )
        return doc


@dataclass(frozen=True)
class SplitIndices:
    """Index sets into the dataset list; val may be empty."""

    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _subjects_by_class(dataset) -> tuple[dict[str, list[int]], dict[str, list[str]]]:
    """Group sample indices by subject, then subjects by label.

    Insertion order is preserved in both maps so the only randomness in a
    split comes from the seeded permutation.
    """
    indices: dict[str, list[int]] = {}
    label_of: dict[str, str] = {}
    for i, item in enumerate(dataset):
        indices.setdefault(item.subject_id, []).append(i)
        label_of.setdefault(item.subject_id, item.label)
    by_class: dict[str, list[str]] = {}
    for subject, label in label_of.items():
        by_class.setdefault(label, []).append(subject)
    if len(by_class) < 2:
        raise SingleClass(f"need two classes, found {sorted(by_class)}")
    return indices, by_class


def _expand(subjects: list[str], indices: dict[str, list[int]]) -> tuple[int, ...]:
    out: list[int] = []
    for s in subjects:
        out.extend(indices[s])
    return tuple(sorted(out))


def make_splits(dataset, plan: SplitPlan) -> list[SplitIndices]:
    """Build stratified, subject-grouped splits of `dataset`.

    For k-fold, per-class remainders are assigned one at a time to the
    fold with the smallest running total (ties to the lowest index), so
    fold sizes never differ by more than one more than necessary. For
    holdout, each class contributes round-half-up(train_frac*n) subjects
    to train, floor(val_frac*n) to val, and the remainder to test; run r
    draws its permutation from seed [plan.seed, r].
    """
    indices, by_class = _subjects_by_class(dataset)
    labels = sorted(by_class)

    if plan.kind == "kfold":
        k = plan.k
        if len(dataset) < k:
            raise TooSmall(f"{len(dataset)} samples cannot fill {k} folds")
        totals = [0] * k
        class_sizes: dict[str, list[int]] = {}
        for label in labels:
            n_c = len(by_class[label])
            sizes = [n_c // k] * k
            for _ in range(n_c % k):
                j = min(range(k), key=lambda f: (totals[f] + sizes[f], f))
                sizes[j] += 1
            class_sizes[label] = sizes
            for f in range(k):
                totals[f] += sizes[f]

        rng = np.random.default_rng([plan.seed, 0])
        fold_subjects: list[list[str]] = [[] for _ in range(k)]
        for label in labels:
            pool = by_class[label]
            order = [pool[j] for j in rng.permutation(len(pool))]
            pos = 0
            for f in range(k):
                take = class_sizes[label][f]
                fold_subjects[f].extend(order[pos : pos + take])
                pos += take

        splits = []
        for f in range(k):
            test = set(fold_subjects[f])
            train = [s for fold in fold_subjects for s in fold if s not in test]
            splits.append(
                SplitIndices(
                    train=_expand(train, indices),
                    val=(),
                    test=_expand(fold_subjects[f], indices),
                )
            )
        return splits

    splits = []
    for run in range(plan.n_runs):
        rng = np.random.default_rng([plan.seed, run])
        train: list[str] = []
        val: list[str] = []
        test: list[str] = []
        for label in labels:
            pool = by_class[label]
            order = [pool[j] for j in rng.permutation(len(pool))]
            n_c = len(pool)
            n_train = _round_half_up(plan.train_frac * n_c)
            n_val = int(math.floor(plan.val_frac * n_c))
            n_test = n_c - n_train - n_val
            if n_train < 1 or n_test < 1:
                raise TooSmall(
                    f"class {label}: {n_c} subjects leave train={n_train}, "
                    f"test={n_test}"
                )
            train.extend(order[:n_train])
            val.extend(order[n_train : n_train + n_val])
            test.extend(order[n_train + n_val :])
        splits.append(
            SplitIndices(
                train=_expand(train, indices),
                val=_expand(val, indices),
                test=_expand(test, indices),
            )
        )
    return splits


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    auc: float
    sensitivity: float
    specificity: float
    roc_points: tuple[tuple[float, float], ...]
    confusion: tuple[int, int, int, int]  # tp, fp, tn, fn

    def __post_init__(self):
        tp, fp, tn, fn = self.confusion
        total = tp + fp + tn + fn
        if total <= 0:
            raise ValueError("empty confusion matrix")
        if self.accuracy != (tp + tn) / total:
            raise ValueError("accuracy does not match the confusion counts")
        if tp + fn > 0 and self.sensitivity != tp / (tp + fn):
            raise ValueError("sensitivity does not match the confusion counts")
        if tn + fp > 0 and self.specificity != tn / (tn + fp):
            raise ValueError("specificity does not match the confusion counts")
        if self.roc_points[0] != (0.0, 0.0) or self.roc_points[-1] != (1.0, 1.0):
            raise ValueError("roc_points must run from (0,0) to (1,1)")

    def to_dict(self) -> dict:
        tp, fp, tn, fn = self.confusion
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
            "roc_points": [list(p) for p in self.roc_points],
        }


def _as_y(label) -> int:
    if isinstance(label, str):
        return LABEL_TO_Y[label]
    return int(label)


def compute_roc(scores) -> list[tuple[float, float]]:
    """Threshold-swept ROC curve over (probability, label) pairs.

    Thresholds sit at +inf and at every distinct score, predicting the
    positive class at score >= threshold; equal scores move as one step,
    so ties trace a single diagonal segment. Points run from (0,0) to
    (1,1) sorted by fpr.
    """
    pairs = [(float(p), _as_y(y)) for p, y in scores]
    pos = sum(y for _, y in pairs)
    neg = len(pairs) - pos
    if pos == 0 or neg == 0:
        raise SingleClass("ROC needs at least one sample of each class")
    points = [(0.0, 0.0)]
    tp = fp = 0
    ordered = sorted(pairs, key=lambda it: -it[0])
    for _, group in groupby(ordered, key=lambda it: it[0]):
        for _, y in group:
            tp += y
            fp += 1 - y
        points.append((fp / neg, tp / pos))
    return points


def roc_auc_from_points(points) -> float:
    """Trapezoidal area under an fpr-sorted ROC polyline."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def compute_auc(scores) -> float:
    """AUC by trapezoidal integration of the tie-grouped ROC.

    Equals the normalized Mann-Whitney statistic
    P(score_pos > score_neg) + 0.5 * P(tie).
    """
    return roc_auc_from_points(compute_roc(scores))


def metrics_from_scores(scores, threshold: float = 0.5) -> MetricSet:
    """Confusion counts at `threshold` plus ROC/AUC over the scores."""
    pairs = [(float(p), _as_y(y)) for p, y in scores]
    tp = sum(1 for p, y in pairs if p >= threshold and y == 1)
    fp = sum(1 for p, y in pairs if p >= threshold and y == 0)
    tn = sum(1 for p, y in pairs if p < threshold and y == 0)
    fn = sum(1 for p, y in pairs if p < threshold and y == 1)
    total = tp + fp + tn + fn
    roc = tuple((x, y) for x, y in compute_roc(pairs))
    return MetricSet(
        accuracy=(tp + tn) / total,
        auc=roc_auc_from_points(roc),
        sensitivity=tp / (tp + fn) if tp + fn else 0.0,
        specificity=tn / (tn + fp) if tn + fp else 0.0,
        roc_points=roc,
        confusion=(tp, fp, tn, fn),
    )


# ---------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    kind: str
    seed: int
    config: dict
    per_fold: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    pooled: dict = field(default_factory=dict)
    cells: dict | None = None
    notes: list = field(default_factory=list)
    wall_clock_total_seconds: float = 0.0

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config,
            "per_fold": self.per_fold,
            "aggregate": self.aggregate,
            "pooled": self.pooled,
            "notes": self.notes,
            "wall_clock_total_seconds": self.wall_clock_total_seconds,
        }
        if self.cells is not None:
            doc["cells"] = self.cells
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        """Canonical JSON with every wall_clock field removed.

        Two runs of the same experiment with the same seed must produce
        identical fingerprints; only timing may differ.
        """
        return json.dumps(
            strip_wall_clock(self.to_dict()), sort_keys=True, separators=(",", ":")
        )

    def to_table(self) -> str:
        if self.kind == "ablation":
            return self._ablation_table()
        return self._experiment_table()

    def _experiment_table(self) -> str:
        header = (
            f"{'fold':>4}  {'n_train':>7}  {'n_val':>5}  {'n_test':>6}  "
            f"{'accuracy':>8}  {'auc':>6}  {'sensitivity':>11}  {'specificity':>11}"
        )
        lines = [header, "-" * len(header)]
        for entry in self.per_fold:
            m = entry["metrics"]
            sizes = entry["sizes"]
            lines.append(
                f"{entry['fold']:>4}  {sizes['train']:>7}  {sizes['val']:>5}  "
                f"{sizes['test']:>6}  {m['accuracy']:>8.4f}  {m['auc']:>6.4f}  "
                f"{m['sensitivity']:>11.4f}  {m['specificity']:>11.4f}"
            )
        a = self.aggregate
        lines.append("-" * len(header))
        lines.append(
            f"{'mean':>4}  {'':>7}  {'':>5}  {'':>6}  {a['accuracy']:>8.4f}  "
            f"{a['auc']:>6.4f}  {a['sensitivity']:>11.4f}  {a['specificity']:>11.4f}"
        )
        lines.append(f"pooled auc {self.pooled['auc']:.4f}")
        return "\n".join(lines) + "\n"

    def _ablation_table(self) -> str:
        header = (
            f"{'cell':<22}  {'accuracy':>8}  {'auc':>6}  {'sensitivity':>11}  "
            f"{'specificity':>11}  {'sec/epoch':>9}"
        )
        lines = [header, "-" * len(header)]
        for name in sorted(self.cells):
            cell = self.cells[name]
            a = cell["aggregate"]
            lines.append(
                f"{name:<22}  {a['accuracy']:>8.4f}  {a['auc']:>6.4f}  "
                f"{a['sensitivity']:>11.4f}  {a['specificity']:>11.4f}  "
                f"{cell['wall_clock_mean_epoch_seconds']:>9.4f}"
            )
        for note in self.notes:
            lines.append(note)
        return "\n".join(lines) + "\n"


def strip_wall_clock(obj):
    if isinstance(obj, dict):
        return {
            k: strip_wall_clock(v)
            for k, v in obj.items()
            if not k.startswith("wall_clock")
        }
    if isinstance(obj, list):
        return [strip_wall_clock(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# experiment driver


def _carve_validation(
    train_idx: tuple[int, ...], matrices, seed_words
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Move ~10% of the training subjects, stratified, into a val set.

    Each class gives up at least one subject whenever it can spare one,
    so that requesting early stopping always yields a validation signal
    even on small cohorts.
    """
    labels: dict[str, list[str]] = {}
    subject_indices: dict[str, list[int]] = {}
    for i in train_idx:
        fm = matrices[i]
        subject_indices.setdefault(fm.subject_id, []).append(i)
        if fm.subject_id not in labels.setdefault(fm.label, []):
            labels[fm.label].append(fm.subject_id)
    rng = np.random.default_rng(seed_words)
    val_subjects: set[str] = set()
    for label in sorted(labels):
        pool = labels[label]
        n_val = int(math.floor(CARVEOUT_FRACTION * len(pool)))
        if n_val == 0 and len(pool) >= 2:
            n_val = 1
        order = rng.permutation(len(pool))
        val_subjects.update(pool[j] for j in order[:n_val])
    val = tuple(sorted(i for i in train_idx if matrices[i].subject_id in val_subjects))
    train = tuple(i for i in train_idx if matrices[i].subject_id not in val_subjects)
    return train, val


def _run_fold(
    fold_i: int,
    split: SplitIndices,
    matrices: list[FeatureMatrix],
    spec: ModelSpec,
    train_config: TrainConfig,
    plan: SplitPlan,
    cutoff_scope: str,
    normalize: bool,
    clip_pcts: tuple[float, float],
    shuffle_labels: bool,
    carved: bool,
) -> tuple[dict, list[tuple[float, int]], SequenceClassifier, dict]:
    train_ms = [matrices[i] for i in split.train]
    cutoff_src = train_ms if cutoff_scope == "train" else matrices
    policy = compute_cutoff(cutoff_src)
    stats: NormalizationStats | None = None
    if normalize:
        stats = fit_normalization(train_ms, clip_pcts[0], clip_pcts[1])

    def prep(fm: FeatureMatrix) -> FeatureMatrix:
        if stats is not None:
            fm = apply_normalization(fm, stats)
        return fit_length(fm, policy)

    def pairs(idx):
        return [(prep(matrices[i]), LABEL_TO_Y[matrices[i].label]) for i in idx]

    train_pairs = pairs(split.train)
    val_pairs = pairs(split.val)
    test_pairs = pairs(split.test)

    if shuffle_labels:
        rng = np.random.default_rng([plan.seed, 7, fold_i])
        ys = [y for _, y in train_pairs]
        perm = rng.permutation(len(ys))
        train_pairs = [(fm, ys[perm[j]]) for j, (fm, _) in enumerate(train_pairs)]

    model = SequenceClassifier(
        spec, matrices[0].m, np.random.default_rng([train_config.seed, 101, fold_i])
    )
    t0 = time.perf_counter()
    try:
        result = train_model(
            model, train_pairs, train_config, val_set=val_pairs or None
        )
    except TrainingError as exc:
        exc.fold_index = fold_i
        raise
    train_seconds = time.perf_counter() - t0

    samples = []
    test_scores: list[tuple[float, int]] = []
    for role, idx, items in (
        ("train", split.train, train_pairs),
        ("val", split.val, val_pairs),
        ("test", split.test, test_pairs),
    ):
        for i, (fm, y) in zip(idx, items):
            p = model.forward(fm.values)
            src = matrices[i]
            samples.append(
                {
                    "subject_id": src.subject_id,
                    "task_id": src.task_id,
                    "role": role,
                    "label": src.label,
                    "y": y,
                    "p": p,
                }
            )
            if role == "test":
                test_scores.append((p, LABEL_TO_Y[src.label]))

    metrics = metrics_from_scores(test_scores)
    epoch_secs = result.wall_clock_epoch_seconds
    entry = {
        "fold": fold_i,
        "sizes": {
            "train": len(split.train),
            "val": len(split.val),
            "test": len(split.test),
        },
        "cutoff": policy.cutoff,
        "early_stop_carveout": carved,
        "metrics": metrics.to_dict(),
        "samples": samples,
        "training": {
            "epochs_run": result.epochs_run,
            "best_epoch": result.best_epoch,
            "stopped_early": result.stopped_early,
            "stopping_rule": result.stopping_rule,
            "final_train_loss": result.epoch_losses[-1],
        },
        "wall_clock_train_seconds": train_seconds,
        "wall_clock_mean_epoch_seconds": float(np.mean(epoch_secs)),
    }
    artifacts = {"policy": policy, "stats": stats, "model": model}
    return entry, test_scores, model, artifacts


def run_experiment(
    dataset,
    feature_selection: FeatureGroupSelection,
    model_spec: ModelSpec | None,
    train_config: TrainConfig,
    plan: SplitPlan,
    *,
    cutoff_scope: str = "train",
    normalize: bool = True,
    clip_pcts: tuple[float, float] = (5.0, 90.0),
    include_raw_pressure_in_derived: bool = False,
    shuffle_labels: bool = False,
    out_artifacts: dict | None = None,
) -> ExperimentReport:
    """Run one full protocol over `dataset` (a list of SignalSequence).

    Per split: the length cutoff and normalization statistics are fitted
    on the training side only (set ``cutoff_scope="all"`` to fit the
    cutoff on the whole dataset; the choice is echoed in the report),
    sequences are normalized and then padded or truncated, a fresh model
    is trained, and the held-out side is scored. ``shuffle_labels``
    permutes training labels only, as a leakage control.

    When early stopping is configured and a split has no validation part
    (k-fold), 10% of the training subjects are carved out, stratified,
    and the report flags it. If `out_artifacts` is a dict, the last
    fold's trained model, length policy, and normalization statistics
    are stored in it for checkpointing.
    """
    if cutoff_scope not in ("train", "all"):
        raise ValueError(f"cutoff_scope must be 'train' or 'all', got {cutoff_scope!r}")
    t_start = time.perf_counter()
    matrices = [
        assemble_features(
            seq,
            feature_selection,
            include_raw_pressure_in_derived=include_raw_pressure_in_derived,
        )
        for seq in dataset
    ]
    splits = make_splits(matrices, plan)
    spec = model_spec if model_spec is not None else ModelSpec.reference(matrices[0].m)

    per_fold = []
    pooled_scores: list[tuple[float, int]] = []
    any_carved = False
    last_artifacts: dict = {}
    for fold_i, split in enumerate(splits):
        carved = False
        if train_config.early_stop_patience is not None and not split.val:
            train_idx, val_idx = _carve_validation(
                split.train, matrices, [plan.seed, 31, fold_i]
            )
            if val_idx:
                split = SplitIndices(train=train_idx, val=val_idx, test=split.test)
                carved = True
                any_carved = True
        entry, test_scores, _, artifacts = _run_fold(
            fold_i,
            split,
            matrices,
            spec,
            train_config,
            plan,
            cutoff_scope,
            normalize,
            clip_pcts,
            shuffle_labels,
            carved,
        )
        per_fold.append(entry)
        pooled_scores.extend(test_scores)
        last_artifacts = artifacts

    aggregate = {
        key: float(np.mean([f["metrics"][key] for f in per_fold]))
        for key in ("accuracy", "auc", "sensitivity", "specificity")
    }
    confusion_total = {
        k: sum(f["metrics"]["confusion"][k] for f in per_fold)
        for k in ("tp", "fp", "tn", "fn")
    }
    aggregate["confusion_total"] = confusion_total
    pooled_roc = compute_roc(pooled_scores)
    pooled = {
        "auc": roc_auc_from_points(pooled_roc),
        "roc_points": [list(p) for p in pooled_roc],
    }

    from pendetect import __version__

    config = {
        "tool_version": __version__,
        "feature_groups": list(feature_selection.groups),
        "include_raw_pressure_in_derived": include_raw_pressure_in_derived,
        "input_size": matrices[0].m,
        "model_spec": spec.to_dict(),
        "train": asdict(train_config),
        "plan": plan.to_dict(),
        "flags": {
            "cutoff_scope": cutoff_scope,
            "normalize": normalize,
            "clip_low_pct": clip_pcts[0],
            "clip_high_pct": clip_pcts[1],
            "shuffle_labels": shuffle_labels,
            "stratified": True,
            "subject_grouped": True,
            "holdout_rounding": HOLDOUT_ROUNDING,
            "holdout_run_seeding": "default_rng([seed, run]) per run",
            "early_stop_carveout": any_carved,
            "early_stop_carveout_fraction": CARVEOUT_FRACTION if any_carved else None,
        },
    }
    report = ExperimentReport(
        kind="experiment",
        seed=plan.seed,
        config=config,
        per_fold=per_fold,
        aggregate=aggregate,
        pooled=pooled,
        wall_clock_total_seconds=time.perf_counter() - t_start,
    )
    if out_artifacts is not None:
        out_artifacts.update(last_artifacts)
        out_artifacts["report"] = report
    return report


GRID_CELLS = ("rnn", "lstm", "gru")


def run_ablation_grid(
    dataset,
    feature_selection: FeatureGroupSelection,
    train_config: TrainConfig,
    plan: SplitPlan,
    *,
    cells: tuple[str, ...] = GRID_CELLS,
    **experiment_kwargs,
) -> ExperimentReport:
    """Run the {rnn, lstm, gru} x {with_conv, without_conv} grid.

    Each cell is a full run_experiment under the same plan and training
    configuration, differing only in the model. The report stores one
    summary per cell plus soft-check notes comparing with_conv cells to
    their without_conv counterparts (logged, not asserted).
    """
    t_start = time.perf_counter()
    probe = None
    grid: dict[str, dict] = {}
    for cell in cells:
        for with_conv in (True, False):
            name = f"{cell}/{'with_conv' if with_conv else 'without_conv'}"
            sub = run_experiment(
                dataset,
                feature_selection,
                _grid_spec(dataset, feature_selection, cell, with_conv, experiment_kwargs),
                train_config,
                plan,
                **experiment_kwargs,
            )
            probe = probe or sub
            grid[name] = {
                "aggregate": sub.aggregate,
                "pooled_auc": sub.pooled["auc"],
                "per_fold_accuracy": [f["metrics"]["accuracy"] for f in sub.per_fold],
                "wall_clock_mean_epoch_seconds": float(
                    np.mean([f["wall_clock_mean_epoch_seconds"] for f in sub.per_fold])
                ),
            }

    expected = {f"{c}/{tag}" for c in cells for tag in ("with_conv", "without_conv")}
    missing = expected - set(grid)
    if missing:
        raise RuntimeError(f"ablation grid incomplete, missing {sorted(missing)}")

    notes = []
    for cell in cells:
        with_c = grid[f"{cell}/with_conv"]
        without_c = grid[f"{cell}/without_conv"]
        acc_w = with_c["aggregate"]["accuracy"]
        acc_wo = without_c["aggregate"]["accuracy"]
        ok = acc_w >= acc_wo - 0.05
        notes.append(
            f"soft check {cell}: with_conv accuracy {acc_w:.4f} vs "
            f"without_conv {acc_wo:.4f} - 0.05: {'ok' if ok else 'violated'}"
        )
        speed_ok = (
            with_c["wall_clock_mean_epoch_seconds"]
            < without_c["wall_clock_mean_epoch_seconds"]
        )
        notes.append(
            f"wall clock {cell}: with_conv "
            f"{with_c['wall_clock_mean_epoch_seconds']:.4f}s/epoch vs without_conv "
            f"{without_c['wall_clock_mean_epoch_seconds']:.4f}s/epoch"
            f" ({'faster' if speed_ok else 'not faster'})"
        )

    config = dict(probe.config)
    config.pop("model_spec", None)
    config["grid_cells"] = sorted(expected)
    return ExperimentReport(
        kind="ablation",
        seed=plan.seed,
        config=config,
        per_fold=[],
        aggregate={},
        pooled={},
        cells=grid,
        notes=notes,
        wall_clock_total_seconds=time.perf_counter() - t_start,
    )


def _grid_spec(dataset, selection, cell, with_conv, experiment_kwargs) -> ModelSpec:
    probe = assemble_features(
        dataset[0],
        selection,
        include_raw_pressure_in_derived=experiment_kwargs.get(
            "include_raw_pressure_in_derived", False
        ),
    )
    return ModelSpec.reference(probe.m, cell=cell, with_conv=with_conv)


# ---------------------------------------------------------------------------
# roc files


def emit_roc(report: ExperimentReport, path: str | Path) -> None:
    """Write the pooled ROC as CSV with the AUC in a header comment."""
    points = report.pooled.get("roc_points")
    if not points:
        raise ValueError("report has no pooled roc_points to emit")
    lines = [
        f"# {ROC_FILE_VERSION}",
        f"# auc={report.pooled['auc']!r}",
        "fpr,tpr",
    ]
    for x, y in points:
        lines.append(f"{float(x)!r},{float(y)!r}")
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc), path=str(path)) from exc


def read_roc(path: str | Path) -> tuple[list[tuple[float, float]], float]:
    """Parse an emit_roc file back to (points, stated_auc)."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(str(exc), path=str(path)) from exc
    if not lines or lines[0] != f"# {ROC_FILE_VERSION}":
        raise ParseError(f"expected header '# {ROC_FILE_VERSION}'", path=str(path))
    if not lines[1].startswith("# auc="):
        raise ParseError("missing auc header comment", path=str(path))
    auc = float(lines[1][len("# auc=") :])
    points = []
    for line in lines[3:]:
        if not line:
            continue
        fpr, tpr = line.split(",")
        points.append((float(fpr), float(tpr)))
    return points, auc
