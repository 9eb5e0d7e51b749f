"""Derivation of dynamic handwriting features from raw pen channels.

Columns are organized in five groups:

* raw: the channels as acquired (for tablet data: x, y, pressure, tilt_x,
  tilt_y, button; smart-pen data exposes its six channels here instead).
* inclination: the two tilt channels.
* pressure: raw pressure and its first time derivative.
* kinematic: displacement and its first three time derivatives, in four
  directional ladders (tangential, horizontal, vertical, resultant), 16
  columns total.
* derived: kinematic plus the pressure derivative, 17 columns.

The resultant ladder is the magnitude of the (horizontal, vertical)
component pair at each derivative order. At order zero it coincides with
tangential displacement by the Pythagorean identity; at higher orders the
two ladders genuinely differ, because differentiating the unsigned
tangential series is not the same as taking the magnitude of the
differentiated components.

All difference and derivative series put 0 in their first entry so that
every column keeps the input length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, MissingChannel, TooShort
from .signal_io import SMARTPEN_CHANNELS, SignalSequence

GROUPS = ("raw", "inclination", "pressure", "kinematic", "derived")

RAW_COLUMNS = ("x", "y", "pressure", "tilt_x", "tilt_y", "button")
INCLINATION_COLUMNS = ("tilt_x", "tilt_y")
PRESSURE_COLUMNS = ("pressure", "pressure_derivative")
KINEMATIC_COLUMNS = (
    "displacement",
    "velocity",
    "acceleration",
    "jerk",
    "horizontal_displacement",
    "horizontal_velocity",
    "horizontal_acceleration",
    "horizontal_jerk",
    "vertical_displacement",
    "vertical_velocity",
    "vertical_acceleration",
    "vertical_jerk",
    "resultant_displacement",
    "resultant_velocity",
    "resultant_acceleration",
    "resultant_jerk",
)
DERIVED_COLUMNS = KINEMATIC_COLUMNS + ("pressure_derivative",)

_GROUP_COLUMNS = {
    "raw": RAW_COLUMNS,
    "inclination": INCLINATION_COLUMNS,
    "pressure": PRESSURE_COLUMNS,
    "kinematic": KINEMATIC_COLUMNS,
    "derived": DERIVED_COLUMNS,
}


@dataclass(frozen=True)
class FeatureGroupSelection:
    """Non-empty subset of feature groups, kept in canonical order."""

    groups: tuple[str, ...]

    def __post_init__(self):
        if not self.groups:
            raise ValueError("selection must name at least one group")
        unknown = set(self.groups) - set(GROUPS)
        if unknown:
            raise ValueError(f"unknown feature groups {sorted(unknown)}")
        ordered = tuple(g for g in GROUPS if g in self.groups)
        object.__setattr__(self, "groups", ordered)

    @classmethod
    def of(cls, *groups: str) -> "FeatureGroupSelection":
        return cls(tuple(groups))


@dataclass
class FeatureMatrix:
    """T×m feature matrix with per-column names and group tags."""

    values: np.ndarray
    column_names: list[str]
    column_groups: list[str]
    label: str | None
    subject_id: str
    task_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-d, got shape {self.values.shape}")
        m = self.values.shape[1]
        if len(self.column_names) != m or len(self.column_groups) != m:
            raise LengthMismatch(
                f"{m} columns but {len(self.column_names)} names, "
                f"{len(self.column_groups)} group tags"
            )
        if not np.isfinite(self.values).all():
            bad = [
                self.column_names[j]
                for j in np.nonzero(~np.isfinite(self.values).all(axis=0))[0]
            ]
            raise ValueError(f"non-finite values in columns {bad}")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]


# ---------------------------------------------------------------------------
# elementary series

def displacement(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Straight-line distance between consecutive points; first entry 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"x has shape {x.shape}, y has shape {y.shape}")
    if len(x) < 2:
        raise TooShort(f"need at least 2 points, got {len(x)}")
    out = np.zeros_like(x)
    out[1:] = np.hypot(np.diff(x), np.diff(y))
    return out


def directional_displacement(c: np.ndarray, axis: str) -> np.ndarray:
    """Signed coordinate difference along one axis; first entry 0."""
    if axis not in ("horizontal", "vertical"):
        raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    c = np.asarray(c, dtype=np.float64)
    if len(c) < 2:
        raise TooShort(f"need at least 2 points, got {len(c)}")
    out = np.zeros_like(c)
    out[1:] = np.diff(c)
    return out


def time_derivative(
    s: np.ndarray,
    timestamps: np.ndarray,
    tick_seconds: float,
    nominal_interval_s: float | None = None,
) -> np.ndarray:
    """Backward-difference time derivative; first entry 0.

    Each delta divides by the actual timestamp gap converted to seconds,
    floored at one nominal sample interval so that repeated ticks cannot
    divide by zero. ``nominal_interval_s`` defaults to ``tick_seconds``,
    which is correct when timestamps advance one tick per sample.
    """
    s = np.asarray(s, dtype=np.float64)
    timestamps = np.asarray(timestamps, dtype=np.float64)
    if s.shape != timestamps.shape:
        raise LengthMismatch(
            f"series has shape {s.shape}, timestamps have shape {timestamps.shape}"
        )
    if tick_seconds <= 0:
        raise ValueError("tick_seconds must be positive")
    eps_t = tick_seconds if nominal_interval_s is None else nominal_interval_s
    out = np.zeros_like(s)
    if len(s) > 1:
        dt = np.maximum(np.diff(timestamps) * tick_seconds, eps_t)
        out[1:] = np.diff(s) / dt
    return out


# ---------------------------------------------------------------------------
# assembly

def _tablet_column_builders(seq: SignalSequence, tick_seconds: float):
    ts = seq.channels["timestamp"]
    nominal = 1.0 / seq.sample_rate_hz
    cache: dict[str, np.ndarray] = {}

    def deriv(series: np.ndarray) -> np.ndarray:
        return time_derivative(series, ts, tick_seconds, nominal_interval_s=nominal)

    def col(name: str) -> np.ndarray:
        if name in cache:
            return cache[name]
        if name in seq.channels:
            out = seq.channels[name]
        elif name == "pressure_derivative":
            out = deriv(col("pressure"))
        elif name == "displacement":
            out = displacement(seq.channels["x"], seq.channels["y"])
        elif name == "horizontal_displacement":
            out = directional_displacement(seq.channels["x"], "horizontal")
        elif name == "vertical_displacement":
            out = directional_displacement(seq.channels["y"], "vertical")
        elif name in ("velocity", "horizontal_velocity", "vertical_velocity"):
            out = deriv(col(name.replace("velocity", "displacement")))
        elif name in ("acceleration", "horizontal_acceleration", "vertical_acceleration"):
            out = deriv(col(name.replace("acceleration", "velocity")))
        elif name in ("jerk", "horizontal_jerk", "vertical_jerk"):
            out = deriv(col(name.replace("jerk", "acceleration")))
        elif name.startswith("resultant_"):
            quantity = name.removeprefix("resultant_")
            out = np.hypot(col(f"horizontal_{quantity}"), col(f"vertical_{quantity}"))
        else:
            raise KeyError(name)
        cache[name] = out
        return out

    return col


def assemble_features(
    seq: SignalSequence,
    selection: FeatureGroupSelection,
    tick_seconds: float | None = None,
    include_raw_pressure_in_derived: bool = False,
) -> FeatureMatrix:
    """Build the FeatureMatrix for the selected groups.

    Selected groups are laid out in canonical order (raw, inclination,
    pressure, kinematic, derived); a column name already emitted by an
    earlier group is not repeated.

    ``tick_seconds`` converts timestamp ticks to seconds; the default of
    one nominal sample interval per tick matches data whose timestamps
    count samples. ``include_raw_pressure_in_derived`` widens the derived
    group with the raw pressure column (a sensitivity-analysis switch, off
    by default).
    """
    if tick_seconds is None:
        tick_seconds = 1.0 / seq.sample_rate_hz

    if seq.is_smartpen() and not seq.is_tablet():
        if selection.groups != ("raw",):
            needed = set(selection.groups) - {"raw"}
            if needed & {"kinematic", "derived"}:
                raise MissingChannel("x")
            raise MissingChannel("pressure" if "pressure" in needed else "tilt_x")
        if seq.length < 2:
            raise TooShort(f"need at least 2 time-steps, got {seq.length}")
        values = np.column_stack([seq.channels[name] for name in SMARTPEN_CHANNELS])
        return FeatureMatrix(
            values=values,
            column_names=list(SMARTPEN_CHANNELS),
            column_groups=["raw"] * len(SMARTPEN_CHANNELS),
            label=seq.label,
            subject_id=seq.subject_id,
            task_id=seq.task_id,
        )

    group_columns = dict(_GROUP_COLUMNS)
    if include_raw_pressure_in_derived:
        group_columns["derived"] = KINEMATIC_COLUMNS + ("pressure", "pressure_derivative")

    names: list[str] = []
    tags: list[str] = []
    for group in selection.groups:
        for name in group_columns[group]:
            if name not in names:
                names.append(name)
                tags.append(group)

    # any group with derived columns needs the whole tablet channel set
    # (timestamps included); a pure raw selection needs only the raw channels
    if selection.groups == ("raw",):
        required = set(RAW_COLUMNS)
    else:
        required = set(RAW_COLUMNS) | {"timestamp"}
    for channel in sorted(required):
        if channel not in seq.channels:
            raise MissingChannel(channel)

    if seq.length < 2:
        raise TooShort(f"need at least 2 time-steps, got {seq.length}")
    if any(n.endswith("jerk") for n in names) and seq.length < 4:
        raise TooShort(f"jerk needs at least 4 time-steps, got {seq.length}")

    col = _tablet_column_builders(seq, tick_seconds)
    values = np.column_stack([col(name) for name in names])
    return FeatureMatrix(
        values=values,
        column_names=names,
        column_groups=tags,
        label=seq.label,
        subject_id=seq.subject_id,
        task_id=seq.task_id,
    )


def dump_csv(fm: FeatureMatrix, path) -> None:
    """Write the matrix as CSV; floats use shortest round-trip decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(fm.column_names) + "\n")
        for row in fm.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
