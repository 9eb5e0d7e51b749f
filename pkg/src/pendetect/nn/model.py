"""Model specification, the assembled classifier, and checkpoints.

The reference architecture is two strided ReLU convolutions (8 filters,
kernel 5, stride 5; then 16 filters, kernel 3, stride 3) followed by two
bidirectional GRU layers of 32 units and a dense sigmoid head. The
second recurrent layer carries input dropout 0.1 (the conventional
dropout sitting between the two BiGRUs) and recurrent dropout 0.1; the
first carries none.

Checkpoints are a single JSON document: the spec, every parameter block
base64-encoded in documented order, and a SHA-256 over the canonical
spec encoding. Loading into a mismatched spec raises SpecMismatch. JSON
was chosen over binary containers because it is bit-stable: no embedded
timestamps, so identical runs write identical files.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, InputTooShort, IoError, SpecMismatch
from .layers import CELLS, _GATES_PER_CELL, Conv1d, DenseSigmoid, Recurrent

CHECKPOINT_VERSION = "pendetect-checkpoint v1"


@dataclass(frozen=True)
class Conv1dSpec:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int
    activation: str = "relu"

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1:
            raise ValueError("kernel and stride must be >= 1")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.activation not in ("relu", "none"):
            raise ValueError(f"activation must be 'relu' or 'none', got {self.activation!r}")


@dataclass(frozen=True)
class RecurrentSpec:
    cell: str
    hidden_units: int
    bidirectional: bool = True
    dropout_rate: float = 0.0
    recurrent_dropout_rate: float = 0.0

    def __post_init__(self):
        if self.cell not in CELLS:
            raise ValueError(f"cell must be one of {CELLS}, got {self.cell!r}")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if not (0 <= self.dropout_rate < 1 and 0 <= self.recurrent_dropout_rate < 1):
            raise ValueError("dropout rates must be in [0, 1)")


@dataclass(frozen=True)
class ModelSpec:
    conv_layers: tuple[Conv1dSpec, ...]
    recurrent_layers: tuple[RecurrentSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(self.conv_layers))
        object.__setattr__(self, "recurrent_layers", tuple(self.recurrent_layers))
        if not self.recurrent_layers:
            raise ValueError("at least one recurrent layer is required")
        for prev, nxt in zip(self.conv_layers, self.conv_layers[1:]):
            if prev.out_channels != nxt.in_channels:
                raise ValueError(
                    f"conv chain mismatch: {prev.out_channels} -> {nxt.in_channels}"
                )

    @classmethod
    def reference(cls, input_features: int, cell: str = "gru",
                  with_conv: bool = True) -> "ModelSpec":
        """The standard architecture; `cell` and `with_conv` span the ablation grid."""
        convs = ()
        if with_conv:
            convs = (
                Conv1dSpec(input_features, 8, kernel=5, stride=5),
                Conv1dSpec(8, 16, kernel=3, stride=3),
            )
        recs = (
            RecurrentSpec(cell, 32, bidirectional=True),
            RecurrentSpec(cell, 32, bidirectional=True,
                          dropout_rate=0.1, recurrent_dropout_rate=0.1),
        )
        return cls(conv_layers=convs, recurrent_layers=recs)

    def to_dict(self) -> dict:
        return {
            "conv_layers": [asdict(c) for c in self.conv_layers],
            "recurrent_layers": [asdict(r) for r in self.recurrent_layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            conv_layers=tuple(Conv1dSpec(**c) for c in d["conv_layers"]),
            recurrent_layers=tuple(RecurrentSpec(**r) for r in d["recurrent_layers"]),
        )


def spec_hash(spec: ModelSpec, input_size: int) -> str:
    canonical = json.dumps(
        {"input_size": input_size, "spec": spec.to_dict()},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def closed_form_parameter_count(spec: ModelSpec, input_size: int) -> int:
    """Documented closed-form count, kept independent of the array shapes.

    conv: C_in*k*C_out + C_out. recurrent: gates*(in*h + h^2 + h) per
    direction, where gates is 1/3/4 for rnn/gru/lstm. head: width of the
    last recurrent output + 1.
    """
    total = 0
    width = input_size
    for c in spec.conv_layers:
        total += c.in_channels * c.kernel * c.out_channels + c.out_channels
        width = c.out_channels
    for r in spec.recurrent_layers:
        gates = _GATES_PER_CELL[r.cell]
        per_direction = gates * (width * r.hidden_units + r.hidden_units**2 + r.hidden_units)
        directions = 2 if r.bidirectional else 1
        total += per_direction * directions
        width = r.hidden_units * directions
    total += width + 1
    return total


class SequenceClassifier:
    """The full pipeline: conv stack, recurrent stack, sigmoid head.

    The head reads the final state of the last recurrent layer: for a
    bidirectional layer that is the forward state at the last step
    concatenated with the backward state at the first step (each
    direction's own final state).
    """

    def __init__(self, spec: ModelSpec, input_size: int, rng: np.random.Generator):
        if spec.conv_layers and spec.conv_layers[0].in_channels != input_size:
            raise DimensionMismatch(
                f"first conv expects {spec.conv_layers[0].in_channels} channels, "
                f"input has {input_size}"
            )
        self.spec = spec
        self.input_size = input_size
        self.convs: list[Conv1d] = []
        width = input_size
        for c in spec.conv_layers:
            self.convs.append(
                Conv1d(c.in_channels, c.out_channels, c.kernel, c.stride, c.activation, rng)
            )
            width = c.out_channels
        self.recurrents: list[Recurrent] = []
        for r in spec.recurrent_layers:
            layer = Recurrent(
                r.cell, width, r.hidden_units, r.bidirectional,
                r.dropout_rate, r.recurrent_dropout_rate, rng,
            )
            self.recurrents.append(layer)
            width = layer.output_size
        self.head = DenseSigmoid(width, rng)
        self._last_rec_steps = None

    # -- parameter plumbing -------------------------------------------------

    def _layers(self):
        for i, layer in enumerate(self.convs):
            yield f"conv{i}", layer
        for i, layer in enumerate(self.recurrents):
            yield f"rec{i}", layer
        yield "head", self.head

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self._layers():
            for key, value in layer.params.items():
                out[f"{name}/{key}"] = value
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self._layers():
            for key, value in layer.grads.items():
                out[f"{name}/{key}"] = value
        return out

    def zero_grads(self):
        for _, layer in self._layers():
            layer.zero_grads()

    def parameter_count(self) -> int:
        actual = sum(v.size for v in self.params().values())
        expected = closed_form_parameter_count(self.spec, self.input_size)
        assert actual == expected, (
            f"parameter arrays hold {actual} entries, closed form says {expected}"
        )
        return actual

    # -- forward / backward -------------------------------------------------

    def min_input_length(self) -> int:
        """Smallest T the conv stack accepts (1 when there are no convs)."""
        t = 1
        for c in reversed(self.spec.conv_layers):
            t = (t - 1) * c.stride + c.kernel
        return t

    def forward(self, values: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> float:
        x = np.asarray(values, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionMismatch(f"expected a (T, m) matrix, got shape {x.shape}")
        if x.shape[0] < self.min_input_length():
            raise InputTooShort(
                f"length {x.shape[0]} < minimum {self.min_input_length()} for the conv stack"
            )
        for conv in self.convs:
            x = conv.forward(x, train=train, rng=rng)
        for rec in self.recurrents:
            x = rec.forward(x, train=train, rng=rng)
        self._last_rec_steps = x.shape[0]
        last = self.recurrents[-1]
        if last.bidirectional:
            state = np.concatenate([x[-1, : last.hidden], x[0, last.hidden :]])
        else:
            state = x[-1]
        return self.head.forward(state)

    def backward(self, dlogit: float) -> None:
        """Accumulate gradients for the preceding forward pass."""
        dstate = self.head.backward(dlogit)
        last = self.recurrents[-1]
        t = self._last_rec_steps
        dseq = np.zeros((t, last.output_size))
        if last.bidirectional:
            dseq[-1, : last.hidden] = dstate[: last.hidden]
            dseq[0, last.hidden :] = dstate[last.hidden :]
        else:
            dseq[-1] = dstate
        for rec in reversed(self.recurrents):
            dseq = rec.backward(dseq)
        for conv in reversed(self.convs):
            dseq = conv.backward(dseq)

    # -- checkpoints ----------------------------------------------------------

    def save_checkpoint(
        self,
        path: str | Path,
        normalization_ref: str | None = None,
        preprocessing: dict | None = None,
    ) -> None:
        """Write a self-describing JSON checkpoint.

        `preprocessing` is an optional free-form JSON object recording how
        inputs were prepared at training time (length cutoff, feature groups
        and so on) so that scoring can replay the exact same pipeline.
        """
        blocks = {
            key: {
                "shape": list(value.shape),
                "data": base64.b64encode(np.ascontiguousarray(value).tobytes()).decode("ascii"),
            }
            for key, value in self.params().items()
        }
        doc = {
            "format": CHECKPOINT_VERSION,
            "input_size": self.input_size,
            "spec": self.spec.to_dict(),
            "spec_sha256": spec_hash(self.spec, self.input_size),
            "normalization_ref": normalization_ref,
            "preprocessing": preprocessing,
            "params": blocks,
        }
        try:
            Path(path).write_text(
                json.dumps(doc, sort_keys=True, separators=(",", ":")), encoding="utf-8"
            )
        except OSError as exc:
            raise IoError(str(exc), path=str(path)) from exc

    def load_parameters(self, doc: dict) -> None:
        stored = doc["params"]
        own = self.params()
        if set(stored) != set(own):
            raise SpecMismatch(
                f"checkpoint blocks {sorted(stored)} do not match model blocks {sorted(own)}"
            )
        for key, target in own.items():
            block = stored[key]
            if tuple(block["shape"]) != target.shape:
                raise SpecMismatch(
                    f"block {key}: checkpoint shape {block['shape']}, model shape {target.shape}"
                )
            raw = base64.b64decode(block["data"])
            target[...] = np.frombuffer(raw, dtype=np.float64).reshape(target.shape)


def load_checkpoint(path: str | Path) -> tuple[SequenceClassifier, dict]:
    """Rebuild the model stored at `path`.

    Returns (model, meta) where meta holds the non-parameter payload:
    "normalization_ref" and "preprocessing" as stored by save_checkpoint.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(str(exc), path=str(path)) from exc
    if doc.get("format") != CHECKPOINT_VERSION:
        raise SpecMismatch(f"unknown checkpoint format {doc.get('format')!r}")
    spec = ModelSpec.from_dict(doc["spec"])
    input_size = int(doc["input_size"])
    if spec_hash(spec, input_size) != doc["spec_sha256"]:
        raise SpecMismatch("spec hash does not match the stored spec")
    model = SequenceClassifier(spec, input_size, rng=np.random.default_rng(0))
    model.load_parameters(doc)
    meta = {
        "normalization_ref": doc.get("normalization_ref"),
        "preprocessing": doc.get("preprocessing"),
    }
    return model, meta
