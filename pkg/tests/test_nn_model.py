import json

import numpy as np
import pytest

from pendetect.errors import DimensionMismatch, InputTooShort, SpecMismatch
from pendetect.nn import (
    Conv1dSpec,
    ModelSpec,
    RecurrentSpec,
    SequenceClassifier,
    closed_form_parameter_count,
    load_checkpoint,
    spec_hash,
)


def _tiny_spec(cell="gru", with_conv=True, bidirectional=True):
    convs = (Conv1dSpec(2, 2, kernel=2, stride=2),) if with_conv else ()
    return ModelSpec(
        conv_layers=convs,
        recurrent_layers=(RecurrentSpec(cell, 3, bidirectional=bidirectional),),
    )


# ---------------------------------------------------------------------------
# spec validation

def test_spec_requires_recurrent_layer():
    with pytest.raises(ValueError):
        ModelSpec(conv_layers=(), recurrent_layers=())


def test_spec_conv_chain_must_match():
    with pytest.raises(ValueError):
        ModelSpec(
            conv_layers=(Conv1dSpec(4, 8, 5, 5), Conv1dSpec(16, 16, 3, 3)),
            recurrent_layers=(RecurrentSpec("gru", 4),),
        )


def test_model_rejects_wrong_input_size():
    with pytest.raises(DimensionMismatch):
        SequenceClassifier(_tiny_spec(), input_size=3, rng=np.random.default_rng(0))


def test_reference_spec_shape():
    spec = ModelSpec.reference(17)
    assert [(c.out_channels, c.kernel, c.stride) for c in spec.conv_layers] == [
        (8, 5, 5),
        (16, 3, 3),
    ]
    assert [r.hidden_units for r in spec.recurrent_layers] == [32, 32]
    assert all(r.bidirectional and r.cell == "gru" for r in spec.recurrent_layers)
    # the conventional + recurrent dropout pair sits on the second layer only
    assert spec.recurrent_layers[0].dropout_rate == 0.0
    assert spec.recurrent_layers[0].recurrent_dropout_rate == 0.0
    assert spec.recurrent_layers[1].dropout_rate == 0.1
    assert spec.recurrent_layers[1].recurrent_dropout_rate == 0.1


# ---------------------------------------------------------------------------
# parameter counting

def test_reference_parameter_count_m17():
    model = SequenceClassifier(ModelSpec.reference(17), 17, np.random.default_rng(0))
    assert model.parameter_count() == 29185


def test_closed_form_counts_by_hand():
    # conv: 2*2*2+2 = 10; bi-gru h=3 on 2 channels: 2 * 3*(2*3+9+3) = 108;
    # head: 6+1 = 7
    assert closed_form_parameter_count(_tiny_spec(), 2) == 10 + 108 + 7
    # lstm swaps the gate multiplier 3 -> 4
    assert closed_form_parameter_count(_tiny_spec("lstm"), 2) == 10 + 144 + 7
    # unidirectional rnn without conv: 1*(2*3+9+3) + (3+1)
    assert (
        closed_form_parameter_count(_tiny_spec("rnn", with_conv=False, bidirectional=False), 2)
        == 18 + 4
    )


def test_parameter_count_matches_array_sizes():
    for cell in ("rnn", "lstm", "gru"):
        model = SequenceClassifier(
            ModelSpec.reference(5, cell=cell), 5, np.random.default_rng(1)
        )
        # parameter_count() asserts closed form == actual internally
        assert model.parameter_count() == closed_form_parameter_count(model.spec, 5)


# ---------------------------------------------------------------------------
# forward contracts

def test_zero_weights_give_exactly_half():
    model = SequenceClassifier(_tiny_spec(), 2, np.random.default_rng(2))
    for p in model.params().values():
        p[...] = 0.0
    assert model.forward(np.random.default_rng(0).normal(size=(10, 2))) == 0.5


def test_eval_forward_is_bit_identical():
    model = SequenceClassifier(_tiny_spec(), 2, np.random.default_rng(3))
    x = np.random.default_rng(1).normal(size=(12, 2))
    assert model.forward(x) == model.forward(x)


def test_output_range_sweep():
    model = SequenceClassifier(
        ModelSpec(conv_layers=(), recurrent_layers=(RecurrentSpec("gru", 2),)),
        2,
        np.random.default_rng(4),
    )
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        p = model.forward(rng.normal(size=(4, 2)) * rng.uniform(0.1, 30))
        assert 0.0 < p < 1.0


def test_min_input_length_reference_stack():
    model = SequenceClassifier(ModelSpec.reference(3), 3, np.random.default_rng(6))
    assert model.min_input_length() == 15
    with pytest.raises(InputTooShort):
        model.forward(np.zeros((14, 3)))
    assert 0 < model.forward(np.zeros((15, 3))) < 1


def test_head_reads_each_directions_final_state():
    # with the head weights split in halves, forcing one half to zero must
    # isolate the corresponding direction's final step
    model = SequenceClassifier(
        ModelSpec(conv_layers=(), recurrent_layers=(RecurrentSpec("gru", 3),)),
        2,
        np.random.default_rng(7),
    )
    x = np.random.default_rng(2).normal(size=(9, 2))
    rec_out = model.recurrents[0].forward(x)
    state = np.concatenate([rec_out[-1, :3], rec_out[0, 3:]])
    expected_logit = float(state @ model.head.params["w"] + model.head.params["b"][0])
    p = model.forward(x)
    assert p == pytest.approx(1.0 / (1.0 + np.exp(-expected_logit)), rel=1e-12)


# ---------------------------------------------------------------------------
# checkpoints

def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    model = SequenceClassifier(_tiny_spec(), 2, rng)
    x = np.random.default_rng(3).normal(size=(10, 2))
    before = model.forward(x)
    path = tmp_path / "model.ckpt"
    model.save_checkpoint(path, normalization_ref="norm.tsv", preprocessing={"cutoff": 9})
    loaded, meta = load_checkpoint(path)
    assert meta["normalization_ref"] == "norm.tsv"
    assert meta["preprocessing"] == {"cutoff": 9}
    assert loaded.forward(x) == before
    for key, value in model.params().items():
        np.testing.assert_array_equal(loaded.params()[key], value)


def test_checkpoint_bytes_are_deterministic(tmp_path):
    a = SequenceClassifier(_tiny_spec(), 2, np.random.default_rng(9))
    b = SequenceClassifier(_tiny_spec(), 2, np.random.default_rng(9))
    pa, pb = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    a.save_checkpoint(pa)
    b.save_checkpoint(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_checkpoint_rejects_tampered_spec(tmp_path):
    model = SequenceClassifier(_tiny_spec(), 2, np.random.default_rng(10))
    path = tmp_path / "model.ckpt"
    model.save_checkpoint(path)
    doc = json.loads(path.read_text())
    doc["spec"]["recurrent_layers"][0]["hidden_units"] = 64
    path.write_text(json.dumps(doc))
    with pytest.raises(SpecMismatch):
        load_checkpoint(path)


def test_checkpoint_rejects_unknown_format(tmp_path):
    path = tmp_path / "model.ckpt"
    path.write_text(json.dumps({"format": "something v99"}))
    with pytest.raises(SpecMismatch):
        load_checkpoint(path)


def test_load_parameters_into_wrong_shape_model(tmp_path):
    a = SequenceClassifier(_tiny_spec(), 2, np.random.default_rng(11))
    path = tmp_path / "a.ckpt"
    a.save_checkpoint(path)
    doc = json.loads(path.read_text())
    wider = ModelSpec(
        conv_layers=(Conv1dSpec(2, 2, kernel=2, stride=2),),
        recurrent_layers=(RecurrentSpec("gru", 5),),
    )
    b = SequenceClassifier(wider, 2, np.random.default_rng(12))
    with pytest.raises(SpecMismatch):
        b.load_parameters(doc)


def test_spec_hash_differs_for_different_specs():
    assert spec_hash(_tiny_spec(), 2) != spec_hash(_tiny_spec("lstm"), 2)
    assert spec_hash(_tiny_spec(), 2) != spec_hash(_tiny_spec(), 3)
    assert spec_hash(_tiny_spec(), 2) == spec_hash(_tiny_spec(), 2)
