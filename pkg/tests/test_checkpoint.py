"""Checkpoint round-trips and error surfaces."""

import numpy as np
import pytest

from mhka import text as tx
from mhka.checkpoint import load_checkpoint, read_meta, save_checkpoint
from mhka.errors import CheckpointError
from mhka.model import ModelConfig, build_model
from mhka.synth import SynthConfig, corpus_texts, synth_alpha_nli


@pytest.fixture
def model():
    instances, _ = synth_alpha_nli(SynthConfig(n_instances=6, seed=0, vocab_size=10))
    vocab = tx.build_vocab(corpus_texts(instances))
    cfg = ModelConfig(vocab_size=len(vocab), d_model=8, n_heads=2, ctx_layers=1,
                      know_layers=1, reason_layers=1, d_ff=16, max_positions=64,
                      dtype="float32")
    m = build_model("mhka", cfg, vocab, seed=4)
    m.eval_mode()
    return m, instances


def test_roundtrip_bit_exact(tmp_path, model):
    m, instances = model
    path = tmp_path / "ck.npz"
    save_checkpoint(path, m, extra={"note": "probe"})
    loaded = load_checkpoint(path)
    for name, p in m.parameters().items():
        assert np.array_equal(loaded.parameters()[name].data, p.data), name
    loaded.eval_mode()
    for inst in instances:
        assert loaded.predict(inst) == m.predict(inst)


def test_meta_records_precision_seed_config(tmp_path, model):
    m, _ = model
    path = tmp_path / "ck.npz"
    save_checkpoint(path, m)
    meta = read_meta(path)
    assert meta["precision"] == "float32"
    assert meta["seed"] == 4
    assert meta["arch"] == "mhka"
    assert meta["config"]["d_model"] == 8
    assert meta["vocab"][:5] == list(tx.RESERVED)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.npz")


def test_corrupt_file(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_parameter_mismatch_detected(tmp_path, model):
    m, _ = model
    path = tmp_path / "ck.npz"
    save_checkpoint(path, m)
    import json
    import numpy as np

    with np.load(path) as archive:
        payload = {k: archive[k] for k in archive.files}
    meta = json.loads(payload["__meta__"].tobytes().decode())
    first_param = next(k for k in payload if k != "__meta__")
    del payload[first_param]
    np.savez(path, **payload)
    with pytest.raises(CheckpointError, match="missing"):
        load_checkpoint(path)
