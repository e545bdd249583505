"""Checkpoint format: bit-exact round-trips and hostile-input handling."""
import json
import struct

import numpy as np
import pytest

from mupt.checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, save_checkpoint
from mupt.config import PTConfig
from mupt.errors import CheckpointError
from mupt.model import ModelParams, tensor_order
from mupt.rng import SeededRng

CFG = PTConfig(width=8, rank=2, channels=2, topics=16, vocab_size=17,
               pos_bias=True, pos_buckets=8, pos_clip=4)


def _params():
    return ModelParams.init(CFG, SeededRng(0).spawn("params")).tensors


def _save(tmp_path, extra=None):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, CFG, _params(), extra=extra)
    return path


def test_roundtrip_bit_exact(tmp_path):
    params = _params()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, CFG, params, extra={"step": 7})
    config, tensors, extra = load_checkpoint(path)
    assert config == CFG
    assert extra == {"step": 7}
    assert set(tensors) == set(tensor_order(CFG))
    for name, t in params.items():
        assert tensors[name].dtype == np.float64
        np.testing.assert_array_equal(tensors[name], t)


def test_float32_roundtrip(tmp_path):
    params = {k: v.astype(np.float32) for k, v in _params().items()}
    path = tmp_path / "model32.ckpt"
    save_checkpoint(path, CFG, params)
    _, tensors, _ = load_checkpoint(path)
    for name, t in params.items():
        assert tensors[name].dtype == np.float32
        np.testing.assert_array_equal(tensors[name], t)


def test_save_validates_shapes_and_dtypes(tmp_path):
    params = _params()
    params["S"] = params["S"][:, :4]
    with pytest.raises(CheckpointError, match="shape"):
        save_checkpoint(tmp_path / "x.ckpt", CFG, params)
    params = _params()
    params["S"] = params["S"].astype(np.int64)
    with pytest.raises(CheckpointError, match="dtype"):
        save_checkpoint(tmp_path / "x.ckpt", CFG, params)


def test_bad_magic(tmp_path):
    path = _save(tmp_path)
    raw = path.read_bytes()
    path.write_bytes(b"NOTAFILE" + raw[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_unknown_version_refused(tmp_path):
    path = _save(tmp_path)
    raw = path.read_bytes()
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    start = len(MAGIC) + 8
    header = json.loads(raw[start:start + header_len])
    assert header["format_version"] == FORMAT_VERSION
    header["format_version"] = FORMAT_VERSION + 1
    blob = json.dumps(header, sort_keys=True).encode()
    path.write_bytes(MAGIC + struct.pack("<Q", len(blob)) + blob + raw[start + header_len:])
    with pytest.raises(CheckpointError, match="not supported"):
        load_checkpoint(path)


def test_truncation_reports_offsets(tmp_path):
    path = _save(tmp_path)
    raw = path.read_bytes()

    path.write_bytes(raw[:4])
    with pytest.raises(CheckpointError, match="preamble"):
        load_checkpoint(path)

    path.write_bytes(raw[:len(MAGIC) + 8 + 10])  # header cut short
    with pytest.raises(CheckpointError, match="header claims"):
        load_checkpoint(path)

    path.write_bytes(raw[:-8])  # last tensor loses one value
    with pytest.raises(CheckpointError, match=rf"ends at byte {len(raw) - 8}"):
        load_checkpoint(path)


def test_corrupt_header_json(tmp_path):
    path = _save(tmp_path)
    raw = path.read_bytes()
    start = len(MAGIC) + 8
    broken = bytearray(raw)
    broken[start] = ord("!")  # header no longer parses as JSON
    path.write_bytes(bytes(broken))
    with pytest.raises(CheckpointError, match="corrupt checkpoint header"):
        load_checkpoint(path)


def test_header_is_inspectable_json(tmp_path):
    # the header region is plain JSON so external tools can read the geometry
    path = _save(tmp_path, extra={"note": "hello"})
    raw = path.read_bytes()
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    header = json.loads(raw[len(MAGIC) + 8:len(MAGIC) + 8 + header_len])
    assert header["config"]["width"] == CFG.width
    assert header["groups"]["W_out"] == "output"
    assert header["extra"]["note"] == "hello"
    names = [e["name"] for e in header["tensors"]]
    assert names == list(tensor_order(CFG))
    offsets = [e["offset"] for e in header["tensors"]]
    assert offsets == sorted(offsets) and offsets[0] == 0
