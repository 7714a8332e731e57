import struct

import numpy as np
import pytest

from ncelm.checkpoint import MAGIC, CheckpointError, load_checkpoint, save_checkpoint
from ncelm.tensor import RngStream


def test_roundtrip_bit_exact(tmp_path):
    rng = RngStream(0)
    tensors = {"a": rng.normal(1.0, (3, 4)), "b": rng.normal(1.0, 5), "s": np.array(0.25)}
    meta = {"epoch": 3, "vocab": ["x", "y"], "ppl": 123.456}
    save_checkpoint(tmp_path / "m.ckpt", tensors, meta)
    back, meta2 = load_checkpoint(tmp_path / "m.ckpt")
    assert meta2 == meta and list(back) == list(tensors)
    for k in tensors:
        assert back[k].shape == tensors[k].shape
        assert back[k].tobytes() == tensors[k].tobytes()


def test_header_layout(tmp_path):
    save_checkpoint(tmp_path / "m.ckpt", {"w": np.ones(2)}, {})
    raw = (tmp_path / "m.ckpt").read_bytes()
    assert raw[:6] == MAGIC
    version, meta_len = struct.unpack("<IQ", raw[6:18])
    assert version == 1 and raw[18:18 + meta_len] == b"{}"


def test_rejects_garbage(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"NOTACKPT")
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
    save_checkpoint(p, {"w": np.ones(4)}, {})
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(p)
