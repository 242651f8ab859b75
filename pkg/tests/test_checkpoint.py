import struct

import numpy as np
import pytest

from terraseg.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from terraseg.errors import FormatError, IntegrityError, VersionError
from terraseg.model import UNetConfig, init_params, param_shapes

CFG = UNetConfig(in_channels=3, out_channels=1, depth=2, base_width=2, img_size=8)


@pytest.fixture
def saved(tmp_path):
    params = init_params(CFG, 11)
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, CFG, path)
    return params, path


def test_round_trip(saved):
    params, path = saved
    loaded, cfg = load_checkpoint(path)
    assert cfg == CFG
    assert list(loaded) == list(params)
    for k in params:
        assert loaded[k].tobytes() == params[k].astype(np.float32).tobytes()


def test_byte_identical_saves(saved, tmp_path):
    params, path = saved
    save_checkpoint(params, CFG, tmp_path / "again.ckpt")
    assert path.read_bytes() == (tmp_path / "again.ckpt").read_bytes()


def test_save_load_save_stable(saved, tmp_path):
    _, path = saved
    params, cfg = load_checkpoint(path)
    save_checkpoint(params, cfg, tmp_path / "second.ckpt")
    assert path.read_bytes() == (tmp_path / "second.ckpt").read_bytes()


def test_file_size_closed_form(saved):
    _, path = saved
    size = 4 + 4 + 4 + 5 * 4
    for name, shape in param_shapes(CFG).items():
        size += 4 + len(name.encode()) + 4 + 4 * len(shape) + 4 * int(np.prod(shape))
    assert path.stat().st_size == size


def test_header_layout(saved):
    _, path = saved
    data = path.read_bytes()
    assert data[:4] == b"UNSG"
    assert struct.unpack("<II5I", data[4:32]) == (1, len(param_shapes(CFG)), 3, 1, 2, 2, 8)


def test_float64_stored_as_float32(tmp_path):
    params = {k: v.astype(np.float64) + 1e-12 for k, v in init_params(CFG, 0).items()}
    save_checkpoint(params, CFG, tmp_path / "p.ckpt")
    loaded, _ = load_checkpoint(tmp_path / "p.ckpt")
    assert all(v.dtype == np.float32 for v in loaded.values())


def test_bad_magic(saved):
    _, path = saved
    data = bytearray(path.read_bytes())
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(path)


def test_unknown_version(saved):
    _, path = saved
    data = bytearray(path.read_bytes())
    data[4:8] = struct.pack("<I", 2)
    path.write_bytes(bytes(data))
    with pytest.raises(VersionError):
        load_checkpoint(path)


def test_every_truncation_is_an_integrity_error(saved):
    _, path = saved
    data = path.read_bytes()
    for cut in list(range(4, 64)) + list(range(64, len(data), 37)) + [len(data) - 1]:
        with pytest.raises((IntegrityError, FormatError)):
            decode_checkpoint(data[:cut])


def test_trailing_bytes(saved):
    _, path = saved
    with pytest.raises(IntegrityError):
        decode_checkpoint(path.read_bytes() + b"\0")


def test_shape_mismatch(tmp_path):
    params = init_params(CFG, 0)
    params["head.w"] = np.zeros((1, 3, 1, 1), np.float32)
    path = tmp_path / "bad.ckpt"
    save_checkpoint(params, CFG, path)
    with pytest.raises(IntegrityError, match="head.w"):
        load_checkpoint(path)


def test_config_mismatch(tmp_path):
    data = encode_checkpoint(init_params(CFG, 0), UNetConfig(3, 1, 2, 4, 8))
    with pytest.raises(IntegrityError):
        decode_checkpoint(data)


def test_huge_declared_length_does_not_allocate():
    head = b"UNSG" + struct.pack("<II5I", 1, 15, 1, 1, 1, 1, 2)
    bogus = head + struct.pack("<I", 0xFFFFFFFF) + b"x"
    with pytest.raises(IntegrityError):
        decode_checkpoint(bogus)


def test_fuzzed_bytes_never_crash(saved, rs):
    _, path = saved
    data = path.read_bytes()
    for _ in range(300):
        corrupt = bytearray(data)
        for pos in rs.integers(0, len(data), 3):
            corrupt[pos] = rs.integers(0, 256)
        try:
            decode_checkpoint(bytes(corrupt))
        except (FormatError, IntegrityError):
            pass


def test_missing_file(tmp_path):
    with pytest.raises(OSError, match="missing.ckpt"):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_no_temp_files_left(saved, tmp_path):
    assert sorted(p.name for p in tmp_path.iterdir()) == ["m.ckpt"]
