import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from dyntex.errors import ConfigError, DataError
from dyntex.video_io import (
    FrameSequence,
    GaussianNoise,
    Occlusion,
    corrupt,
    corruption_from_dict,
    list_frames,
    load_sequence,
    occluded_frames,
    read_pgm,
    save_sequence,
    write_pgm,
)


def _seq(rng, n=5, h=4, w=6):
    return FrameSequence.from_frames(rng.uniform(size=(n, h, w)))


def test_round_trip_within_quantization(tmp_path, rng):
    seq = _seq(rng)
    save_sequence(seq, tmp_path)
    back = load_sequence(list_frames(tmp_path))
    assert (back.height, back.width, back.frame_count) == (4, 6, 5)
    assert np.abs(back.data - seq.data).max() <= 1 / 510 + 1e-12


def test_frame_names_and_order(tmp_path, rng):
    paths = save_sequence(_seq(rng, n=3), tmp_path)
    assert [p.name for p in paths] == ["frame_0000.pgm", "frame_0001.pgm", "frame_0002.pgm"]


def test_writer_agrees_with_pillow(tmp_path, rng):
    img = rng.uniform(size=(7, 5))
    write_pgm(tmp_path / "a.pgm", img)
    ref = np.asarray(Image.open(tmp_path / "a.pgm"), dtype=float) / 255
    np.testing.assert_array_equal(ref, read_pgm(tmp_path / "a.pgm"))
    np.testing.assert_array_equal(ref, np.rint(img * 255) / 255)


def test_reads_pillow_16bit_and_ascii(tmp_path):
    pixels = np.array([[0, 1000], [40000, 65535]], dtype=np.uint16)
    Image.fromarray(pixels).save(tmp_path / "b.pgm")
    np.testing.assert_allclose(read_pgm(tmp_path / "b.pgm"), pixels / 65535, atol=1e-15)
    (tmp_path / "c.pgm").write_bytes(b"P2\n# comment\n3 1\n10\n0 5 10\n")
    np.testing.assert_allclose(read_pgm(tmp_path / "c.pgm"), [[0.0, 0.5, 1.0]])


def test_load_errors_name_the_file(tmp_path, rng):
    write_pgm(tmp_path / "a.pgm", rng.uniform(size=(4, 4)))
    write_pgm(tmp_path / "b.pgm", rng.uniform(size=(4, 5)))
    with pytest.raises(DataError, match="b.pgm"):
        load_sequence([tmp_path / "a.pgm", tmp_path / "b.pgm"])
    with pytest.raises(DataError, match="at least 2"):
        load_sequence([tmp_path / "a.pgm"])
    with pytest.raises(DataError, match="zzz.pgm"):
        load_sequence([tmp_path / "a.pgm", tmp_path / "zzz.pgm"])
    (tmp_path / "p6.pgm").write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(DataError):
        read_pgm(tmp_path / "p6.pgm")
    (tmp_path / "short.pgm").write_bytes(b"P5\n4 4\n255\n\x00")
    with pytest.raises(DataError, match="truncated"):
        read_pgm(tmp_path / "short.pgm")


def test_sequence_invariants():
    with pytest.raises(DataError):
        FrameSequence(np.zeros((6, 1)), 2, 3)
    with pytest.raises(DataError):
        FrameSequence(np.zeros((5, 2)), 2, 3)
    with pytest.raises(DataError):
        FrameSequence(np.full((6, 2), 1.5), 2, 3)
    s = FrameSequence.from_matrix(np.full((6, 2), 1.5), 2, 3, clamp=True)
    assert s.data.max() == 1.0


def test_frames_are_row_major_vectorized():
    frames = np.arange(12.0).reshape(2, 2, 3) / 12
    seq = FrameSequence.from_frames(frames)
    np.testing.assert_array_equal(seq.data[:, 1], frames[1].ravel())
    np.testing.assert_array_equal(seq.frame(1), frames[1])


def test_zero_noise_is_identity(rng):
    seq = _seq(rng)
    np.testing.assert_array_equal(corrupt(seq, GaussianNoise(0.0, seed=3)).data, seq.data)


def test_noise_is_seeded_and_clamped(rng):
    seq = _seq(rng, n=10)
    a = corrupt(seq, GaussianNoise(0.5, seed=1))
    b = corrupt(seq, GaussianNoise(0.5, seed=1))
    c = corrupt(seq, GaussianNoise(0.5, seed=2))
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    assert a.data.min() >= 0 and a.data.max() <= 1


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 60), frac=st.floats(0, 1), seed=st.integers(0, 10**6))
def test_occluded_frame_count(n, frac, seed):
    idx = occluded_frames(n, Occlusion(2, 2, frac, seed))
    assert idx.size == int(np.ceil(frac * n - 1e-9))
    assert len(set(idx.tolist())) == idx.size


def test_occlusion_writes_white_blocks(rng):
    seq = FrameSequence.from_frames(np.full((8, 6, 6), 0.5))
    out = corrupt(seq, Occlusion(2, 3, 0.5, seed=4))
    idx = occluded_frames(8, Occlusion(2, 3, 0.5, seed=4))
    for i in range(8):
        white = int(np.sum(out.frame(i) == 1.0))
        assert white == (6 if i in idx else 0)


def test_occlusion_errors_on_large_block(rng):
    with pytest.raises(ConfigError):
        corrupt(_seq(rng), Occlusion(5, 2, 0.5))
    with pytest.raises(ConfigError):
        Occlusion(2, 2, 1.5)


def test_corruption_from_dict():
    assert corruption_from_dict({"kind": "gaussian", "stddev": 0.1, "seed": 4}) == GaussianNoise(0.1, 4)
    spec = corruption_from_dict({"kind": "occlusion", "rect_h": 2, "rect_w": 3, "frame_fraction": 0.1})
    assert spec == Occlusion(2, 3, 0.1, 0)
    with pytest.raises(ConfigError):
        corruption_from_dict({"kind": "salt"})
    with pytest.raises(ConfigError):
        corruption_from_dict({"kind": "gaussian"})
