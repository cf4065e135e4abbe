import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from slantsweep import io
from slantsweep.geometry import CameraIntrinsics, DepthMap, RelativePose
from slantsweep.pooling import PlaneInstance
from slantsweep.synth import sample_scene


def pfm_bytes(a, big_endian=False):
    """Hand-rolled PFM writer used as an independent reference."""
    a = np.asarray(a, dtype=np.float32)
    magic = b"PF" if a.ndim == 3 else b"Pf"
    h, w = a.shape[:2]
    scale = b"1.0" if big_endian else b"-1.0"
    fmt = (">" if big_endian else "<") + "f"
    body = b"".join(struct.pack(fmt, float(v)) for v in a[::-1].ravel())
    return magic + b"\n" + f"{w} {h}".encode() + b"\n" + scale + b"\n" + body


class TestPFM:
    def test_frozen_bytes(self, tmp_path):
        io.write_pfm(tmp_path / "a.pfm", np.array([[1.0, 2.0], [3.0, 4.0]]))
        raw = (tmp_path / "a.pfm").read_bytes()
        # bottom row first, little endian
        assert raw == b"Pf\n2 2\n-1.0\n" + struct.pack("<4f", 3, 4, 1, 2)

    @given(st.integers(0, 2**32 - 1), st.booleans())
    def test_round_trip_bit_exact(self, tmp_path_factory, seed, colour):
        rng = np.random.default_rng(seed)
        h, w = rng.integers(1, 20, 2)
        shape = (h, w, 3) if colour else (h, w)
        a = rng.normal(0, 1e3, shape).astype(np.float32)
        path = tmp_path_factory.mktemp("pfm") / "a.pfm"
        io.write_pfm(path, a)
        b = io.read_pfm(path)
        assert b.dtype == np.float32
        assert np.array_equal(a.view(np.uint32), b.view(np.uint32))

    @pytest.mark.parametrize("big", [False, True])
    @pytest.mark.parametrize("colour", [False, True])
    def test_reads_reference_writer(self, tmp_path, rng, big, colour):
        a = rng.uniform(-5, 5, (4, 6, 3) if colour else (4, 6)).astype(np.float32)
        (tmp_path / "a.pfm").write_bytes(pfm_bytes(a, big))
        assert np.array_equal(io.read_pfm(tmp_path / "a.pfm"), a)

    def test_depth_invalid_written_as_zero(self, tmp_path):
        d = DepthMap(np.array([[1.5, 7.0]]), np.array([[True, False]]))
        io.write_depth(tmp_path / "d.pfm", d)
        back = io.read_depth(tmp_path / "d.pfm")
        np.testing.assert_array_equal(back.valid, d.valid)
        assert back.values[0, 0] == 1.5

    @pytest.mark.parametrize(
        "raw, where",
        [
            (b"P6\n2 2\n-1.0\n" + bytes(16), "byte 0"),
            (b"Pf\nx 2\n-1.0\n" + bytes(16), "byte 3"),
            (b"Pf\n2 0\n-1.0\n" + bytes(16), "byte 5"),
            (b"Pf\n2 2\nabc\n" + bytes(16), "byte 7"),
            (b"Pf\n2 2\n0\n" + bytes(16), "byte 7"),
            (b"Pf\n2 2\n-1.0\n" + bytes(15), "byte 12"),
            (b"Pf\n2 2\n-1.0\n" + bytes(17), "byte 12"),
            (b"Pf\n2", "byte 4"),
        ],
    )
    def test_malformed(self, tmp_path, raw, where):
        (tmp_path / "bad.pfm").write_bytes(raw)
        with pytest.raises(io.FormatError, match=where):
            io.read_pfm(tmp_path / "bad.pfm")

    def test_rejects_bad_shape(self, tmp_path):
        with pytest.raises(ValueError):
            io.write_pfm(tmp_path / "a.pfm", np.zeros((2, 2, 2)))


class TestPNG:
    @given(st.integers(0, 2**32 - 1))
    def test_mask_round_trip(self, tmp_path_factory, seed):
        rng = np.random.default_rng(seed)
        ids = rng.integers(0, 65536, tuple(rng.integers(1, 16, 2)))
        path = tmp_path_factory.mktemp("m") / "m.png"
        io.write_mask(path, ids)
        assert np.array_equal(io.read_mask(path), ids)

    def test_mask_id_zero_is_background(self):
        ids = np.array([[0, 3], [3, 7]])
        masks = io.masks_from_ids(ids)
        assert len(masks) == 2
        assert not any(m[0, 0] for m in masks)
        assert [int(m.sum()) for m in masks] == [2, 1]

    def test_mask_rejects_colour(self, tmp_path):
        Image.fromarray(np.zeros((2, 2, 3), np.uint8)).save(tmp_path / "c.png")
        with pytest.raises(io.FormatError):
            io.read_mask(tmp_path / "c.png")

    @pytest.mark.parametrize("ids", [np.array([[-1, 0]]), np.array([[70000]]), np.zeros((2, 2, 2), int)])
    def test_mask_rejects_range(self, tmp_path, ids):
        with pytest.raises(ValueError):
            io.write_mask(tmp_path / "m.png", ids)

    def test_image_round_trip_8bit(self, tmp_path, rng):
        a = rng.integers(0, 256, (5, 7)) / 255.0
        io.write_image(tmp_path / "g.png", a)
        np.testing.assert_array_equal(io.read_image(tmp_path / "g.png"), a)

    def test_to_gray(self):
        rgb = np.zeros((1, 3, 3))
        rgb[0, 0, 0] = rgb[0, 1, 1] = rgb[0, 2, 2] = 1.0
        np.testing.assert_allclose(io.to_gray(rgb), [[0.299, 0.587, 0.114]])
        assert io.to_gray(np.ones((2, 2, 3))) == pytest.approx(np.ones((2, 2)))
        with pytest.raises(ValueError):
            io.to_gray(np.zeros((2, 2, 4)))

    def test_read_gray_rgba(self, tmp_path):
        Image.fromarray(np.full((2, 2, 4), 255, np.uint8)).save(tmp_path / "a.png")
        np.testing.assert_allclose(io.read_gray(tmp_path / "a.png").values, 1.0)


def random_pose(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.linalg.det(q))
    return RelativePose(q, rng.normal(size=3))


class TestText:
    @given(st.integers(0, 2**32 - 1))
    def test_pose_round_trip(self, tmp_path_factory, seed):
        pose = random_pose(np.random.default_rng(seed))
        path = tmp_path_factory.mktemp("p") / "pose.txt"
        io.write_pose(path, pose)
        back = io.read_pose(path)
        assert np.array_equal(back.matrix, pose.matrix)

    def test_pose_frozen(self, tmp_path):
        (tmp_path / "p.txt").write_text("1 0 0 0.1\n0 1 0 0  # comment\n0 0 1 -0.05\n")
        pose = io.read_pose(tmp_path / "p.txt")
        assert pose.t.tolist() == [0.1, 0.0, -0.05]

    def test_pose_errors(self, tmp_path):
        (tmp_path / "p.txt").write_text("1 0 0 0\n0 1 x 0\n")
        with pytest.raises(io.FormatError, match="line 2"):
            io.read_pose(tmp_path / "p.txt")
        (tmp_path / "p.txt").write_text("1 0 0 0\n")
        with pytest.raises(io.FormatError, match="expected 12"):
            io.read_pose(tmp_path / "p.txt")

    def test_intrinsics_round_trip(self, tmp_path, rng):
        k = CameraIntrinsics(*rng.uniform(50, 500, 2), *rng.uniform(10, 60, 2), 128, 96)
        io.write_intrinsics(tmp_path / "k.txt", k)
        assert io.read_intrinsics(tmp_path / "k.txt") == k

    def test_intrinsics_integer_size(self, tmp_path):
        (tmp_path / "k.txt").write_text("100 100 63.5 47.5 128.5 96\n")
        with pytest.raises(io.FormatError, match="integers"):
            io.read_intrinsics(tmp_path / "k.txt")

    def test_instances_round_trip(self, tmp_path):
        insts = [
            PlaneInstance(np.ones((2, 2)), 0.75, pooled_param=[0.1, -0.2, -0.5]),
            PlaneInstance(np.ones((2, 2)), 0.25, semantic_label=4, pooled_param=[0.0, 0.0, -1 / 3]),
        ]
        io.write_instances(tmp_path / "i.txt", insts)
        back = io.read_instances(tmp_path / "i.txt")
        assert [r["id"] for r in back] == [1, 2]
        assert [r["label"] for r in back] == [None, 4]
        assert back[1]["p"][2] == -1 / 3
        assert back[0]["score"] == 0.75

    def test_instances_bad_field_count(self, tmp_path):
        (tmp_path / "i.txt").write_text("1 0 0 -1 0.5\n2 0 0\n")
        with pytest.raises(io.FormatError, match="line 2"):
            io.read_instances(tmp_path / "i.txt")


class TestVolume:
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, tmp_path_factory, seed):
        rng = np.random.default_rng(seed)
        n, h, w = rng.integers(1, 9, 3)
        a = rng.uniform(size=(n, h, w)).astype(np.float32)
        valid = rng.uniform(size=(h, w)) > 0.2
        path = tmp_path_factory.mktemp("v") / "p.vol"
        io.write_volume(path, a, valid)
        b = io.read_volume(path)
        assert np.all(np.isnan(b[:, ~valid]))
        assert np.array_equal(b[:, valid], a[:, valid])

    def test_truncated(self, tmp_path):
        io.write_volume(tmp_path / "p.vol", np.zeros((2, 3, 4)))
        raw = (tmp_path / "p.vol").read_bytes()
        (tmp_path / "p.vol").write_bytes(raw[:-1])
        with pytest.raises(io.FormatError, match="byte 10"):
            io.read_volume(tmp_path / "p.vol")

    def test_bad_header(self, tmp_path):
        (tmp_path / "p.vol").write_bytes(b"VOX 1 1 1\n" + bytes(4))
        with pytest.raises(io.FormatError, match="byte 0"):
            io.read_volume(tmp_path / "p.vol")


class TestReports:
    @pytest.mark.parametrize("name", ["r.txt", "r.json"])
    def test_round_trip(self, tmp_path, name):
        rep = {"abs_rel": 0.0123456789, "delta1": 1.0, "ap": 0.5}
        io.write_report(tmp_path / name, rep)
        assert io.read_report(tmp_path / name) == rep

    def test_text_error(self, tmp_path):
        (tmp_path / "r.txt").write_text("a = 1\nb 2\n")
        with pytest.raises(io.FormatError, match="line 2"):
            io.read_report(tmp_path / "r.txt")

    def test_scene_round_trip(self, tmp_path):
        spec = sample_scene(3)
        io.write_scene(tmp_path / "s.json", spec)
        back = io.read_scene(tmp_path / "s.json")
        assert np.array_equal(back.pose.matrix, spec.pose.matrix)
        assert all(np.array_equal(a.p, b.p) for a, b in zip(back.planes, spec.planes))
        assert back.intrinsics == spec.intrinsics
