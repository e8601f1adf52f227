import os
import stat

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gazetrack.errors import AmbiguousOrder, FormatError, ParseError
from gazetrack.formats import (
    atomic_write,
    decode_mask,
    decode_pfm,
    decode_pnm,
    encode_pfm,
    encode_ppm,
    format_gaze_log,
    mask_to_pgm,
    parse_gaze_log,
    preview_to_pgm,
    read_map,
    write_map,
)
from gazetrack.grid import GridShape

from conftest import random_record

HEADER = "image_id,x,y,duration_ms,start_ms\n"


class TestPfm:
    def test_header_and_size(self, rng):
        data = encode_pfm(rng.random((224, 224)).astype(np.float32))
        assert data.startswith(b"Pf\n224 224\n-1.0\n")
        assert len(data) == len(b"Pf\n224 224\n-1.0\n") + 224 * 224 * 4

    def test_rows_bottom_up(self):
        v = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        payload = encode_pfm(v).split(b"\n", 3)[3]
        np.testing.assert_array_equal(np.frombuffer(payload, "<f4"), [3, 4, 1, 2])

    @settings(max_examples=50)
    @given(arrays(np.float32, st.tuples(st.integers(1, 9), st.integers(1, 9)),
                  elements=st.floats(-1e6, 1e6, width=32)))
    def test_round_trip_bit_exact(self, v):
        out = decode_pfm(encode_pfm(v))
        np.testing.assert_array_equal(out.astype(np.float32).view(np.uint32), v.view(np.uint32))

    def test_big_endian_read(self):
        v = np.arange(6, dtype=np.float32).reshape(2, 3)
        data = b"Pf\n3 2\n1.0\n" + np.flipud(v).astype(">f4").tobytes()
        np.testing.assert_array_equal(decode_pfm(data), v)

    def test_three_channel(self, rng):
        v = rng.random((4, 5, 3)).astype(np.float32)
        data = encode_pfm(v)
        assert data.startswith(b"PF\n5 4\n")
        np.testing.assert_array_equal(decode_pfm(data), v)

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            decode_pfm(b"P5\n2 2\n-1.0\n" + bytes(16))

    def test_truncated(self):
        with pytest.raises(FormatError):
            decode_pfm(encode_pfm(np.zeros((3, 3)))[:-1])

    def test_file_round_trip(self, tmp_path, rng):
        v = rng.random((7, 5)).astype(np.float32)
        write_map(tmp_path / "m.pfm", v)
        np.testing.assert_array_equal(read_map(tmp_path / "m.pfm"), v)


class TestPnm:
    def test_mask_values(self, rng):
        m = rng.random((6, 9)) < 0.5
        data = mask_to_pgm(m)
        assert data.startswith(b"P5\n9 6\n255\n")
        assert set(np.unique(decode_pnm(data))) <= {0, 255}
        np.testing.assert_array_equal(decode_mask(data), m)

    def test_header_comments(self):
        data = b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 200])
        np.testing.assert_array_equal(decode_mask(data), [[False, True]])

    def test_ppm(self, rng):
        img = rng.integers(0, 256, (3, 4, 3), dtype=np.uint8)
        np.testing.assert_array_equal(decode_pnm(encode_ppm(img)), img)

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            decode_pnm(b"P2\n1 1\n255\n0")

    def test_truncated(self):
        with pytest.raises(FormatError):
            decode_pnm(b"P5\n4 4\n255\n" + bytes(15))

    def test_preview_quantization(self):
        data = preview_to_pgm(np.array([[0.0, 0.5, 1.0]]))
        np.testing.assert_array_equal(decode_pnm(data), [[0, 128, 255]])


class TestAtomicWrite:
    def test_replaces_and_cleans_up(self, tmp_path):
        target = tmp_path / "sub" / "f.bin"
        atomic_write(target, b"one")
        atomic_write(target, b"two")
        assert target.read_bytes() == b"two"
        assert os.listdir(target.parent) == ["f.bin"]
        assert stat.S_IMODE(target.stat().st_mode) == 0o644


class TestGazeLog:
    def test_single_record(self):
        text = HEADER + "a,10,20,250,0\na,30,40,300,260\na,50,60,200,600\n"
        (rec,) = parse_gaze_log(text)
        assert rec.image_id == "a"
        assert rec.shape == GridShape(224, 224)
        assert [f.start_ts for f in rec.fixations] == [0, 260, 600]

    def test_interleaved_images(self):
        text = HEADER + "b,1,1,100,5\na,2,2,100,0\nb,3,3,100,1\na,4,4,100,9\n"
        recs = parse_gaze_log(text)
        assert [r.image_id for r in recs] == ["b", "a"]
        assert [f.x for f in recs[0].fixations] == [1, 3]
        assert [f.x for f in recs[1].fixations] == [2, 4]

    def test_per_image_shapes(self):
        recs = parse_gaze_log(HEADER + "a,50,10,100,0\n", shapes={"a": (64, 32)})
        assert recs[0].shape == GridShape(64, 32)

    def test_zero_duration(self):
        with pytest.raises(ParseError) as exc:
            parse_gaze_log(HEADER + "a,1,1,100,0\na,1,1,0,10\n")
        assert exc.value.line == 3

    def test_missing_header(self):
        with pytest.raises(FormatError):
            parse_gaze_log("a,1,1,100,0\n")

    def test_non_numeric(self):
        with pytest.raises(ParseError) as exc:
            parse_gaze_log(HEADER + "a,1,one,100,0\n")
        assert exc.value.line == 2

    def test_out_of_bounds(self):
        with pytest.raises(ParseError):
            parse_gaze_log(HEADER + "a,224,1,100,0\n")

    def test_duplicate_start(self):
        with pytest.raises(AmbiguousOrder) as exc:
            parse_gaze_log(HEADER + "a,1,1,100,0\nb,1,1,100,0\na,2,2,100,0\n")
        assert exc.value.line == 4

    def test_blank_lines_skipped(self):
        assert len(parse_gaze_log(HEADER + "\na,1,1,100,0\n\n")[0].fixations) == 1

    def test_round_trip(self, rng):
        recs = [random_record(rng, shape=GridShape(64, 48), n=int(rng.integers(1, 12)), image_id=f"img{i}")
                for i in range(4)]
        back = parse_gaze_log(format_gaze_log(recs), shape=GridShape(64, 48))
        assert back == recs


def test_single_channel_payload_under_colour_tag():
    v = np.arange(4, dtype=np.float32).reshape(2, 2)
    data = b"PF" + encode_pfm(v)[2:]
    np.testing.assert_array_equal(decode_pfm(data), v)
