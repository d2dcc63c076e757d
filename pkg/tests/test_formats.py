import re
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spmask import formats
from spmask.formats import FormatError, GroundTruth
from spmask.geometry import PointCloud

OFFSET = re.compile(r"^(line|byte) \d+: ")


def binary_scene(rows, declared=None):
    rows = np.asarray(rows, dtype="<f4").reshape(-1, 6)
    n = rows.shape[0] if declared is None else declared
    return struct.pack("<4sI", b"SPG1", n) + rows.tobytes()


class TestRle:
    def test_single_run(self):
        assert formats.rle_encode([1] * 5) == [(1, 5)]

    def test_two_runs(self):
        assert formats.rle_encode([1, 1, 0, 0, 0]) == [(1, 2), (0, 3)]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.booleans(), min_size=1, max_size=200))
    def test_round_trip(self, bits):
        pairs = formats.rle_encode(bits)
        assert sum(c for _, c in pairs) == len(bits)
        assert all(a[0] != b[0] for a, b in zip(pairs, pairs[1:]))
        assert formats.rle_decode(pairs).tolist() == bits


class TestScene:
    def test_minimal_ascii(self):
        cloud = formats.parse_scene_bytes(b"1\n0 0 0 0.5 0.5 0.5\n")
        assert len(cloud) == 1
        np.testing.assert_array_equal(cloud.colors, [[0.5, 0.5, 0.5]])

    def test_minimal_binary(self):
        blob = binary_scene([[0, 0, 0, 0.5, 0.5, 0.5], [1, 2, 3, 0, 1, 0.25]])
        assert len(blob) == 8 + 48
        cloud = formats.parse_scene_bytes(blob)
        assert len(cloud) == 2
        np.testing.assert_array_equal(cloud.positions[1], [1, 2, 3])

    def test_truncated_ascii(self):
        with pytest.raises(FormatError, match="line 4: truncated scene"):
            formats.parse_scene_bytes(b"3\n0 0 0 0 0 0\n1 1 1 0 0 0\n")

    def test_ascii_round_trip_exact(self, rng, tmp_path):
        cloud = PointCloud(rng.normal(size=(50, 3)) * 1e3, rng.random((50, 3)))
        path = tmp_path / "s.txt"
        formats.write_scene(path, cloud)
        back = formats.parse_scene(path)
        np.testing.assert_array_equal(back.positions, cloud.positions)
        np.testing.assert_array_equal(back.colors, cloud.colors)

    def test_binary_round_trip_exact_at_float32(self, rng, tmp_path):
        pos = rng.normal(size=(50, 3)).astype(np.float32).astype(np.float64)
        col = rng.random((50, 3)).astype(np.float32).astype(np.float64)
        cloud = PointCloud(pos, np.clip(col, 0, 1))
        path = tmp_path / "s.spg"
        formats.write_scene(path, cloud, binary=True)
        back = formats.parse_scene(path)
        np.testing.assert_array_equal(back.positions, cloud.positions)
        np.testing.assert_array_equal(back.colors, cloud.colors)
        assert formats.scene_bytes(back, binary=True) == path.read_bytes()

    MALFORMED_ASCII = {
        "empty file": (b"", "line 1"),
        "bad count": (b"three\n", "line 1"),
        "zero count": (b"0\n", "line 1"),
        "short row": (b"1\n0 0 0 0 0\n", "line 2: expected 6 values"),
        "long row": (b"1\n0 0 0 0 0 0 0\n", "line 2: expected 6 values"),
        "nan": (b"1\nnan 0 0 0 0 0\n", "line 2: invalid coordinate"),
        "inf": (b"2\n0 0 0 0 0 0\n0 inf 0 0 0 0\n", "line 3: invalid coordinate"),
        "word": (b"1\n0 x 0 0 0 0\n", "line 2"),
        "color high": (b"2\n0 0 0 0 0 0\n0 0 0 0 1.5 0\n", "line 3: color out of range"),
        "color low": (b"1\n0 0 0 -0.1 0 0\n", "line 2: color out of range"),
        "blank record": (b"2\n0 0 0 0 0 0\n\n", "line 3: truncated scene"),
        "trailing": (b"1\n0 0 0 0 0 0\n1 1 1 0 0 0\n", "line 3: trailing data"),
        "non ascii": (b"1\n0 0 0 0 0 \xff\n", "byte 12"),
    }

    MALFORMED_BINARY = {
        "short header": (b"SPG1\x01\x00", "byte 6: truncated"),
        "truncated payload": (binary_scene([[0] * 6], declared=2), "byte 32: truncated scene"),
        "trailing": (binary_scene([[0] * 6, [0] * 6], declared=1), "byte 32: trailing data"),
        "zero count": (binary_scene([], declared=0), "byte 4"),
        "nan": (binary_scene([[0] * 6, [0, np.nan, 0, 0, 0, 0]]), "byte 32: invalid coordinate"),
        "color": (binary_scene([[0, 0, 0, 0, 0, 2]]), "byte 8: color out of range"),
    }

    @pytest.mark.parametrize("name", sorted(MALFORMED_ASCII))
    def test_malformed_ascii(self, name):
        blob, where = self.MALFORMED_ASCII[name]
        with pytest.raises(FormatError) as exc:
            formats.parse_scene_bytes(blob)
        assert OFFSET.match(str(exc.value)), str(exc.value)
        assert str(exc.value).startswith(where)

    @pytest.mark.parametrize("name", sorted(MALFORMED_BINARY))
    def test_malformed_binary(self, name):
        blob, where = self.MALFORMED_BINARY[name]
        with pytest.raises(FormatError) as exc:
            formats.parse_scene_bytes(blob)
        assert OFFSET.match(str(exc.value)), str(exc.value)
        assert str(exc.value).startswith(where)


class TestPrediction:
    def test_all_true(self):
        text = formats.prediction_text(np.ones(5, bool), [0, 0, 0, 1, 1, 1], 0.5)
        assert text.splitlines()[2] == "mask 1 5"

    def test_two_runs(self):
        text = formats.prediction_text([1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1], 0.5)
        assert text.splitlines() == ["box 0.0 0.0 0.0 1.0 1.0 1.0", "score 0.5", "mask 1 2 0 3"]

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.booleans(), min_size=1, max_size=100),
        st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3),
        st.lists(st.floats(1e-6, 1e6), min_size=3, max_size=3),
        st.floats(allow_nan=False, allow_infinity=False),
    )
    def test_round_trip_bit_exact(self, bits, center, size, score):
        box = np.array(center + size)
        mask, box2, score2 = formats.parse_prediction_text(formats.prediction_text(bits, box, score))
        assert mask.tolist() == bits
        assert box2.tobytes() == box.tobytes()
        assert score2 == score

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "a.pred"
        formats.write_prediction(path, [0, 1, 1], [1, 2, 3, 0.1, 0.2, 0.3], -2.5)
        mask, box, score = formats.parse_prediction(path)
        assert mask.tolist() == [False, True, True]
        assert box.tolist() == [1, 2, 3, 0.1, 0.2, 0.3]
        assert score == -2.5

    MALFORMED = {
        "missing lines": ("box 0 0 0 1 1 1\nscore 1\n", "line 3"),
        "extra line": ("box 0 0 0 1 1 1\nscore 1\nmask 1 1\nmask 1 1\n", "line 4"),
        "wrong keyword": ("box 0 0 0 1 1 1\nscroe 1\nmask 1 1\n", "line 2"),
        "short box": ("box 0 0 0 1 1\nscore 1\nmask 1 1\n", "line 1"),
        "negative size": ("box 0 0 0 1 -1 1\nscore 1\nmask 1 1\n", "line 1"),
        "bad score": ("box 0 0 0 1 1 1\nscore high\nmask 1 1\n", "line 2"),
        "two scores": ("box 0 0 0 1 1 1\nscore 1 2\nmask 1 1\n", "line 2"),
        "odd rle": ("box 0 0 0 1 1 1\nscore 1\nmask 1 1 0\n", "line 3"),
        "bad run value": ("box 0 0 0 1 1 1\nscore 1\nmask 2 1\n", "line 3"),
        "zero run": ("box 0 0 0 1 1 1\nscore 1\nmask 1 0\n", "line 3"),
        "empty mask": ("box 0 0 0 1 1 1\nscore 1\nmask\n", "line 3"),
        "nan box": ("box nan 0 0 1 1 1\nscore 1\nmask 1 1\n", "line 1"),
    }

    @pytest.mark.parametrize("name", sorted(MALFORMED))
    def test_malformed(self, name):
        text, where = self.MALFORMED[name]
        with pytest.raises(FormatError) as exc:
            formats.parse_prediction_text(text)
        assert OFFSET.match(str(exc.value)), str(exc.value)
        assert str(exc.value).startswith(where)

    def test_non_ascii_file(self, tmp_path):
        path = tmp_path / "x.pred"
        path.write_bytes(b"box \xe2\x80\x94")
        with pytest.raises(FormatError, match="byte 4"):
            formats.parse_prediction(path)


class TestGroundTruth:
    def records(self, rng):
        return [
            GroundTruth("s0", "unique", [0, 0, 0, 1, 1, 1], rng.random(40) < 0.3),
            GroundTruth("s1", "multiple", [0.1, 2 / 3, 1e-9, 0.5, 0.25, 3.0], np.ones(7, bool)),
        ]

    def test_round_trip(self, rng, tmp_path):
        recs = self.records(rng)
        path = tmp_path / "gt.txt"
        formats.write_gt(path, recs)
        assert formats.parse_gt(path) == recs

    def test_comments_and_blank_lines(self):
        text = "# header\n\ns0 unique 3 0 0 0 1 1 1 1 2 0 1  # trailing comment\n"
        (rec,) = formats.parse_gt_text(text)
        assert rec.mask.tolist() == [True, True, False]

    MALFORMED = {
        "too few fields": ("s0 unique 3 0 0 0 1 1\n", "line 1"),
        "bad category": ("s0 rare 1 0 0 0 1 1 1 1 1\n", "line 1: category"),
        "bad count": ("s0 unique x 0 0 0 1 1 1 1 1\n", "line 1: invalid point count"),
        "runs short": ("s0 unique 3 0 0 0 1 1 1 1 2\n", "line 1: mask runs sum to 2"),
        "zero size": ("# c\ns0 unique 1 0 0 0 0 1 1 1 1\n", "line 2: box sizes"),
        "duplicate id": ("a unique 1 0 0 0 1 1 1 1 1\na unique 1 0 0 0 1 1 1 1 1\n", "line 2: duplicate"),
        "nan box": ("a unique 1 0 nan 0 1 1 1 1 1\n", "line 1: invalid coordinate"),
        "bad run value": ("a unique 1 0 0 0 1 1 1 3 1\n", "line 1: run value"),
        "empty": ("# nothing\n", "line 1: no ground-truth records"),
    }

    @pytest.mark.parametrize("name", sorted(MALFORMED))
    def test_malformed(self, name):
        text, where = self.MALFORMED[name]
        with pytest.raises(FormatError) as exc:
            formats.parse_gt_text(text)
        assert OFFSET.match(str(exc.value)), str(exc.value)
        assert str(exc.value).startswith(where)

    def test_writer_rejects_bad_records(self):
        with pytest.raises(ValueError):
            formats.gt_text([GroundTruth("has space", "unique", [0, 0, 0, 1, 1, 1], [1])])
        with pytest.raises(ValueError):
            formats.gt_text([GroundTruth("a", "other", [0, 0, 0, 1, 1, 1], [1])])
