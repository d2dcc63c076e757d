"""Scene, prediction and ground-truth file formats.

Scene files are either ASCII (first line ``N``, then ``N`` lines of
``x y z r g b``) or binary (``b"SPG1"``, little-endian uint32 ``N``, then
``N * 6`` little-endian float32). The reader sniffs the magic bytes.

Prediction files::

    box cx cy cz sx sy sz
    score v
    mask v1 c1 v2 c2 ...

Ground-truth files hold one record per line (``#`` starts a comment)::

    sample_id category N cx cy cz sx sy sz v1 c1 v2 c2 ...

Masks are run-length encoded as ``value count`` pairs summing to ``N``.
Floats are written with ``repr`` so every file round-trips bit-exactly.
"""
import math
import struct

import numpy as np

from .geometry import PointCloud
from .metrics import CATEGORIES

MAGIC = b"SPG1"
_HEADER = struct.Struct("<4sI")


class FormatError(ValueError):
    """Malformed input file; the message names the offending line or byte."""


def _fmt(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# run-length encoding
# ---------------------------------------------------------------------------


def rle_encode(mask):
    """``[1, 1, 0, 0, 0]`` -> ``[(1, 2), (0, 3)]``."""
    m = np.asarray(mask, dtype=bool).ravel()
    if m.size == 0:
        return []
    edges = np.flatnonzero(m[1:] != m[:-1]) + 1
    starts = np.concatenate([[0], edges])
    counts = np.diff(np.concatenate([starts, [m.size]]))
    return [(int(m[s]), int(c)) for s, c in zip(starts, counts)]


def rle_decode(pairs, n=None):
    values = np.array([v for v, _ in pairs], dtype=bool)
    counts = np.array([c for _, c in pairs], dtype=np.int64)
    out = np.repeat(values, counts)
    if n is not None and out.size != n:
        raise ValueError(f"runs cover {out.size} points, expected {n}")
    return out


def _parse_rle(tokens, where):
    if len(tokens) % 2:
        raise FormatError(f"{where}: odd number of run-length tokens")
    pairs = []
    for v, c in zip(tokens[::2], tokens[1::2]):
        if v not in ("0", "1"):
            raise FormatError(f"{where}: run value must be 0 or 1, got {v!r}")
        try:
            count = int(c)
        except ValueError:
            raise FormatError(f"{where}: invalid run length {c!r}") from None
        if count < 1:
            raise FormatError(f"{where}: run length must be positive, got {count}")
        pairs.append((int(v), count))
    if not pairs:
        raise FormatError(f"{where}: empty mask")
    return pairs


def _rle_tokens(mask):
    return " ".join(f"{v} {c}" for v, c in rle_encode(mask))


def _parse_floats(tokens, where, what="number"):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"{where}: invalid {what}") from None
    if not all(math.isfinite(v) for v in vals):
        raise FormatError(f"{where}: invalid coordinate")
    return vals


def _check_box(box, where):
    if not all(s > 0 for s in box[3:]):
        raise FormatError(f"{where}: box sizes must be positive")


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------


def _cloud_from(data, where):
    colors = data[:, 3:]
    bad = np.flatnonzero(((colors < 0) | (colors > 1)).any(axis=1))
    if bad.size:
        raise FormatError(f"{where(int(bad[0]))}: color out of range [0, 1]")
    return PointCloud(data[:, :3], colors)


def _parse_ascii_scene(text):
    lines = text.split("\n")
    head = lines[0].strip()
    try:
        n = int(head)
    except ValueError:
        raise FormatError(f"line 1: expected point count, got {head[:40]!r}") from None
    if n < 1:
        raise FormatError("line 1: empty input")
    rows = []
    for lineno in range(2, n + 2):
        if lineno - 1 >= len(lines) or not lines[lineno - 1].strip():
            raise FormatError(f"line {lineno}: truncated scene (declared {n} points, found {lineno - 2})")
        parts = lines[lineno - 1].split()
        if len(parts) != 6:
            raise FormatError(f"line {lineno}: expected 6 values, got {len(parts)}")
        rows.append(_parse_floats(parts, f"line {lineno}"))
    for lineno in range(n + 2, len(lines) + 1):
        if lines[lineno - 1].strip():
            raise FormatError(f"line {lineno}: trailing data after {n} records")
    return _cloud_from(np.array(rows), lambda i: f"line {i + 2}")


def _parse_binary_scene(blob):
    if len(blob) < _HEADER.size:
        raise FormatError(f"byte {len(blob)}: truncated scene header")
    _, n = _HEADER.unpack_from(blob)
    if n < 1:
        raise FormatError("byte 4: empty input")
    need = _HEADER.size + 24 * n
    if len(blob) < need:
        raise FormatError(f"byte {len(blob)}: truncated scene (declared {n} points, need {need} bytes)")
    if len(blob) > need:
        raise FormatError(f"byte {need}: trailing data after {n} records")
    data = np.frombuffer(blob, dtype="<f4", count=6 * n, offset=_HEADER.size).reshape(n, 6)
    bad = np.flatnonzero(~np.isfinite(data).all(axis=1))
    if bad.size:
        raise FormatError(f"byte {_HEADER.size + 24 * int(bad[0])}: invalid coordinate")
    return _cloud_from(data.astype(np.float64), lambda i: f"byte {_HEADER.size + 24 * i}")


def parse_scene_bytes(blob):
    if blob[:4] == MAGIC:
        return _parse_binary_scene(blob)
    try:
        text = blob.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"byte {exc.start}: not an ASCII scene and no SPG1 magic") from None
    return _parse_ascii_scene(text)


def parse_scene(path):
    with open(path, "rb") as fh:
        return parse_scene_bytes(fh.read())


def scene_bytes(cloud, binary=False):
    data = np.column_stack([cloud.positions, cloud.colors])
    if binary:
        return _HEADER.pack(MAGIC, data.shape[0]) + data.astype("<f4").tobytes()
    lines = [str(data.shape[0])]
    lines.extend(" ".join(_fmt(v) for v in row) for row in data)
    return ("\n".join(lines) + "\n").encode("ascii")


def write_scene(path, cloud, binary=False):
    with open(path, "wb") as fh:
        fh.write(scene_bytes(cloud, binary))


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


def prediction_text(mask, box, score):
    box = [float(v) for v in box]
    if len(box) != 6:
        raise ValueError("box must have 6 entries")
    if np.asarray(mask).size == 0:
        raise ValueError("mask must not be empty")
    return (
        "box " + " ".join(_fmt(v) for v in box) + "\n"
        + f"score {_fmt(score)}\n"
        + f"mask {_rle_tokens(mask)}\n"
    )


def write_prediction(path, mask, box, score):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(prediction_text(mask, box, score))


def parse_prediction_text(text):
    """Returns ``(mask, box, score)``."""
    lines = [ln for ln in text.split("\n")]
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) != 3:
        raise FormatError(f"line {min(len(lines) + 1, 4)}: expected exactly 3 lines (box, score, mask)")
    fields = [ln.split() for ln in lines]
    for lineno, (want, parts) in enumerate(zip(("box", "score", "mask"), fields), start=1):
        if not parts or parts[0] != want:
            raise FormatError(f"line {lineno}: expected {want!r} record")
    if len(fields[0]) != 7:
        raise FormatError(f"line 1: box needs 6 values, got {len(fields[0]) - 1}")
    box = _parse_floats(fields[0][1:], "line 1")
    _check_box(box, "line 1")
    if len(fields[1]) != 2:
        raise FormatError("line 2: score needs exactly one value")
    (score,) = _parse_floats(fields[1][1:], "line 2")
    mask = rle_decode(_parse_rle(fields[2][1:], "line 3"))
    return mask, np.array(box), score


def parse_prediction(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        text = blob.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"byte {exc.start}: prediction file is not ASCII") from None
    return parse_prediction_text(text)


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------


class GroundTruth:
    __slots__ = ("sample_id", "category", "box", "mask")

    def __init__(self, sample_id, category, box, mask):
        self.sample_id = sample_id
        self.category = category
        self.box = np.asarray(box, dtype=np.float64)
        self.mask = np.asarray(mask, dtype=bool)

    def __eq__(self, other):
        return (
            isinstance(other, GroundTruth)
            and self.sample_id == other.sample_id
            and self.category == other.category
            and np.array_equal(self.box, other.box)
            and np.array_equal(self.mask, other.mask)
        )

    def __repr__(self):
        return f"GroundTruth({self.sample_id!r}, {self.category!r}, N={self.mask.size})"


def gt_text(records):
    out = []
    for r in records:
        if r.category not in CATEGORIES:
            raise ValueError(f"bad category {r.category!r}")
        if not r.sample_id or any(ch.isspace() for ch in r.sample_id):
            raise ValueError(f"sample id must be a non-empty token, got {r.sample_id!r}")
        out.append(
            f"{r.sample_id} {r.category} {r.mask.size} "
            + " ".join(_fmt(v) for v in r.box)
            + f" {_rle_tokens(r.mask)}"
        )
    return "\n".join(out) + "\n"


def write_gt(path, records):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(gt_text(records))


def parse_gt_text(text):
    records = []
    seen = set()
    for lineno, line in enumerate(text.split("\n"), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        where = f"line {lineno}"
        if len(parts) < 11:
            raise FormatError(f"{where}: expected id, category, N, 6 box values and a mask")
        sid, category, n_tok = parts[0], parts[1], parts[2]
        if sid in seen:
            raise FormatError(f"{where}: duplicate sample id {sid!r}")
        if category not in CATEGORIES:
            raise FormatError(f"{where}: category must be 'unique' or 'multiple', got {category!r}")
        try:
            n = int(n_tok)
        except ValueError:
            raise FormatError(f"{where}: invalid point count {n_tok!r}") from None
        box = _parse_floats(parts[3:9], where)
        _check_box(box, where)
        pairs = _parse_rle(parts[9:], where)
        total = sum(c for _, c in pairs)
        if total != n:
            raise FormatError(f"{where}: mask runs sum to {total}, declared N={n}")
        seen.add(sid)
        records.append(GroundTruth(sid, category, box, rle_decode(pairs)))
    if not records:
        raise FormatError("line 1: no ground-truth records")
    return records


def parse_gt(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        text = blob.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"byte {exc.start}: ground-truth file is not ASCII") from None
    return parse_gt_text(text)
