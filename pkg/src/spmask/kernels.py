"""Hot inner loops, each with a numba kernel and a pure-numpy fallback.

The module-level names ``fps``, ``ball_query`` and ``fh_segment`` point at
whichever flavour :mod:`spmask._accel` selected. The ``*_numba`` and
``*_numpy`` variants are always available for side-by-side comparison.

Both flavours compute squared distances as ``dx*dx + dy*dy + dz*dz`` in the
same order so their outputs are bit-identical.
"""
import numpy as np

from ._accel import BACKEND, HAVE_NUMBA, njit

# cell edge is padded so in-radius pairs never straddle more than one cell
_CELL_PAD = 1.0 + 1e-9
_NUMPY_CHUNK = 1 << 22


# ---------------------------------------------------------------------------
# farthest point sampling
# ---------------------------------------------------------------------------


def _fps_loop(pos, n, start):
    npts = pos.shape[0]
    out = np.empty(n, dtype=np.int64)
    mind = np.full(npts, np.inf)
    out[0] = start
    mind[start] = -1.0
    for t in range(1, n):
        last = out[t - 1]
        lx = pos[last, 0]
        ly = pos[last, 1]
        lz = pos[last, 2]
        best = -1
        bestd = -np.inf
        for i in range(npts):
            cur = mind[i]
            if cur >= 0.0:
                dx = pos[i, 0] - lx
                dy = pos[i, 1] - ly
                dz = pos[i, 2] - lz
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < cur:
                    cur = d2
                    mind[i] = d2
            if cur > bestd:
                bestd = cur
                best = i
        out[t] = best
        mind[best] = -1.0
    return out


fps_numba = njit(nogil=True, cache=True)(_fps_loop)


def fps_numpy(pos, n, start):
    npts = pos.shape[0]
    out = np.empty(n, dtype=np.int64)
    mind = np.full(npts, np.inf)
    out[0] = start
    mind[start] = -1.0
    x, y, z = pos[:, 0], pos[:, 1], pos[:, 2]
    for t in range(1, n):
        last = out[t - 1]
        dx = x - x[last]
        dy = y - y[last]
        dz = z - z[last]
        d2 = dx * dx + dy * dy + dz * dz
        np.minimum(mind, d2, out=mind, where=mind >= 0.0)
        best = int(np.argmax(mind))
        out[t] = best
        mind[best] = -1.0
    return out


# ---------------------------------------------------------------------------
# ball query on a uniform voxel grid
# ---------------------------------------------------------------------------


def _grid_layout(refs, radius):
    """Cell size, origin, dims, and refs sorted by flattened cell key."""
    cell = radius * _CELL_PAD
    lo = refs.min(axis=0)
    coords = np.floor((refs - lo) / cell).astype(np.int64)
    dims = coords.max(axis=0) + 1
    keys = (coords[:, 0] * dims[1] + coords[:, 1]) * dims[2] + coords[:, 2]
    order = np.argsort(keys, kind="stable")
    return cell, lo, dims, keys[order], order


def _ball_query_grid(centers, refs, radius, samples, cell, lo, dims, sorted_keys, order):
    m = centers.shape[0]
    nref = refs.shape[0]
    r2 = radius * radius
    idx = np.empty((m, samples), dtype=np.int64)
    fallback = np.zeros(m, dtype=np.bool_)
    buf_d = np.empty(samples)
    buf_i = np.empty(samples, dtype=np.int64)
    for c in range(m):
        qx = centers[c, 0]
        qy = centers[c, 1]
        qz = centers[c, 2]
        count = 0
        fx = (qx - lo[0]) / cell
        fy = (qy - lo[1]) / cell
        fz = (qz - lo[2]) / cell
        inside = (
            fx > -2.0 and fy > -2.0 and fz > -2.0
            and fx < dims[0] + 1.0 and fy < dims[1] + 1.0 and fz < dims[2] + 1.0
        )
        if inside:
            cx = int(np.floor(fx))
            cy = int(np.floor(fy))
            cz = int(np.floor(fz))
            for ox in range(cx - 1, cx + 2):
                if ox < 0 or ox >= dims[0]:
                    continue
                for oy in range(cy - 1, cy + 2):
                    if oy < 0 or oy >= dims[1]:
                        continue
                    for oz in range(cz - 1, cz + 2):
                        if oz < 0 or oz >= dims[2]:
                            continue
                        key = (ox * dims[1] + oy) * dims[2] + oz
                        a = np.searchsorted(sorted_keys, key, side="left")
                        b = np.searchsorted(sorted_keys, key, side="right")
                        for s in range(a, b):
                            j = order[s]
                            dx = refs[j, 0] - qx
                            dy = refs[j, 1] - qy
                            dz = refs[j, 2] - qz
                            d2 = dx * dx + dy * dy + dz * dz
                            if d2 >= r2:
                                continue
                            filled = count if count < samples else samples
                            # insertion into a (d2, index)-sorted buffer
                            pos = filled
                            while pos > 0 and (
                                buf_d[pos - 1] > d2
                                or (buf_d[pos - 1] == d2 and buf_i[pos - 1] > j)
                            ):
                                pos -= 1
                            if pos < samples:
                                last = filled if filled < samples else samples - 1
                                for t in range(last, pos, -1):
                                    buf_d[t] = buf_d[t - 1]
                                    buf_i[t] = buf_i[t - 1]
                                buf_d[pos] = d2
                                buf_i[pos] = j
                            count += 1
        if count == 0:
            fallback[c] = True
            best = 0
            bestd = np.inf
            for j in range(nref):
                dx = refs[j, 0] - qx
                dy = refs[j, 1] - qy
                dz = refs[j, 2] - qz
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < bestd:
                    bestd = d2
                    best = j
            for t in range(samples):
                idx[c, t] = best
        else:
            filled = count if count < samples else samples
            for t in range(filled):
                idx[c, t] = buf_i[t]
            for t in range(filled, samples):
                idx[c, t] = buf_i[0]
    return idx, fallback


_ball_query_grid_jit = njit(nogil=True, cache=True)(_ball_query_grid)


def ball_query_numba(centers, refs, radius, samples):
    layout = _grid_layout(refs, radius)
    if float(np.prod(layout[2].astype(np.float64))) > 2.0**62:
        # grid keys would overflow int64; exhaustive search is still exact
        return ball_query_numpy(centers, refs, radius, samples)
    return _ball_query_grid_jit(centers, refs, float(radius), int(samples), *layout)


def ball_query_numpy(centers, refs, radius, samples):
    m = centers.shape[0]
    nref = refs.shape[0]
    r2 = radius * radius
    idx = np.empty((m, samples), dtype=np.int64)
    fallback = np.zeros(m, dtype=bool)
    chunk = max(1, _NUMPY_CHUNK // max(nref, 1))
    cols = np.arange(samples)
    for lo in range(0, m, chunk):
        c = centers[lo:lo + chunk]
        dx = refs[None, :, 0] - c[:, None, 0]
        dy = refs[None, :, 1] - c[:, None, 1]
        dz = refs[None, :, 2] - c[:, None, 2]
        d2 = dx * dx + dy * dy + dz * dz
        within = d2 < r2
        count = within.sum(axis=1)
        ranked = np.argsort(np.where(within, d2, np.inf), axis=1, kind="stable")
        if ranked.shape[1] < samples:
            ranked = np.pad(ranked, ((0, 0), (0, samples - ranked.shape[1])), mode="edge")
        block = ranked[:, :samples]
        filled = np.minimum(count, samples)
        block = np.where(cols[None, :] < filled[:, None], block, block[:, :1])
        empty = count == 0
        if empty.any():
            block[empty] = np.argmin(d2[empty], axis=1)[:, None]
        idx[lo:lo + chunk] = block
        fallback[lo:lo + chunk] = empty
    return idx, fallback


# ---------------------------------------------------------------------------
# Felzenszwalb-Huttenlocher graph segmentation (union-find)
# ---------------------------------------------------------------------------


def _find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


def _fh_loop(npts, ei, ej, w, threshold, min_size):
    """Edges must already be sorted by (w, i, j). Returns per-point roots."""
    parent = np.arange(npts)
    size = np.ones(npts, dtype=np.int64)
    internal = np.zeros(npts)
    for e in range(ei.shape[0]):
        a = _find(parent, ei[e])
        b = _find(parent, ej[e])
        if a == b:
            continue
        ta = internal[a] + threshold / size[a]
        tb = internal[b] + threshold / size[b]
        if w[e] <= min(ta, tb):
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            internal[a] = w[e]
    for e in range(ei.shape[0]):
        a = _find(parent, ei[e])
        b = _find(parent, ej[e])
        if a != b and (size[a] < min_size or size[b] < min_size):
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
    roots = np.empty(npts, dtype=np.int64)
    for i in range(npts):
        roots[i] = _find(parent, i)
    return roots


if HAVE_NUMBA:
    _find = njit(nogil=True, cache=True)(_find)
    fh_segment_numba = njit(nogil=True, cache=True)(_fh_loop)
else:  # pragma: no cover
    fh_segment_numba = _fh_loop


def fh_segment_numpy(npts, ei, ej, w, threshold, min_size):
    return _fh_loop_py(npts, ei, ej, w, threshold, min_size)


def _find_py(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


def _fh_loop_py(npts, ei, ej, w, threshold, min_size):
    # plain-python twin of _fh_loop; lists beat numpy scalars in the interpreter
    parent = list(range(npts))
    size = [1] * npts
    internal = [0.0] * npts
    ei_l = ei.tolist()
    ej_l = ej.tolist()
    w_l = w.tolist()
    for i, j, we in zip(ei_l, ej_l, w_l):
        a = _find_py(parent, i)
        b = _find_py(parent, j)
        if a == b:
            continue
        if we <= min(internal[a] + threshold / size[a], internal[b] + threshold / size[b]):
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            internal[a] = we
    for i, j in zip(ei_l, ej_l):
        a = _find_py(parent, i)
        b = _find_py(parent, j)
        if a != b and (size[a] < min_size or size[b] < min_size):
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
    return np.array([_find_py(parent, i) for i in range(npts)], dtype=np.int64)


_KERNELS = {
    "numba": {"fps": fps_numba, "ball_query": ball_query_numba, "fh_segment": fh_segment_numba},
    "numpy": {"fps": fps_numpy, "ball_query": ball_query_numpy, "fh_segment": fh_segment_numpy},
}


def get(name, backend=None):
    """Look up kernel ``name`` for ``backend`` (defaults to the active one)."""
    backend = backend or BACKEND
    if backend not in _KERNELS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {sorted(_KERNELS)}")
    return _KERNELS[backend][name]


fps = get("fps")
ball_query = get("ball_query")
fh_segment = get("fh_segment")
