"""Hot per-iteration kernels, compiled with numba when available.

Two implementations exist for each kernel: a loop form compiled with
``numba.njit`` and a vectorised pure-numpy fallback.  Both are exact integer
pipelines and produce bit-identical results; the test suite enforces that.

Backend selection: the ``GRAPHR_NO_NUMBA`` environment variable (any value
other than empty/0/false) forces the numpy fallback, as does a missing numba
install.  ``set_backend`` overrides at runtime, which the benchmark harness
uses to compare the two paths.
"""

import os

import numpy as np

RAW_MAX = 0xFFFF

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:            # pragma: no cover - exercised via env flag
    numba = None
    _HAVE_NUMBA = False


def _env_disables_numba() -> bool:
    flag = os.environ.get("GRAPHR_NO_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no")


_BACKEND = "auto"


def set_backend(name: str) -> None:
    """Force "numba" or "numpy", or restore "auto" (env-driven) selection."""
    if name not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    global _BACKEND
    _BACKEND = name


def get_backend() -> str:
    """The backend that will actually run: "numba" or "numpy"."""
    if _BACKEND != "auto":
        return _BACKEND
    if _HAVE_NUMBA and not _env_disables_numba():
        return "numba"
    return "numpy"


def backend_setting() -> str:
    """The configured selection ("auto", "numba", or "numpy"), unresolved."""
    return _BACKEND


def have_numba() -> bool:
    return _HAVE_NUMBA


# ---- MAC iteration --------------------------------------------------------
#
# Processes the subgraph columns listed in chunk_ids.  For every non-empty
# tile: accumulate wide integer products per destination, rescale to Q0.16
# with round-half-even, and add (saturating) into the column accumulator.
# At the end of a column, add the per-destination constant and write the
# destination chunk.  Returns (tiles_processed, chunks_written).

def _mac_pass_loops(chunk_ids, chunk_ptr, t_start, t_end,
                    e_src, e_dst_local, e_cell, x, dst, const_raw, cng):
    wide = np.zeros(cng, np.int64)
    rego = np.zeros(cng, np.int64)
    tiles = 0
    chunks_written = 0
    for ci in range(chunk_ids.shape[0]):
        c = chunk_ids[ci]
        lo = chunk_ptr[c]
        hi = chunk_ptr[c + 1]
        if lo == hi:
            continue
        for j in range(cng):
            rego[j] = 0
        for t in range(lo, hi):
            s = t_start[t]
            e = t_end[t]
            for k in range(s, e):
                wide[e_dst_local[k]] += e_cell[k] * x[e_src[k]]
            for k in range(s, e):
                j = e_dst_local[k]
                w = wide[j]
                if w != 0:
                    wide[j] = 0
                    q = w >> 16
                    rem = w & 0xFFFF
                    if rem > 0x8000 or (rem == 0x8000 and (q & 1) == 1):
                        q += 1
                    v = rego[j] + q
                    rego[j] = 65535 if v > 65535 else v
            tiles += 1
        base = c * cng
        for j in range(cng):
            v = rego[j] + const_raw
            dst[base + j] = 65535 if v > 65535 else v
        chunks_written += 1
    return tiles, chunks_written


def _segment_expand(starts, lengths):
    """Concatenate ranges [starts[i], starts[i]+lengths[i]) as one index array."""
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.zeros(lengths.shape[0], dtype=np.int64)
    np.cumsum(lengths[:-1], out=offsets[1:])
    pos = np.arange(total, dtype=np.int64) - np.repeat(offsets, lengths)
    return np.repeat(starts, lengths) + pos


_ROUND_HALF = 0x8000
_NUMPY_MAC_BATCH_CELLS = 1 << 22


def _mac_pass_numpy(chunk_ids, chunk_ptr, t_start, t_end,
                    e_src, e_dst_local, e_cell, x, dst, const_raw, cng):
    counts = chunk_ptr[chunk_ids + 1] - chunk_ptr[chunk_ids]
    live = counts > 0
    chunk_ids = chunk_ids[live]
    counts = counts[live]
    if chunk_ids.size == 0:
        return 0, 0
    tiles = _segment_expand(chunk_ptr[chunk_ids], counts)
    dst2d = dst.reshape(-1, cng)
    # batch over whole chunks so per-chunk reductions stay in one pass
    tile_off = np.zeros(chunk_ids.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=tile_off[1:])
    batch_chunks = max(1, _NUMPY_MAC_BATCH_CELLS // max(int(counts.max()), 1) // cng)
    done_tiles = 0
    for b0 in range(0, chunk_ids.shape[0], batch_chunks):
        b1 = min(b0 + batch_chunks, chunk_ids.shape[0])
        bt = tiles[tile_off[b0]:tile_off[b1]]
        bcounts = counts[b0:b1]
        lens = t_end[bt] - t_start[bt]
        eidx = _segment_expand(t_start[bt], lens)
        tloc = np.repeat(np.arange(bt.shape[0], dtype=np.int64), lens)
        key = tloc * cng + e_dst_local[eidx]
        wide = np.zeros(bt.shape[0] * cng, dtype=np.int64)
        np.add.at(wide, key, e_cell[eidx] * x[e_src[eidx]])
        q = wide >> 16
        rem = wide & 0xFFFF
        q += (rem > _ROUND_HALF) | ((rem == _ROUND_HALF) & ((q & 1) == 1))
        q = q.reshape(bt.shape[0], cng)
        starts = np.zeros(bcounts.shape[0], dtype=np.int64)
        np.cumsum(bcounts[:-1], out=starts[1:])
        sums = np.add.reduceat(q, starts, axis=0)
        dst2d[chunk_ids[b0:b1]] = np.minimum(sums + const_raw, RAW_MAX)
        done_tiles += int(bt.shape[0])
    return done_tiles, int(chunk_ids.shape[0])


# ---- Relax (row-select add/min) iteration -----------------------------------
#
# For every non-empty tile with at least one active source row, relax each
# active source's edges: candidate = sat_add(weight, dist), keep if strictly
# smaller.  dst must start as a copy of the source properties.  Returns
# (tiles_processed, tiles_inactive, row_slots).

def _relax_pass_loops(chunk_ids, chunk_ptr, t_start, t_end, t_row_base, c_dim,
                      e_src, e_dst, e_w, prop, active, dst):
    tiles = 0
    inactive = 0
    slots = 0
    for ci in range(chunk_ids.shape[0]):
        c = chunk_ids[ci]
        for t in range(chunk_ptr[c], chunk_ptr[c + 1]):
            rb = t_row_base[t]
            a = 0
            for r in range(c_dim):
                if active[rb + r] != 0:
                    a += 1
            if a == 0:
                inactive += 1
                continue
            tiles += 1
            slots += a
            for k in range(t_start[t], t_end[t]):
                u = e_src[k]
                if active[u] != 0:
                    cand = e_w[k] + prop[u]
                    if cand > 65535:
                        cand = 65535
                    j = e_dst[k]
                    if cand < dst[j]:
                        dst[j] = cand
    return tiles, inactive, slots


def _relax_pass_numpy(chunk_ids, chunk_ptr, t_start, t_end, t_row_base, c_dim,
                      e_src, e_dst, e_w, prop, active, dst):
    counts = chunk_ptr[chunk_ids + 1] - chunk_ptr[chunk_ids]
    tiles = _segment_expand(chunk_ptr[chunk_ids], counts)
    if tiles.size == 0:
        return 0, 0, 0
    act_per_row = active.reshape(-1, c_dim).sum(axis=1, dtype=np.int64)
    a_t = act_per_row[t_row_base[tiles] // c_dim]
    live = a_t > 0
    n_live = int(np.count_nonzero(live))
    n_inactive = int(tiles.shape[0] - n_live)
    slots = int(a_t[live].sum())
    bt = tiles[live]
    lens = t_end[bt] - t_start[bt]
    eidx = _segment_expand(t_start[bt], lens)
    src = e_src[eidx]
    mask = active[src] != 0
    src = src[mask]
    eidx = eidx[mask]
    cand = np.minimum(e_w[eidx] + prop[src], RAW_MAX)
    np.minimum.at(dst, e_dst[eidx], cand)
    return n_live, n_inactive, slots


if _HAVE_NUMBA:
    _mac_pass_numba = numba.njit(cache=True)(_mac_pass_loops)
    _relax_pass_numba = numba.njit(cache=True)(_relax_pass_loops)


def mac_pass(chunk_ids, chunk_ptr, t_start, t_end,
             e_src, e_dst_local, e_cell, x, dst, const_raw, cng):
    if get_backend() == "numba":
        return _mac_pass_numba(chunk_ids, chunk_ptr, t_start, t_end,
                               e_src, e_dst_local, e_cell, x, dst,
                               const_raw, cng)
    return _mac_pass_numpy(chunk_ids, chunk_ptr, t_start, t_end,
                           e_src, e_dst_local, e_cell, x, dst,
                           const_raw, cng)


def relax_pass(chunk_ids, chunk_ptr, t_start, t_end, t_row_base, c_dim,
               e_src, e_dst, e_w, prop, active, dst):
    if get_backend() == "numba":
        return _relax_pass_numba(chunk_ids, chunk_ptr, t_start, t_end,
                                 t_row_base, c_dim, e_src, e_dst, e_w,
                                 prop, active, dst)
    return _relax_pass_numpy(chunk_ids, chunk_ptr, t_start, t_end,
                             t_row_base, c_dim, e_src, e_dst, e_w,
                             prop, active, dst)


def warm_up() -> None:
    """Trigger numba compilation on trivial inputs (no-op on numpy path)."""
    if get_backend() != "numba":
        return
    z = np.zeros(1, dtype=np.int64)
    zero8 = np.zeros(1, dtype=np.uint8)
    ptr = np.zeros(2, dtype=np.int64)
    _mac_pass_numba(z, ptr, z, z, z, z, z, z, np.zeros(1, np.int64), 0, 1)
    _relax_pass_numba(z, ptr, z, z, z, 1, z, z, z, z, zero8,
                      np.zeros(1, np.int64))
