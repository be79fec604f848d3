"""Hot numeric kernels with numba and pure-numpy backends.

Every kernel exists in two equivalent implementations. The numba path is
used by default; setting the environment variable ``INVARION_NO_NUMBA`` to a
truthy value (or a failed numba import) selects the pure-numpy fallback.
``benchmarks/bench_kernels.py`` compares the two.

Bit packing convention: coverage masks over grid elements are packed into
little-endian uint64 rows, bit ``e`` lives at word ``e >> 6``, bit ``e & 63``.
"""

from __future__ import annotations

import os

import numpy as np

_NO_NUMBA = os.environ.get("INVARION_NO_NUMBA", "").strip() not in ("", "0", "false", "False")

if not _NO_NUMBA:
    try:
        from numba import njit, prange, set_num_threads  # noqa: F401

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - exercised only without numba
        _NO_NUMBA = True

if _NO_NUMBA:
    BACKEND = "numpy"

    def set_num_threads(n):  # noqa: D103 - numba shim
        pass


_THREADS = os.environ.get("INVARION_THREADS", "").strip()
if BACKEND == "numba" and _THREADS:
    set_num_threads(max(1, int(_THREADS)))


# ---------------------------------------------------------------------------
# packing utilities (numpy, shared by both backends)

def n_packed_words(n_elements: int) -> int:
    return (n_elements + 63) >> 6


def pack_bool_rows(mask: np.ndarray) -> np.ndarray:
    """Pack a (rows, n_elements) bool array into (rows, nw64) uint64."""
    mask = np.ascontiguousarray(mask, dtype=bool)
    rows, ne = mask.shape
    nw = n_packed_words(ne)
    padded = np.zeros((rows, nw * 64), dtype=np.uint64)
    padded[:, :ne] = mask
    shifts = np.arange(64, dtype=np.uint64)
    chunks = padded.reshape(rows, nw, 64) << shifts
    return np.bitwise_or.reduce(chunks, axis=2)


def unpack_bits(packed: np.ndarray, n_elements: int) -> np.ndarray:
    """Inverse of pack_bool_rows."""
    packed = np.atleast_2d(packed)
    rows, nw = packed.shape
    shifts = np.arange(64, dtype=np.uint64)
    bits = (packed[:, :, None] >> shifts) & np.uint64(1)
    return bits.reshape(rows, nw * 64)[:, :n_elements].astype(bool)


def popcount_rows(packed: np.ndarray) -> np.ndarray:
    """Number of set bits per row of a packed uint64 array."""
    return np.bitwise_count(packed).sum(axis=-1).astype(np.int64)


# ---------------------------------------------------------------------------
# kernel: trajectories of a batch of words through x' = Ax + Bu inside a box

def _stay_linear_box_np(entries, cvals, a_mat, b_mat, x0, lo_eff, hi_eff):
    nw, tau = entries.shape
    ne = x0.shape[0]
    out = np.empty((nw, n_packed_words(ne)), dtype=np.uint64)
    chunk = max(1, int(4_000_000 // max(1, ne)))
    for s in range(0, nw, chunk):
        ent = entries[s : s + chunk]
        x = np.broadcast_to(x0, (ent.shape[0],) + x0.shape).copy()
        alive = np.ones((ent.shape[0], ne), dtype=bool)
        for k in range(tau):
            u = cvals[ent[:, k]]
            x = x @ a_mat.T + (u @ b_mat.T)[:, None, :]
            inside = np.logical_and(x > lo_eff, x < hi_eff).all(axis=2)
            alive &= inside
        out[s : s + chunk] = pack_bool_rows(alive)
    return out


def _stay_circle_pair_band_np(ent1, ent2, cv1, cv2, alpha1, alpha2, x1s, x2s, width):
    nw, tau = ent1.shape
    ne = x1s.shape[0]
    out = np.empty((nw, n_packed_words(ne)), dtype=np.uint64)
    chunk = max(1, int(4_000_000 // max(1, ne)))
    for s in range(0, nw, chunk):
        e1 = ent1[s : s + chunk]
        e2 = ent2[s : s + chunk]
        a = np.broadcast_to(x1s, (e1.shape[0], ne)).copy()
        b = np.broadcast_to(x2s, (e1.shape[0], ne)).copy()
        alive = np.ones((e1.shape[0], ne), dtype=bool)
        for k in range(tau):
            a = (alpha1 * a + cv1[e1[:, k]][:, None]) % 1.0
            b = (alpha2 * b + cv2[e2[:, k]][:, None]) % 1.0
            d = np.abs(a - b)
            d = np.minimum(d, 1.0 - d)
            alive &= d < width
        out[s : s + chunk] = pack_bool_rows(alive)
    return out


def _combine_product_stay_np(s1, s2, e1, e2):
    mask = s1[:, e1] & s2[:, e2]
    return pack_bool_rows(mask)


def _band_cover_update_np(t1w, t2, e1, e2, width, out):
    # element e covered by word w2 iff the (w1, w2) pair keeps it in the band
    a = t1w[e1]  # (ne, tau)
    p2 = t2.shape[0]
    ne = e1.shape[0]
    chunk = max(1, int(4_000_000 // max(1, ne)))
    for s in range(0, p2, chunk):
        b = t2[s : s + chunk][:, e2, :]  # (c, ne, tau)
        d = np.abs(a[None, :, :] - b) % 1.0
        d = np.minimum(d, 1.0 - d)
        cov = (d < width).all(axis=2)
        out[s : s + chunk] |= pack_bool_rows(cov)
    return out


def _band_pair_bits_np(t1, t2e, e1, e2, width):
    p1 = t1.shape[0]
    p2e = t2e.shape[0]
    ne = e1.shape[0]
    out = np.empty((p1, p2e, n_packed_words(ne)), dtype=np.uint64)
    b = t2e[:, e2, :]  # (p2e, ne, tau)
    for i in range(p1):
        a = t1[i][e1]  # (ne, tau)
        d = np.abs(a[None, :, :] - b) % 1.0
        d = np.minimum(d, 1.0 - d)
        out[i] = pack_bool_rows((d < width).all(axis=2))
    return out


def _dp_backward_np(succ, slices):
    nw, nx1, tau, ncells = slices.shape
    flat = slices.reshape(nw * nx1, tau, ncells)
    g = flat[:, tau - 1, :].copy()
    for k in range(tau - 2, -1, -1):
        pre = g[:, succ].any(axis=2)  # (rows, ncells)
        g = flat[:, k, :] & pre
    feas = g[:, succ].any(axis=2)
    return feas.reshape(nw, nx1, ncells)


if BACKEND == "numba":

    @njit(cache=True, parallel=True)
    def _stay_linear_box_nb(entries, cvals, a_mat, b_mat, x0, lo_eff, hi_eff):
        nw, tau = entries.shape
        ne, d = x0.shape
        m = b_mat.shape[1]
        nwords = (ne + 63) >> 6
        out = np.zeros((nw, nwords), dtype=np.uint64)
        for w in prange(nw):
            x = np.empty(d)
            xn = np.empty(d)
            for e in range(ne):
                for i in range(d):
                    x[i] = x0[e, i]
                ok = True
                for k in range(tau):
                    ui = entries[w, k]
                    for i in range(d):
                        acc = 0.0
                        for j in range(d):
                            acc += a_mat[i, j] * x[j]
                        for l in range(m):
                            acc += b_mat[i, l] * cvals[ui, l]
                        xn[i] = acc
                    for i in range(d):
                        x[i] = xn[i]
                        if not (lo_eff[i] < x[i] < hi_eff[i]):
                            ok = False
                    if not ok:
                        break
                if ok:
                    out[w, e >> 6] |= np.uint64(1) << np.uint64(e & 63)
        return out

    @njit(cache=True, parallel=True)
    def _stay_circle_pair_band_nb(ent1, ent2, cv1, cv2, alpha1, alpha2, x1s, x2s, width):
        nw, tau = ent1.shape
        ne = x1s.shape[0]
        nwords = (ne + 63) >> 6
        out = np.zeros((nw, nwords), dtype=np.uint64)
        for w in prange(nw):
            for e in range(ne):
                a = x1s[e]
                b = x2s[e]
                ok = True
                for k in range(tau):
                    a = (alpha1 * a + cv1[ent1[w, k]]) % 1.0
                    b = (alpha2 * b + cv2[ent2[w, k]]) % 1.0
                    dd = abs(a - b)
                    if dd > 0.5:
                        dd = 1.0 - dd
                    if dd >= width:
                        ok = False
                        break
                if ok:
                    out[w, e >> 6] |= np.uint64(1) << np.uint64(e & 63)
        return out

    @njit(cache=True, parallel=True)
    def _combine_product_stay_nb(s1, s2, e1, e2):
        nw = s1.shape[0]
        ne = e1.shape[0]
        nwords = (ne + 63) >> 6
        out = np.zeros((nw, nwords), dtype=np.uint64)
        for w in prange(nw):
            for e in range(ne):
                if s1[w, e1[e]] and s2[w, e2[e]]:
                    out[w, e >> 6] |= np.uint64(1) << np.uint64(e & 63)
        return out

    @njit(cache=True, parallel=True)
    def _band_cover_update_nb(t1w, t2, e1, e2, width, out):
        p2 = t2.shape[0]
        ne = e1.shape[0]
        tau = t1w.shape[1]
        for w2 in prange(p2):
            for e in range(ne):
                word = e >> 6
                bit = np.uint64(1) << np.uint64(e & 63)
                if out[w2, word] & bit:
                    continue
                i1 = e1[e]
                i2 = e2[e]
                ok = True
                for k in range(tau):
                    dd = abs(t1w[i1, k] - t2[w2, i2, k]) % 1.0
                    if dd > 0.5:
                        dd = 1.0 - dd
                    if dd >= width:
                        ok = False
                        break
                if ok:
                    out[w2, word] |= bit
        return out

    @njit(cache=True, parallel=True)
    def _band_pair_bits_nb(t1, t2e, e1, e2, width):
        p1 = t1.shape[0]
        p2e = t2e.shape[0]
        ne = e1.shape[0]
        tau = t1.shape[2]
        nwords = (ne + 63) >> 6
        out = np.zeros((p1, p2e, nwords), dtype=np.uint64)
        for i in prange(p1):
            for j in range(p2e):
                for e in range(ne):
                    i1 = e1[e]
                    i2 = e2[e]
                    ok = True
                    for k in range(tau):
                        dd = abs(t1[i, i1, k] - t2e[j, i2, k]) % 1.0
                        if dd > 0.5:
                            dd = 1.0 - dd
                        if dd >= width:
                            ok = False
                            break
                    if ok:
                        out[i, j, e >> 6] |= np.uint64(1) << np.uint64(e & 63)
        return out

    @njit(cache=True, parallel=True)
    def _dp_backward_nb(succ, slices):
        nw, nx1, tau, ncells = slices.shape
        nctrl = succ.shape[1]
        feas = np.zeros((nw, nx1, ncells), dtype=np.bool_)
        for w in prange(nw):
            g = np.empty(ncells, dtype=np.bool_)
            gn = np.empty(ncells, dtype=np.bool_)
            for a in range(nx1):
                for c in range(ncells):
                    g[c] = slices[w, a, tau - 1, c]
                for k in range(tau - 2, -1, -1):
                    for c in range(ncells):
                        hit = False
                        if slices[w, a, k, c]:
                            for u in range(nctrl):
                                if g[succ[c, u]]:
                                    hit = True
                                    break
                        gn[c] = hit
                    for c in range(ncells):
                        g[c] = gn[c]
                for c in range(ncells):
                    hit = False
                    for u in range(nctrl):
                        if g[succ[c, u]]:
                            hit = True
                            break
                    feas[w, a, c] = hit
        return feas

    stay_linear_box = _stay_linear_box_nb
    stay_circle_pair_band = _stay_circle_pair_band_nb
    combine_product_stay = _combine_product_stay_nb
    band_cover_update = _band_cover_update_nb
    band_pair_bits = _band_pair_bits_nb
    dp_backward = _dp_backward_nb
else:
    stay_linear_box = _stay_linear_box_np
    stay_circle_pair_band = _stay_circle_pair_band_np
    combine_product_stay = _combine_product_stay_np
    band_cover_update = _band_cover_update_np
    band_pair_bits = _band_pair_bits_np
    dp_backward = _dp_backward_np


NUMPY_KERNELS = {
    "stay_linear_box": _stay_linear_box_np,
    "stay_circle_pair_band": _stay_circle_pair_band_np,
    "combine_product_stay": _combine_product_stay_np,
    "band_cover_update": _band_cover_update_np,
    "band_pair_bits": _band_pair_bits_np,
    "dp_backward": _dp_backward_np,
}
