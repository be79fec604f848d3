"""Minimum set cover over packed bitsets.

Exact mode runs branch and bound seeded by the greedy cover, with the
max-coverage lower bound ceil(uncovered / best_gain); greedy mode returns the
classical ln(n)+1-approximate cover.  All tie-breaking is by lowest candidate
index, so results are deterministic and independent of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import n_packed_words, pack_bool_rows, popcount_rows, unpack_bits
from .errors import InfeasibleCoverError

_DOMINANCE_CAP = 12000


@dataclass(eq=False)
class CoverInstance:
    """Elements 0..n-1 with per-candidate coverage bitsets (packed uint64)."""

    n_elements: int
    coverage: np.ndarray
    candidates: list = field(default_factory=list)

    @classmethod
    def from_bool(cls, mask: np.ndarray, candidates=None):
        mask = np.atleast_2d(np.asarray(mask, dtype=bool))
        return cls(mask.shape[1], pack_bool_rows(mask), list(candidates or range(mask.shape[0])))

    def uncovered_elements(self):
        if self.coverage.shape[0] == 0:
            return list(range(self.n_elements))
        union = np.bitwise_or.reduce(self.coverage, axis=0)
        bits = unpack_bits(union.reshape(1, -1), self.n_elements)[0]
        return np.nonzero(~bits)[0].tolist()

    def check_feasible(self):
        missing = self.uncovered_elements()
        if missing:
            raise InfeasibleCoverError(
                "infeasible cover instance: %d uncovered elements (first: %s)"
                % (len(missing), missing[:10]),
                uncovered=missing,
            )


@dataclass
class CoverResult:
    """Selected candidate indices (ascending) plus element -> word selector."""

    indices: list
    selector: np.ndarray
    mode: str

    @property
    def size(self):
        return len(self.indices)


def min_cover(instance: CoverInstance, mode: str = "exact") -> CoverResult:
    """Minimum (exact) or greedy cover of all elements."""
    if mode not in ("exact", "greedy"):
        raise ValueError("mode must be 'exact' or 'greedy'")
    instance.check_feasible()
    cov = np.ascontiguousarray(instance.coverage, dtype=np.uint64)
    ne = instance.n_elements

    keep = _preprocess(cov, exact=(mode == "exact"))
    sub = cov[keep]

    pops = popcount_rows(sub)
    if int(pops.max()) == ne:
        # a single candidate covers everything; optimal in either mode
        chosen_local = [int(np.argmax(pops == ne))]
    else:
        greedy_local = _greedy_cover(sub, ne)
        if mode == "greedy":
            chosen_local = greedy_local
        else:
            chosen_local = _branch_and_bound(sub, ne, greedy_local)

    indices = sorted(int(keep[i]) for i in chosen_local)
    selector = _build_selector(cov, indices, ne)
    return CoverResult(indices=indices, selector=selector, mode=mode)


# ---------------------------------------------------------------------------


def _preprocess(cov, exact):
    """Drop empty rows, duplicates, and (in exact mode) dominated rows.
    Returns original indices of survivors, ascending."""
    pops = popcount_rows(cov)
    nonempty = np.nonzero(pops > 0)[0]
    rows = cov[nonempty]
    _, first = np.unique(rows, axis=0, return_index=True)
    keep = nonempty[np.sort(first)]
    if not exact or keep.shape[0] > _DOMINANCE_CAP or keep.shape[0] <= 1:
        return keep
    rows = cov[keep]
    n = rows.shape[0]
    dominated = np.zeros(n, dtype=bool)
    neg = ~rows
    chunk = max(1, 4_000_000 // max(1, n * rows.shape[1]))
    for s in range(0, n, chunk):
        block = rows[s : s + chunk]  # (c, nw)
        # subset[i, j] == True iff block row i is contained in row j
        subset = np.logical_not(np.any(block[:, None, :] & neg[None, :, :], axis=2))
        subset[np.arange(block.shape[0]), s + np.arange(block.shape[0])] = False
        dominated[s : s + chunk] = subset.any(axis=1)
    # equal rows were removed, so subset relations here are strict
    return keep[~dominated]


def _greedy_cover(cov, ne):
    nw = n_packed_words(ne)
    uncovered = _full_mask(ne, nw)
    chosen = []
    while uncovered.any():
        gains = popcount_rows(cov & uncovered)
        best = int(np.argmax(gains))
        if gains[best] == 0:
            raise InfeasibleCoverError("greedy stalled with uncovered elements")
        chosen.append(best)
        uncovered &= ~cov[best]
    return chosen


def _branch_and_bound(cov, ne, greedy_solution):
    nw = n_packed_words(ne)
    full = _full_mask(ne, nw)
    bits = unpack_bits(cov, ne)
    cover_lists = [np.nonzero(bits[:, e])[0] for e in range(ne)]
    order_pop = popcount_rows(cov)
    for e in range(ne):
        lst = cover_lists[e]
        cover_lists[e] = lst[np.lexsort((lst, -order_pop[lst]))]
    # conflict[e]: elements sharing a covering candidate with e; a set of
    # pairwise non-conflicting uncovered elements lower-bounds the cover size
    conflict = np.zeros((ne, nw), dtype=np.uint64)
    for e in range(ne):
        if cover_lists[e].shape[0]:
            conflict[e] = np.bitwise_or.reduce(cov[cover_lists[e]], axis=0)

    best = {"size": len(greedy_solution), "sol": list(greedy_solution)}

    def independence_bound(uncovered, elems):
        tmp = uncovered.copy()
        count = 0
        for e in elems:
            if (tmp[e >> 6] >> np.uint64(e & 63)) & np.uint64(1):
                count += 1
                tmp &= ~conflict[e]
        return count

    def recurse(uncovered, chosen):
        unc_bits = unpack_bits(uncovered.reshape(1, -1), ne)[0]
        elems = np.nonzero(unc_bits)[0]
        if elems.shape[0] == 0:
            if len(chosen) < best["size"]:
                best["size"] = len(chosen)
                best["sol"] = list(chosen)
            return
        gains = popcount_rows(cov & uncovered)
        max_gain = int(gains.max())
        if max_gain == 0:
            return
        lower = max(-(-int(elems.shape[0]) // max_gain),
                    independence_bound(uncovered, elems))
        if len(chosen) + lower >= best["size"]:
            return
        # branch on the uncovered element with fewest useful covering candidates
        pick, pick_count = -1, None
        for e in elems:
            cnt = int((gains[cover_lists[e]] > 0).sum())
            if pick_count is None or cnt < pick_count:
                pick, pick_count = int(e), cnt
                if cnt <= 1:
                    break
        for c in cover_lists[pick]:
            if gains[c] == 0:
                continue
            chosen.append(int(c))
            recurse(uncovered & ~cov[c], chosen)
            chosen.pop()

    recurse(full, [])
    return best["sol"]


def _build_selector(cov, indices, ne):
    selector = np.full(ne, -1, dtype=np.int64)
    covered = np.zeros(ne, dtype=bool)
    for pos, idx in enumerate(indices):
        bits = unpack_bits(cov[idx].reshape(1, -1), ne)[0]
        fresh = bits & ~covered
        selector[fresh] = pos
        covered |= bits
    return selector


def _full_mask(ne, nw):
    mask = np.zeros((1, ne), dtype=bool)
    mask[:] = True
    return pack_bool_rows(mask)[0]
