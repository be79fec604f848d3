"""Finite-time entropy vector frontiers for product systems.

A frontier point is (1/tau)(log2 #S_1, ..., log2 #S_n) for a product word
family S_1 x ... x S_n that keeps every grid point of Q in the interior for
tau steps.  The sweep upper-bounds the true frontier: component-1 sets are
grown greedily (by joint coverage potential over an evaluation pool, refined
by local swaps at small budgets) and the other component is completed by a
minimum-cover run.  Exact enumeration is available for tiny instances.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InfeasibleCoverError
from .regions import Box, CircleBand, GridRegion
from .setcover import CoverInstance, min_cover
from .spanning import (
    DEFAULT_POOL_CAP,
    chunked_unique_coverage,
    stay_packed,
    word_pool,
    words_from_entries,
)
from .systems import CircleSystem, ControlWord, LinearSystem, ProductSystem

_SWAP_BUDGET_CAP = 8


@dataclass
class FrontierPoint:
    tau: int
    vector: tuple
    witnesses: list  # per-component lists of ControlWord
    meta: dict = field(default_factory=dict)

    @property
    def sizes(self):
        return tuple(len(w) for w in self.witnesses)

    def to_json_dict(self):
        return {
            "tau": self.tau,
            "vector_bits_per_step": list(self.vector),
            "sizes": list(self.sizes),
            "witnesses": [[list(w.entries) for w in ws] for ws in self.witnesses],
            "meta": {k: v for k, v in self.meta.items()},
        }


@dataclass
class EntropyFrontier:
    tau: int
    points: list
    meta: dict = field(default_factory=dict)


def pareto_filter(points):
    """Drop points dominated componentwise by another point."""
    kept = []
    for p in points:
        dominated = False
        for q in points:
            if q is p:
                continue
            qv, pv = q.vector, p.vector
            if all(a <= b for a, b in zip(qv, pv)) and qv != pv:
                dominated = True
                break
        if not dominated and all(p.vector != k.vector for k in kept):
            kept.append(p)
    return kept


# ---------------------------------------------------------------------------
# pairwise coverage machinery for two components

class _PairMachinery:
    """Coverage of grid elements by (word_1, word_2) pairs for a 2-way split
    of the components."""

    def __init__(self, system, region, pools, margin=None):
        if not isinstance(system, ProductSystem) or system.n_components != 2:
            raise ValueError("pair machinery needs a 2-component product")
        self.system = system
        self.region = region
        self.margin = region.margin if margin is None else float(margin)
        self.pools = pools
        self.entries = [p.entries for p in pools]
        self.ne = region.n_elements()
        comps = system.components
        cells = region.grid_cells()
        self.band = isinstance(region.shape, CircleBand) and all(
            isinstance(c, CircleSystem) for c in comps
        )
        self.generic = False
        if self.band:
            self.width = region.shape.delta - self.margin
            self.e1 = np.ascontiguousarray(cells[:, 0], dtype=np.int32)
            self.e2 = np.ascontiguousarray(cells[:, 1], dtype=np.int32)
            self.traj = [self._circle_traj(comps[i], region, i, self.entries[i]) for i in range(2)]
            self.stay = None
        elif isinstance(region.shape, Box) and all(isinstance(c, LinearSystem) for c in comps):
            self.stay, self.emap = [], []
            for i in range(2):
                axes = list(range(*system.component_slice(i).indices(system.state_dim)))
                sub = region.project(axes)
                packed = stay_packed(comps[i], sub, self.entries[i], margin=self.margin)
                self.stay.append(K.unpack_bits(packed, sub.n_elements()))
                dims = tuple(sub.resolution)
                self.emap.append(
                    np.ravel_multi_index(tuple(cells[:, a] for a in axes), dims).astype(np.int64)
                )
        else:
            # generic slow path: joint simulation per pair (small pools only)
            self.generic = True
            if len(pools[0]) * len(pools[1]) > 1 << 16:
                raise ValueError(
                    "generic frontier machinery needs pool_1 x pool_2 <= 65536 pairs"
                )

    def _joint_rows(self, idx1, idx2):
        n1, n2 = len(idx1), len(idx2)
        e1 = np.repeat(self.entries[0][idx1].astype(np.int64), n2, axis=0)
        e2 = np.tile(self.entries[1][idx2].astype(np.int64), (n1, 1))
        joint = self.system.join_entries([e1, e2]).astype(np.int32)
        return stay_packed(self.system, self.region, joint, margin=self.margin)

    @staticmethod
    def _circle_traj(comp, region, axis, entries):
        starts = region.axis_grid(axis)
        nw, tau = entries.shape
        x = np.broadcast_to(starts, (nw, starts.shape[0])).copy()
        out = np.empty((nw, starts.shape[0], tau))
        for k in range(tau):
            u = comp.controls[entries[:, k], 0]
            x = (comp.alpha * x + u[:, None]) % 1.0
            out[:, :, k] = x
        return out

    def pair_bits(self, idx1, idx2):
        """Packed coverage bitsets for the pair grid idx1 x idx2, shaped
        (len(idx1), len(idx2), nw64)."""
        idx1 = np.asarray(idx1, dtype=np.int64)
        idx2 = np.asarray(idx2, dtype=np.int64)
        if self.band:
            return K.band_pair_bits(
                np.ascontiguousarray(self.traj[0][idx1]),
                np.ascontiguousarray(self.traj[1][idx2]),
                self.e1, self.e2, self.width,
            )
        if self.generic:
            rows = self._joint_rows(idx1, idx2)
            return rows.reshape(len(idx1), len(idx2), -1)
        out = np.empty((len(idx1), len(idx2), K.n_packed_words(self.ne)), dtype=np.uint64)
        s2 = self.stay[1][idx2][:, self.emap[1]]
        for r, w1 in enumerate(idx1):
            cov = self.stay[0][w1][self.emap[0]] & s2
            out[r] = K.pack_bool_rows(cov)
        return out

    def cover_update(self, w1, cov2):
        """OR into cov2 (packed, per pool-2 word) the elements the pairs
        (w1, .) cover."""
        if self.band:
            K.band_cover_update(
                np.ascontiguousarray(self.traj[0][w1]), self.traj[1],
                self.e1, self.e2, self.width, cov2,
            )
            return cov2
        if self.generic:
            cov2 |= self._joint_rows([w1], np.arange(len(self.pools[1])))
            return cov2
        cov = self.stay[0][w1][self.emap[0]] & self.stay[1][:, self.emap[1]]
        cov2 |= K.pack_bool_rows(cov)
        return cov2

    def cover_given(self, sel1):
        """Packed coverage per pool-2 word given the component-1 set sel1."""
        cov2 = np.zeros((len(self.pools[1]), K.n_packed_words(self.ne)), dtype=np.uint64)
        for w1 in sel1:
            self.cover_update(int(w1), cov2)
        return cov2


# ---------------------------------------------------------------------------
# greedy selection of component-1 sets

def _lazy_greedy_order(bits, m_max):
    """Greedy order of pool-1 words by marginal joint-coverage potential.
    bits: packed pair coverage (p1, p2e, nw)."""
    p1 = bits.shape[0]
    state = np.zeros(bits.shape[1:], dtype=np.uint64)
    gains = K.popcount_rows(bits.reshape(p1, -1)).astype(np.int64)
    heap = [(-g, i) for i, g in enumerate(gains)]
    heapq.heapify(heap)
    order = []
    chosen = np.zeros(p1, dtype=bool)
    while heap and len(order) < m_max:
        negg, i = heapq.heappop(heap)
        if chosen[i]:
            continue
        fresh = int(K.popcount_rows((bits[i] & ~state).reshape(1, -1))[0])
        if heap and fresh < -heap[0][0]:
            heapq.heappush(heap, (-fresh, i))
            continue
        order.append(i)
        chosen[i] = True
        state |= bits[i]
    return order


def _swap_refine(bits, selection, rounds=1):
    """Single-swap hill climbing on the joint-coverage potential."""
    sel = list(selection)
    p1 = bits.shape[0]

    def potential(idxs):
        if not idxs:
            return 0
        acc = bits[idxs[0]].copy()
        for j in idxs[1:]:
            acc |= bits[j]
        return int(K.popcount_rows(acc.reshape(1, -1))[0])

    best = potential(sel)
    for _ in range(rounds):
        improved = False
        for pos in range(len(sel)):
            for cand in range(p1):
                if cand in sel:
                    continue
                trial = sel[:pos] + [cand] + sel[pos + 1 :]
                val = potential(trial)
                if val > best:
                    sel, best, improved = trial, val, True
                    break
        if not improved:
            break
    return sel


# ---------------------------------------------------------------------------
# the sweep

def default_budgets(limit):
    small = list(range(1, min(limit, 8) + 1))
    out = list(small)
    step = 12
    for m in (12, 16, 24, 32, 48, 64, 96, 128, 192, 256):
        if 8 < m <= limit:
            out.append(m)
    return out


def frontier(system, region: GridRegion, tau: int, pools=None, budgets=None,
             pool_size: int = 1024, eval_pool: int = 32, seed: int = 0,
             margin=None, cover_mode: str = "greedy", mode: str = "sweep",
             swap_budget_cap: int = _SWAP_BUDGET_CAP,
             endpoint_anchors: bool = True, anchor_pool_cap: int = 1 << 19):
    """Pareto points of achievable per-component word-set sizes at horizon tau.

    The sweep is an upper bound on the true finite-time frontier; `mode='exact'`
    enumerates all component-1 subsets (grids <= 64 elements, pools <= 12).
    With endpoint_anchors (2 components), the sweep is augmented by the two
    single-word-anchored completions computed against the large solver pool;
    these realize the low-rate ends of the frontier, which random sweep pools
    cannot reach at long horizons."""
    if not isinstance(system, ProductSystem):
        raise ValueError("frontier needs a product system")
    n = system.n_components
    if n == 2:
        return _frontier_two(system, region, tau, pools, budgets, pool_size,
                             eval_pool, seed, margin, cover_mode, mode,
                             swap_budget_cap, endpoint_anchors, anchor_pool_cap)
    return _frontier_grouped(system, region, tau, pools, budgets, pool_size,
                             eval_pool, seed, margin, cover_mode, swap_budget_cap)


def _make_pools(system, tau, pools, pool_size, seed):
    if pools is not None:
        return list(pools)
    return [
        word_pool(c.alphabet_size, tau, pool_size, seed + i)
        for i, c in enumerate(system.components)
    ]


def _frontier_two(system, region, tau, pools, budgets, pool_size, eval_pool,
                  seed, margin, cover_mode, mode, swap_budget_cap,
                  endpoint_anchors=False, anchor_pool_cap=1 << 19):
    pools = _make_pools(system, tau, pools, pool_size, seed)
    mach = _PairMachinery(system, region, pools, margin=margin)
    p1, p2 = len(pools[0]), len(pools[1])

    if mode == "exact":
        return _frontier_exact(system, region, tau, mach, pools)

    if budgets is None:
        budgets = default_budgets(p1)
    budgets = sorted({int(m) for m in budgets if 1 <= int(m) <= p1})

    eval_idx = np.unique(np.linspace(0, p2 - 1, min(eval_pool, p2)).astype(np.int64))
    bits = mach.pair_bits(np.arange(p1), eval_idx)  # (p1, p2e, nw)
    order = _lazy_greedy_order(bits, max(budgets))

    points, skipped = [], []
    cov2 = np.zeros((p2, K.n_packed_words(mach.ne)), dtype=np.uint64)
    done = 0
    for m in budgets:
        if m > len(order):
            break
        if m <= swap_budget_cap:
            sel = _swap_refine(bits, order[:m])
            m_cov = mach.cover_given(sel)
        else:
            while done < m:
                mach.cover_update(order[done], cov2)
                done += 1
            sel = order[:m]
            m_cov = cov2
        instance = CoverInstance(mach.ne, m_cov)
        try:
            result = min_cover(instance, mode=cover_mode)
        except InfeasibleCoverError as exc:
            skipped.append({"budget": m, "uncovered": len(exc.uncovered)})
            continue
        w1 = words_from_entries(mach.entries[0][sorted(sel)])
        w2 = words_from_entries(mach.entries[1][result.indices])
        vec = (math.log2(len(w1)) / tau, math.log2(len(w2)) / tau)
        points.append(FrontierPoint(tau, vec, [w1, w2], meta={"budget": m}))

    meta = {
        "skipped_budgets": skipped,
        "pool_sizes": [p1, p2],
        "pool_sampled": [bool(p.sampled) for p in pools],
        "pool_seeds": [p.seed for p in pools],
        "mode": "sweep",
    }
    if endpoint_anchors:
        meta["anchored_endpoints"] = []
        for anchor_comp in (1, 0):
            try:
                point = anchored_product_cover(
                    system, region, tau, anchor_comp,
                    pool_size=anchor_pool_cap, seed=seed, margin=margin,
                )
                points.append(point)
                meta["anchored_endpoints"].append(
                    {"anchor_component": anchor_comp, "sizes": list(point.sizes)}
                )
            except InfeasibleCoverError as exc:
                meta["anchored_endpoints"].append(
                    {"anchor_component": anchor_comp,
                     "infeasible": len(exc.uncovered)}
                )
    return EntropyFrontier(tau, pareto_filter(points), meta)


def _frontier_exact(system, region, tau, mach, pools):
    p1, p2 = len(pools[0]), len(pools[1])
    if region.n_elements() > 64 or p1 > 12 or p2 > 12:
        raise ValueError("exact frontier needs <= 64 elements and pools <= 12 words")
    bits = mach.pair_bits(np.arange(p1), np.arange(p2))  # (p1, p2, nw)
    best = {}
    for mask in range(1, 1 << p1):
        sel = [i for i in range(p1) if mask >> i & 1]
        cov2 = np.bitwise_or.reduce(bits[sel], axis=0)
        instance = CoverInstance(mach.ne, cov2)
        try:
            result = min_cover(instance, mode="exact")
        except InfeasibleCoverError:
            continue
        m1, m2 = len(sel), result.size
        if m1 not in best or m2 < best[m1][0]:
            best[m1] = (m2, sel, result.indices)
    points = []
    for m1, (m2, sel, idx2) in sorted(best.items()):
        w1 = words_from_entries(mach.entries[0][sel])
        w2 = words_from_entries(mach.entries[1][idx2])
        vec = (math.log2(m1) / tau, math.log2(m2) / tau)
        points.append(FrontierPoint(tau, vec, [w1, w2], meta={"exact": True}))
    return EntropyFrontier(tau, pareto_filter(points), {"mode": "exact"})


def _frontier_grouped(system, region, tau, pools, budgets, pool_size, eval_pool,
                      seed, margin, cover_mode, swap_budget_cap):
    """n > 2: treat components 2..n as one grouped component, then project the
    grouped witness per component.  Upper bound only."""
    comps = system.components
    rest = ProductSystem(comps[1:])
    grouped = ProductSystem((comps[0], rest))
    pools = pools or [
        word_pool(comps[0].alphabet_size, tau, pool_size, seed),
        word_pool(rest.alphabet_size, tau, pool_size, seed + 1),
    ]
    front = _frontier_two(grouped, region, tau, pools, budgets, pool_size,
                          eval_pool, seed, margin, cover_mode, "sweep", swap_budget_cap)
    points = []
    for p in front.points:
        grouped_words = p.witnesses[1]
        parts = [set() for _ in comps[1:]]
        for w in grouped_words:
            arr = np.asarray(w.entries, dtype=np.int64).reshape(1, -1)
            for j, sub in enumerate(rest.split_entries(arr)):
                parts[j].add(tuple(int(v) for v in sub[0]))
        witnesses = [p.witnesses[0]] + [
            [ControlWord(t) for t in sorted(ps)] for ps in parts
        ]
        vec = tuple(math.log2(len(ws)) / tau for ws in witnesses)
        points.append(FrontierPoint(tau, vec, witnesses,
                                    meta={**p.meta, "upper_bound_only": True}))
    meta = dict(front.meta)
    meta["upper_bound_only"] = True
    return EntropyFrontier(tau, pareto_filter(points), meta)


# ---------------------------------------------------------------------------
# product-witness verification and concatenation

def _joint_entries(system, witness_lists):
    """Combined-alphabet entries of all product words in W_1 x ... x W_n."""
    parts = [np.array([w.entries for w in ws], dtype=np.int64) for ws in witness_lists]
    idx = np.stack(
        np.meshgrid(*[np.arange(p.shape[0]) for p in parts], indexing="ij"), axis=-1
    ).reshape(-1, len(parts))
    rows = [parts[j][idx[:, j]] for j in range(len(parts))]
    return system.join_entries(rows), idx


def verify_product_spanning(system, region, witness_lists, margin=0.0):
    """Direct check that W_1 x ... x W_n spans the grid at the words' horizon.
    Returns (ok, uncovered elements, packed per-pair coverage, pair index)."""
    joint, idx = _joint_entries(system, witness_lists)
    packed = stay_packed(system, region, joint.astype(np.int32), margin=margin)
    union = np.bitwise_or.reduce(packed, axis=0)
    bits = K.unpack_bits(union.reshape(1, -1), region.n_elements())[0]
    return bool(bits.all()), np.nonzero(~bits)[0].tolist(), packed, idx


def concat_midpoint(system, region, point_a: FrontierPoint, point_b: FrontierPoint,
                    verify: str = "block", margin=None):
    """Concatenate two frontier witnesses at the same horizon into a witness at
    twice the horizon; the entropy vector is the arithmetic midpoint.

    verify='direct' simulates the concatenated product words from every grid
    point over 2*tau steps (margin 0).  verify='block' checks the operational
    composition instead: the first witness spans at margin, every handoff state
    stays in Q and snaps back onto the grid, and the second witness spans from
    the grid (this is the semantics the block-coding loop realizes; at coarse
    grids the direct check can fail where the block check passes).
    Returns (FrontierPoint at 2*tau, verified, diagnostics)."""
    if point_a.tau != point_b.tau:
        raise ValueError("witnesses must share one horizon")
    tau = point_a.tau
    witnesses = [
        [wa.concat(wb) for wa in wsa for wb in wsb]
        for wsa, wsb in zip(point_a.witnesses, point_b.witnesses)
    ]
    vector = tuple((a + b) / 2.0 for a, b in zip(point_a.vector, point_b.vector))
    point = FrontierPoint(2 * tau, vector, witnesses, meta={"concatenation": True})

    diagnostics = {}
    if verify == "direct":
        ok, uncovered, _, _ = verify_product_spanning(system, region, witnesses, margin=0.0)
        diagnostics["uncovered"] = len(uncovered)
    elif verify == "block":
        ok, diagnostics = _verify_block(system, region, point_a, point_b, margin=margin)
    else:
        raise ValueError("verify must be 'direct' or 'block'")
    point.meta["verified"] = ok
    point.meta["verify_mode"] = verify
    return point, ok, diagnostics


def _verify_block(system, region, point_a, point_b, margin=None):
    eps = region.margin if margin is None else margin
    grid = region.discretize()
    ok_a, unc_a, packed_a, idx_a = verify_product_spanning(
        system, region, point_a.witnesses, margin=eps
    )
    ok_b, unc_b, _, _ = verify_product_spanning(
        system, region, point_b.witnesses, margin=eps
    )
    diagnostics = {"first_uncovered": len(unc_a), "second_uncovered": len(unc_b)}
    if not (ok_a and ok_b):
        return False, diagnostics
    bits = K.unpack_bits(packed_a, region.n_elements())
    joint_a, _ = _joint_entries(system, point_a.witnesses)
    first_cover = np.argmax(bits, axis=0)  # lowest pair index covering each element
    handoff_bad = 0
    for e in range(region.n_elements()):
        w = joint_a[first_cover[e]]
        x = grid[e]
        for k in range(point_a.tau):
            x = system.step(x, int(w[k]))
        if not region.contains(x):
            handoff_bad += 1
    diagnostics["handoff_outside"] = handoff_bad
    return handoff_bad == 0, diagnostics


def default_anchor_word(system, component: int, tau: int) -> ControlWord:
    """Constant word on the control value closest to zero (the natural
    zero-information word for the anchored component)."""
    comp = system.components[component]
    norms = np.linalg.norm(np.atleast_2d(comp.controls), axis=1)
    return ControlWord((int(np.argmin(norms)),) * tau)


def anchored_product_cover(system, region: GridRegion, tau: int, anchor_component: int,
                           anchor_word: ControlWord = None, pool=None,
                           pool_size: int = DEFAULT_POOL_CAP, seed: int = 0,
                           margin=None, cover_mode: str = "exact"):
    """Frontier point with a single fixed word on one component: the other
    component is completed by a minimum cover against that anchor.  Coverage
    rows are deduplicated chunk-wise, so very large free-side pools are fine."""
    if not isinstance(system, ProductSystem) or system.n_components != 2:
        raise ValueError("anchored cover needs a 2-component product")
    free = 1 - anchor_component
    if anchor_word is None:
        anchor_word = default_anchor_word(system, anchor_component, tau)
    pool = pool or word_pool(system.components[free].alphabet_size, tau, pool_size, seed)
    entries_free = pool.entries
    n = entries_free.shape[0]
    anchor_row = np.asarray(anchor_word.entries, dtype=np.int64).reshape(1, -1)

    def build_chunk(s, e):
        parts = [None, None]
        parts[free] = entries_free[s:e].astype(np.int64)
        parts[anchor_component] = np.repeat(anchor_row, e - s, axis=0)
        joint = system.join_entries(parts)
        return stay_packed(system, region, joint.astype(np.int32), margin=margin)

    keep, rows = chunked_unique_coverage(build_chunk, n, region.n_elements())
    instance = CoverInstance(region.n_elements(), rows)
    result = min_cover(instance, mode=cover_mode)
    free_words = words_from_entries(entries_free[keep[result.indices]])
    witnesses = [None, None]
    witnesses[free] = free_words
    witnesses[anchor_component] = [anchor_word]
    vec = tuple(math.log2(len(ws)) / tau for ws in witnesses)
    meta = {"anchored": anchor_component, "pool_sampled": bool(pool.sampled),
            "pool_seed": pool.seed}
    return FrontierPoint(tau, vec, witnesses, meta=meta)
