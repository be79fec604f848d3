"""Minimal spanning-set computations on the grid abstraction.

All cardinalities are computed for grid points with an interior margin; they
approximate the continuum quantities.  Candidate pools enumerate all words of
the requested horizon when the alphabet allows, and fall back to seeded
stratified sampling above the pool cap.

Logarithms are base 2 throughout (rates in bits per step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InfeasibleCoverError
from .regions import Box, CircleBand, GridRegion
from .setcover import CoverInstance, CoverResult, min_cover
from .systems import CircleSystem, ControlWord, LinearSystem, ProductSystem, trajectory

DEFAULT_POOL_CAP = 1 << 20


# ---------------------------------------------------------------------------
# candidate pools

@dataclass(frozen=True)
class WordPool:
    """Word indices of a fixed horizon over one alphabet."""

    alphabet_size: int
    tau: int
    indices: np.ndarray
    sampled: bool
    seed: int

    @property
    def entries(self) -> np.ndarray:
        return entries_from_indices(self.indices, self.alphabet_size, self.tau)

    def __len__(self):
        return self.indices.shape[0]


def word_pool(alphabet_size: int, tau: int, cap: int = DEFAULT_POOL_CAP, seed: int = 0) -> WordPool:
    """All words of length tau, or a seeded stratified sample of `cap` of them."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    total = alphabet_size**tau
    if total <= cap:
        idx = np.arange(total, dtype=np.int64)
        return WordPool(alphabet_size, tau, idx, False, seed)
    rng = np.random.default_rng(seed)
    edges = np.linspace(0, total, cap + 1).astype(np.int64)
    lows, highs = edges[:-1], np.maximum(edges[1:], edges[:-1] + 1)
    idx = lows + (rng.random(cap) * (highs - lows)).astype(np.int64)
    return WordPool(alphabet_size, tau, np.unique(idx), True, seed)


def entries_from_indices(indices: np.ndarray, alphabet_size: int, tau: int) -> np.ndarray:
    """Little-endian digits: entry k of word i is (i // size**k) % size."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 1)
    powers = alphabet_size ** np.arange(tau, dtype=np.int64)
    return ((idx // powers) % alphabet_size).astype(np.int32)


def words_from_entries(entries: np.ndarray) -> list:
    return [ControlWord(tuple(int(v) for v in row)) for row in np.atleast_2d(entries)]


# ---------------------------------------------------------------------------
# stay sets

def stay_set(system, region: GridRegion, word: ControlWord, margin=None) -> np.ndarray:
    """Bool mask over grid elements whose trajectories under `word` pass the
    interior test (with margin) at steps 1..tau."""
    entries = np.asarray(word.entries, dtype=np.int32).reshape(1, -1)
    packed = stay_packed(system, region, entries, margin=margin)
    return K.unpack_bits(packed, region.n_elements())[0]


def stay_packed(system, region: GridRegion, entries: np.ndarray, margin=None) -> np.ndarray:
    """Packed stay bitsets for a batch of words (rows of `entries`)."""
    entries = np.atleast_2d(np.asarray(entries, dtype=np.int32))
    grid = region.discretize()

    if isinstance(system, LinearSystem) and isinstance(region.shape, Box):
        eps = region.margin_vec if margin is None else margin
        lo = np.ascontiguousarray(region.shape.lower + eps, dtype=float)
        hi = np.ascontiguousarray(region.shape.upper - eps, dtype=float)
        return K.stay_linear_box(entries, system.controls, system.a, system.b, grid, lo, hi)

    if isinstance(system, ProductSystem):
        comps = system.components
        parts = system.split_entries(entries.astype(np.int64))
        if (
            len(comps) == 2
            and all(isinstance(c, CircleSystem) for c in comps)
            and isinstance(region.shape, CircleBand)
        ):
            eps = region.margin if margin is None else float(margin)
            width = region.shape.delta - eps
            return K.stay_circle_pair_band(
                parts[0], parts[1],
                comps[0].controls[:, 0].copy(), comps[1].controls[:, 0].copy(),
                float(comps[0].alpha), float(comps[1].alpha),
                grid[:, 0].copy(), grid[:, 1].copy(), width,
            )
        if all(isinstance(c, LinearSystem) for c in comps) and isinstance(region.shape, Box):
            return _stay_product_linear_box(system, region, parts, margin)

    return _stay_generic(system, region, entries, margin)


def _stay_product_linear_box(system, region, parts, margin):
    cells = region.grid_cells()
    stays, emaps = [], []
    for i, comp in enumerate(system.components):
        axes = list(range(*system.component_slice(i).indices(system.state_dim)))
        sub = region.project(axes)
        sub_margin = None
        if margin is not None:
            mv = np.broadcast_to(np.atleast_1d(margin), (region.state_dim,))
            sub_margin = mv[axes]
        uniq, inverse = np.unique(parts[i], axis=0, return_inverse=True)
        packed = stay_packed(comp, sub, uniq, margin=sub_margin)
        bits = K.unpack_bits(packed, sub.n_elements())
        stays.append(np.ascontiguousarray(bits[inverse]))
        dims = tuple(sub.resolution)
        emaps.append(
            np.ravel_multi_index(tuple(cells[:, a] for a in axes), dims).astype(np.int32)
        )
    out = K.combine_product_stay(stays[0], stays[1], emaps[0], emaps[1])
    for i in range(2, len(stays)):
        extra = K.pack_bool_rows(stays[i][:, emaps[i]])
        out &= extra
    return out


def _stay_generic(system, region, entries, margin):
    grid = region.discretize()
    ne = grid.shape[0]
    nw, tau = entries.shape
    out = np.empty((nw, K.n_packed_words(ne)), dtype=np.uint64)
    for w in range(nw):
        states = grid.copy()
        alive = np.ones(ne, dtype=bool)
        for k in range(tau):
            states = system.step_batch(states, int(entries[w, k]))
            alive &= region.in_interior(states, margin=margin)
            if not alive.any():
                break
        out[w] = K.pack_bool_rows(alive.reshape(1, -1))[0]
    return out


# ---------------------------------------------------------------------------
# full-system minimal spanning sets

@dataclass
class SpanningSolution:
    """Selected words plus an element -> word selector over the region grid."""

    tau: int
    words: list
    selector: np.ndarray
    mode: str
    pool: WordPool = None

    @property
    def cardinality(self) -> int:
        return len(self.words)

    @property
    def rate(self) -> float:
        return math.log2(max(1, self.cardinality)) / self.tau

    def to_json_dict(self):
        return {
            "tau": self.tau,
            "cardinality": self.cardinality,
            "rate_bits_per_step": self.rate,
            "mode": self.mode,
            "words": [list(w.entries) for w in self.words],
            "selector": self.selector.tolist(),
            "pool_sampled": bool(self.pool.sampled) if self.pool else None,
            "pool_seed": self.pool.seed if self.pool else None,
        }


def chunked_unique_coverage(build_chunk, n_words, ne, chunk=16384):
    """Evaluate coverage rows in chunks, keeping only the distinct nonempty
    bitsets with the lowest word index realizing each.  Returns (original
    word indices ascending, packed rows)."""
    seen = set()
    indices, rows_kept = [], []
    for s in range(0, n_words, chunk):
        rows = build_chunk(s, min(n_words, s + chunk))
        pops = K.popcount_rows(rows)
        for r in np.nonzero(pops > 0)[0]:
            key = rows[r].tobytes()
            if key not in seen:
                seen.add(key)
                indices.append(s + int(r))
                rows_kept.append(rows[r].copy())
    if not indices:
        raise InfeasibleCoverError(
            "no candidate word covers any grid element",
            uncovered=list(range(ne)),
        )
    return np.array(indices, dtype=np.int64), np.stack(rows_kept)


_COVERAGE_BYTES_GUARD = 256 * 1024 * 1024


def r_inv(system, region: GridRegion, tau: int, mode: str = "exact",
          pool_cap: int = DEFAULT_POOL_CAP, seed: int = 0, margin=None):
    """Minimal number of words keeping every grid point of Q in its interior
    for tau steps; returns (cardinality, SpanningSolution)."""
    pool = word_pool(system.alphabet_size, tau, pool_cap, seed)
    entries = pool.entries
    ne = region.n_elements()
    est_bytes = len(pool) * K.n_packed_words(ne) * 8
    if est_bytes > _COVERAGE_BYTES_GUARD:
        keep, coverage = chunked_unique_coverage(
            lambda s, e: stay_packed(system, region, entries[s:e], margin=margin),
            len(pool), ne,
        )
    else:
        keep = np.arange(len(pool), dtype=np.int64)
        coverage = stay_packed(system, region, entries, margin=margin)
    instance = CoverInstance(ne, coverage)
    try:
        result = min_cover(instance, mode=mode)
    except InfeasibleCoverError as exc:
        raise InfeasibleCoverError(
            "grid not controlled invariant at this resolution/margin (tau=%d): %s"
            % (tau, exc),
            uncovered=exc.uncovered,
        ) from exc
    chosen = keep[result.indices]
    solution = SpanningSolution(
        tau=tau,
        words=words_from_entries(entries[chosen]),
        selector=result.selector,
        mode=mode,
        pool=pool,
    )
    return solution.cardinality, solution


def entropy_estimate(values):
    """Per-tau rates (1/tau) log2 cardinality and their minimum, the tightest
    finite-horizon upper estimate of the entropy."""
    if not values:
        raise ValueError("need at least one (tau, cardinality) pair")
    per_tau = [math.log2(card) / tau for tau, card in values]
    return min(per_tau), per_tau


# ---------------------------------------------------------------------------
# subsystem spanning: reachable-set dynamic program over the other components

class SubsystemMachinery:
    """Precomputed grids and transition tables for one distinguished component."""

    def __init__(self, system: ProductSystem, region: GridRegion, i: int):
        if not isinstance(system, ProductSystem):
            raise ValueError("subsystem operations need a product system")
        if not 0 <= i < system.n_components:
            raise ValueError("component index out of range")
        self.system = system
        self.region = region
        self.i = i
        self.comp = system.components[i]
        self.i_axes = list(range(*system.component_slice(i).indices(system.state_dim)))
        self.other_axes = [a for a in range(system.state_dim) if a not in self.i_axes]
        others = [c for j, c in enumerate(system.components) if j != i]
        self.other_sys = others[0] if len(others) == 1 else ProductSystem(tuple(others))

        axis_grids = [region.axis_grid(a) for a in self.other_axes]
        mesh = np.meshgrid(*axis_grids, indexing="ij")
        self.other_cells = np.stack([m.ravel() for m in mesh], axis=1)
        self.other_dims = tuple(len(g) for g in axis_grids)
        self._axis_grids = axis_grids
        self._periodic = [region.periodic_axes[a] for a in self.other_axes]

        cells = region.grid_cells()
        self.elem_other = np.ravel_multi_index(
            tuple(cells[:, a] for a in self.other_axes), self.other_dims
        ).astype(np.int64)
        i_cells = cells[:, self.i_axes]
        uniq, inverse = np.unique(i_cells, axis=0, return_inverse=True)
        self.class_cells = uniq
        self.elem_class = inverse.astype(np.int64).reshape(-1)
        self.n_classes = uniq.shape[0]
        self.class_states = np.empty((self.n_classes, len(self.i_axes)))
        for j, a in enumerate(self.i_axes):
            self.class_states[:, j] = region.axis_grid(a)[uniq[:, j]]
        self._class_index = {tuple(c): k for k, c in enumerate(uniq.tolist())}

        self.succ = self._successor_table()

    def snap_class(self, x):
        """Class index of a state's component-i coordinates (grid states map
        to their own class)."""
        cells = []
        for j, a in enumerate(self.i_axes):
            g = self.region.axis_grid(a)
            n = len(g)
            if self.region.periodic_axes[a]:
                cells.append(int(np.rint((x[a] % 1.0) * n)) % n)
            else:
                h = g[1] - g[0]
                cells.append(int(np.clip(np.rint((x[a] - g[0]) / h), 0, n - 1)))
        key = tuple(cells)
        if key not in self._class_index:
            raise ValueError("state's component-%d coordinates lie outside the grid" % self.i)
        return self._class_index[key]

    def _successor_table(self):
        nc = self.other_cells.shape[0]
        nu = self.other_sys.alphabet_size
        succ = np.empty((nc, nu), dtype=np.int32)
        for u in range(nu):
            nxt = self.other_sys.step_batch(self.other_cells, u)
            succ[:, u] = self._snap_cells(nxt)
        return succ

    def _snap_cells(self, states):
        idx = []
        for j, g in enumerate(self._axis_grids):
            n = len(g)
            if self._periodic[j]:
                ax = np.rint((states[:, j] % 1.0) * n).astype(np.int64) % n
            else:
                h = g[1] - g[0]
                ax = np.clip(np.rint((states[:, j] - g[0]) / h), 0, n - 1).astype(np.int64)
            idx.append(ax)
        return np.ravel_multi_index(tuple(idx), self.other_dims).astype(np.int32)

    def component_trajectories(self, entries):
        """Continuum trajectories of the distinguished component from every
        grid class; shape (n_words, n_classes, tau, d_i)."""
        entries = np.atleast_2d(np.asarray(entries, dtype=np.int32))
        nw, tau = entries.shape
        comp = self.comp
        x = np.broadcast_to(self.class_states, (nw,) + self.class_states.shape).copy()
        out = np.empty((nw, self.n_classes, tau, x.shape[2]))
        for k in range(tau):
            if isinstance(comp, LinearSystem):
                u = comp.controls[entries[:, k]]
                x = x @ comp.a.T + (u @ comp.b.T)[:, None, :]
            elif isinstance(comp, CircleSystem):
                u = comp.controls[entries[:, k], 0]
                x = (comp.alpha * x + u[:, None, None]) % 1.0
            else:
                for w in range(nw):
                    x[w] = comp.step_batch(x[w], int(entries[w, k]))
            out[:, :, k, :] = x
        return out

    def slice_masks(self, traj, margin=None):
        """Interior masks over other-component cells for each (word, class, step)."""
        nw, ncls, tau, _ = traj.shape
        ncells = self.other_cells.shape[0]
        flat_i = traj.reshape(nw * ncls * tau, 1, -1)
        full = np.empty((nw * ncls * tau, ncells, self.region.state_dim))
        for j, a in enumerate(self.i_axes):
            full[:, :, a] = flat_i[:, :, j]
        for j, a in enumerate(self.other_axes):
            full[:, :, a] = self.other_cells[:, j]
        mask = self.region.in_interior(full.reshape(-1, self.region.state_dim), margin=margin)
        return mask.reshape(nw, ncls, tau, ncells)


def feasible_subsystem(system, region, i, x, word_i: ControlWord, margin=None) -> bool:
    """Forward reachable-set check: is there a word for the other components
    keeping the joint trajectory from x in the interior while component i
    plays `word_i`?  Other-component states snap to their grid cells."""
    mach = SubsystemMachinery(system, region, i)
    return _forward_dp(mach, np.asarray(x, float), word_i, margin=margin)[0]


def subsystem_handoff_state(system, region, i, x, word_i: ControlWord, margin=None):
    """Final joint state of a witness path of the forward DP (component i
    continuum, other components at their surviving cell centers)."""
    mach = SubsystemMachinery(system, region, i)
    ok, state = _forward_dp(mach, np.asarray(x, float), word_i, margin=margin)
    if not ok:
        raise InfeasibleCoverError("word is not feasible from this state")
    return state


def _forward_dp(mach, x, word_i, margin=None):
    region = mach.region
    tau = word_i.horizon
    entries = np.asarray(word_i.entries, dtype=np.int32).reshape(1, -1)
    cls = mach.snap_class(x)
    traj = mach.component_trajectories(entries)[0]
    start = int(mach._snap_cells(x[mach.other_axes].reshape(1, -1))[0])
    reach = np.zeros(mach.other_cells.shape[0], dtype=bool)
    reach[start] = True
    eps = region.margin if margin is None else margin
    for k in range(tau):
        image = np.zeros_like(reach)
        image[np.unique(mach.succ[reach])] = True
        sl = region.interior_mask_mixed(
            mach.i_axes, traj[cls, k], mach.other_axes, mach.other_cells, margin=eps
        )
        reach = image & sl
        if not reach.any():
            return False, None
    cell = int(np.nonzero(reach)[0][0])
    state = np.empty(region.state_dim)
    for j, a in enumerate(mach.i_axes):
        state[a] = traj[cls, tau - 1, j]
    for j, a in enumerate(mach.other_axes):
        state[a] = mach.other_cells[cell, j]
    return True, state


def subsystem_coverage(system, region, i, entries, margin=None,
                       stop_on_full=False, machinery=None):
    """Packed coverage bitsets over grid elements for component-i words.

    With stop_on_full, evaluation stops after the first word that covers every
    element (then only the evaluated prefix of rows is returned)."""
    mach = machinery or SubsystemMachinery(system, region, i)
    entries = np.atleast_2d(np.asarray(entries, dtype=np.int32))
    nw, tau = entries.shape
    ne = region.n_elements()
    ncells = mach.other_cells.shape[0]
    rows = []
    # chunk so the slice-mask scratch stays around ~50MB
    per_word = max(1, mach.n_classes * tau * ncells * region.state_dim)
    chunk = max(1, min(nw, int(6_000_000 // per_word) or 1))
    for s in range(0, nw, chunk):
        ent = entries[s : s + chunk]
        traj = mach.component_trajectories(ent)
        slices = mach.slice_masks(traj, margin=margin)
        feas = K.dp_backward(mach.succ, slices)
        cov = feas[:, mach.elem_class, mach.elem_other]
        packed = K.pack_bool_rows(cov)
        rows.append(packed)
        if stop_on_full:
            pops = K.popcount_rows(packed)
            if (pops == ne).any():
                break
    return np.concatenate(rows, axis=0)


def r_inv_subsystem(system, region: GridRegion, tau: int, i: int, mode: str = "exact",
                    pool_cap: int = DEFAULT_POOL_CAP, seed: int = 0, margin=None):
    """Minimal number of component-i words such that, with the other
    components' controls free, every grid point can be kept in the interior
    for tau steps; returns (cardinality, SpanningSolution)."""
    mach = SubsystemMachinery(system, region, i)
    _validate_snap_margin(region, margin)
    pool = word_pool(mach.comp.alphabet_size, tau, pool_cap, seed)
    entries = pool.entries
    coverage = subsystem_coverage(system, region, i, entries, margin=margin,
                                  stop_on_full=True, machinery=mach)
    ne = region.n_elements()
    pops = K.popcount_rows(coverage)
    full = np.nonzero(pops == ne)[0]
    if full.shape[0]:
        w = int(full[0])
        solution = SpanningSolution(
            tau=tau,
            words=words_from_entries(entries[w : w + 1]),
            selector=np.zeros(ne, dtype=np.int64),
            mode=mode,
            pool=pool,
        )
        return 1, solution
    if coverage.shape[0] < entries.shape[0]:  # stop_on_full truncated without a hit
        coverage = subsystem_coverage(system, region, i, entries, margin=margin, machinery=mach)
    instance = CoverInstance(ne, coverage)
    try:
        result = min_cover(instance, mode=mode)
    except InfeasibleCoverError as exc:
        raise InfeasibleCoverError(
            "grid not controlled invariant for subsystem %d at this resolution/margin (tau=%d): %s"
            % (i, tau, exc),
            uncovered=exc.uncovered,
        ) from exc
    solution = SpanningSolution(
        tau=tau,
        words=words_from_entries(entries[result.indices]),
        selector=result.selector,
        mode=mode,
        pool=pool,
    )
    return solution.cardinality, solution


def _validate_snap_margin(region, margin):
    eps = region.margin if margin is None else margin
    half_diag = 0.5 * math.sqrt(
        sum(region.axis_spacing(a) ** 2 for a in range(region.state_dim))
    )
    if eps <= half_diag:
        raise InfeasibleCoverError(
            "margin %g must exceed half a grid-cell diagonal (%g) for the "
            "snapped certificate to be meaningful" % (eps, half_diag)
        )


# ---------------------------------------------------------------------------
# verification of (concatenated) witnesses

def direct_spanning_check(system, region, words, margin=0.0):
    """Check that the word set keeps every grid point in the interior for the
    words' horizon.  Returns (ok, uncovered element indices)."""
    entries = np.array([w.entries for w in words], dtype=np.int32)
    packed = stay_packed(system, region, entries, margin=margin)
    union = np.bitwise_or.reduce(packed, axis=0)
    bits = K.unpack_bits(union.reshape(1, -1), region.n_elements())[0]
    return bool(bits.all()), np.nonzero(~bits)[0].tolist()


def concat_words(first, second):
    """All pairwise concatenations, deduplicated, index order preserved."""
    seen, out = set(), []
    for a in first:
        for b in second:
            w = a.concat(b)
            if w.entries not in seen:
                seen.add(w.entries)
                out.append(w)
    return out


def check_subadditivity(system, region, i, sol1, sol2, margin=0.0):
    """Verify the concatenation construction: concatenations of two subsystem
    witnesses cover the grid at the combined horizon (margin 0 by default:
    the interior margin is the slack the construction consumes)."""
    words = concat_words(sol1.words, sol2.words)
    entries = np.array([w.entries for w in words], dtype=np.int32)
    coverage = subsystem_coverage(system, region, i, entries, margin=margin)
    union = np.bitwise_or.reduce(coverage, axis=0)
    bits = K.unpack_bits(union.reshape(1, -1), region.n_elements())[0]
    ok = bool(bits.all())
    return ok, len(words), np.nonzero(~bits)[0].tolist()


def one_step_absorbing(system, region_q: GridRegion, region_k: GridRegion, margin=None) -> bool:
    """Grid sufficient condition for strong controlled invariance: every grid
    point of Q admits one control landing in the margin-shrunk K."""
    grid = region_q.discretize()
    pending = np.ones(grid.shape[0], dtype=bool)
    for u in range(system.alphabet_size):
        if not pending.any():
            break
        nxt = system.step_batch(grid[pending], u)
        pending[np.nonzero(pending)[0][region_k.in_interior(nxt, margin=margin)]] = False
    return not pending.any()
