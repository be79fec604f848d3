"""Self-contained property battery behind the `verify` CLI command.

Each check prints one PASS/FAIL line; the battery returns the overall
verdict.  The checks are brute-force oracles and invariants, independent of
the solvers they exercise.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import _kernels as K
from .channel import (
    Channel,
    block_channel,
    build_codebook,
    check_codebook,
    confusability_graph,
    cycle_graph,
    Graph,
    max_independent_set,
    strong_power,
    strong_product,
)
from .regions import box_region, band_region
from .setcover import CoverInstance, min_cover
from .spanning import stay_packed, stay_set, word_pool
from .systems import (
    CircleSystem,
    ControlWord,
    LinearSystem,
    ProductSystem,
    split_product_word,
    trajectory,
    uniform_controls,
)


def run_verification(config=None, printer=print, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    results = []

    def check(name, fn):
        try:
            ok = bool(fn())
        except Exception as exc:  # a crash is a failure with a reason
            ok = False
            printer("FAIL %-42s (%s)" % (name, exc))
            results.append((name, ok))
            return
        printer("%s %s" % ("PASS" if ok else "FAIL", name))
        results.append((name, ok))

    check("product projection commutation", lambda: _product_projection(rng))
    check("circle outputs stay in [0,1)", lambda: _circle_range(rng))
    check("trajectory determinism", lambda: _determinism(rng))
    check("grid points satisfy closed membership", _grid_membership)
    check("margin monotonicity of in_interior", lambda: _margin_monotone(rng))
    check("grid projection containment", _projection_containment)
    check("exact cover <= greedy cover", lambda: _cover_vs_greedy(rng))
    check("exact cover matches brute force", lambda: _cover_bruteforce(rng))
    check("MIS matches brute force", lambda: _mis_bruteforce(rng))
    check("block channel equals strong power", _block_equals_power)
    check("MIS superadditivity under strong product", lambda: _mis_superadditive(rng))
    check("codebooks pairwise distinguishable", _codebook_check)
    check("stay-set margin monotonicity", _stay_margin_monotone)
    if K.BACKEND == "numba":
        check("numba kernels match numpy fallback", lambda: _kernel_equivalence(rng))

    ok = all(r for _, r in results)
    printer("verify: %d/%d checks passed" % (sum(r for _, r in results), len(results)))
    return ok, results


# ---------------------------------------------------------------------------

def _random_product(rng):
    a1 = LinearSystem([[rng.uniform(0.5, 2.0)]], [[1.0]], uniform_controls(-1, 1, 5))
    a2 = CircleSystem(2, uniform_controls(-1, 1, 5))
    return ProductSystem((a1, a2))


def _product_projection(rng):
    for _ in range(20):
        sys_p = _random_product(rng)
        tau = int(rng.integers(1, 5))
        word = ControlWord(tuple(int(v) for v in rng.integers(0, sys_p.alphabet_size, tau)))
        x0 = np.array([rng.uniform(-1, 1), rng.uniform(0, 1)])
        joint = trajectory(sys_p, x0, word)
        parts = split_product_word(sys_p, word)
        for i, comp in enumerate(sys_p.components):
            sl = sys_p.component_slice(i)
            own = trajectory(comp, x0[sl], parts[i])
            if not np.array_equal(joint[:, sl], own):
                return False
    return True


def _circle_range(rng):
    sys_c = CircleSystem(-3, uniform_controls(-1, 1, 9))
    x = rng.uniform(0, 1, size=(200, 1))
    for u in range(9):
        x = sys_c.step_batch(x, u)
        if not np.all((x >= 0) & (x < 1)):
            return False
    return True


def _determinism(rng):
    sys_p = _random_product(rng)
    word = ControlWord(tuple(int(v) for v in rng.integers(0, sys_p.alphabet_size, 6)))
    x0 = np.array([0.3, 0.7])
    t1 = trajectory(sys_p, x0, word)
    t2 = trajectory(sys_p, x0, word)
    return np.array_equal(t1, t2)


def _grid_membership():
    for region in (box_region([-1, 0], [1, 2], [9, 7], margin=0.1),
                   band_region(0.12, 64, margin=1 / 64)):
        pts = region.discretize()
        if not region.contains(pts).all():
            return False
    return True


def _margin_monotone(rng):
    region = box_region([-1], [1], 33, margin=0.2)
    states = rng.uniform(-1.2, 1.2, size=(300, 1))
    big = region.in_interior(states, margin=0.2)
    small = region.in_interior(states, margin=0.05)
    return bool(np.all(~big | small))


def _projection_containment():
    region = box_region([-1, 0], [1, 2], [9, 7], margin=0.0)
    sub = region.project([0])
    projected = np.unique(region.discretize()[:, 0])
    return np.allclose(np.sort(projected), sub.discretize()[:, 0])


def _random_instance(rng, ne=12, nc=8):
    mask = rng.random((nc, ne)) < 0.35
    mask[rng.integers(0, nc), :] |= rng.random(ne) < 0.5
    for e in range(ne):
        if not mask[:, e].any():
            mask[rng.integers(0, nc), e] = True
    return CoverInstance.from_bool(mask)


def _cover_vs_greedy(rng):
    for _ in range(20):
        inst = _random_instance(rng)
        exact = min_cover(inst, mode="exact")
        greedy = min_cover(inst, mode="greedy")
        if exact.size > greedy.size:
            return False
    return True


def _brute_min_cover(mask):
    nc = mask.shape[0]
    for size in range(1, nc + 1):
        for combo in itertools.combinations(range(nc), size):
            if mask[list(combo)].any(axis=0).all():
                return size
    return None


def _cover_bruteforce(rng):
    for _ in range(15):
        inst = _random_instance(rng, ne=10, nc=7)
        exact = min_cover(inst, mode="exact")
        brute = _brute_min_cover(K.unpack_bits(inst.coverage, inst.n_elements))
        if exact.size != brute:
            return False
    return True


def _brute_alpha(adj):
    n = adj.shape[0]
    masks = [int("".join("1" if adj[i, j] else "0" for j in range(n))[::-1], 2) for i in range(n)]
    best = 0
    for s in range(1 << n):
        ok = True
        ss = s
        while ss:
            v = (ss & -ss).bit_length() - 1
            if masks[v] & s:
                ok = False
                break
            ss &= ss - 1
        if ok:
            best = max(best, bin(s).count("1"))
    return best


def _mis_bruteforce(rng):
    for _ in range(10):
        n = int(rng.integers(4, 11))
        adj = np.triu(rng.random((n, n)) < 0.4, 1)
        g = Graph(adj)
        size, witness = max_independent_set(g)
        if size != _brute_alpha(g.adj):
            return False
        for a, b in itertools.combinations(witness, 2):
            if g.adj[a, b]:
                return False
    return True


def _block_equals_power():
    chan = Channel.from_relation("abc", {"a": ["a", "b"], "b": ["b"], "c": ["c"]})
    g = confusability_graph(chan)
    for k in (2, 3):
        direct = confusability_graph(block_channel(chan, k))
        power = strong_power(g, k)
        order = np.lexsort(tuple(np.array([lab[i] for lab in power.labels])
                                 for i in reversed(range(k))))
        if not np.array_equal(direct.adj, power.adj[np.ix_(order, order)]):
            return False
    return True


def _mis_superadditive(rng):
    for _ in range(5):
        n = int(rng.integers(3, 6))
        adj = np.triu(rng.random((n, n)) < 0.5, 1)
        g = Graph(adj)
        h = cycle_graph(int(rng.integers(3, 6)))
        a_g, _ = max_independent_set(g)
        a_h, _ = max_independent_set(h)
        a_gh, _ = max_independent_set(strong_product(g, h))
        if a_gh < a_g * a_h:
            return False
    return True


def _codebook_check():
    noiseless = Channel.noiseless(2)
    book = build_codebook(noiseless, 3, 8)
    check_codebook(noiseless, book)
    pentagon = Channel.from_relation(
        "01234", {str(i): [str(i), str((i + 1) % 5)] for i in range(5)}
    )
    book5 = build_codebook(pentagon, 2, 5)
    check_codebook(pentagon, book5)
    return len(book.words) == 8 and len(book5.words) == 5


def _stay_margin_monotone():
    sys1 = LinearSystem([[1.5]], [[1.0]], uniform_controls(-1, 1, 9))
    region = box_region([-1], [1], 33, margin=0.1)
    word = ControlWord((4, 4, 4))
    wide = stay_set(sys1, region, word, margin=0.02)
    narrow = stay_set(sys1, region, word, margin=0.2)
    return bool(np.all(~narrow | wide))


def _kernel_equivalence(rng):
    np_k = K.NUMPY_KERNELS
    # linear box
    sys1 = LinearSystem([[1.1, 0.2], [0.0, 0.9]], [[0.0], [1.0]], uniform_controls(-1, 1, 5))
    region = box_region([-1, -1], [1, 1], [9, 9], margin=0.05)
    pool = word_pool(5, 4, 1 << 10, seed=3)
    entries = pool.entries
    grid = region.discretize()
    lo = region.shape.lower + 0.05
    hi = region.shape.upper - 0.05
    a = K.stay_linear_box(entries, sys1.controls, sys1.a, sys1.b, grid, lo, hi)
    b = np_k["stay_linear_box"](entries, sys1.controls, sys1.a, sys1.b, grid, lo, hi)
    if not np.array_equal(a, b):
        return False
    # circle pair band
    band = band_region(0.12, 32, margin=1 / 32)
    ent1 = rng.integers(0, 5, size=(40, 3)).astype(np.int32)
    ent2 = rng.integers(0, 5, size=(40, 3)).astype(np.int32)
    cv = uniform_controls(-1, 1, 5)[:, 0].copy()
    grid2 = band.discretize()
    args = (ent1, ent2, cv, cv, 2.0, 2.0, grid2[:, 0].copy(), grid2[:, 1].copy(), 0.12 - 1 / 32)
    if not np.array_equal(K.stay_circle_pair_band(*args), np_k["stay_circle_pair_band"](*args)):
        return False
    # dp backward
    succ = rng.integers(0, 16, size=(16, 4)).astype(np.int32)
    slices = rng.random((6, 3, 4, 16)) < 0.6
    if not np.array_equal(K.dp_backward(succ, slices), np_k["dp_backward"](succ, slices)):
        return False
    return True
