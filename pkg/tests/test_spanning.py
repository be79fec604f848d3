import itertools

import numpy as np
import pytest

from invarion.errors import InfeasibleCoverError
from invarion.regions import CircleFull, GridRegion, band_region, box_region, product_box
from invarion.spanning import (
    chunked_unique_coverage,
    direct_spanning_check,
    entropy_estimate,
    feasible_subsystem,
    one_step_absorbing,
    r_inv,
    r_inv_subsystem,
    stay_packed,
    stay_set,
    subsystem_coverage,
    word_pool,
    words_from_entries,
)
from invarion.systems import (
    CircleSystem,
    ControlWord,
    LinearSystem,
    ProductSystem,
    uniform_controls,
)
from tests.conftest import doubling_system, random_product_scenario, sync_system


def test_stay_all_for_zero_map():
    zero = LinearSystem([[0.0]], [[0.0]], uniform_controls(-1, 1, 3))
    region = box_region([-1], [1], 11, margin=0.1)
    for entries in ((0,), (2, 1, 0)):
        assert stay_set(zero, region, ControlWord(entries)).all()


def test_stay_all_on_full_circle():
    circ = CircleSystem(2, uniform_controls(-1, 1, 5))
    region = GridRegion(CircleFull(), 32)
    assert stay_set(circ, region, ControlWord((0, 4, 2))).all()


def test_stay_matches_inequality_scan():
    sys1 = doubling_system()
    eps = 0.05
    region = box_region([-0.5], [0.5], 41, margin=eps)
    mask = stay_set(sys1, region, ControlWord((16,)))  # u = 0
    grid = region.discretize()[:, 0]
    expected = np.abs(2 * grid) < 0.5 - eps
    assert np.array_equal(mask, expected)


def test_r_inv_zero_map_is_one():
    zero = LinearSystem([[0.0]], [[0.0]], uniform_controls(-1, 1, 3))
    region = box_region([-1], [1], 11, margin=0.1)
    for tau in (1, 2, 5):
        card, sol = r_inv(zero, region, tau)
        assert card == 1 and sol.cardinality == 1


def test_r_inv_tau1_matches_bruteforce():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 41, margin=0.025)
    card, _ = r_inv(sys1, region, 1, mode="exact")
    rows = [stay_set(sys1, region, ControlWord((u,))) for u in range(33)]
    best = None
    for size in range(1, 6):
        for combo in itertools.combinations(range(33), size):
            if np.any([rows[c] for c in combo], axis=0).all():
                best = size
                break
        if best:
            break
    assert card == best


def test_word_pool_full_and_sampled():
    full = word_pool(5, 3, cap=1000, seed=0)
    assert not full.sampled and len(full) == 125
    assert np.array_equal(full.indices, np.arange(125))
    samp = word_pool(33, 6, cap=4096, seed=7)
    assert samp.sampled and len(samp) <= 4096
    assert np.all(np.diff(samp.indices) > 0)
    again = word_pool(33, 6, cap=4096, seed=7)
    assert np.array_equal(samp.indices, again.indices)
    other = word_pool(33, 6, cap=4096, seed=8)
    assert not np.array_equal(samp.indices, other.indices)


def test_entries_little_endian():
    pool = word_pool(3, 3, cap=100, seed=0)
    entries = pool.entries
    assert tuple(entries[5]) == (2, 1, 0)  # 5 = 2 + 1*3


def test_entropy_estimate():
    best, per_tau = entropy_estimate([(1, 2)])
    assert best == 1.0 and per_tau == [1.0]
    best, per_tau = entropy_estimate([(1, 4), (2, 8)])
    assert per_tau == [2.0, 1.5] and best == 1.5


def test_entropy_estimate_needs_data():
    with pytest.raises(ValueError):
        entropy_estimate([])


# ---------------------------------------------------------------------------
# subsystem DP


def brute_force_feasible(mach, x, word_i, margin=None):
    """Independent oracle: enumerate all other-component words over the
    snapped-cell dynamics and test the interior slices directly."""
    region = mach.region
    tau = word_i.horizon
    entries = np.asarray(word_i.entries, dtype=np.int32).reshape(1, -1)
    traj = mach.component_trajectories(entries)[0]
    cls = mach.snap_class(np.asarray(x, float))
    start = int(mach._snap_cells(np.asarray(x, float)[mach.other_axes].reshape(1, -1))[0])
    nu = mach.other_sys.alphabet_size
    for word in itertools.product(range(nu), repeat=tau):
        cell = start
        ok = True
        for k, u in enumerate(word):
            cell = int(mach.succ[cell, u])
            sl = region.interior_mask_mixed(
                mach.i_axes, traj[cls, k], mach.other_axes, mach.other_cells, margin=margin
            )
            if not sl[cell]:
                ok = False
                break
        if ok:
            return True
    return False


def test_dp_matches_bruteforce_on_toy():
    from invarion.spanning import SubsystemMachinery

    a = LinearSystem([[1.5]], [[1.0]], uniform_controls(-1, 1, 3))
    b = LinearSystem([[0.5]], [[1.0]], uniform_controls(-1, 1, 3))
    prod = ProductSystem((a, b))
    region = product_box(
        [box_region([-0.6], [0.6], 3, margin=0.3), box_region([-0.6], [0.6], 3, margin=0.3)]
    )
    mach = SubsystemMachinery(prod, region, 0)
    grid = region.discretize()
    for tau in (1, 2, 3):
        for widx in range(0, 27, 5):
            entries = word_pool(3, tau, cap=100, seed=0).entries
            for row in entries[:: max(1, len(entries) // 6)]:
                word = ControlWord(tuple(int(v) for v in row))
                for e in range(0, grid.shape[0], 3):
                    dp = feasible_subsystem(prod, region, 0, grid[e], word)
                    brute = brute_force_feasible(mach, grid[e], word)
                    assert dp == brute


def test_sync_zero_word_feasible_everywhere():
    system = sync_system()
    region = band_region(0.1, 64, margin=1 / 64)
    grid = region.discretize()
    word = ControlWord((16,) * 4)  # u = 0 throughout
    for e in range(0, grid.shape[0], 97):
        assert feasible_subsystem(system, region, 1, grid[e], word)


def test_product_region_decouples_feasibility():
    # with the second factor grid-invariant, feasibility reduces to the
    # distinguished component's own stay set
    prod, region, comps, regions = random_product_scenario(11)
    tau = 3
    pool = word_pool(comps[0].alphabet_size, tau, cap=10**6, seed=0)
    cov = subsystem_coverage(prod, region, 0, pool.entries[:40])
    from invarion._kernels import unpack_bits

    bits = unpack_bits(cov, region.n_elements())
    sub = region.project([0])
    stay = stay_packed(comps[0], sub, pool.entries[:40])
    stay_bits = unpack_bits(stay, sub.n_elements())
    cells = region.grid_cells()
    for w in range(40):
        assert np.array_equal(bits[w], stay_bits[w][cells[:, 0]])


def test_subsystem_equals_component_on_products():
    prod, region, comps, regions = random_product_scenario(5)
    for tau in (1, 2, 3):
        for i in (0, 1):
            c_sub, _ = r_inv_subsystem(prod, region, tau, i)
            c_comp, _ = r_inv(comps[i], region.project([i]), tau)
            assert c_sub == c_comp


def test_sync_subsystem_entropy_is_zero_scale():
    system = sync_system()
    region = band_region(0.1, 64, margin=1 / 64)
    for tau in (1, 3):
        for i in (0, 1):
            card, _ = r_inv_subsystem(system, region, tau, i, pool_cap=1 << 12)
            assert card == 1


def test_monotone_in_tau_and_alphabet():
    prod, region, comps, regions = random_product_scenario(23)
    cards = [r_inv_subsystem(prod, region, tau, 0)[0] for tau in (1, 2, 3)]
    assert cards == sorted(cards)
    # enlarging the control alphabet never increases the count
    a = comps[0].a[0, 0]
    coarse = LinearSystem([[a]], [[1.0]], uniform_controls(-1, 1, 3))
    fine = LinearSystem([[a]], [[1.0]], uniform_controls(-1, 1, 5))
    finest = LinearSystem([[a]], [[1.0]], uniform_controls(-1, 1, 9))
    sub = region.project([0])
    vals = [r_inv(s, sub, 3)[0] for s in (coarse, fine, finest)]
    assert vals[0] >= vals[1] >= vals[2]


def test_infeasible_grid_reports_resolution_message():
    runaway = LinearSystem([[4.0]], [[0.1]], uniform_controls(-1, 1, 3))
    region = box_region([-0.5], [0.5], 9, margin=0.05)
    with pytest.raises(InfeasibleCoverError, match="controlled invariant"):
        r_inv(runaway, region, 3)


def test_margin_must_exceed_half_cell_diagonal():
    system = sync_system()
    region = band_region(0.1, 64, margin=1e-4)
    with pytest.raises(InfeasibleCoverError, match="diagonal"):
        r_inv_subsystem(system, region, 2, 0)


def test_one_step_absorbing():
    sys1 = doubling_system()
    q = box_region([-0.5], [0.5], 21, margin=0.025)
    k_inner = box_region([-0.2], [0.2], 21, margin=0.02)
    assert one_step_absorbing(sys1, q, k_inner)
    weak = LinearSystem([[2.0]], [[0.01]], uniform_controls(-1, 1, 3))
    assert not one_step_absorbing(weak, q, k_inner)


def test_chunked_unique_matches_direct():
    sys1 = doubling_system(levels=5)
    region = box_region([-0.5], [0.5], 21, margin=0.05)
    pool = word_pool(5, 3, cap=10**4, seed=0)
    entries = pool.entries
    direct = stay_packed(sys1, region, entries)
    keep, rows = chunked_unique_coverage(
        lambda s, e: stay_packed(sys1, region, entries[s:e]), len(pool),
        region.n_elements(), chunk=17,
    )
    # every kept row appears in the direct matrix at the kept index
    assert np.array_equal(rows, direct[keep])
    # and the kept rows enumerate exactly the distinct nonempty rows
    nonempty = direct[np.bitwise_count(direct).sum(1) > 0]
    assert len({r.tobytes() for r in nonempty}) == rows.shape[0]


def test_direct_spanning_check_and_words():
    sys1 = doubling_system(levels=9)
    region = box_region([-0.5], [0.5], 15, margin=1 / 14)
    card, sol = r_inv(sys1, region, 2)
    ok, uncovered = direct_spanning_check(sys1, region, sol.words, margin=region.margin)
    assert ok and not uncovered
    assert words_from_entries(np.array([[0, 1]]))[0] == ControlWord((0, 1))
