import itertools
import math

import numpy as np
import pytest

from invarion.channel import (
    Channel,
    Graph,
    block_channel,
    build_codebook,
    check_codebook,
    confusability_graph,
    cycle_graph,
    greedy_clique_cover,
    max_independent_set,
    strong_power,
    strong_product,
    words_distinguishable,
    zero_error_capacity_bounds,
)
from invarion.errors import CapacityError, ConfigError
from tests.conftest import all_confusable_channel, pentagon_channel


def test_confusability_identity_channel_empty():
    chan = Channel.noiseless(4)
    g = confusability_graph(chan)
    assert not g.adj.any()


def test_confusability_all_confusable_complete():
    g = confusability_graph(all_confusable_channel(4))
    expected = ~np.eye(4, dtype=bool)
    assert np.array_equal(g.adj, expected)


def test_confusability_single_edge():
    chan = Channel.from_relation("01", {"0": ["0"], "1": ["0", "1"]})
    g = confusability_graph(chan)
    assert g.adj[0, 1] and g.adj.sum() == 2


def test_strong_product_with_single_vertex():
    g = cycle_graph(5)
    single = Graph(np.zeros((1, 1), dtype=bool))
    prod = strong_product(g, single)
    assert np.array_equal(prod.adj, g.adj)


def test_strong_product_empty_graphs():
    e2 = Graph(np.zeros((2, 2), dtype=bool))
    prod = strong_product(e2, e2)
    assert not prod.adj.any() and prod.n == 4


def test_strong_product_matches_pairwise_rule():
    c5 = cycle_graph(5)
    prod = strong_product(c5, c5)
    a1 = c5.adj | np.eye(5, dtype=bool)
    for (i, j), (k, l) in itertools.product(
        itertools.product(range(5), repeat=2), repeat=2
    ):
        expected = a1[i, k] and a1[j, l] and (i, j) != (k, l)
        assert prod.adj[i * 5 + j, k * 5 + l] == expected


def test_mis_edgeless_and_complete():
    n = 7
    size, witness = max_independent_set(Graph(np.zeros((n, n), dtype=bool)))
    assert size == n and witness == list(range(n))
    complete = Graph(~np.eye(5, dtype=bool))
    size, witness = max_independent_set(complete)
    assert size == 1


def test_mis_pentagon_and_square_of_pentagon():
    c5 = cycle_graph(5)
    assert max_independent_set(c5)[0] == 2
    assert max_independent_set(strong_product(c5, c5))[0] == 5


def test_mis_cap_errors():
    with pytest.raises(ValueError, match="capped"):
        max_independent_set(Graph(np.zeros((41, 41), dtype=bool)))


def test_greedy_clique_cover_bounds_alpha():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(4, 12))
        g = Graph(np.triu(rng.random((n, n)) < 0.5, 1))
        cover = greedy_clique_cover(g)
        alpha, _ = max_independent_set(g)
        assert alpha <= len(cover)
        covered = sorted(v for c in cover for v in c)
        assert covered == list(range(n))


def test_capacity_noiseless_binary():
    bounds = zero_error_capacity_bounds(Channel.noiseless(2), 2)
    assert bounds.lower == 1.0 and bounds.upper == 1.0


def test_capacity_all_confusable():
    bounds = zero_error_capacity_bounds(all_confusable_channel(3), 2)
    assert bounds.lower == 0.0 and bounds.upper == 0.0


def test_capacity_pentagon():
    bounds = zero_error_capacity_bounds(pentagon_channel(), 2)
    assert abs(bounds.lower - math.log2(5.0) / 2) < 1e-9
    assert bounds.lower <= bounds.upper


def test_capacity_lower_nondecreasing_in_kmax():
    chan = pentagon_channel()
    lowers = [zero_error_capacity_bounds(chan, k).lower for k in (1, 2)]
    assert lowers[0] <= lowers[1]


def test_capacity_cap_diagnostic():
    bounds = zero_error_capacity_bounds(Channel.noiseless(5), 4)
    assert bounds.diagnostic  # 5^3 > 40 stops the sweep early
    assert bounds.per_k[-1]["k"] == 2


def test_block_channel_equals_strong_power():
    chan = Channel.from_relation("abc", {"a": ["a", "b"], "b": ["b"], "c": ["c"]})
    g = confusability_graph(chan)
    for k in (2, 3):
        direct = confusability_graph(block_channel(chan, k))
        power = strong_power(g, k)
        # reorder: power labels are (s_1..s_k) with s_1 slowest
        order = np.lexsort(
            tuple(np.array([lab[i] for lab in power.labels]) for i in reversed(range(k)))
        )
        assert np.array_equal(direct.adj, power.adj[np.ix_(order, order)])


def test_build_codebook_noiseless_all_words():
    book = build_codebook(Channel.noiseless(2), 3, 8)
    assert len(book.words) == 8
    assert sorted(book.words) == sorted(itertools.product((0, 1), repeat=3))


def test_build_codebook_pentagon():
    chan = pentagon_channel()
    book = build_codebook(chan, 1, 2)
    a, b = book.words
    assert words_distinguishable(chan, a, b)
    with pytest.raises(CapacityError) as err:
        build_codebook(chan, 1, 3)
    assert err.value.available == 2


def test_build_codebook_power_construction():
    # 4^4 = 256 vertices exceed the exact cap; the power witness still gives
    # alpha(G)^4 = 16 certified words
    from tests.conftest import c4_channel

    chan = c4_channel()
    book = build_codebook(chan, 4, 16)
    assert len(book.words) == 16
    check_codebook(chan, book)
    with pytest.raises(CapacityError):
        build_codebook(chan, 4, 17)


def test_codebook_pairwise_check_catches_confusable():
    from invarion.channel import Codebook

    chan = pentagon_channel()
    bad = Codebook(block=1, words=[(0,), (1,)])
    with pytest.raises(CapacityError):
        check_codebook(chan, bad)


def test_superadditivity_on_random_pairs():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n, m = int(rng.integers(3, 6)), int(rng.integers(3, 6))
        g = Graph(np.triu(rng.random((n, n)) < 0.5, 1))
        h = Graph(np.triu(rng.random((m, m)) < 0.5, 1))
        ag, _ = max_independent_set(g)
        ah, _ = max_independent_set(h)
        agh, _ = max_independent_set(strong_product(g, h))
        assert agh >= ag * ah


def test_channel_validation():
    with pytest.raises(ConfigError):
        Channel.from_relation("ab", {"a": ["a"]})
    with pytest.raises(ConfigError):
        Channel.from_relation("ab", {"a": [], "b": ["b"]})
    with pytest.raises(ConfigError):
        Channel.from_relation("ab", {"a": ["z"], "b": ["b"]})


def test_resolutions_enumeration():
    chan = Channel.from_relation("01", {"0": ["0", "1"], "1": ["1"]})
    res = chan.resolutions()
    assert len(res) == 2
    assert {r[0] for r in res} == {0, 1}
    assert all(r[1] == 1 for r in res)
