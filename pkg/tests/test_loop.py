import math

import numpy as np
import pytest

from invarion.channel import Channel
from invarion.errors import CapacityError, ConfigError
from invarion.frontier import anchored_product_cover, concat_midpoint, frontier
from invarion.loop import (
    GreedyEscapeAdversary,
    ResolutionAdversary,
    SeededAdversary,
    build_network_strategy,
    build_strategy,
    network_simulate,
    scan_escape,
    simulate,
    simulate_exhaustive,
)
from invarion.regions import band_region, box_region
from invarion.spanning import r_inv
from invarion.systems import LinearSystem, uniform_controls
from tests.conftest import (
    c4_channel,
    doubling_system,
    pentagon_channel,
    sync_system,
    zero_capacity_channel,
)


def test_zero_map_any_strategy_ok():
    zero = LinearSystem([[0.0]], [[0.0]], uniform_controls(-1, 1, 3))
    region = box_region([-1], [1], 9, margin=0.3)
    _, sol = r_inv(zero, region, 2)
    strategy = build_strategy(sol, zero_capacity_channel(), region)
    t = simulate(zero, region, strategy, SeededAdversary(0), 57, [0.4])
    assert t.verdict == "ok"
    assert t.states.shape[0] >= 58  # horizon padded to full blocks


def test_cardinality_one_needs_no_capacity():
    zero = LinearSystem([[0.0]], [[0.0]], uniform_controls(-1, 1, 3))
    region = box_region([-1], [1], 9, margin=0.3)
    card, sol = r_inv(zero, region, 3)
    assert card == 1
    strategy = build_strategy(sol, zero_capacity_channel(), region)
    assert strategy.pipelines[0].codebook.words == [(0, 0, 0)]


def test_doubling_fits_binary_channel():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 15, margin=1 / 14)
    card, sol = r_inv(sys1, region, 4, pool_cap=1 << 20, seed=0)
    assert card <= 16
    strategy = build_strategy(sol, Channel.noiseless(2), region)
    t = simulate(sys1, region, strategy, SeededAdversary(1), 16, [0.0])
    assert all(b["decode_ok"] for b in t.blocks)


def test_capacity_error_when_codebook_too_small():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 15, margin=1 / 14)
    card, sol = r_inv(sys1, region, 1)
    assert card == 3
    with pytest.raises(CapacityError) as err:
        build_strategy(sol, pentagon_channel(), region)
    assert err.value.available == 2  # alpha(C5) = 2 at block length 1


def test_forced_codebook_limit_fails():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 15, margin=1 / 14)
    card, sol = r_inv(sys1, region, 2)
    with pytest.raises(CapacityError):
        build_strategy(sol, Channel.noiseless(2), region, codebook_limit=card - 1)


def test_snap_margin_validated_at_build():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 15, margin=1e-4)
    card, sol = r_inv(sys1, region, 1, margin=0.1)
    with pytest.raises(ConfigError, match="snap"):
        build_strategy(sol, Channel.noiseless(4), region)


def test_decoder_correct_under_every_resolution():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 15, margin=1 / 14)
    _, sol = r_inv(sys1, region, 4, pool_cap=1 << 20, seed=0)
    strategy = build_strategy(sol, c4_channel(), region)
    transcripts = simulate_exhaustive(sys1, region, strategy, 12, [0.25])
    assert len(transcripts) == 16
    for t in transcripts:
        assert all(b["decode_ok"] for b in t.blocks)


def test_network_sync_rate_one_and_zero():
    system = sync_system()
    region = band_region(0.1, 64, margin=1 / 64)
    point = anchored_product_cover(system, region, 4, anchor_component=1,
                                   pool_size=1 << 16, seed=3)
    assert point.sizes[1] == 1
    assert len(point.witnesses[0]) <= 16  # fits one bit per step at block 4
    strategy = build_network_strategy(system, region, point,
                                      [c4_channel(), zero_capacity_channel()])
    x0 = region.discretize()[41]
    for t in simulate_exhaustive(system, region, strategy, 2000, x0):
        assert t.verdict == "ok"
        assert all(b["decode_ok"] for b in t.blocks)


def test_network_midpoint_rates_about_half():
    system = sync_system()
    region = band_region(0.1, 64, margin=1 / 64)
    pa = anchored_product_cover(system, region, 4, 1, pool_size=1 << 16, seed=3)
    pb = anchored_product_cover(system, region, 4, 0, pool_size=1 << 16, seed=3)
    mid, ok, _ = concat_midpoint(system, region, pa, pb, verify="block")
    assert ok
    strategy = build_network_strategy(system, region, mid,
                                      [Channel.noiseless(2), Channel.noiseless(2)])
    capability = [math.log2(p.size) / strategy.tau for p in strategy.pipelines]
    assert all(abs(c - 0.5) < 0.2 for c in capability)
    t = network_simulate(system, region, strategy, SeededAdversary(5), 400,
                         region.discretize()[7])
    assert t.verdict == "ok"


def test_zero_capacity_both_escapes():
    system = sync_system()
    region = band_region(0.1, 64, margin=1 / 64)
    point = anchored_product_cover(system, region, 4, 1, pool_size=1 << 16, seed=3)
    degraded = build_network_strategy(
        system, region, point, [zero_capacity_channel(), zero_capacity_channel()],
        allow_degraded=True,
    )
    assert degraded.degraded
    hit = scan_escape(system, region, degraded, SeededAdversary(0), 200)
    assert hit is not None
    assert hit[1] <= 200


def test_greedy_escape_adversary_runs():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 15, margin=1 / 14)
    _, sol = r_inv(sys1, region, 4, pool_cap=1 << 20, seed=0)
    strategy = build_strategy(sol, c4_channel(), region)
    t = simulate(sys1, region, strategy, GreedyEscapeAdversary(cap=64), 8, [0.25])
    # decoding is immune to corruption, so even the escape-seeking adversary
    # cannot break a sound certificate
    assert all(b["decode_ok"] for b in t.blocks)


def test_x0_outside_q_rejected():
    zero = LinearSystem([[0.0]], [[0.0]], uniform_controls(-1, 1, 3))
    region = box_region([-1], [1], 9, margin=0.3)
    _, sol = r_inv(zero, region, 2)
    strategy = build_strategy(sol, zero_capacity_channel(), region)
    with pytest.raises(ValueError):
        simulate(zero, region, strategy, SeededAdversary(0), 10, [2.0])


def test_resolution_adversary_applies_map():
    chan = c4_channel()
    adv = ResolutionAdversary([{0: 1, 1: 2, 2: 3, 3: 0}])

    class _Pipe:
        channel = chan

    assert adv.corrupt(0, _Pipe(), [0, 1, 2]) == [1, 2, 3]


def test_achieved_rate_accounting():
    sys1 = doubling_system()
    region = box_region([-0.5], [0.5], 15, margin=1 / 14)
    card, sol = r_inv(sys1, region, 4, pool_cap=1 << 20, seed=0)
    strategy = build_strategy(sol, Channel.noiseless(2), region)
    # scan all grid starts so every selector word gets used at least once
    used = set()
    for x0 in region.discretize():
        t = simulate(sys1, region, strategy, SeededAdversary(0), 4, x0)
        used.update(b["decoded"][0] for b in t.blocks[:1])
    assert math.log2(len(used)) / 4 <= math.log2(card) / 4 + 1e-9
