import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invarion.errors import ConfigError
from invarion.regions import (
    Box,
    CircleFull,
    GridRegion,
    band_region,
    box_region,
    check_sync_delta,
    product_box,
    torus_dist,
)


def test_discretize_interval_three_points():
    region = box_region([-1], [1], 3)
    assert np.array_equal(region.discretize(), [[-1.0], [0.0], [1.0]])


def test_discretize_square_corners():
    region = box_region([0, 0], [1, 1], 2)
    assert np.array_equal(
        region.discretize(), [[0, 0], [0, 1], [1, 0], [1, 1]]
    )


@pytest.mark.parametrize("n", [16, 48, 64])
def test_band_point_count_matches_brute_force(n):
    # n chosen so no cell pair sits exactly on the distance boundary
    region = band_region(0.1, n)
    brute = sum(
        1
        for i, j in itertools.product(range(n), repeat=2)
        if min(abs(i - j) / n, 1 - abs(i - j) / n) <= 0.1
    )
    assert region.n_elements() == brute


def test_in_interior_box_margin():
    region = box_region([-1], [1], 33, margin=0.1)
    assert region.in_interior([0.0])
    assert not region.in_interior([0.95])


def test_in_interior_band_hand_formula():
    region = band_region(0.1, 64)
    # d = min_j |0.05 - 0.98 + j| = 0.07 < 0.1
    assert region.in_interior([0.05, 0.98], margin=0.0)
    assert torus_dist(0.05, 0.98) == pytest.approx(0.07)


def test_project_box_axis():
    region = box_region([-1, 0], [1, 2], [5, 9])
    sub = region.project([0])
    assert isinstance(sub.shape, Box)
    assert np.array_equal(sub.shape.lower, [-1.0])
    assert np.array_equal(sub.shape.upper, [1.0])
    assert sub.resolution == (5,)


def test_project_band_gives_full_circle():
    region = band_region(0.1, 32)
    sub = region.project([0])
    assert isinstance(sub.shape, CircleFull)
    assert sub.n_elements() == 32
    assert sub.in_interior([0.73])  # no boundary on the circle


def test_project_predicate_contains_projected_grid():
    from invarion.regions import ball_region

    region = ball_region([0.0, 0.0], 1.0, 21)
    sub = region.project([0])
    projected = region.discretize()[:, 0]
    assert sub.contains(projected.reshape(-1, 1)).all()


def test_discretize_membership_closed():
    for region in (box_region([-1], [1], 9, margin=0.3), band_region(0.08, 48)):
        assert region.contains(region.discretize()).all()


@settings(max_examples=50, deadline=None)
@given(st.floats(-1.3, 1.3), st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_margin_monotone(x, eps_small, eps_extra):
    region = box_region([-1], [1], 17)
    big = eps_small + eps_extra
    if region.in_interior([x], margin=big):
        assert region.in_interior([x], margin=eps_small)


def test_projection_containment_of_grids():
    region = box_region([-1, 0], [1, 2], [7, 5])
    sub = region.project([1])
    projected = set(np.round(region.discretize()[:, 1], 12))
    assert projected <= set(np.round(sub.discretize()[:, 0], 12))


def test_empty_grid_is_config_error():
    from invarion.regions import ball_region

    with pytest.raises(ConfigError):
        ball_region([0.0, 0.0], 0.05, 2).discretize()


def test_snap_roundtrip_and_nearest():
    region = box_region([-1], [1], 21, margin=0.1)
    grid = region.discretize()
    assert region.snap(grid[7]) == 7
    # off-grid points snap to the nearest element
    assert region.snap([grid[7, 0] + 0.01]) == 7
    band = band_region(0.1, 32)
    g = band.discretize()
    assert band.snap(g[5] + 1.0) == 5  # periodic wrap


def test_sync_delta_bound():
    check_sync_delta(0.1, 2)
    with pytest.raises(ConfigError):
        check_sync_delta(0.3, 3)  # bound 1/(2|1-3|) = 0.25


def test_per_axis_margins():
    region = GridRegion(Box([-1, -1], [1, 1]), 17, margin=[0.5, 0.1])
    assert region.in_interior([0.0, 0.85])
    assert not region.in_interior([0.6, 0.0])
    sub0, sub1 = region.project([0]), region.project([1])
    assert sub0.margin == 0.5 and sub1.margin == pytest.approx(0.1)


def test_product_box_concatenates_margins():
    r1 = box_region([-1], [1], 9, margin=0.2)
    r2 = box_region([0], [2], 9, margin=0.05)
    prod = product_box([r1, r2])
    assert np.array_equal(prod.margin_vec, [0.2, 0.05])
    assert prod.n_elements() == 81
