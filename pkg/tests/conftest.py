import numpy as np
import pytest

from invarion.channel import Channel
from invarion.regions import band_region, box_region, product_box
from invarion.spanning import one_step_absorbing
from invarion.systems import CircleSystem, LinearSystem, ProductSystem, uniform_controls


def doubling_system(levels=33):
    return LinearSystem([[2.0]], [[1.0]], uniform_controls(-1, 1, levels))


def sync_system(levels=33, alpha=2):
    circ = CircleSystem(alpha, uniform_controls(-1, 1, levels))
    return ProductSystem((circ, circ))


def pentagon_channel():
    return Channel.from_relation(
        "01234", {str(i): [str(i), str((i + 1) % 5)] for i in range(5)}
    )


def c4_channel():
    # 4-symbol channel whose confusability graph is the 4-cycle; zero-error
    # capacity exactly 1 bit/symbol
    return Channel.from_relation(
        "0123", {"0": ["0", "1"], "1": ["1", "2"], "2": ["2", "3"], "3": ["3", "0"]}
    )


def all_confusable_channel(n=3):
    symbols = [str(i) for i in range(n)]
    return Channel.from_relation(symbols, {s: list(symbols) for s in symbols})


def zero_capacity_channel():
    return Channel.from_relation("z", {"z": ["z"]})


def random_product_scenario(seed):
    """Two 1-d linear components with box targets, margins 1.5 cells, and a
    grid-invariance slack that keeps the subsystem DP alive from every cell."""
    rng = np.random.default_rng(seed)
    comps, regions = [], []
    for _ in range(2):
        for _attempt in range(50):
            a = float(rng.choice([0.5, 0.75, 1.0, 1.25]))
            levels = int(rng.choice([5, 7, 9]))
            half = float(rng.choice([0.4, 0.5, 0.6]))
            res = int(rng.choice([13, 17]))
            comp = LinearSystem([[a]], [[1.0]], uniform_controls(-1, 1, levels))
            spacing = 2 * half / (res - 1)
            region = box_region([-half], [half], res, margin=1.5 * spacing)
            if one_step_absorbing(comp, region, region, margin=1.5 * spacing + spacing):
                comps.append(comp)
                regions.append(region)
                break
        else:
            raise RuntimeError("could not draw an invariant component scenario")
    return ProductSystem(tuple(comps)), product_box(regions), comps, regions


@pytest.fixture(scope="session")
def sync_band_64():
    return sync_system(), band_region(0.1, 64, margin=1 / 64)
