"""Invariance entropy, network entropy sets, and zero-error data rates for
networked control systems on grid abstractions."""

from ._kernels import BACKEND
from .errors import CapacityError, ConfigError, InfeasibleCoverError, InvarionError
from .regions import (
    Ball,
    Box,
    CircleBand,
    CircleFull,
    GridRegion,
    band_region,
    box_region,
    check_sync_delta,
    product_box,
    torus_dist,
)
from .systems import (
    CircleSystem,
    ControlWord,
    LinearSystem,
    ProductSystem,
    join_product_word,
    product,
    split_product_word,
    step,
    trajectory,
    trajectory_values,
    uniform_controls,
)

__version__ = "0.1.0"
