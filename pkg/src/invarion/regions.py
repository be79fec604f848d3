"""Compact target sets and their grid abstractions.

A GridRegion samples a compact set Q on a regular per-axis lattice and
answers interior-membership queries with a configurable margin.  The margin
is the slack that makes a grid certificate meaningful for a neighborhood of
each grid point; spanning computations use it everywhere.

Supported shapes: axis-aligned boxes, diagonal bands on the 2-torus
(practical synchronization sets d(x1, x2) <= delta), full circles (arising
as projections of bands), and a built-in ball predicate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigError("box bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise ConfigError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]


@dataclass(frozen=True)
class CircleBand:
    """Q = {(x1, x2) on the 2-torus : d(x1, x2) <= delta}."""

    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta < 0.25:
            raise ConfigError("band delta must lie in (0, 0.25)")

    @property
    def dim(self):
        return 2


@dataclass(frozen=True)
class CircleFull:
    """The whole circle R/Z; compact with empty boundary."""

    @property
    def dim(self):
        return 1


@dataclass(frozen=True, eq=False)
class Ball:
    """Built-in predicate shape: Euclidean ball of given center and radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ConfigError("ball radius must be positive")
        object.__setattr__(self, "center", c)

    @property
    def dim(self):
        return self.center.shape[0]


def torus_dist(a, b):
    """Canonical distance on R/Z: min_j |a - b + j|."""
    d = np.abs(np.asarray(a, float) - np.asarray(b, float)) % 1.0
    return np.minimum(d, 1.0 - d)


class GridRegion:
    """A shape sampled at `resolution` points per axis with interior margin."""

    def __init__(self, shape, resolution, margin=0.0):
        self.shape = shape
        res = np.atleast_1d(np.asarray(resolution, dtype=np.int64))
        if res.shape[0] == 1:
            res = np.repeat(res, shape.dim)
        if res.shape[0] != shape.dim:
            raise ConfigError("resolution must give points per axis")
        if np.any(res < 2):
            raise ConfigError("resolution must be >= 2 per axis")
        self.resolution = tuple(int(r) for r in res)
        mvec = np.atleast_1d(np.asarray(margin, dtype=float))
        if np.any(mvec < 0):
            raise ConfigError("margin must be nonnegative")
        if mvec.shape[0] == 1:
            self.margin = float(mvec[0])
            self.margin_vec = np.full(shape.dim, self.margin) if isinstance(shape, Box) else None
        else:
            if not isinstance(shape, Box) or mvec.shape[0] != shape.dim:
                raise ConfigError("per-axis margins are supported for boxes only")
            self.margin = float(mvec.max())
            self.margin_vec = mvec
        self._grid = None
        self._cells = None
        self._index = None

    # -- geometry -----------------------------------------------------------

    @property
    def state_dim(self):
        return self.shape.dim

    @property
    def periodic_axes(self):
        if isinstance(self.shape, (CircleBand, CircleFull)):
            return tuple([True] * self.state_dim)
        return tuple([False] * self.state_dim)

    def axis_grid(self, axis):
        n = self.resolution[axis]
        if self.periodic_axes[axis]:
            return np.arange(n) / n
        if isinstance(self.shape, Box):
            return np.linspace(self.shape.lower[axis], self.shape.upper[axis], n)
        if isinstance(self.shape, Ball):
            c, r = self.shape.center[axis], self.shape.radius
            return np.linspace(c - r, c + r, n)
        raise ConfigError("no axis grid for shape %r" % (self.shape,))

    def axis_spacing(self, axis):
        g = self.axis_grid(axis)
        if self.periodic_axes[axis]:
            return 1.0 / self.resolution[axis]
        return float(g[1] - g[0])

    @property
    def cell_size(self):
        """Largest axis spacing; `margin='cell'` in configs resolves to this."""
        return max(self.axis_spacing(i) for i in range(self.state_dim))

    @property
    def snap_radius(self):
        """Max distance from any point of Q to its snapped grid cell center."""
        if isinstance(self.shape, CircleBand):
            # snapping both coordinates moves the difference by <= 1/N
            return self.cell_size
        return self.cell_size / 2.0

    # -- membership ---------------------------------------------------------

    def contains(self, states):
        """Closed membership in Q (margin-free)."""
        states, single = _as_batch(states, self.state_dim)
        out = self._membership(states, closed=True, margin=0.0)
        return bool(out[0]) if single else out

    def in_interior(self, states, margin=None):
        """Membership in Q shrunk by the margin (per-axis for boxes);
        margin 0 tests strict interior."""
        if margin is None:
            eps = self.margin_vec if self.margin_vec is not None else self.margin
        else:
            eps = np.atleast_1d(np.asarray(margin, dtype=float))
            eps = float(eps[0]) if eps.shape[0] == 1 else eps
        states, single = _as_batch(states, self.state_dim)
        out = self._membership(states, closed=False, margin=eps)
        return bool(out[0]) if single else out

    def _membership(self, states, closed, margin):
        s = self.shape
        if isinstance(s, Box):
            lo = s.lower + margin
            hi = s.upper - margin
            if closed:
                return np.logical_and(states >= lo, states <= hi).all(axis=1)
            return np.logical_and(states > lo, states < hi).all(axis=1)
        if isinstance(s, CircleBand):
            d = torus_dist(states[:, 0], states[:, 1])
            return d <= s.delta - margin if closed else d < s.delta - margin
        if isinstance(s, CircleFull):
            return np.ones(states.shape[0], dtype=bool)
        if isinstance(s, Ball):
            d = np.linalg.norm(states - s.center, axis=1)
            return d <= s.radius - margin if closed else d < s.radius - margin
        raise ConfigError("unknown shape %r" % (s,))

    # -- discretization -----------------------------------------------------

    def discretize(self):
        """All grid points inside Q, ordered lexicographically by axis."""
        if self._grid is None:
            axes = [self.axis_grid(i) for i in range(self.state_dim)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            cell_axes = [np.arange(self.resolution[i]) for i in range(self.state_dim)]
            cmesh = np.meshgrid(*cell_axes, indexing="ij")
            cells = np.stack([m.ravel() for m in cmesh], axis=1).astype(np.int32)
            keep = self._membership(pts, closed=True, margin=0.0)
            pts, cells = pts[keep], cells[keep]
            if pts.shape[0] == 0:
                raise ConfigError("empty grid: resolution too coarse for the set")
            self._grid = pts
            self._cells = cells
            self._index = {tuple(c): i for i, c in enumerate(cells.tolist())}
        return self._grid

    def grid_cells(self):
        self.discretize()
        return self._cells

    def n_elements(self):
        return self.discretize().shape[0]

    def snap(self, states):
        """Nearest grid element index for each state (per-axis rounding,
        falling back to a nearest-element search off the sampled set)."""
        states, single = _as_batch(states, self.state_dim)
        self.discretize()
        cells = np.empty((states.shape[0], self.state_dim), dtype=np.int64)
        for i in range(self.state_dim):
            n = self.resolution[i]
            if self.periodic_axes[i]:
                cells[:, i] = np.rint((states[:, i] % 1.0) * n).astype(np.int64) % n
            else:
                g0 = self.axis_grid(i)[0]
                h = self.axis_spacing(i)
                cells[:, i] = np.clip(np.rint((states[:, i] - g0) / h), 0, n - 1).astype(np.int64)
        out = np.empty(states.shape[0], dtype=np.int64)
        for j, c in enumerate(cells.tolist()):
            idx = self._index.get(tuple(c))
            if idx is None:
                idx = self._nearest_element(states[j])
            out[j] = idx
        return int(out[0]) if single else out

    def _nearest_element(self, state):
        grid = self.discretize()
        diffs = np.empty_like(grid)
        for i in range(self.state_dim):
            d = grid[:, i] - state[i]
            if self.periodic_axes[i]:
                d = d % 1.0
                d = np.minimum(d, 1.0 - d)
            diffs[:, i] = d
        return int(np.argmin(np.abs(diffs).max(axis=1)))

    # -- projections --------------------------------------------------------

    def project(self, dims):
        """Projection onto the given axes.  Exact for boxes; bands project to
        the full circle; predicate shapes return the bounding interval of the
        projected grid points (an over-approximation)."""
        dims = tuple(int(i) for i in (dims if np.iterable(dims) else [dims]))
        if any(i < 0 or i >= self.state_dim for i in dims):
            raise ConfigError("projection axes out of range")
        res = tuple(self.resolution[i] for i in dims)
        s = self.shape
        if isinstance(s, Box):
            sub = Box(s.lower[list(dims)], s.upper[list(dims)])
            return GridRegion(sub, res, self.margin_vec[list(dims)])
        if isinstance(s, CircleBand):
            if len(dims) == 2:
                return GridRegion(s, res, self.margin)
            return GridRegion(CircleFull(), res, self.margin)
        if isinstance(s, CircleFull):
            return GridRegion(s, res, self.margin)
        pts = self.discretize()[:, list(dims)]
        sub = Box(pts.min(axis=0), pts.max(axis=0))
        return GridRegion(sub, res, self.margin)

    def interior_mask_mixed(self, fixed_axes, fixed_values, free_axes, free_states, margin=None):
        """Interior test for states assembled from fixed coordinates plus a
        batch of values on the remaining axes (used by the subsystem DP)."""
        free_states = np.atleast_2d(np.asarray(free_states, dtype=float))
        n = free_states.shape[0]
        full = np.empty((n, self.state_dim))
        for j, ax in enumerate(fixed_axes):
            full[:, ax] = fixed_values[j]
        for j, ax in enumerate(free_axes):
            full[:, ax] = free_states[:, j]
        return self.in_interior(full, margin=margin)


def box_region(lower, upper, resolution, margin=0.0):
    return GridRegion(Box(lower, upper), resolution, margin)


def band_region(delta, resolution, margin=0.0):
    return GridRegion(CircleBand(delta), resolution, margin)


def ball_region(center, radius, resolution, margin=0.0):
    return GridRegion(Ball(center, radius), resolution, margin)


def product_box(regions):
    """Cartesian product of box regions (grids and margins concatenate exactly)."""
    lows, highs, res, margins = [], [], [], []
    for r in regions:
        if not isinstance(r.shape, Box):
            raise ConfigError("product_box needs box factors")
        lows.append(r.shape.lower)
        highs.append(r.shape.upper)
        res.extend(r.resolution)
        margins.append(r.margin_vec)
    return GridRegion(
        Box(np.concatenate(lows), np.concatenate(highs)), res, np.concatenate(margins)
    )


def check_sync_delta(delta, alpha):
    """Validity bound for synchronization targets: delta <= 1/(2|1-alpha|)."""
    bound = 1.0 / (2.0 * abs(1 - alpha))
    if delta > bound:
        raise ConfigError(
            "band delta %g exceeds the controlled-invariance bound %g for alpha=%d"
            % (delta, bound, alpha)
        )


def _as_batch(states, dim):
    arr = np.asarray(states, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError("state has length %d, expected %d" % (arr.shape[0], dim))
        return arr.reshape(1, -1), True
    if arr.shape[1] != dim:
        raise ValueError("states have dim %d, expected %d" % (arr.shape[1], dim))
    return arr, False
