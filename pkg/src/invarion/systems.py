"""Discrete-time control systems: linear maps, circle multipliers, products.

A system owns a finite ordered control alphabet. Product systems never
materialize the Cartesian product of the component alphabets: a combined
control index is decoded component-wise in mixed radix (component 0 is the
fastest-varying digit), and words over products can be split into tuples of
component words.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def uniform_controls(low: float, high: float, levels: int, dim: int = 1) -> np.ndarray:
    """Uniform control grid on [low, high]^dim with `levels` points per axis."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    axis = np.linspace(low, high, levels) if levels > 1 else np.array([(low + high) / 2.0])
    if dim == 1:
        return axis.reshape(-1, 1)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """x' = A x + B u with a finite control alphabet (rows of `controls`)."""

    a: np.ndarray
    b: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        controls = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise ValueError("B must be d x m")
        if controls.shape[1] != b.shape[1]:
            raise ValueError("control values must have length m = %d" % b.shape[1])
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "controls", controls)

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.controls.shape[0]

    def control_value(self, index: int) -> np.ndarray:
        return self.controls[index]

    def step(self, state: np.ndarray, control_index: int) -> np.ndarray:
        state = _check_state(state, self.state_dim)
        _check_index(control_index, self.alphabet_size)
        return self.a @ state + self.b @ self.controls[control_index]

    def step_batch(self, states: np.ndarray, control_index: int) -> np.ndarray:
        _check_index(control_index, self.alphabet_size)
        return states @ self.a.T + self.b @ self.controls[control_index]

    def step_value(self, state: np.ndarray, control_value: np.ndarray) -> np.ndarray:
        return self.a @ np.asarray(state, float) + self.b @ np.atleast_1d(np.asarray(control_value, float))


@dataclass(frozen=True, eq=False)
class CircleSystem:
    """x' = (alpha x + u) mod 1 on the circle R/Z, |alpha| >= 2."""

    alpha: int
    controls: np.ndarray

    def __post_init__(self):
        if int(self.alpha) != self.alpha or abs(self.alpha) < 2:
            raise ValueError("alpha must be an integer with |alpha| >= 2")
        controls = np.asarray(self.controls, dtype=float).reshape(-1, 1)
        object.__setattr__(self, "alpha", int(self.alpha))
        object.__setattr__(self, "controls", controls)

    @property
    def state_dim(self) -> int:
        return 1

    @property
    def alphabet_size(self) -> int:
        return self.controls.shape[0]

    def control_value(self, index: int) -> np.ndarray:
        return self.controls[index]

    def step(self, state: np.ndarray, control_index: int) -> np.ndarray:
        state = _check_state(state, 1)
        _check_index(control_index, self.alphabet_size)
        return (self.alpha * state + self.controls[control_index]) % 1.0

    def step_batch(self, states: np.ndarray, control_index: int) -> np.ndarray:
        _check_index(control_index, self.alphabet_size)
        return (self.alpha * states + self.controls[control_index]) % 1.0

    def step_value(self, state, control_value) -> np.ndarray:
        return (self.alpha * np.asarray(state, float) + np.atleast_1d(control_value)) % 1.0


@dataclass(frozen=True, eq=False)
class ProductSystem:
    """Direct product of subsystems; controls are tuples of component controls."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("product needs at least one component")
        object.__setattr__(self, "components", comps)
        sizes = np.array([c.alphabet_size for c in comps], dtype=np.int64)
        strides = np.concatenate([[1], np.cumprod(sizes[:-1])])
        object.__setattr__(self, "_sizes", sizes)
        object.__setattr__(self, "_strides", strides)
        dims = np.array([c.state_dim for c in comps])
        object.__setattr__(self, "_dim_offsets", np.concatenate([[0], np.cumsum(dims)]))

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def state_dim(self) -> int:
        return int(self._dim_offsets[-1])

    @property
    def alphabet_size(self) -> int:
        return int(self._sizes.prod())

    def component_slice(self, i: int) -> slice:
        return slice(int(self._dim_offsets[i]), int(self._dim_offsets[i + 1]))

    def split_index(self, control_index: int) -> tuple:
        _check_index(control_index, self.alphabet_size)
        return tuple(int((control_index // s) % z) for s, z in zip(self._strides, self._sizes))

    def join_index(self, component_indices) -> int:
        return int(sum(int(ci) * int(s) for ci, s in zip(component_indices, self._strides)))

    def control_value(self, index: int) -> np.ndarray:
        parts = self.split_index(index)
        return np.concatenate([c.control_value(p) for c, p in zip(self.components, parts)])

    def step(self, state: np.ndarray, control_index: int) -> np.ndarray:
        state = _check_state(state, self.state_dim)
        parts = self.split_index(control_index)
        return np.concatenate(
            [c.step(state[self.component_slice(i)], p) for i, (c, p) in enumerate(zip(self.components, parts))]
        )

    def step_batch(self, states: np.ndarray, control_index: int) -> np.ndarray:
        parts = self.split_index(control_index)
        return np.concatenate(
            [
                c.step_batch(states[:, self.component_slice(i)], p)
                for i, (c, p) in enumerate(zip(self.components, parts))
            ],
            axis=1,
        )

    def split_entries(self, entries: np.ndarray) -> list:
        """Split (n, tau) combined-alphabet entries into per-component entries."""
        entries = np.asarray(entries, dtype=np.int64)
        return [((entries // s) % z).astype(np.int32) for s, z in zip(self._strides, self._sizes)]

    def join_entries(self, parts) -> np.ndarray:
        acc = np.zeros_like(np.asarray(parts[0], dtype=np.int64))
        for part, s in zip(parts, self._strides):
            acc += np.asarray(part, dtype=np.int64) * int(s)
        return acc


SystemDef = (LinearSystem, CircleSystem, ProductSystem)


@dataclass(frozen=True)
class ControlWord:
    """A finite-horizon word of control alphabet indices."""

    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(int(e) for e in self.entries))
        if not self.entries:
            raise ValueError("word horizon must be >= 1")
        if any(e < 0 for e in self.entries):
            raise ValueError("control indices must be nonnegative")

    @property
    def horizon(self) -> int:
        return len(self.entries)

    def concat(self, other: "ControlWord") -> "ControlWord":
        return ControlWord(self.entries + other.entries)


def validate_word(system, word: ControlWord):
    size = system.alphabet_size
    if any(e >= size for e in word.entries):
        raise ValueError("control index out of range for alphabet of size %d" % size)


def step(system, state, control_index: int) -> np.ndarray:
    """One transition of the system map."""
    return system.step(np.asarray(state, dtype=float).reshape(-1), int(control_index))


def trajectory(system, x0, word: ControlWord) -> np.ndarray:
    """States visited under the word, including x0; shape (horizon+1, d)."""
    validate_word(system, word)
    x = np.asarray(x0, dtype=float).reshape(-1)
    out = np.empty((word.horizon + 1, system.state_dim))
    out[0] = x
    for k, e in enumerate(word.entries):
        x = system.step(x, e)
        out[k + 1] = x
    return out


def trajectory_values(system, x0, control_values) -> np.ndarray:
    """Trajectory under explicit control values (one row per step)."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    values = np.atleast_2d(np.asarray(control_values, dtype=float))
    out = np.empty((values.shape[0] + 1, system.state_dim))
    out[0] = x
    for k in range(values.shape[0]):
        x = system.step_value(x, values[k])
        out[k + 1] = x
    return out


def product(components) -> ProductSystem:
    """Direct product; trajectories factor into component trajectories."""
    return ProductSystem(tuple(components))


def split_product_word(system: ProductSystem, word: ControlWord) -> tuple:
    """View a word over a product alphabet as a tuple of component words."""
    parts = system.split_entries(np.asarray(word.entries, dtype=np.int64).reshape(1, -1))
    return tuple(ControlWord(tuple(int(v) for v in p[0])) for p in parts)


def join_product_word(system: ProductSystem, words) -> ControlWord:
    horizons = {w.horizon for w in words}
    if len(horizons) != 1:
        raise ValueError("component words must share one horizon")
    parts = [np.asarray(w.entries, dtype=np.int64).reshape(1, -1) for w in words]
    return ControlWord(tuple(int(v) for v in system.join_entries(parts)[0]))


def _check_state(state, dim: int) -> np.ndarray:
    state = np.asarray(state, dtype=float).reshape(-1)
    if state.shape[0] != dim:
        raise ValueError("state has length %d, expected %d" % (state.shape[0], dim))
    return state


def _check_index(index: int, size: int):
    if not 0 <= index < size:
        raise ValueError("control index %d out of range [0, %d)" % (index, size))
