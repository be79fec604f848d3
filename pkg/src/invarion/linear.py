"""Closed-form entropy of linear systems and entropy-preserving transformations.

The per-subsystem data-rate threshold of a linear pair is the sum of
max{0, n_lambda * log2|lambda|} over its eigenvalues.  Controllable pairs
reduce to the Brunovsky normal form (nilpotent shift blocks, unit input
columns) under state coordinates, input coordinates and feedback; the
transformed dynamics have all eigenvalues at zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .systems import LinearSystem

_MAX_DIM = 12
_UNIT_CIRCLE_TOL = 1e-9
_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class LinearPair:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        if b.shape[0] != a.shape[0]:
            raise ValueError("B must have d rows")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.b.shape[1]


@dataclass(frozen=True, eq=False)
class StateTransformation:
    """x -> Tx with controls u -> Vu."""

    t: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.t, float))
        v = np.atleast_2d(np.asarray(self.v, float))
        _check_invertible(t, "T")
        _check_invertible(v, "V")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True, eq=False)
class FeedbackTransformation:
    """(x, u) -> (Tx, Vu - VFx)."""

    t: np.ndarray
    v: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.t, float))
        v = np.atleast_2d(np.asarray(self.v, float))
        f = np.atleast_2d(np.asarray(self.f, float))
        _check_invertible(t, "T")
        _check_invertible(v, "V")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "f", f)


def _check_invertible(mat, name):
    if mat.shape[0] != mat.shape[1]:
        raise ValueError("%s must be square" % name)
    if np.linalg.cond(mat) > _COND_LIMIT:
        raise ValueError("%s is singular or too ill-conditioned" % name)


# ---------------------------------------------------------------------------

def spectrum(a) -> np.ndarray:
    """Eigenvalues (with multiplicity, deterministically ordered)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("spectrum needs a square matrix")
    if a.shape[0] > _MAX_DIM:
        raise ValueError("matrices larger than %d x %d are out of scope" % (_MAX_DIM, _MAX_DIM))
    eig = np.linalg.eigvals(a)
    order = np.lexsort((eig.imag, eig.real))
    return eig[order]


def unstable_entropy(a) -> float:
    """Sum of log2|lambda| over eigenvalues outside the unit circle (bits per
    step).  Eigenvalues within 1e-9 of the circle contribute zero and warn."""
    total = 0.0
    for lam in spectrum(a):
        mag = abs(lam)
        if mag > 1.0 + _UNIT_CIRCLE_TOL:
            total += np.log2(mag)
        elif mag > 1.0 - _UNIT_CIRCLE_TOL:
            warnings.warn(
                "eigenvalue %s lies on the unit-circle tolerance band; counted as stable"
                % lam,
                stacklevel=2,
            )
    return float(total)


def controllability_matrix(pair: LinearPair) -> np.ndarray:
    blocks = [pair.b]
    for _ in range(pair.dim - 1):
        blocks.append(pair.a @ blocks[-1])
    return np.hstack(blocks)


def controllable(pair: LinearPair):
    """Kalman rank test; returns (verdict, controllability indices)."""
    _, indices = _select_columns(pair)
    return int(sum(indices)) == pair.dim, tuple(indices)


def _select_columns(pair: LinearPair):
    """Greedy independent-column selection of [B, AB, ...] scanning powers
    outward; yields the controllability indices (left-justified diagram)."""
    d, m = pair.dim, pair.m
    selected = []
    indices = [0] * m
    rank = 0
    power_cols = [pair.b[:, j] for j in range(m)]
    for k in range(d):
        if k > 0:
            power_cols = [pair.a @ c for c in power_cols]
        for j in range(m):
            if k > 0 and indices[j] < k:
                continue  # once input j stalls, higher powers stay dependent
            cand = selected + [(j, k, power_cols[j])]
            mat = np.column_stack([c for _, _, c in cand])
            if np.linalg.matrix_rank(mat) > rank:
                selected.append((j, k, power_cols[j]))
                rank += 1
                indices[j] = k + 1
        if rank == d:
            break
    return selected, indices


def brunovsky(pair: LinearPair):
    """Feedback transformation (T, V, F) bringing a controllable pair to the
    Brunovsky canonical blocks; returns (transformation, transformed pair)."""
    ok, indices = controllable(pair)
    if not ok:
        rank = int(sum(indices))
        raise ValueError(
            "pair is not controllable: controllability matrix has rank %d < %d"
            % (rank, pair.dim)
        )
    d, m = pair.dim, pair.m
    selected, _ = _select_columns(pair)
    chains = [j for j in sorted(set(j for j, _, _ in selected),
                                key=lambda j: (-indices[j], j)) if indices[j] > 0]
    mu = [indices[j] for j in chains]
    r = len(chains)

    cols, ends = [], []
    pos = 0
    for j, mu_j in zip(chains, mu):
        c = pair.b[:, j]
        for _ in range(mu_j):
            cols.append(c)
            c = pair.a @ c
            pos += 1
        ends.append(pos - 1)
    basis = np.column_stack(cols)
    basis_inv = np.linalg.inv(basis)

    rows = []
    for i in range(r):
        q = basis_inv[ends[i]]
        for l in range(mu[i]):
            rows.append(q @ np.linalg.matrix_power(pair.a, l))
    t_mat = np.vstack(rows)
    t_inv = np.linalg.inv(t_mat)

    a_bar = t_mat @ pair.a @ t_inv
    b_bar = t_mat @ pair.b
    end_rows = np.array([sum(mu[: i + 1]) - 1 for i in range(r)])
    g = b_bar[end_rows]  # (r, m); unit upper-triangular on the chain inputs

    v = np.zeros((m, m))
    v[:r] = g
    if r < m:
        # complete V with rows orthogonal to the chain rows
        _, _, vt = np.linalg.svd(g)
        v[r:] = vt[r:]
    _check_invertible(v, "V")

    r_hat = np.zeros((m, d))
    r_hat[:r] = a_bar[end_rows]
    f = -np.linalg.solve(v, r_hat) @ t_mat

    transform = FeedbackTransformation(t_mat, v, f)
    canon_a = t_mat @ (pair.a + pair.b @ f) @ t_inv
    canon_b = t_mat @ pair.b @ np.linalg.inv(v)
    return transform, LinearPair(canon_a, canon_b)


def brunovsky_blocks(indices):
    """The canonical (N, E) matrices for given controllability indices."""
    mu = [m for m in indices if m > 0]
    d = sum(mu)
    n_mat = np.zeros((d, d))
    e_mat = np.zeros((d, len(indices)))
    pos = 0
    for i, mu_i in enumerate(mu):
        for l in range(mu_i - 1):
            n_mat[pos + l, pos + l + 1] = 1.0
        e_mat[pos + mu_i - 1, i] = 1.0
        pos += mu_i
    return n_mat, e_mat


# ---------------------------------------------------------------------------

def apply_transformation(system: LinearSystem, transform, controls=None) -> LinearSystem:
    """Transformed linear system.  For state transformations the alphabet maps
    through V; feedback transformations make the control map state-dependent,
    so grid-compatible scenarios should pass the intended alphabet explicitly."""
    if not isinstance(system, LinearSystem):
        raise ValueError("transformations are defined for linear systems")
    t, v = transform.t, transform.v
    if t.shape[0] != system.state_dim:
        raise ValueError("T does not match the state dimension")
    t_inv = np.linalg.inv(t)
    if isinstance(transform, FeedbackTransformation):
        a_new = t @ (system.a + system.b @ transform.f) @ t_inv
    else:
        a_new = t @ system.a @ t_inv
    b_new = t @ system.b @ np.linalg.inv(v)
    if controls is None:
        controls = system.controls @ v.T
    return LinearSystem(a_new, b_new, controls)


def transform_state(transform, states):
    return np.asarray(states, float) @ transform.t.T


def transform_word_values(transform, states, values):
    """Map a control-value sequence along an f-trajectory: beta(u) = Vu for
    state transformations, delta(x, u) = Vu - VFx for feedback ones.
    `states` are the f-states at which each control is applied."""
    values = np.atleast_2d(np.asarray(values, float))
    out = values @ transform.v.T
    if isinstance(transform, FeedbackTransformation):
        states = np.atleast_2d(np.asarray(states, float))[: values.shape[0]]
        out = out - states @ (transform.v @ transform.f).T
    return out


def rectangular_entropy_set(pairs):
    """Per-component thresholds of the rectangular network entropy set
    prod_i [threshold_i, inf).  Warns when a pair is not controllable (the
    formula's hypothesis fails)."""
    thresholds = []
    for i, pair in enumerate(pairs):
        ok, _ = controllable(pair)
        if not ok:
            warnings.warn(
                "pair %d is not controllable; the rectangular formula's hypothesis fails" % i,
                stacklevel=2,
            )
        thresholds.append(unstable_entropy(pair.a))
    return thresholds


def blockdiag(mats):
    mats = [np.atleast_2d(np.asarray(m, float)) for m in mats]
    d = sum(m.shape[0] for m in mats)
    out = np.zeros((d, d))
    pos = 0
    for m in mats:
        k = m.shape[0]
        out[pos : pos + k, pos : pos + k] = m
        pos += k
    return out


def volume_growth_check(a, region, tau: int):
    """Numerical volume-growth check on scalar/diagonal dynamics: occupied
    grid-cell counts of the box image under the unstable block must grow at a
    rate within 10% of the unstable determinant."""
    a = np.atleast_2d(np.asarray(a, float))
    if not np.allclose(a, np.diag(np.diag(a))):
        raise ValueError("volume growth check supports scalar/diagonal dynamics")
    diag = np.diag(a)
    unstable = np.abs(diag) > 1.0
    if not unstable.any():
        return {"rate": 0.0, "bound": 0.0, "ok": True}
    lower, upper = region.shape.lower, region.shape.upper
    cells0, cells_tau = 1.0, 1.0
    for i in np.nonzero(unstable)[0]:
        h = region.axis_spacing(i)
        width = upper[i] - lower[i]
        cells0 *= np.ceil(width / h)
        cells_tau *= np.ceil(width * abs(diag[i]) ** tau / h)
    rate = float(np.log2(cells_tau / cells0) / tau)
    bound = float(np.sum(np.log2(np.abs(diag[unstable]))))
    return {"rate": rate, "bound": bound, "ok": rate >= 0.9 * bound}
