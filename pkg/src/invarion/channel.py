"""Nondeterministic channels, confusability graphs, zero-error capacity bounds.

Capacity is reported as certified finite-block bounds: achievable rates from
independence numbers of strong powers of the confusability graph (exact branch
and bound with a greedy clique-cover bound), and upper bounds from greedy
clique covers, valid by submultiplicativity under the strong product.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ConfigError

MIS_EXACT_CAP = 40


@dataclass(eq=False)
class Channel:
    """Finite input alphabet with a set-valued output relation kappa."""

    symbols: tuple
    kappa: tuple  # tuple of frozensets of symbol indices

    @classmethod
    def from_relation(cls, symbols, relation):
        symbols = tuple(str(s) for s in symbols)
        index = {s: i for i, s in enumerate(symbols)}
        if len(index) != len(symbols):
            raise ConfigError("channel symbols must be distinct")
        kappa = []
        for s in symbols:
            if s not in relation:
                raise ConfigError("channel relation misses symbol %r" % s)
            outs = relation[s]
            if not outs:
                raise ConfigError("kappa(%r) must be nonempty" % s)
            try:
                kappa.append(frozenset(index[o] for o in outs))
            except KeyError as exc:
                raise ConfigError("channel relation maps %r outside the alphabet" % s) from exc
        return cls(symbols, tuple(kappa))

    @classmethod
    def noiseless(cls, n):
        symbols = tuple(str(i) for i in range(n))
        return cls(symbols, tuple(frozenset([i]) for i in range(n)))

    @property
    def size(self):
        return len(self.symbols)

    def resolutions(self, cap=4096):
        """All stationary deterministic resolutions (choice functions of kappa),
        each a per-symbol output assignment."""
        count = 1
        for k in self.kappa:
            count *= len(k)
            if count > cap:
                raise ValueError("too many resolutions to enumerate (> %d)" % cap)
        choices = [sorted(k) for k in self.kappa]
        return [dict(enumerate(combo)) for combo in itertools.product(*choices)]


@dataclass(eq=False)
class Graph:
    """Undirected graph as a boolean adjacency matrix with vertex labels."""

    adj: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        adj = np.asarray(self.adj, dtype=bool)
        if adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        np.fill_diagonal(adj, False)
        object.__setattr__(self, "adj", adj | adj.T)
        if not self.labels:
            object.__setattr__(self, "labels", [(i,) for i in range(adj.shape[0])])

    @property
    def n(self):
        return self.adj.shape[0]


def cycle_graph(n):
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        adj[i, (i + 1) % n] = True
    return Graph(adj)


def confusability_graph(channel: Channel) -> Graph:
    """Edge {b, b'} iff kappa(b) and kappa(b') intersect (b != b')."""
    n = channel.size
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if channel.kappa[i] & channel.kappa[j]:
                adj[i, j] = True
    return Graph(adj, [(i,) for i in range(n)])


def strong_product(g: Graph, h: Graph) -> Graph:
    """Vertices are pairs; distinct pairs are adjacent iff both coordinates
    are equal or adjacent."""
    a1 = g.adj | np.eye(g.n, dtype=bool)
    a2 = h.adj | np.eye(h.n, dtype=bool)
    adj = np.kron(a1, a2)
    np.fill_diagonal(adj, False)
    labels = [lg + lh for lg in g.labels for lh in h.labels]
    return Graph(adj, labels)


def strong_power(g: Graph, k: int) -> Graph:
    out = g
    for _ in range(k - 1):
        out = strong_product(out, g)
    return out


def block_channel(channel: Channel, k: int) -> Channel:
    """The k-block channel: symbols are k-tuples, kappa acts componentwise."""
    symbols = []
    kappa = []
    base = range(channel.size)
    tuples = list(itertools.product(base, repeat=k))
    index = {t: i for i, t in enumerate(tuples)}
    for t in tuples:
        symbols.append("|".join(channel.symbols[i] for i in t))
        outs = set()
        for combo in itertools.product(*[sorted(channel.kappa[i]) for i in t]):
            outs.add(index[combo])
        kappa.append(frozenset(outs))
    return Channel(tuple(symbols), tuple(kappa))


# ---------------------------------------------------------------------------
# exact maximum independent set

def max_independent_set(graph: Graph):
    """Exact independence number with witness (branch and bound, greedy
    clique-cover bound, deterministic lowest-index tie-breaking)."""
    n = graph.n
    if n > MIS_EXACT_CAP:
        raise ValueError(
            "exact MIS capped at %d vertices (got %d); use capacity bounds instead"
            % (MIS_EXACT_CAP, n)
        )
    if n == 0:
        return 0, []
    nbr = [0] * n
    for i in range(n):
        mask = 0
        for j in np.nonzero(graph.adj[i])[0]:
            mask |= 1 << int(j)
        nbr[i] = mask
    full = (1 << n) - 1

    def clique_cover_bound(p_mask):
        count = 0
        rest = p_mask
        while rest:
            v = (rest & -rest).bit_length() - 1
            clique = 1 << v
            candidates = rest & nbr[v]
            while candidates:
                u = (candidates & -candidates).bit_length() - 1
                clique |= 1 << u
                candidates &= nbr[u]
            rest &= ~clique
            count += 1
        return count

    best = {"size": 0, "set": 0}

    def expand(p_mask, cur_mask, cur_size):
        if p_mask == 0:
            if cur_size > best["size"]:
                best["size"] = cur_size
                best["set"] = cur_mask
            return
        if cur_size + clique_cover_bound(p_mask) <= best["size"]:
            return
        # branch on the candidate of max degree within P (ties: lowest index)
        v, vdeg = -1, -1
        rest = p_mask
        while rest:
            u = (rest & -rest).bit_length() - 1
            deg = bin(nbr[u] & p_mask).count("1")
            if deg > vdeg:
                v, vdeg = u, deg
            rest &= rest - 1
        expand(p_mask & ~nbr[v] & ~(1 << v), cur_mask | (1 << v), cur_size + 1)
        expand(p_mask & ~(1 << v), cur_mask, cur_size)

    expand(full, 0, 0)
    witness = [i for i in range(n) if best["set"] >> i & 1]
    return best["size"], witness


def greedy_clique_cover(graph: Graph):
    """Greedy largest-first clique cover; its size upper-bounds the
    independence number."""
    n = graph.n
    order = sorted(range(n), key=lambda v: (-int(graph.adj[v].sum()), v))
    uncovered = set(range(n))
    cliques = []
    while uncovered:
        seed = next(v for v in order if v in uncovered)
        clique = [seed]
        for v in order:
            if v in uncovered and v != seed and all(graph.adj[v, u] for u in clique):
                clique.append(v)
        uncovered -= set(clique)
        cliques.append(sorted(clique))
    return cliques


@dataclass
class CapacityBounds:
    lower: float
    upper: float
    per_k: list
    diagnostic: str = ""


def zero_error_capacity_bounds(channel: Channel, k_max: int) -> CapacityBounds:
    """Certified lower/upper bounds on the zero-error capacity from blocks up
    to k_max (bits per symbol)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    g = confusability_graph(channel)
    per_k = []
    lower, upper = 0.0, math.inf
    diagnostic = ""
    power = None
    for k in range(1, k_max + 1):
        if channel.size**k > MIS_EXACT_CAP:
            diagnostic = (
                "stopped at block length %d: %d^%d vertices exceed the exact-MIS cap %d"
                % (k - 1, channel.size, k, MIS_EXACT_CAP)
            )
            break
        power = g if k == 1 else strong_product(power, g)
        alpha, witness = max_independent_set(power)
        cover = greedy_clique_cover(power)
        lo = math.log2(alpha) / k
        up = math.log2(len(cover)) / k
        lower = max(lower, lo)
        upper = min(upper, up)
        per_k.append({"k": k, "alpha": alpha, "clique_cover": len(cover),
                      "lower": lo, "upper": up, "witness": witness})
    if not per_k:
        raise ValueError("alphabet too large for exact bounds at any block length")
    return CapacityBounds(lower=lower, upper=upper, per_k=per_k, diagnostic=diagnostic)


# ---------------------------------------------------------------------------
# codebooks

@dataclass(eq=False)
class Codebook:
    """Pairwise-distinguishable words of a fixed block length (symbol indices)."""

    block: int
    words: list

    def __len__(self):
        return len(self.words)


def disjoint_matrix(channel: Channel) -> np.ndarray:
    """disjoint[a, b] iff kappa(a) and kappa(b) cannot be confused."""
    n = channel.size
    out = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            out[i, j] = not (channel.kappa[i] & channel.kappa[j])
    return out


def words_distinguishable(channel: Channel, w1, w2) -> bool:
    """Images under the block relation are disjoint iff the symbols are
    kappa-disjoint at some position."""
    return any(not (channel.kappa[a] & channel.kappa[b]) for a, b in zip(w1, w2))


def check_codebook(channel: Channel, codebook: Codebook):
    """Exhaustive pairwise distinguishability check."""
    for i in range(len(codebook.words)):
        for j in range(i + 1, len(codebook.words)):
            if not words_distinguishable(channel, codebook.words[i], codebook.words[j]):
                raise CapacityError(
                    "codebook words %d and %d are confusable" % (i, j)
                )
    return True


def build_codebook(channel: Channel, block: int, size: int) -> Codebook:
    """`size` pairwise-distinguishable words of the given block length (an
    independent-set witness of the strong power, truncated)."""
    if size < 1:
        raise ValueError("codebook size must be >= 1")
    g = confusability_graph(channel)
    if channel.size**block <= MIS_EXACT_CAP:
        power = strong_power(g, block)
        alpha, witness = max_independent_set(power)
        if size > alpha:
            raise CapacityError(
                "requested %d words but the block-%d independence number is %d"
                % (size, block, alpha),
                required=size,
                available=alpha,
            )
        words = [tuple(power.labels[v]) for v in witness[:size]]
    else:
        alpha, witness = max_independent_set(g)
        certified = alpha**block
        if size > certified:
            raise CapacityError(
                "requested %d words but the certified block-%d codebook size is %d"
                % (size, block, certified),
                required=size,
                available=certified,
            )
        witness = sorted(witness)
        words = []
        for idx in range(size):
            digits = []
            rem = idx
            for _ in range(block):
                digits.append(witness[rem % alpha])
                rem //= alpha
            words.append(tuple(digits))
    book = Codebook(block=block, words=words)
    check_codebook(channel, book)
    return book
