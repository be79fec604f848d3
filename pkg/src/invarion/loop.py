"""Closed-loop block-coding strategies over zero-error channels.

Per block: the coder snaps the measured state to its grid element, looks up
the selector, and transmits the codeword of that word index one symbol per
time step; the channel corrupts symbols within its relation (adversary
policies below); the decoder inverts the distinguishable codebook and
actuates the decoded control word for the block (no-delay block model).

Adversary policies: 'resolution' (a fixed stationary symbol map, enumerated
exhaustively by `simulate_exhaustive`), 'seeded' (per-use random choice from
kappa), 'greedy-escape' (per block, the resolution combo maximizing the
distance from the region center after the block).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Channel, Codebook, build_codebook
from .errors import CapacityError, ConfigError
from .frontier import FrontierPoint, verify_product_spanning
from .regions import GridRegion
from .spanning import SpanningSolution
from .systems import ControlWord, ProductSystem

from . import _kernels as K


@dataclass(eq=False)
class SubsystemPipeline:
    channel: Channel
    codebook: Codebook
    words: list  # ControlWord per codebook index

    @property
    def size(self):
        return len(self.words)


@dataclass(eq=False)
class BlockCodingStrategy:
    region: GridRegion
    tau: int
    pipelines: list
    selector: np.ndarray  # (n_elements, n_pipelines) word indices
    degraded: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_pipelines(self):
        return len(self.pipelines)


@dataclass
class Transcript:
    states: np.ndarray
    blocks: list
    verdict: str
    first_escape: object
    rates: list
    meta: dict = field(default_factory=dict)

    def to_json_records(self):
        for k in range(self.states.shape[0]):
            yield {"step": k, "state": self.states[k].tolist()}

    def summary(self):
        return {
            "verdict": self.verdict,
            "first_escape": self.first_escape,
            "steps": int(self.states.shape[0] - 1),
            "rates_bits_per_step": self.rates,
            **self.meta,
        }


def _validate_snap_margin(region):
    if region.margin_vec is not None:
        spacings = np.array([region.axis_spacing(a) for a in range(region.state_dim)])
        if np.any(region.margin_vec < spacings / 2.0):
            raise ConfigError(
                "per-axis margins %s do not dominate the snapping errors %s"
                % (region.margin_vec.tolist(), (spacings / 2.0).tolist())
            )
        return
    if region.margin < region.snap_radius:
        raise ConfigError(
            "region margin %g does not dominate the measurement snapping error %g"
            % (region.margin, region.snap_radius)
        )


def build_strategy(solution: SpanningSolution, channel: Channel, region: GridRegion,
                   codebook_limit=None, allow_degraded=False) -> BlockCodingStrategy:
    """Single-pipeline strategy carrying the full-system word index.  Fails
    when the channel cannot carry `solution.cardinality` distinguishable words
    in tau symbols (the necessity direction of the data-rate theorem)."""
    _validate_snap_margin(region)
    tau = solution.tau
    required = solution.cardinality
    limit = required if codebook_limit is None else int(codebook_limit)
    size = min(required, limit)
    degraded = False
    if size < required:
        if not allow_degraded:
            raise CapacityError(
                "codebook limited to %d words but the spanning solution needs %d"
                % (size, required),
                required=required,
                available=size,
            )
        degraded = True
    try:
        codebook = build_codebook(channel, tau, size)
    except CapacityError as exc:
        if not allow_degraded:
            raise
        codebook = build_codebook(channel, tau, exc.available)
        degraded = True
        size = exc.available
    words = solution.words[:size]
    selector = np.where(solution.selector < size, solution.selector, 0).reshape(-1, 1)
    pipeline = SubsystemPipeline(channel=channel, codebook=codebook, words=words)
    return BlockCodingStrategy(
        region=region, tau=tau, pipelines=[pipeline], selector=selector,
        degraded=degraded, meta={"required": required, "usable": size},
    )


def build_network_strategy(system: ProductSystem, region: GridRegion,
                           point: FrontierPoint, channels,
                           codebook_limits=None, allow_degraded=False) -> BlockCodingStrategy:
    """Per-subsystem pipelines from a product frontier witness: subsystem i's
    channel carries the index within its witness set."""
    _validate_snap_margin(region)
    if len(channels) != system.n_components:
        raise ConfigError("need one channel per subsystem")
    tau = point.tau
    limits = codebook_limits or [None] * len(channels)
    pipelines = []
    degraded = False
    kept = []
    for i, chan in enumerate(channels):
        words = list(point.witnesses[i])
        required = len(words)
        limit = required if limits[i] is None else int(limits[i])
        size = min(required, limit)
        if size < required:
            if not allow_degraded:
                raise CapacityError(
                    "subsystem %d codebook limited to %d words but the witness has %d"
                    % (i, size, required),
                    required=required,
                    available=size,
                )
            degraded = True
        try:
            codebook = build_codebook(chan, tau, size)
        except CapacityError as exc:
            if not allow_degraded:
                raise CapacityError(
                    "subsystem %d channel cannot carry %d words at block %d: %s"
                    % (i, size, tau, exc),
                    required=size,
                    available=exc.available,
                ) from exc
            size = exc.available
            codebook = build_codebook(chan, tau, size)
            degraded = True
        kept.append(words[:size])
        pipelines.append(SubsystemPipeline(channel=chan, codebook=codebook, words=words[:size]))

    ok, uncovered, packed, idx = verify_product_spanning(system, region, kept,
                                                         margin=region.margin)
    if not ok and not allow_degraded:
        raise CapacityError(
            "witness does not span the grid after capacity clamping "
            "(%d uncovered elements)" % len(uncovered)
        )
    degraded = degraded or not ok
    bits = K.unpack_bits(packed, region.n_elements())
    first = np.argmax(bits, axis=0)
    covered = bits.any(axis=0)
    selector = idx[first]
    selector[~covered] = 0
    return BlockCodingStrategy(
        region=region, tau=tau, pipelines=pipelines, selector=selector,
        degraded=degraded,
        meta={"witness_sizes": [len(w) for w in point.witnesses],
              "usable_sizes": [p.size for p in pipelines]},
    )


# ---------------------------------------------------------------------------
# adversaries

@dataclass
class ResolutionAdversary:
    """Stationary per-pipeline symbol maps (deterministic channel versions)."""

    maps: list  # one dict symbol->symbol per pipeline

    def corrupt(self, pipe_index, pipeline, symbols):
        m = self.maps[pipe_index]
        return [m[s] for s in symbols]


@dataclass
class SeededAdversary:
    seed: int = 0

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)

    def corrupt(self, pipe_index, pipeline, symbols):
        out = []
        for s in symbols:
            choices = sorted(pipeline.channel.kappa[s])
            out.append(choices[self._rng.integers(len(choices))])
        return out


class GreedyEscapeAdversary:
    """Marker resolved inside simulate(): per block, tries all stationary
    resolution combos (capped) and keeps the one maximizing the distance from
    the region center after the block."""

    def __init__(self, cap=256):
        self.cap = cap


def identity_resolution(channel: Channel):
    return {i: sorted(k)[0] if i not in k else i for i, k in enumerate(channel.kappa)}


# ---------------------------------------------------------------------------
# simulation

def simulate(system, region: GridRegion, strategy: BlockCodingStrategy,
             adversary, horizon: int, x0) -> Transcript:
    """Repeated measure -> encode -> transmit -> decode -> actuate blocks;
    the verdict is 'ok' iff every state at steps >= 1 stays in the strict
    interior of Q.  Escape stops the run (it is a verdict, not an error)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if not region.contains(x0):
        raise ValueError("x0 must lie in Q")
    tau = strategy.tau
    n_blocks = -(-horizon // tau)
    states = [x0.copy()]
    blocks = []
    used = [set() for _ in strategy.pipelines]
    first_escape = None
    x = x0.copy()
    step_count = 0

    for b in range(n_blocks):
        element = region.snap(x)
        word_idx = strategy.selector[element]
        if isinstance(adversary, GreedyEscapeAdversary):
            received, decoded = _greedy_block(system, region, strategy, x, word_idx, adversary.cap)
        else:
            received, decoded = _plain_block(strategy, adversary, word_idx)
        record = {
            "block": b,
            "start_step": step_count,
            "element": int(element),
            "sent": [int(w) for w in word_idx],
            "received": received,
            "decoded": decoded,
            "decode_ok": decoded == [int(w) for w in word_idx],
        }
        blocks.append(record)
        for i, w in enumerate(decoded):
            used[i].add(w)
        control_words = [strategy.pipelines[i].words[w] for i, w in enumerate(decoded)]
        for k in range(tau):
            x = _apply_step(system, strategy, control_words, k, x)
            states.append(x.copy())
            step_count += 1
            if first_escape is None and not region.in_interior(x, margin=0.0):
                first_escape = step_count
        if first_escape is not None:
            break

    rates = [math.log2(max(1, len(u))) / tau for u in used]
    return Transcript(
        states=np.array(states),
        blocks=blocks,
        verdict="ok" if first_escape is None else "escape",
        first_escape=first_escape,
        rates=rates,
        meta={"degraded": strategy.degraded, "horizon": horizon, "tau": tau},
    )


def _apply_step(system, strategy, control_words, k, x):
    if strategy.n_pipelines == 1:
        return system.step(x, control_words[0].entries[k])
    joint = system.join_index([w.entries[k] for w in control_words])
    return system.step(x, joint)


def _plain_block(strategy, adversary, word_idx):
    received_all, decoded_all = [], []
    for i, pipe in enumerate(strategy.pipelines):
        sent_word = pipe.codebook.words[word_idx[i]]
        received = adversary.corrupt(i, pipe, list(sent_word))
        received_all.append([int(s) for s in received])
        decoded_all.append(_decode(pipe, received))
    return received_all, decoded_all


def _decode(pipeline, received):
    for idx, word in enumerate(pipeline.codebook.words):
        if all(r in pipeline.channel.kappa[s] for s, r in zip(word, received)):
            return idx
    raise CapacityError("received block matches no codeword")


def _greedy_block(system, region, strategy, x, word_idx, cap):
    combos = []
    for pipe in strategy.pipelines:
        try:
            res = pipe.channel.resolutions(cap)
        except ValueError:
            res = [identity_resolution(pipe.channel)]
        combos.append(res)
    total = 1
    for c in combos:
        total *= len(c)
    if total > cap:
        combos = [c[: max(1, cap // len(combos))] for c in combos]
    center = _region_center(region)
    best = None
    for maps in itertools.product(*combos):
        adv = ResolutionAdversary(list(maps))
        received, decoded = _plain_block(strategy, adv, word_idx)
        words = [strategy.pipelines[i].words[w] for i, w in enumerate(decoded)]
        y = x.copy()
        for k in range(strategy.tau):
            y = _apply_step(system, strategy, words, k, y)
        dist = float(np.max(np.abs(y - center)))
        if best is None or dist > best[0]:
            best = (dist, received, decoded)
    return best[1], best[2]


def _region_center(region):
    grid = region.discretize()
    return grid.mean(axis=0)


def network_simulate(system, region, strategy: BlockCodingStrategy, adversary,
                     horizon: int, x0) -> Transcript:
    """Alias of simulate() for multi-pipeline strategies (independent
    per-subsystem encode/transmit/decode, joint invariance verdict)."""
    return simulate(system, region, strategy, adversary, horizon, x0)


def simulate_exhaustive(system, region, strategy, horizon, x0, cap=4096):
    """Run one simulation per stationary resolution combo of all pipelines;
    returns the list of transcripts (order: lexicographic in the resolution
    enumeration)."""
    all_res = [p.channel.resolutions(cap) for p in strategy.pipelines]
    transcripts = []
    for maps in itertools.product(*all_res):
        adv = ResolutionAdversary(list(maps))
        transcripts.append(simulate(system, region, strategy, adv, horizon, x0))
    return transcripts


def scan_escape(system, region, strategy, adversary, horizon):
    """Simulate from every grid element; returns (element, first_escape) of
    the first escaping initial condition, or None."""
    grid = region.discretize()
    for e in range(grid.shape[0]):
        t = simulate(system, region, strategy, adversary, horizon, grid[e])
        if t.verdict == "escape":
            return e, t.first_escape
    return None
