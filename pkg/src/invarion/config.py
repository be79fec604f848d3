"""Scenario configuration: schema validation, object construction, hashing.

The config is one JSON document.  Validation errors carry the offending field
path.  All emitted artifacts embed the config hash and the pool seed so runs
are reproducible; floats serialize with 17 significant digits.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Channel
from .errors import ConfigError
from .regions import (
    Ball,
    Box,
    CircleBand,
    GridRegion,
    check_sync_delta,
)
from .systems import CircleSystem, LinearSystem, ProductSystem, uniform_controls

_ADVERSARY_POLICIES = ("exhaustive", "seeded-random", "greedy-escape")


# ---------------------------------------------------------------------------
# canonical JSON (sorted keys, LF, floats at 17 significant digits)

def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("cannot serialize non-finite float")
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "inf" not in s:
        s += ".0"
    return s


def canonical_json(obj, indent=0) -> str:
    pad = "  " * indent
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [canonical_json(v, indent + 1) for v in list(obj)]
        if not items:
            return "[]"
        inner = ",\n".join("  " * (indent + 1) + s for s in items)
        return "[\n%s\n%s]" % (inner, pad)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = []
        for k in sorted(obj):
            rows.append(
                "  " * (indent + 1) + json.dumps(str(k)) + ": " + canonical_json(obj[k], indent + 1)
            )
        return "{\n%s\n%s}" % (",\n".join(rows), pad)
    raise TypeError("cannot serialize %r" % type(obj))


def canonical_json_line(obj) -> str:
    """Single-line canonical form (JSONL records)."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(canonical_json_line(v) for v in list(obj)) + "]"
    if isinstance(obj, dict):
        return "{" + ", ".join(
            json.dumps(str(k)) + ": " + canonical_json_line(obj[k]) for k in sorted(obj)
        ) + "}"
    raise TypeError("cannot serialize %r" % type(obj))


def config_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    raw: dict
    system: object
    components: list
    region: GridRegion
    taus: list
    subsystem: int
    solver_mode: str
    pool_cap: int
    seed: int
    channels: list
    adversary: dict
    simulation: dict
    frontier: dict
    linear_formula: dict
    hash: str = ""

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("config is not valid JSON: %s" % exc) from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError("config: expected an object")
        components = _build_systems(_require(raw, "systems", list))
        system = components[0] if len(components) == 1 else ProductSystem(tuple(components))
        region = _build_region(raw, components)
        taus = [int(t) for t in raw.get("taus", [])]
        if any(t < 1 for t in taus):
            raise ConfigError("taus: horizons must be >= 1")
        solver = raw.get("solver", {})
        _check_type(solver, dict, "solver")
        mode = solver.get("mode", "exact")
        if mode not in ("exact", "greedy"):
            raise ConfigError("solver.mode: must be 'exact' or 'greedy'")
        pool_cap = int(solver.get("pool_cap", 1 << 20))
        if pool_cap < 1:
            raise ConfigError("solver.pool_cap: must be positive")
        seed = int(solver.get("seed", 0))
        channels = [_build_channel(c, i) for i, c in enumerate(raw.get("channels", []))]
        adversary = dict(raw.get("adversary", {"policy": "seeded-random", "seed": 0}))
        if adversary.get("policy", "seeded-random") not in _ADVERSARY_POLICIES:
            raise ConfigError("adversary.policy: must be one of %s" % (_ADVERSARY_POLICIES,))
        simulation = dict(raw.get("simulation", {}))
        frontier = dict(raw.get("frontier", {}))
        linear_formula = dict(raw.get("linear_formula", {}))
        subsystem = int(raw.get("subsystem", 0))
        if components and not 0 <= subsystem < len(components):
            raise ConfigError("subsystem: index out of range")
        return cls(
            raw=raw, system=system, components=components, region=region, taus=taus,
            subsystem=subsystem, solver_mode=mode, pool_cap=pool_cap, seed=seed,
            channels=channels, adversary=adversary, simulation=simulation,
            frontier=frontier, linear_formula=linear_formula, hash=config_hash(raw),
        )


def _require(raw, key, typ):
    if key not in raw:
        raise ConfigError("%s: missing required field" % key)
    _check_type(raw[key], typ, key)
    return raw[key]


def _check_type(val, typ, path):
    if not isinstance(val, typ):
        raise ConfigError("%s: expected %s" % (path, typ.__name__))


def _build_systems(items):
    if not items:
        raise ConfigError("systems: need at least one system")
    out = []
    for i, item in enumerate(items):
        path = "systems[%d]" % i
        _check_type(item, dict, path)
        kind = item.get("kind")
        if kind not in ("linear", "circle"):
            raise ConfigError("%s.kind: must be 'linear' or 'circle'" % path)
        controls = _build_controls(item.get("controls"), path + ".controls",
                                   dim=_control_dim(item))
        try:
            if kind == "linear":
                out.append(LinearSystem(item["A"], item["B"], controls))
            else:
                out.append(CircleSystem(int(item["alpha"]), controls))
        except KeyError as exc:
            raise ConfigError("%s.%s: missing" % (path, exc.args[0])) from exc
        except (ValueError, ConfigError) as exc:
            raise ConfigError("%s: %s" % (path, exc)) from exc
    return out


def _control_dim(item):
    if item.get("kind") == "linear":
        b = np.atleast_2d(np.asarray(item.get("B", [[0.0]]), dtype=float))
        return b.shape[1]
    return 1


def _build_controls(spec, path, dim=1):
    if spec is None:
        raise ConfigError("%s: missing" % path)
    if isinstance(spec, list):
        if not spec:
            raise ConfigError("%s: control list must be nonempty" % path)
        return np.atleast_2d(np.asarray(spec, dtype=float)).reshape(len(spec), -1)
    _check_type(spec, dict, path)
    try:
        return uniform_controls(float(spec["low"]), float(spec["high"]),
                                int(spec["levels"]), dim=dim)
    except KeyError as exc:
        raise ConfigError("%s.%s: missing" % (path, exc.args[0])) from exc


def _build_region(raw, components):
    spec = _require(raw, "region", dict)
    grid = _require(raw, "grid", dict)
    resolution = grid.get("resolution")
    if resolution is None:
        raise ConfigError("grid.resolution: missing")
    kind = spec.get("kind")
    if kind == "box":
        shape = Box(spec.get("lower"), spec.get("upper"))
    elif kind == "circle_band":
        shape = CircleBand(float(spec.get("delta", 0.0)))
        for i, comp in enumerate(components):
            if isinstance(comp, CircleSystem):
                try:
                    check_sync_delta(shape.delta, comp.alpha)
                except ConfigError as exc:
                    raise ConfigError("region.delta: %s" % exc) from exc
    elif kind == "ball":
        shape = Ball(spec.get("center"), float(spec.get("radius", 0.0)))
    else:
        raise ConfigError("region.kind: must be 'box', 'circle_band' or 'ball'")
    margin = grid.get("margin", 0.0)
    try:
        region = GridRegion(shape, resolution, margin=0.0)
        if margin == "cell":
            margin = region.cell_size
        region = GridRegion(shape, resolution, margin=float(margin))
    except ConfigError as exc:
        raise ConfigError("grid: %s" % exc) from exc
    dim = sum(c.state_dim for c in components)
    if region.state_dim != dim:
        raise ConfigError(
            "region: dimension %d does not match total state dimension %d"
            % (region.state_dim, dim)
        )
    return region


def _build_channel(spec, i):
    path = "channels[%d]" % i
    _check_type(spec, dict, path)
    try:
        return Channel.from_relation(spec["alphabet"], spec["relation"])
    except KeyError as exc:
        raise ConfigError("%s.%s: missing" % (path, exc.args[0])) from exc
    except ConfigError as exc:
        raise ConfigError("%s: %s" % (path, exc)) from exc
