"""Command-line interface.

    invarion <command> --config <path> [--out <dir>] [--threads N] [--seed S]

Commands: entropy, subsystem-entropy, frontier, capacity, linear-formula,
simulate, verify.  Machine records are JSON (canonical form, 17 significant
digits), curves are CSV with a header row and LF endings; every output row
carries the config hash and the pool seed.  INVARION_THREADS / INVARION_SEED
override the config; command-line flags override both.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import _kernels as K
from .channel import zero_error_capacity_bounds
from .config import ScenarioConfig, canonical_json, canonical_json_line
from .errors import CapacityError, ConfigError, InfeasibleCoverError, InvarionError
from .frontier import anchored_product_cover, concat_midpoint, frontier
from .linear import (
    LinearPair,
    blockdiag,
    controllable,
    rectangular_entropy_set,
    unstable_entropy,
    volume_growth_check,
)
from .loop import (
    GreedyEscapeAdversary,
    SeededAdversary,
    build_network_strategy,
    build_strategy,
    scan_escape,
    simulate,
    simulate_exhaustive,
)
from .regions import GridRegion
from .spanning import entropy_estimate, one_step_absorbing, r_inv, r_inv_subsystem
from .systems import ControlWord, LinearSystem
from .verify import run_verification


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="invarion", description=__doc__)
    parser.add_argument("command", choices=[
        "entropy", "subsystem-entropy", "frontier", "capacity",
        "linear-formula", "simulate", "verify",
    ])
    parser.add_argument("--config", required=True, help="scenario config (JSON)")
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = ScenarioConfig.load(args.config)
        threads = _resolve(args.threads, "INVARION_THREADS", None)
        if threads and K.BACKEND == "numba":
            K.set_num_threads(max(1, int(threads)))
        seed = _resolve(args.seed, "INVARION_SEED", cfg.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = {
            "entropy": _cmd_entropy,
            "subsystem-entropy": _cmd_subsystem_entropy,
            "frontier": _cmd_frontier,
            "capacity": _cmd_capacity,
            "linear-formula": _cmd_linear_formula,
            "simulate": _cmd_simulate,
            "verify": _cmd_verify,
        }[args.command]
        return handler(cfg, out, int(seed))
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except InfeasibleCoverError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return 3
    except CapacityError as exc:
        print("capacity: %s" % exc, file=sys.stderr)
        return 4
    except InvarionError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


def _resolve(flag, env, default):
    if flag is not None:
        return flag
    if os.environ.get(env, "").strip():
        return int(os.environ[env])
    return default


def _write_json(path: Path, payload: dict):
    path.write_text(canonical_json(payload) + "\n", encoding="utf-8")


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(path: Path, header, rows, cfg, seed):
    lines = [",".join(header + ["config_hash", "seed"])]
    for row in rows:
        lines.append(",".join([_fmt(v) for v in row] + [cfg.hash, str(seed)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require_taus(cfg):
    if not cfg.taus:
        raise ConfigError("taus: must list at least one horizon")


# ---------------------------------------------------------------------------

def _cmd_entropy(cfg, out, seed):
    _require_taus(cfg)
    rows, records = [], []
    for tau in cfg.taus:
        card, sol = r_inv(cfg.system, cfg.region, tau, mode=cfg.solver_mode,
                          pool_cap=cfg.pool_cap, seed=seed)
        rows.append([tau, card, sol.rate])
        records.append(sol.to_json_dict())
        print("tau=%d  r_inv=%d  rate=%.6f bits/step" % (tau, card, sol.rate))
    best, per_tau = entropy_estimate([(r[0], r[1]) for r in rows])
    print("entropy estimate (min over tau): %.6f bits/step" % best)
    _write_csv(out / "entropy.csv", ["tau", "cardinality", "rate_bits_per_step"], rows, cfg, seed)
    _write_json(out / "entropy.json", {
        "config_hash": cfg.hash, "seed": seed, "estimate_bits_per_step": best,
        "per_tau": per_tau, "solutions": records,
    })
    return 0


def _cmd_subsystem_entropy(cfg, out, seed):
    _require_taus(cfg)
    i = cfg.subsystem
    rows, records = [], []
    for tau in cfg.taus:
        card, sol = r_inv_subsystem(cfg.system, cfg.region, tau, i, mode=cfg.solver_mode,
                                    pool_cap=cfg.pool_cap, seed=seed)
        rows.append([tau, i, card, sol.rate])
        records.append(sol.to_json_dict())
        print("tau=%d  component=%d  r_inv^(i)=%d  rate=%.6f bits/step"
              % (tau, i, card, sol.rate))
    best, per_tau = entropy_estimate([(r[0], r[2]) for r in rows])
    print("subsystem entropy estimate (min over tau): %.6f bits/step" % best)
    _write_csv(out / "subsystem_entropy.csv",
               ["tau", "component", "cardinality", "rate_bits_per_step"], rows, cfg, seed)
    _write_json(out / "subsystem_entropy.json", {
        "config_hash": cfg.hash, "seed": seed, "component": i,
        "estimate_bits_per_step": best, "per_tau": per_tau, "solutions": records,
    })
    return 0


def _cmd_frontier(cfg, out, seed):
    _require_taus(cfg)
    fopts = cfg.frontier
    n = len(cfg.components)
    header = ["tau", "point"] + ["h%d" % (i + 1) for i in range(n)] + \
             ["size%d" % (i + 1) for i in range(n)]
    rows, payload = [], []
    for tau in cfg.taus:
        front = frontier(
            cfg.system, cfg.region, tau,
            budgets=fopts.get("budgets"),
            pool_size=int(fopts.get("pool_size", 1024)),
            eval_pool=int(fopts.get("eval_pool", 32)),
            seed=seed,
            cover_mode=fopts.get("cover_mode", "greedy"),
            mode=fopts.get("mode", "sweep"),
        )
        points = list(front.points)
        midpoints = []
        if n == 2 and len(points) >= 2 and int(fopts.get("midpoints", 1)):
            # concatenating the two extremal witnesses traces the trade-off
            # boundary at horizon 2*tau (Fig. 2-style plots)
            pa = min(points, key=lambda p: p.vector[1])
            pb = min(points, key=lambda p: p.vector[0])
            if pa is not pb:
                mid, ok, _ = concat_midpoint(cfg.system, cfg.region, pa, pb,
                                             verify="block")
                if ok:
                    midpoints.append(mid)
        for p_idx, point in enumerate(points + midpoints):
            rows.append([point.tau, p_idx] + list(point.vector) + list(point.sizes))
            print("tau=%d point %d: (%s)  sizes (%s)" % (
                point.tau, p_idx,
                ", ".join("%.4f" % v for v in point.vector),
                ", ".join(str(s) for s in point.sizes)))
        payload.append({
            "tau": tau,
            "points": [p.to_json_dict() for p in front.points],
            "midpoints": [p.to_json_dict() for p in midpoints],
            "meta": front.meta,
        })
    _write_csv(out / "frontier.csv", header, rows, cfg, seed)
    _write_json(out / "frontier.json",
                {"config_hash": cfg.hash, "seed": seed, "frontiers": payload})
    return 0


def _cmd_capacity(cfg, out, seed):
    if not cfg.channels:
        raise ConfigError("channels: need at least one channel")
    k_max = int(cfg.raw.get("capacity", {}).get("k_max", 2))
    bounds = zero_error_capacity_bounds(cfg.channels[0], k_max)
    print("zero-error capacity in [%.9f, %.9f] bits/symbol" % (bounds.lower, bounds.upper))
    if bounds.diagnostic:
        print(bounds.diagnostic)
    rows = [[rec["k"], rec["alpha"], rec["clique_cover"], rec["lower"], rec["upper"]]
            for rec in bounds.per_k]
    _write_csv(out / "capacity.csv",
               ["k", "alpha", "clique_cover", "lower", "upper"], rows, cfg, seed)
    _write_json(out / "capacity.json", {
        "config_hash": cfg.hash, "seed": seed,
        "lower": bounds.lower, "upper": bounds.upper,
        "per_k": bounds.per_k, "diagnostic": bounds.diagnostic,
    })
    return 0


def _cmd_linear_formula(cfg, out, seed):
    pairs = []
    for i, comp in enumerate(cfg.components):
        if not isinstance(comp, LinearSystem):
            raise ConfigError("systems[%d]: linear-formula needs linear systems" % i)
        pairs.append(LinearPair(comp.a, comp.b))
    thresholds = rectangular_entropy_set(pairs)
    total = unstable_entropy(blockdiag([p.a for p in pairs]))
    rows = []
    for i, (pair, th) in enumerate(zip(pairs, thresholds)):
        ok, indices = controllable(pair)
        rows.append([i, th, int(ok)])
        print("component %d: threshold %.6f bits/step (controllable: %s)" % (i, th, ok))
    print("rectangular network entropy set: %s" %
          " x ".join("[%.6f, inf)" % t for t in thresholds))
    print("sum of thresholds %.9f vs blockdiag unstable entropy %.9f" %
          (sum(thresholds), total))
    payload = {
        "config_hash": cfg.hash, "seed": seed,
        "thresholds_bits_per_step": thresholds,
        "rectangular_set": [[t, "inf"] for t in thresholds],
        "blockdiag_unstable_entropy": total,
    }
    absorbing = cfg.linear_formula.get("absorbing_box")
    if absorbing:
        from .regions import box_region
        region_k = box_region(absorbing["lower"], absorbing["upper"],
                              cfg.region.resolution, margin=cfg.region.margin)
        payload["one_step_absorbing"] = bool(
            one_step_absorbing(cfg.system, cfg.region, region_k)
        )
        print("one-step absorbing condition: %s" % payload["one_step_absorbing"])
    if len(pairs) == 1 and cfg.taus:
        try:
            payload["volume_growth"] = volume_growth_check(pairs[0].a, cfg.region, max(cfg.taus))
        except ValueError:
            pass
    _write_csv(out / "linear_formula.csv",
               ["component", "threshold_bits_per_step", "controllable"], rows, cfg, seed)
    _write_json(out / "linear_formula.json", payload)
    return 0


def _cmd_simulate(cfg, out, seed):
    sim = cfg.simulation
    if not cfg.channels:
        raise ConfigError("channels: simulate needs at least one channel")
    tau = int(sim.get("tau", cfg.taus[0] if cfg.taus else 0))
    if tau < 1:
        raise ConfigError("simulation.tau: must be >= 1")
    horizon = int(sim.get("horizon", 100))

    if len(cfg.components) >= 2 and "anchor_component" in sim:
        anchor_comp = int(sim["anchor_component"])
        anchor_word = ControlWord(tuple(sim.get("anchor_word", [0] * tau)))
        point = anchored_product_cover(
            cfg.system, cfg.region, tau, anchor_comp, anchor_word,
            pool_size=cfg.pool_cap, seed=seed,
            cover_mode=cfg.solver_mode,
        )
        strategy = build_network_strategy(cfg.system, cfg.region, point, cfg.channels)
    else:
        _, sol = r_inv(cfg.system, cfg.region, tau, mode=cfg.solver_mode,
                       pool_cap=cfg.pool_cap, seed=seed)
        strategy = build_strategy(sol, cfg.channels[0], cfg.region)

    policy = cfg.adversary.get("policy", "seeded-random")
    x0 = sim.get("x0", "scan")

    if x0 == "scan":
        adv = SeededAdversary(int(cfg.adversary.get("seed", seed)))
        hit = scan_escape(cfg.system, cfg.region, strategy, adv, horizon)
        summary = {"config_hash": cfg.hash, "seed": seed, "scan": True,
                   "escape": None if hit is None else
                   {"element": hit[0], "first_escape": hit[1]}}
        print("scan: %s" % ("no escape found" if hit is None else
                            "escape from element %d at step %d" % hit))
        _write_json(out / "simulate_summary.json", summary)
        return 0

    x0 = np.asarray(x0, dtype=float)
    if policy == "exhaustive":
        transcripts = simulate_exhaustive(cfg.system, cfg.region, strategy, horizon, x0)
        worst = min(transcripts, key=lambda t: (t.verdict == "ok",
                                                t.first_escape or horizon + 1))
        summary = {"config_hash": cfg.hash, "seed": seed,
                   "resolutions": len(transcripts),
                   "all_ok": all(t.verdict == "ok" for t in transcripts),
                   "worst": worst.summary()}
        transcript = worst
    else:
        adv = (GreedyEscapeAdversary(int(cfg.adversary.get("cap", 256)))
               if policy == "greedy-escape"
               else SeededAdversary(int(cfg.adversary.get("seed", seed))))
        transcript = simulate(cfg.system, cfg.region, strategy, adv, horizon, x0)
        summary = {"config_hash": cfg.hash, "seed": seed, **transcript.summary()}

    lines = [canonical_json_line({"config_hash": cfg.hash, **rec})
             for rec in transcript.to_json_records()]
    (out / "transcript.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "simulate_summary.json", summary)
    print("verdict: %s%s" % (transcript.verdict,
                             "" if transcript.first_escape is None
                             else " (first escape at step %d)" % transcript.first_escape))
    return 0


def _cmd_verify(cfg, out, seed):
    ok, results = run_verification(cfg, rng_seed=seed)
    _write_json(out / "verify.json", {
        "config_hash": cfg.hash, "seed": seed,
        "passed": ok, "checks": [{"name": n, "ok": o} for n, o in results],
    })
    return 0 if ok else 1
