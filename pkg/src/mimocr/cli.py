"""Command-line entry point: ``sweep``, ``validate`` and ``eval``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace

from . import alloc, capacity, harvest, specfn
from .channel import LinkStats
from .sweep import (DEFAULT_HARVEST, PRESETS, ConfigError, load_config, parse_number,
                    preset, rows_to_csv, run_sweep)
from .validation import run_validation


def _split_params(pairs):
    cfg_keys = {f.name for f in fields(alloc.SystemConfig)}
    stat_keys = {f.name for f in fields(LinkStats)}
    hc_keys = {f.name for f in fields(harvest.HarvestConfig)}
    cfg, stats, hc, extra = {}, {}, {}, {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {pair!r}")
        value = parse_number(raw)
        if key in cfg_keys:
            cfg[key] = int(value) if key in ("M", "N", "L") else value
        elif key in stat_keys:
            stats[key] = value
        elif key in hc_keys:
            hc[key] = value
        else:
            extra[key] = value
    return (alloc.SystemConfig(**cfg), LinkStats(**stats),
            replace(DEFAULT_HARVEST, **hc), extra)


def _need(extra, *names):
    missing = [n for n in names if n not in extra]
    if missing:
        raise ConfigError(f"missing parameter(s): {', '.join(missing)}")
    return [extra[n] for n in names]


def evaluate_formula(name: str, pairs) -> float:
    """Evaluate one closed form from ``key=value`` strings."""
    cfg, stats, hc, extra = _split_params(pairs)
    m = int(extra.get("m", cfg.M))
    if name == "outage":
        (p_i,) = _need(extra, "p_i")
        return alloc.outage_min_sinr(cfg, stats, p_i, m)
    if name == "per_antenna_limit":
        return alloc.per_antenna_power_limit(cfg, stats, m)
    if name == "power_cap":
        return alloc.power_cap(cfg, stats, m)
    if name in ("capacity_lb", "j1", "j2"):
        p_cap = extra.get("p_cap", None) or alloc.power_cap(cfg, stats, m)
        inp = capacity.CapacityBoundInputs(cfg.N, m, stats.mean_y, stats.mean_z,
                                           cfg.p_p, cfg.n0, p_cap)
        return {"capacity_lb": capacity.capacity_lower_bound,
                "j1": capacity.j1, "j2": capacity.j2}[name](inp)
    if name == "harvest_cdf":
        return harvest.cdf_harvested_power(cfg, stats, hc, m)
    if name == "p_total":
        return harvest.p_total_effective(cfg, stats, hc, m)
    if name == "avg_cap":
        return harvest.avg_capacity_massive(cfg, stats, hc, m)
    if name == "avg_cap_lb":
        return harvest.avg_capacity_massive_lb(cfg, stats, hc, m)
    if name == "alg2":
        return float(harvest.active_antennas_massive(cfg, stats, hc).m_active)
    if name == "phi2":
        b1, b2, c, x1, x2 = _need(extra, "b1", "b2", "c", "x1", "x2")
        return specfn.humbert_phi2(specfn.Phi2Args(b1, b2, c, x1, x2))
    if name == "e1":
        return specfn.exp_int_e1(*_need(extra, "x"))
    if name == "ei":
        return specfn.exp_int_ei(*_need(extra, "x"))
    if name == "gamma_upper":
        return specfn.gamma_upper(*_need(extra, "a", "x"))
    if name == "digamma":
        return specfn.digamma(*_need(extra, "x"))
    raise ConfigError(f"unknown formula {name!r}; choose from {', '.join(FORMULAS)}")


FORMULAS = ("outage", "per_antenna_limit", "power_cap", "capacity_lb", "j1", "j2",
            "harvest_cdf", "p_total", "avg_cap", "avg_cap_lb", "alg2", "phi2", "e1", "ei",
            "gamma_upper", "digamma")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimocr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run a figure preset or an INI scenario file")
    sw.add_argument("target", help=f"preset ({', '.join(PRESETS)}) or path to a config file")
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--samples", type=int, default=None)
    sw.add_argument("--out", default=None, help="CSV path (default: stdout)")

    va = sub.add_parser("validate", help="run every acceptance criterion")
    va.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval", help="evaluate one closed form")
    ev.add_argument("formula", choices=FORMULAS)
    ev.add_argument("params", nargs="*", help="key=value, values accept a dB suffix")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            if args.target in PRESETS:
                spec = preset(args.target, seed=args.seed or 0, samples=args.samples)
            elif os.path.exists(args.target):
                spec = load_config(args.target)
                scn = spec.scenario
                if args.seed is not None:
                    scn = replace(scn, seed=args.seed)
                if args.samples is not None:
                    scn = replace(scn, n_samples=args.samples)
                spec = replace(spec, scenario=scn)
            else:
                raise ConfigError(f"{args.target!r} is neither a preset nor a file")
            text = rows_to_csv(spec, run_sweep(spec))
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
        if args.command == "validate":
            results = run_validation(seed=args.seed)
            return 0 if all(r.passed for r in results) else 1
        print("%.10g" % evaluate_formula(args.formula, args.params))
        return 0
    except (ConfigError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
