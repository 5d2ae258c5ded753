"""Parameter sweeps, figure presets, INI scenario files and CSV output."""

from __future__ import annotations

import configparser
import csv
import io
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .alloc import InfeasiblePrimaryError, SystemConfig, outage_min_sinr, power_cap
from .capacity import CapacityBoundInputs, capacity_lower_bound
from .channel import LinkStats
from .harvest import (HarvestConfig, HarvestInfeasibleError, active_antennas_massive,
                      avg_capacity_massive, avg_capacity_massive_lb)
from .mcsim import SimScenario, ergodic_capacity_mc, lower_bound_average, primary_outage_mc

VARIABLES = ("mean_y", "mean_h", "n_antennas", "m_antennas", "mean_x")
OUTPUTS = ("capacity_mc_proposed", "capacity_mc_conventional", "capacity_lower_bound",
           "m_eff_alg1", "m_eff_alg2", "avg_cap_eq39", "avg_cap_lb_eq40",
           "outage_closed", "outage_mc")
MC_OUTPUTS = {"capacity_mc_proposed", "capacity_mc_conventional", "capacity_lower_bound",
              "m_eff_alg1", "outage_mc"}
HARVEST_OUTPUTS = {"m_eff_alg2", "avg_cap_eq39", "avg_cap_lb_eq40"}
WORKERS_ENV = "MIMOCR_WORKERS"


class ConfigError(ValueError):
    """A scenario file or sweep specification is malformed."""


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple
    scenario: SimScenario
    outputs: tuple
    tie_m_to_n: bool = False   # sweep M = N together (square arrays)

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.variable!r}; choose from {VARIABLES}")
        if len(self.grid) == 0:
            raise ConfigError("sweep grid is empty")
        if np.any(np.diff(np.asarray(self.grid, dtype=float)) <= 0):
            raise ConfigError("sweep grid must be strictly increasing")
        if len(self.outputs) == 0:
            raise ConfigError("no outputs requested")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise ConfigError(f"unknown outputs {bad}; choose from {OUTPUTS}")
        if HARVEST_OUTPUTS & set(self.outputs) and self.scenario.hc is None:
            raise ConfigError("harvest outputs requested without a [harvest] section")
        for value in self.grid:
            self.point_scenario(value)    # dimension checks up front

    def point_scenario(self, value) -> SimScenario:
        scn = self.scenario
        cfg, stats = scn.cfg, scn.stats
        try:
            if self.variable in ("mean_y", "mean_h", "mean_x"):
                stats = replace(stats, **{self.variable: float(value)})
            elif self.variable == "n_antennas":
                n = _as_int(value, "n_antennas")
                cfg = replace(cfg, N=n, M=n if self.tie_m_to_n else cfg.M)
            else:
                cfg = replace(cfg, M=_as_int(value, "m_antennas"))
        except ValueError as exc:
            raise ConfigError(f"grid value {value!r} for {self.variable}: {exc}") from None
        return replace(scn, cfg=cfg, stats=stats)

    def columns(self) -> list[str]:
        cols = [self.variable]
        for out in self.outputs:
            cols.append(out)
            if out in MC_OUTPUTS:
                cols.append(out + "_se")
        cols.append("feasible")
        return cols


def _as_int(value, name) -> int:
    if float(value) != int(float(value)):
        raise ValueError(f"{name} must be an integer")
    return int(float(value))


def point_seed(seed: int, index: int) -> int:
    """Seed of grid point ``index``, independent of worker assignment."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def evaluate_point(spec: SweepSpec, index: int) -> dict:
    """All requested outputs at one grid point."""
    value = spec.grid[index]
    scn = spec.point_scenario(value)
    scn = replace(scn, seed=point_seed(spec.scenario.seed, index))
    cfg, stats = scn.cfg, scn.stats
    row: dict = {spec.variable: value}
    try:
        power_cap(cfg, stats, 1)
        feasible = True
    except InfeasiblePrimaryError:
        feasible = False
    want = set(spec.outputs)

    def put(name, est):
        row[name] = est.mean
        row[name + "_se"] = est.std_err

    if "capacity_mc_proposed" in want:
        put("capacity_mc_proposed", ergodic_capacity_mc(scn, "proposed_alg1"))
    if "capacity_mc_conventional" in want:
        put("capacity_mc_conventional", ergodic_capacity_mc(scn, "conventional_full_M"))
    if want & {"capacity_lower_bound", "m_eff_alg1"}:
        def bound(m, cap):
            return capacity_lower_bound(CapacityBoundInputs(
                cfg.N, m, stats.mean_y, stats.mean_z, cfg.p_p, cfg.n0, cap))
        lb, m_eff = lower_bound_average(scn, bound)
        if "capacity_lower_bound" in want:
            put("capacity_lower_bound", lb)
        if "m_eff_alg1" in want:
            put("m_eff_alg1", m_eff)
    if want & HARVEST_OUTPUTS:
        plan = active_antennas_massive(cfg, stats, scn.hc)
        row["m_eff_alg2"] = plan.m_active
        cap39 = cap40 = 0.0
        if plan.m_active > 0:
            try:
                cap39 = avg_capacity_massive(cfg, stats, scn.hc, plan.m_active)
                cap40 = avg_capacity_massive_lb(cfg, stats, scn.hc, plan.m_active)
            except HarvestInfeasibleError:
                # below-saturation cap undefined: only the saturated branch is usable
                p_sat = plan.cap_branch_sat
                cap39 = avg_capacity_massive(cfg, stats, scn.hc, plan.m_active, p_sat)
                cap40 = avg_capacity_massive_lb(cfg, stats, scn.hc, plan.m_active, p_sat)
        row["avg_cap_eq39"], row["avg_cap_lb_eq40"] = cap39, cap40
    if want & {"outage_closed", "outage_mc"}:
        # all M antennas at the equal per-antenna share of the outage cap
        p_i = power_cap(cfg, stats, cfg.M) / cfg.M if feasible else 0.0
        if "outage_closed" in want:
            row["outage_closed"] = outage_min_sinr(cfg, stats, p_i, cfg.M)
        if "outage_mc" in want:
            o_scn = replace(scn, n_samples=max(scn.n_samples, 10 * scn.n_samples))
            put("outage_mc", primary_outage_mc(o_scn, np.full(cfg.M, p_i)))
    row["feasible"] = feasible
    return row


def _evaluate(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[dict]:
    """Evaluate every grid point; rows come back in grid order."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    jobs = [(spec, i) for i in range(len(spec.grid))]
    if workers <= 1:
        return [_evaluate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate, jobs))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.10g" % float(value)


def rows_to_csv(spec: SweepSpec, rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = spec.columns()
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def write_csv(spec: SweepSpec, rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(spec, rows))


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def db(value: float) -> float:
    """Linear value of a level in dB (power convention)."""
    return 10.0 ** (value / 10.0)


DEFAULT_HARVEST = HarvestConfig(eta=0.85, s_th=db(100), p_th=1.0, k_factor=db(25),
                                omega=db(-15), t_slot=1.0)


def _db_grid(levels) -> tuple:
    return tuple(db(v) for v in levels)


def preset(name: str, seed: int = 0, samples: int | None = None) -> SweepSpec:
    """Preset sweep by name (``fig3`` ... ``fig9``).

    Noise-only primary outage exceeds the 1% target unless ``p_p E[x]``
    clears roughly ``gamma_th / 0.01``, so presets that need a feasible
    primary link raise ``E[x]``; ``fig6`` keeps unit means.
    """
    factories = {"fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6,
                 "fig7": _fig7, "fig8": _fig8, "fig9": _fig9}
    if name not in factories:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(factories)}")
    spec = factories[name]()
    scn = replace(spec.scenario, seed=seed)
    if samples is not None:
        scn = replace(scn, n_samples=samples)
    return replace(spec, scenario=scn)


PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9")


def _fig3():
    scn = SimScenario(SystemConfig(M=4, N=8), LinkStats(mean_x=db(20)), n_samples=100_000)
    return SweepSpec("mean_y", _db_grid([-5, 0, 5, 10, 15, 20]), scn,
                     ("capacity_mc_proposed", "capacity_mc_conventional",
                      "capacity_lower_bound", "m_eff_alg1"))


def _fig4():
    scn = SimScenario(SystemConfig(M=4, N=8, L=2), LinkStats(mean_y=db(0), mean_x=db(20)),
                      n_samples=100_000)
    return SweepSpec("mean_h", _db_grid([-10, -5, 0, 5, 10]), scn,
                     ("capacity_mc_proposed", "capacity_mc_conventional",
                      "capacity_lower_bound", "m_eff_alg1", "outage_closed", "outage_mc"))


def _fig5():
    scn = SimScenario(SystemConfig(M=8, N=64), LinkStats(mean_x=db(20)), n_samples=100_000)
    return SweepSpec("mean_y", _db_grid([-15, -10, -5, 0, 5, 10]), scn,
                     ("capacity_mc_proposed", "capacity_mc_conventional",
                      "capacity_lower_bound", "m_eff_alg1"))


def _fig6():
    cfg = SystemConfig(M=8, N=8, gamma_th=7.0, y_th=7.0)
    scn = SimScenario(cfg, LinkStats(), n_samples=2_000)
    return SweepSpec("n_antennas", (8, 16, 32, 64, 128), scn, ("m_eff_alg1",),
                     tie_m_to_n=True)


def _fig7():
    cfg = SystemConfig(M=8, N=128, gamma_th=7.0, y_th=3.0)
    scn = SimScenario(cfg, LinkStats(mean_y=100.0, mean_x=db(30)), hc=DEFAULT_HARVEST,
                      n_samples=2_000)
    return SweepSpec("m_antennas", (8, 16, 32, 64, 128), scn,
                     ("m_eff_alg1", "m_eff_alg2", "capacity_mc_proposed",
                      "avg_cap_eq39", "avg_cap_lb_eq40"))


def _fig8():
    cfg = SystemConfig(M=32, N=128, gamma_th=3.0, y_th=3.0)
    scn = SimScenario(cfg, LinkStats(mean_y=100.0, mean_x=db(30)), hc=DEFAULT_HARVEST,
                      n_samples=2_000)
    return SweepSpec("mean_h", _db_grid([-10, -5, 0, 5, 10]), scn,
                     ("m_eff_alg1", "m_eff_alg2", "capacity_mc_proposed",
                      "avg_cap_eq39", "avg_cap_lb_eq40"))


def _fig9():
    cfg = SystemConfig(M=128, N=128)
    scn = SimScenario(cfg, LinkStats(mean_x=db(30)), hc=DEFAULT_HARVEST, n_samples=1)
    return SweepSpec("n_antennas", (128, 256, 512, 1024, 2048), scn,
                     ("m_eff_alg2", "avg_cap_eq39", "avg_cap_lb_eq40"))


# ---------------------------------------------------------------------------
# INI scenario files
# ---------------------------------------------------------------------------

_DB_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*dB\s*$", re.IGNORECASE)
_INT_FIELDS = {"M", "N", "L"}


def parse_number(text: str) -> float:
    """Parse ``"20"``, ``"1e-3"`` or ``"20 dB"`` to a linear float."""
    m = _DB_RE.match(text)
    if m:
        return db(float(m.group(1)))
    return float(text)


def _section_values(parser, section, cls, where):
    if not parser.has_section(section):
        return {}
    known = {f.name for f in fields(cls)}
    out = {}
    for key, raw in parser.items(section):
        name = key if key in known else {k.lower(): k for k in known}.get(key)
        if name is None:
            raise ConfigError(f"{where}: [{section}] unknown field {key!r}")
        try:
            if name in _INT_FIELDS:
                out[name] = _as_int(raw, name)
            elif name == "coherent":
                out[name] = parser.getboolean(section, key)
            else:
                out[name] = parse_number(raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: [{section}] {key} = {raw!r}: {exc}") from None
    return out


def load_config(path) -> SweepSpec:
    """Read a sweep from an INI file with [system], [links], [harvest], [sweep]."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return spec_from_parser(parser, str(path))


def spec_from_parser(parser: configparser.ConfigParser, where: str = "<config>") -> SweepSpec:
    try:
        cfg = SystemConfig(**_section_values(parser, "system", SystemConfig, where))
        stats = LinkStats(**_section_values(parser, "links", LinkStats, where))
        hc = None
        if parser.has_section("harvest"):
            hc = replace(DEFAULT_HARVEST,
                         **_section_values(parser, "harvest", HarvestConfig, where))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None
    if not parser.has_section("sweep"):
        raise ConfigError(f"{where}: missing [sweep] section")
    sw = parser["sweep"]
    for key in sw:
        if key not in ("variable", "grid", "outputs", "samples", "seed", "tie_m_to_n"):
            raise ConfigError(f"{where}: [sweep] unknown field {key!r}")
    try:
        variable = sw["variable"].strip()
        grid = tuple(parse_number(v) for v in sw["grid"].split(",") if v.strip())
        outputs = tuple(o.strip() for o in sw.get("outputs", "").split(",") if o.strip())
        samples = int(sw.get("samples", "100000"))
        seed = int(sw.get("seed", "0"))
        tie = sw.getboolean("tie_m_to_n", fallback=False)
    except KeyError as exc:
        raise ConfigError(f"{where}: [sweep] missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: [sweep] {exc}") from None
    scn = SimScenario(cfg, stats, hc=hc, n_samples=samples, seed=seed)
    return SweepSpec(variable, grid, scn, outputs, tie_m_to_n=tie)
