"""Monte Carlo sweeps, the three-panel slot experiment and CSV output.

Every trial draws from its own generator ``make_rng(seed, trial)``. The same
trial index therefore sees the same topology and fading at every point of a
sweep, so compared curves use common random numbers and a row never depends
on how trials were scheduled.
"""
from __future__ import annotations

import configparser
import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ScenarioConfig, Topology, make_rng, next_channel_state, sample_topology
from .detection import NoiseUncertainty, min_total_error
from .simulation import Policy, breach_slots, covert_violation_count, run_slotted
from .solver import Status, alternating_solve, verify_kkt_feasibility

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("value", "metric", "mean", "stderr", "trials", "excluded")
FIG5_COLUMNS = ("slot", "h_aw", "pa_aware", "pa_static", "xi_aware", "xi_static", "threshold")
FIG5_PANELS = {
    "fig5a_channel.csv": ("slot", "h_aw"),
    "fig5b_power.csv": ("slot", "pa_aware", "pa_static"),
    "fig5c_covertness.csv": ("slot", "xi_aware", "xi_static", "threshold"),
}
DEFAULT_TRIALS = 200


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    trials: int = DEFAULT_TRIALS
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    companion: tuple = ()
    output: str | None = None

    def __post_init__(self):
        if self.variable not in ("num_users", "power_budget", "willie_distance", "slots"):
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class ResultRow:
    value: float
    metric: str
    mean: float
    stderr: float
    trials: int
    excluded: int
    series: str = ""

    def as_record(self) -> dict:
        return {c: getattr(self, c) for c in SWEEP_COLUMNS}


def summarize(value, metric: str, samples, trials: int, excluded: int, series: str = "") -> ResultRow:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        mean, se = float("nan"), float("nan")
    else:
        mean = float(x.mean())
        se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return ResultRow(value, metric, mean, se, trials, excluded, series)


def _trial_channel(cfg: ScenarioConfig, seed: int, trial: int, willie_distance=None):
    rng = make_rng(seed, trial)
    topo = sample_topology(cfg, rng)
    if willie_distance is not None:
        topo = Topology(topo.user_distances, float(willie_distance))
    return next_channel_state(topo, cfg, 0, rng)


def sweep_users(spec: SweepSpec) -> list[ResultRow]:
    """Mean converged average AoI versus the number of users.

    ``spec.companion`` lists power budgets; one series is produced per budget
    (the base budget when empty). Infeasible trials are excluded and counted.
    """
    if spec.variable != "num_users":
        raise ValueError("sweep_users needs variable = num_users")
    budgets = spec.companion or (spec.base.power_budget,)
    seed = spec.base.rng_seed
    rows = []
    for budget in budgets:
        for k in spec.values:
            cfg = replace(spec.base, num_users=int(k), power_budget=float(budget))
            samples, excluded = [], 0
            for t in range(spec.trials):
                ch = _trial_channel(cfg, seed, t)
                res = alternating_solve(ch.user_gains, ch.willie_gain, cfg)
                if res.status is Status.INFEASIBLE:
                    excluded += 1
                else:
                    samples.append(res.avg_aoi)
            rows.append(summarize(int(k), "avg_aoi", samples, spec.trials, excluded, f"power_budget={budget:g}"))
            log.info("K=%d P=%g: mean AoI %.4g s (%d excluded)", k, budget, rows[-1].mean, excluded)
    return rows


def sweep_power(spec: SweepSpec) -> list[ResultRow]:
    """Willie's minimum error versus the power budget, per Willie distance.

    Two metrics per point: ``xi_star`` at the total power the solver actually
    uses (covert cap applied; infeasible trials excluded) and ``xi_star_raw``
    at ``p_a = P_max`` with no cap. Users are placed at random; Willie sits at
    each companion distance with random fading.
    """
    if spec.variable != "power_budget":
        raise ValueError("sweep_power needs variable = power_budget")
    distances = spec.companion or (spec.base.area_radius / np.sqrt(2.0),)
    nu = NoiseUncertainty.from_config(spec.base)
    seed = spec.base.rng_seed
    rows = []
    for dist in distances:
        series = f"willie_distance={dist:g}"
        for budget in spec.values:
            budget = float(budget)
            raw, capped, excluded = [], [], 0
            for t in range(spec.trials):
                cfg = spec.base if budget <= 0 else replace(spec.base, power_budget=budget)
                ch = _trial_channel(cfg, seed, t, dist)
                raw.append(float(min_total_error(budget, ch.willie_gain, nu)))
                if budget <= 0:
                    capped.append(1.0)
                    continue
                res = alternating_solve(ch.user_gains, ch.willie_gain, cfg)
                if res.status is Status.INFEASIBLE:
                    excluded += 1
                else:
                    capped.append(float(min_total_error(res.power.total, ch.willie_gain, nu)))
            rows.append(summarize(budget, "xi_star", capped, spec.trials, excluded, series))
            rows.append(summarize(budget, "xi_star_raw", raw, spec.trials, 0, series))
    return rows


@dataclass
class Fig5Result:
    aware: list
    static: list
    rows: list
    breaches: list
    paths: list


def run_fig5(cfg: ScenarioConfig, seed: int, num_slots: int, out_dir=None) -> Fig5Result:
    """Paired AoC-aware / static runs on one topology and one channel sequence."""
    if cfg.num_users != 3:
        raise ValueError("the slot experiment is defined for K = 3")
    topo = sample_topology(cfg, make_rng(seed, 0))
    aware = run_slotted(cfg, topo, Policy.AOC_AWARE, num_slots, make_rng(seed, 1))
    static = run_slotted(cfg, topo, Policy.STATIC_POWER, num_slots, make_rng(seed, 1))
    threshold = 1.0 - cfg.covert_budget
    rows = [
        {
            "slot": a.slot_index,
            "h_aw": a.channel.willie_gain,
            "pa_aware": a.total_power,
            "pa_static": s.total_power,
            "xi_aware": a.xi_star,
            "xi_static": s.xi_star,
            "threshold": threshold,
        }
        for a, s in zip(aware, static)
    ]
    breaches = breach_slots([a.channel.willie_gain for a in aware], static[0].total_power, cfg)
    paths = []
    if out_dir is not None:
        out = Path(out_dir)
        paths.append(emit_csv(rows, out / "fig5.csv", FIG5_COLUMNS))
        for name, cols in FIG5_PANELS.items():
            paths.append(emit_csv(rows, out / name, cols))
    log.info(
        "slot run: %d aware / %d static violations",
        covert_violation_count(aware),
        covert_violation_count(static),
    )
    return Fig5Result(aware, static, rows, breaches, paths)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def emit_csv(records, path, columns=SWEEP_COLUMNS) -> Path:
    """Write ``records`` (dicts or :class:`ResultRow`) as UTF-8 CSV.

    Floats carry 12 significant digits; lines end in ``\\n``.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for rec in records:
                if isinstance(rec, ResultRow):
                    rec = rec.as_record()
                w.writerow([_fmt(rec[c]) for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_sweep(rows: list[ResultRow], out_dir, stem: str) -> list[Path]:
    """One CSV per series, named ``<stem>_<series>.csv``."""
    out_dir = Path(out_dir)
    paths = []
    for series in dict.fromkeys(r.series for r in rows):
        picked = [r for r in rows if r.series == series]
        paths.append(emit_csv(picked, out_dir / f"{stem}_{series}.csv"))
    return paths


def solve_report(cfg: ScenarioConfig, seed: int) -> dict:
    """Solve one random scenario drawn from ``seed``; JSON-ready summary."""
    ch = _trial_channel(cfg, seed, 0)
    res = alternating_solve(ch.user_gains, ch.willie_gain, cfg)
    report = {
        "seed": seed,
        "user_gains": ch.user_gains.tolist(),
        "willie_gain": ch.willie_gain,
        "status": res.status.value,
        "powers": res.user_powers.tolist(),
        "total_power": res.power.total,
        "aoi": res.user_aoi.tolist(),
        "avg_aoi": res.avg_aoi,
        "outer_iterations": res.outer_iterations,
        "sca_iterations_total": res.sca_iterations_total,
        "covert_margin": res.covert_margin,
        "avg_aoi_history": res.history,
    }
    if res.status is not Status.INFEASIBLE:
        audit = verify_kkt_feasibility(res, ch.user_gains, ch.willie_gain, cfg)
        report["audit"] = {"passed": audit.passed, "worst_violation": audit.worst}
    return report


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_fmt) + "\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    return text


# --- configuration files ------------------------------------------------

DEFAULT_SECTIONS = {
    "sweep_users": {"values": "2, 3, 4, 5, 6", "power_budgets": "1e-9, 1e-8", "trials": "200"},
    "sweep_power": {
        "values": "0, 1e-9, 3e-9, 1e-8, 3e-8, 1e-7, 3e-7, 1e-6, 3e-6, 1e-5",
        "willie_distances": "50, 70.7106781187",
        "num_users": "3",
        "trials": "200",
    },
    "fig5": {"num_slots": "100", "power_budget": "1e-3"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    sections: dict

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def floats(self, section: str, key: str) -> tuple:
        raw = self.section(section)[key]
        return tuple(float(x) for x in raw.replace(",", " ").split())

    def value(self, section: str, key: str, cast=float):
        return cast(self.section(section)[key])


def load_config(path=None) -> ExperimentConfig:
    """Read an INI file: ``[scenario]`` plus optional per-command sections.

    Missing sections fall back to the built-in defaults; ``[scenario]`` keys
    may carry a ``_db`` suffix.
    """
    parser = configparser.ConfigParser()
    parser.read_dict({"scenario": {}, **DEFAULT_SECTIONS})
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ValueError(f"malformed config {path}: {exc}") from exc
    scenario = ScenarioConfig.from_mapping(dict(parser["scenario"]))
    sections = {s: dict(parser[s]) for s in parser.sections() if s != "scenario"}
    return ExperimentConfig(scenario, sections)
