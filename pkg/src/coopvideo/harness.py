"""Experiment sweeps over densities, distances and placements, with CSV
reports, optional rate->PSNR mapping and scheme ratio tables."""

from __future__ import annotations

import csv
import hashlib
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mcper import ChannelModel, PerTable, Scheme
from .scenario import ConfigError, Region, SystemConfig, check_config, generate_placements
from .schemes import optimize
from .streams import derive_rng

ALL_SCHEMES = (Scheme.DIRECT, Scheme.RDSTC, Scheme.RDSTC_HR, Scheme.RDSTC_NC)

PLAN_COLUMNS = (
    "scheme", "density", "distance", "placement_id", "feasible", "relay_off",
    "r12", "r21", "rr2", "rr1", "rr", "t_i",
    "n12", "n21", "s12", "s21", "p12", "p21", "avg_relay_count",
    "rv12", "rv21", "avg_video_rate",
)
REPORT_COLUMNS = ("scheme", "density", "distance", "placements", "infeasible",
                  "mean_rate", "stderr_rate")
RATIO_COLUMNS = ("density", "distance", "numerator", "denominator", "ratio", "stderr", "status")


@dataclass
class ExperimentSpec:
    system: SystemConfig = field(default_factory=SystemConfig)
    distances: tuple = (20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0)
    densities: tuple = (0.0005, 0.001)
    placements_per_density: int = 15
    schemes: tuple = ALL_SCHEMES
    trials_per_estimate: int = 1000
    seed: int = 0
    region: Region = field(default_factory=Region)
    channel: ChannelModel = field(default_factory=ChannelModel)
    psnr_curves: dict = field(default_factory=dict)
    fixed_relay_count: int | None = None

    def validate(self) -> None:
        check_config(self.system)
        if self.placements_per_density < 1:
            raise ConfigError("placements_per_density must be >= 1")
        if not self.distances or not self.densities:
            raise ConfigError("distances and densities must be non-empty")
        if self.trials_per_estimate < 1:
            raise ConfigError("trials_per_estimate must be >= 1")
        self.schemes = tuple(Scheme(s) for s in self.schemes)
        self.distances = tuple(float(d) for d in self.distances)
        self.densities = tuple(float(d) for d in self.densities)
        for name, curve in self.psnr_curves.items():
            check_psnr_curve(curve, name)


# ---------------------------------------------------------------- PSNR ---

def check_psnr_curve(curve, name="curve"):
    pts = np.asarray(curve, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ConfigError(f"PSNR curve {name!r} needs at least two (rate, psnr) points")
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise ConfigError(f"PSNR curve {name!r} rates must be strictly increasing")
    return pts


def map_rate_to_psnr(rate: float, curve) -> float:
    """Piecewise-linear rate -> PSNR lookup, clamped at the end knots."""
    pts = check_psnr_curve(curve)
    return float(np.interp(rate, pts[:, 0], pts[:, 1]))


def read_psnr_csv(path):
    with open(path, newline="") as fh:
        return [(float(r["rate_bps"]), float(r["psnr_db"])) for r in csv.DictReader(fh)]


# ------------------------------------------------------------ PER cache ---

class PerCache:
    """On-disk store of per-placement PER tables, keyed by a content hash of
    everything that determines them."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(placement, channel: ChannelModel, rates, trials, seed) -> str:
        h = hashlib.sha256()
        h.update(placement.key())
        h.update(channel.digest().encode())
        h.update(np.asarray(rates, dtype="<f8").tobytes())
        h.update(f"{trials}:{seed}".encode())
        return h.hexdigest()

    def table(self, placement, channel, rates, trials, seed) -> PerTable:
        path = self.root / f"{self.key(placement, channel, rates, trials, seed)}.npz"
        if path.exists():
            with np.load(path) as data:
                arrays = {k: data[k] for k in data.files}
            return PerTable(placement, rates, trials, seed, channel, arrays=arrays)
        tab = PerTable(placement, rates, trials, seed, channel)
        arrays = tab.compute_all()
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".npz")
        os.close(fd)
        np.savez(tmp, **arrays)
        os.replace(tmp, path)
        return tab


# ---------------------------------------------------------- experiment ---

def ensemble_seed(seed: int, density: float) -> int:
    return int(derive_rng(seed, "ensemble", repr(float(density))).integers(2**62))


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, float):
        return repr(x)
    return x


def _run_cell(args):
    """Optimize every scheme on one (density, distance, placement)."""
    spec, density, distance, pid, placement, cache_dir = args
    cfg = spec.system
    if cache_dir is not None:
        table = PerCache(cache_dir).table(placement, spec.channel, cfg.rate_table,
                                          spec.trials_per_estimate, spec.seed)
    else:
        table = PerTable(placement, cfg.rate_table, spec.trials_per_estimate, spec.seed, spec.channel)
    rows = []
    for scheme in spec.schemes:
        plan, res = optimize(scheme, placement, cfg, table)
        per = res.per_used
        rows.append({
            "scheme": str(scheme), "density": density, "distance": distance,
            "placement_id": pid, "feasible": res.feasible,
            "relay_off": plan.relay_off if plan else None,
            "r12": plan.r12 if plan else None, "r21": plan.r21 if plan else None,
            "rr2": plan.rr2 if plan and not plan.relay_off else None,
            "rr1": plan.rr1 if plan and not plan.relay_off else None,
            "rr": plan.rr if plan and not plan.relay_off else None,
            "t_i": plan.t_i if plan else None,
            "n12": res.n12, "n21": res.n21, "s12": res.s12, "s21": res.s21,
            "p12": per.p12 if per else None, "p21": per.p21 if per else None,
            "avg_relay_count": per.avg_relay_count if per else None,
            "rv12": res.rv12, "rv21": res.rv21, "avg_video_rate": res.avg_video_rate,
        })
    return rows


@dataclass
class AggregateEntry:
    scheme: str
    density: float
    distance: float
    placements: int
    infeasible: int
    mean_rate: float
    stderr_rate: float
    psnr: dict = field(default_factory=dict)


@dataclass
class AggregateReport:
    entries: list
    plans: list
    psnr_names: tuple = ()

    def get(self, scheme, density, distance) -> AggregateEntry | None:
        for e in self.entries:
            if e.scheme == str(scheme) and e.density == density and e.distance == distance:
                return e
        return None

    def mean_rate(self, scheme, density, distance) -> float:
        return self.get(scheme, density, distance).mean_rate


def aggregate(plans, schemes, densities, distances, psnr_curves=None) -> AggregateReport:
    """Mean and standard error of avg_video_rate per (scheme, density,
    distance); infeasible cells count as rate 0."""
    psnr_curves = psnr_curves or {}
    cells: dict = {}
    for row in plans:
        cells.setdefault((row["scheme"], row["density"], row["distance"]), []).append(row)
    entries = []
    for density in densities:
        for distance in distances:
            for scheme in schemes:
                rows = cells.get((str(scheme), density, distance), [])
                rates = [float(r["avg_video_rate"]) for r in rows]
                n = len(rates)
                mean = math.fsum(rates) / n if n else float("nan")
                if n > 1:
                    var = math.fsum((x - mean) ** 2 for x in rates) / (n - 1)
                    se = math.sqrt(var / n)
                else:
                    se = 0.0
                infeasible = sum(1 for r in rows if not _truthy(r["feasible"]))
                psnr = {name: map_rate_to_psnr(mean, curve) for name, curve in psnr_curves.items()}
                entries.append(AggregateEntry(str(scheme), density, distance, n, infeasible,
                                              mean, se, psnr))
    return AggregateReport(entries, list(plans), tuple(psnr_curves))


def _truthy(v) -> bool:
    if isinstance(v, str):
        return v.strip() not in ("", "0", "False", "false")
    return bool(v)


def run_experiment(spec: ExperimentSpec, out_dir=None, jobs: int = 1, cache_dir=None) -> AggregateReport:
    """Optimize every scheme on every (density, distance, placement) cell.

    Relay layouts depend on the density and placement index only, so each
    distance reuses the same ensemble of relay positions. Output does not
    depend on ``jobs``.
    """
    spec.validate()
    tasks = []
    for density in spec.densities:
        eseed = ensemble_seed(spec.seed, density)
        for distance in spec.distances:
            ens = generate_placements(spec.region, density, distance, spec.placements_per_density,
                                      eseed, spec.fixed_relay_count)
            for pid, placement in enumerate(ens):
                tasks.append((spec, density, distance, pid, placement, cache_dir))
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks, chunksize=1))
    else:
        results = [_run_cell(t) for t in tasks]
    plans = [row for rows in results for row in rows]
    report = aggregate(plans, spec.schemes, spec.densities, spec.distances, spec.psnr_curves)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_plans_csv(out / "plans.csv", plans)
        write_report_csv(out / "report.csv", report)
        if {Scheme.RDSTC_NC, Scheme.RDSTC_HR} <= set(spec.schemes):
            write_ratios_csv(out / "ratios.csv", compare_schemes(report))
    return report


# ------------------------------------------------------------ comparison ---

@dataclass
class RatioEntry:
    density: float
    distance: float
    numerator: str
    denominator: str
    ratio: float | None
    stderr: float | None
    status: str = "ok"


def compare_schemes(report: AggregateReport, numerator=Scheme.RDSTC_NC,
                    denominator=Scheme.RDSTC_HR) -> list[RatioEntry]:
    """Mean-rate ratio per (density, distance), with first-order error
    propagation of the two standard errors."""
    keys = []
    for e in report.entries:
        k = (e.density, e.distance)
        if k not in keys:
            keys.append(k)
    out = []
    for density, distance in keys:
        a = report.get(numerator, density, distance)
        b = report.get(denominator, density, distance)
        if a is None or b is None:
            out.append(RatioEntry(density, distance, str(numerator), str(denominator),
                                  None, None, "missing"))
            continue
        if b.mean_rate == 0:
            out.append(RatioEntry(density, distance, str(numerator), str(denominator),
                                  None, None, "zero-denominator"))
            continue
        r = a.mean_rate / b.mean_rate
        rel = math.hypot(a.stderr_rate / a.mean_rate if a.mean_rate else 0.0,
                         b.stderr_rate / b.mean_rate)
        out.append(RatioEntry(density, distance, str(numerator), str(denominator), r, abs(r) * rel))
    return out


# ------------------------------------------------------------------ CSV ---

def write_plans_csv(path, plans) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLAN_COLUMNS)
        for row in plans:
            w.writerow([_fmt(row[c]) for c in PLAN_COLUMNS])


def read_plans_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["density"] = float(r["density"])
        r["distance"] = float(r["distance"])
        r["avg_video_rate"] = float(r["avg_video_rate"])
    return rows


def write_report_csv(path, report: AggregateReport) -> None:
    psnr_cols = [f"psnr_{n}" for n in report.psnr_names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(REPORT_COLUMNS) + psnr_cols)
        for e in report.entries:
            w.writerow([e.scheme, _fmt(e.density), _fmt(e.distance), e.placements, e.infeasible,
                        _fmt(e.mean_rate), _fmt(e.stderr_rate)]
                       + [_fmt(e.psnr[n]) for n in report.psnr_names])


def read_report_csv(path) -> AggregateReport:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = tuple(c[5:] for c in reader.fieldnames if c.startswith("psnr_"))
        for r in reader:
            entries.append(AggregateEntry(
                r["scheme"], float(r["density"]), float(r["distance"]), int(r["placements"]),
                int(r["infeasible"]), float(r["mean_rate"]), float(r["stderr_rate"]),
                {n: float(r[f"psnr_{n}"]) for n in names},
            ))
    return AggregateReport(entries, [], names)


def write_ratios_csv(path, ratios) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATIO_COLUMNS)
        for e in ratios:
            w.writerow([_fmt(e.density), _fmt(e.distance), e.numerator, e.denominator,
                        _fmt(e.ratio), _fmt(e.stderr), e.status])
