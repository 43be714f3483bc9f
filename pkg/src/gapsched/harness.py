"""Experiment driver: learning phase, benchmark sweep, metrics and CSV export."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .optimize import METHODS, ObjectiveSpec, optimize_instance
from .problems import (
    IsingModel,
    brute_force_extrema,
    gen_random_qubo,
    gen_regular_graph,
    maxcut_to_ising,
    qubo_to_ising,
    rescale_ising,
)
from .schedule import BezierGapCurve, fit_bezier
from .spectrum import (
    EnsembleSpec,
    aggregate_profiles,
    default_grid,
    ensemble_csv,
    final_gap_csv,
    paired_aggregate_csv,
    sample_ensemble_gaps,
)

log = logging.getLogger(__name__)

PROBLEM_CLASSES = ("qubo_random", "maxcut_3reg_unweighted", "maxcut_3reg_weighted")
RATIO_TOL = 1e-9
CURVE_FILES = {"mean": "curve_mean.json", "median": "curve_median.json"}


class ConfigError(ValueError):
    pass


class RatioError(ValueError):
    pass


# -- metrics -----------------------------------------------------------------


def approximation_ratio(energy: float, e_min: float, e_max: float) -> float:
    """``(E_max - E) / (E_max - E_min)``: 1 at the ground state, 0 at the top."""
    if not e_max > e_min:
        raise RatioError(f"degenerate spectrum: E_min={e_min}, E_max={e_max}")
    scale = max(1.0, abs(e_min), abs(e_max))
    if energy < e_min - RATIO_TOL * scale or energy > e_max + RATIO_TOL * scale:
        raise RatioError(f"energy {energy} outside [{e_min}, {e_max}]")
    return (e_max - energy) / (e_max - e_min)


def maxcut_ratio(expected_cut: float, c_max: float) -> float:
    """Expected cut over the optimum (the worst cut of a nonnegative graph is 0)."""
    if not c_max > 0:
        raise RatioError("graph has no positive-weight cut")
    if expected_cut < -RATIO_TOL * c_max or expected_cut > c_max * (1 + RATIO_TOL):
        raise RatioError(f"expected cut {expected_cut} outside [0, {c_max}]")
    return expected_cut / c_max


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class LearningConfig:
    n: int = 10
    coeff_range: tuple[float, float] = (-1.0, 1.0)
    instances: int = 1000
    grid_size: int = 101
    seed: int = 0


@dataclass(frozen=True)
class CurveConfig:
    mean_degree: int = 3
    median_degree: int = 7


@dataclass(frozen=True)
class BenchmarkConfig:
    problem_class: str = "qubo_random"
    n: int = 20
    instances: int = 100
    p_values: tuple[int, ...] = tuple(range(1, 11))
    methods: tuple[str, ...] = METHODS
    budget: int = 200
    seed: int = 1000
    coeff_range: tuple[float, float] = (-100.0, 100.0)
    weight_range: tuple[float, float] = (0.0, 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    learning: LearningConfig = field(default_factory=LearningConfig)
    curves: CurveConfig = field(default_factory=CurveConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    output_dir: str = "results"
    workers: int = 1
    base_dir: str = "."

    def __post_init__(self):
        lc, bc = self.learning, self.benchmark
        if lc.instances < 1 or bc.instances < 1:
            raise ConfigError("instance counts must be >= 1")
        if lc.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if not bc.p_values or min(bc.p_values) < 1:
            raise ConfigError("p range must be nonempty with p >= 1")
        if bc.problem_class not in PROBLEM_CLASSES:
            raise ConfigError(f"unknown problem class {bc.problem_class!r}")
        bad = set(bc.methods) - set(METHODS)
        if bad or not bc.methods:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        if bc.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def out_path(self) -> Path:
        return Path(self.base_dir) / self.output_dir

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def config_from_dict(doc: dict, base_dir=".") -> ExperimentConfig:
    try:
        lrn = dict(doc.get("learning", {}))
        if "coeff_range" in lrn:
            lrn["coeff_range"] = tuple(map(float, lrn["coeff_range"]))
        bench = dict(doc.get("benchmark", {}))
        if "p_range" in bench:
            lo, hi = bench.pop("p_range")
            bench["p_values"] = tuple(range(int(lo), int(hi) + 1))
        for key in ("p_values", "methods"):
            if key in bench:
                bench[key] = tuple(bench[key])
        for key in ("coeff_range", "weight_range"):
            if key in bench:
                bench[key] = tuple(map(float, bench[key]))
        return ExperimentConfig(
            learning=LearningConfig(**lrn),
            curves=CurveConfig(**doc.get("curves", {})),
            benchmark=BenchmarkConfig(**bench),
            output_dir=doc.get("output_dir", "results"),
            workers=int(doc.get("workers", 1)),
            base_dir=str(base_dir),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc, base_dir=path.resolve().parent)


# -- learning phase ----------------------------------------------------------


@dataclass
class LearningArtifacts:
    profiles: list
    mean: object
    median: object
    curves: dict[str, BezierGapCurve]


def learn(config: ExperimentConfig) -> LearningArtifacts:
    lc = config.learning
    ens = EnsembleSpec(lc.n, lc.coeff_range[0], lc.coeff_range[1], lc.instances, lc.seed)
    profiles = sample_ensemble_gaps(ens, default_grid(lc.grid_size), workers=config.workers)
    mean = aggregate_profiles(profiles, "mean")
    median = aggregate_profiles(profiles, "median")
    curves = {
        "mean": fit_bezier(mean, config.curves.mean_degree, profile_id=f"mean_n{lc.n}_seed{lc.seed}"),
        "median": fit_bezier(median, config.curves.median_degree, profile_id=f"median_n{lc.n}_seed{lc.seed}"),
    }
    return LearningArtifacts(profiles, mean, median, curves)


def run_learning_phase(config: ExperimentConfig) -> LearningArtifacts:
    """Sample gaps, aggregate, fit, and write every artifact to the output directory."""
    t0 = time.perf_counter()
    art = learn(config)
    out = config.out_path
    out.mkdir(parents=True, exist_ok=True)
    (out / "ensemble_gaps.csv").write_text(ensemble_csv(art.profiles))
    (out / "aggregate_gaps.csv").write_text(paired_aggregate_csv(art.mean, art.median))
    (out / "final_gaps.csv").write_text(final_gap_csv(art.profiles))
    rows = ["curve,degree,rms_residual"]
    for kind, curve in art.curves.items():
        curve.save(out / CURVE_FILES[kind])
        rows.append(f"{kind},{curve.degree},{curve.rms_residual!r}")
    (out / "residuals.csv").write_text("\n".join(rows) + "\n")
    _write_manifest(out / "learn_manifest.json", config, [], time.perf_counter() - t0)
    return art


def load_curves(curve_dir) -> dict[str, BezierGapCurve]:
    curve_dir = Path(curve_dir)
    curves = {}
    for kind, name in CURVE_FILES.items():
        if (curve_dir / name).exists():
            curves[kind] = BezierGapCurve.load(curve_dir / name)
    return curves


# -- benchmark ---------------------------------------------------------------


@dataclass
class ResultRecord:
    problem_class: str
    instance_id: int
    method: str
    p: int
    ratio: float | None
    best_params: tuple[float, ...] = ()
    evaluations: int = 0
    energy: float | None = None
    e_min: float | None = None
    e_max: float | None = None
    error: str = ""
    wall_time: float = 0.0

    @property
    def key(self):
        return (self.problem_class, self.instance_id, self.method, self.p)


RECORD_FIELDS = ("problem_class", "instance_id", "method", "p", "ratio", "best_params", "evaluations",
                 "energy", "e_min", "e_max", "error")


def benchmark_instance(bc: BenchmarkConfig, instance_id: int) -> tuple[IsingModel, bool]:
    """Rescaled Ising model of one benchmark instance; second item flags MaxCut."""
    seed = bc.seed + instance_id
    if bc.problem_class == "qubo_random":
        lo, hi = bc.coeff_range
        m = qubo_to_ising(gen_random_qubo(bc.n, lo, hi, seed))
        return rescale_ising(m, lo, hi), False
    if bc.problem_class == "maxcut_3reg_unweighted":
        return maxcut_to_ising(gen_regular_graph(bc.n, 3, None, seed)), True
    lo, hi = bc.weight_range
    m = maxcut_to_ising(gen_regular_graph(bc.n, 3, (lo, hi), seed))
    return rescale_ising(m, lo, hi), True


def row_seed(base: int, instance_id: int, method: str, p: int) -> int:
    ss = np.random.SeedSequence([base, instance_id, METHODS.index(method), p])
    return int(ss.generate_state(1)[0])


def evaluate_row(model: IsingModel, is_maxcut: bool, problem_class: str, instance_id: int,
                 method: str, p: int, budget: int, curves: dict, seed: int) -> ResultRecord:
    """Optimize one (instance, method, p) cell; failures are captured in ``error``."""
    t0 = time.perf_counter()
    rec = ResultRecord(problem_class, instance_id, method, p, None)
    try:
        if method == "vanilla_qaoa":
            spec = ObjectiveSpec("vanilla_qaoa", p, model, budget=budget)
        else:
            kind = method.split("_", 1)[1]
            if kind not in curves:
                raise KeyError(f"no {kind} gap curve loaded")
            spec = ObjectiveSpec("heuristic", p, model, curve=curves[kind], budget=budget)
        res = optimize_instance(spec, method, seed)
        target = spec.circuit_model
        e_min, e_max, _ = brute_force_extrema(target)
        rec.best_params = tuple(float(v) for v in res.best_params)
        rec.evaluations = res.evaluations_used
        rec.energy, rec.e_min, rec.e_max = res.best_value, e_min, e_max
        if is_maxcut:
            # the minimized Hamiltonian is -(cut - constant); undo the shift
            shift = -target.offset
            rec.ratio = maxcut_ratio(shift - res.best_value, shift - e_min)
        else:
            rec.ratio = approximation_ratio(res.best_value, e_min, e_max)
    except Exception as exc:  # recorded per row; the sweep continues
        log.warning("row %s failed: %s", rec.key, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_time = time.perf_counter() - t0
    return rec


def _row_job(args):
    bc, instance_id, method, p, curves = args
    model, is_maxcut = benchmark_instance(bc, instance_id)
    seed = row_seed(bc.seed, instance_id, method, p)
    return evaluate_row(model, is_maxcut, bc.problem_class, instance_id, method, p, bc.budget, curves, seed)


def run_benchmark(config: ExperimentConfig, curves: dict[str, BezierGapCurve]) -> list[ResultRecord]:
    bc = config.benchmark
    for method in bc.methods:
        if method != "vanilla_qaoa" and method.split("_", 1)[1] not in curves:
            raise ConfigError(f"method {method} needs a {method.split('_', 1)[1]} curve")
    jobs = [(bc, i, method, p, curves) for i in range(bc.instances) for method in bc.methods for p in bc.p_values]
    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(config.workers) as pool:
            records = list(pool.map(_row_job, jobs))
    else:
        records = [_row_job(j) for j in jobs]
    return sorted(records, key=lambda r: (r.problem_class, r.instance_id, METHODS.index(r.method), r.p))


def records_csv(records: Sequence[ResultRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([
            r.problem_class, r.instance_id, r.method, r.p, _fmt(r.ratio),
            ";".join(repr(v) for v in r.best_params), r.evaluations,
            _fmt(r.energy), _fmt(r.e_min), _fmt(r.e_max), r.error,
        ])
    return buf.getvalue()


def read_records_csv(text: str) -> list[ResultRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(ResultRecord(
            row["problem_class"], int(row["instance_id"]), row["method"], int(row["p"]),
            _parse(row["ratio"]),
            tuple(float(v) for v in row["best_params"].split(";") if v),
            int(row["evaluations"]), _parse(row["energy"]), _parse(row["e_min"]), _parse(row["e_max"]),
            row["error"],
        ))
    return out


# -- summaries ---------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    problem_class: str
    method: str
    p: int
    count: int
    mean_ratio: float
    median_ratio: float
    std_ratio: float
    mean_params: tuple[float, ...]
    failed: int = 0


def _ordered(records: Iterable[ResultRecord]) -> list[ResultRecord]:
    return sorted(records, key=lambda r: (r.problem_class, r.method, r.p, r.instance_id, r.ratio or 0.0))


def summarize(records: Sequence[ResultRecord]) -> list[SummaryRow]:
    """Ratio statistics per (problem class, method, p), independent of row order."""
    if not records:
        raise ValueError("no records to summarize")
    groups: dict[tuple, list[ResultRecord]] = {}
    for r in _ordered(records):
        groups.setdefault((r.problem_class, r.method, r.p), []).append(r)
    rows = []
    for (cls, method, p), grp in sorted(groups.items()):
        ok = [r for r in grp if r.ratio is not None]
        ratios = np.array([r.ratio for r in ok], dtype=float)
        params: tuple[float, ...] = ()
        if ok and method != "vanilla_qaoa":
            params = tuple(float(v) for v in np.mean([r.best_params for r in ok], axis=0))
        if ok:
            stats = (float(ratios.mean()), float(np.median(ratios)), float(ratios.std()))
        else:
            stats = (float("nan"),) * 3
        rows.append(SummaryRow(cls, method, p, len(ok), *stats, params, len(grp) - len(ok)))
    return rows


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem_class", "method", "p", "count", "failed", "mean_ratio", "median_ratio", "std_ratio",
                "mean_kappa", "mean_q"])
    for r in rows:
        kappa, q = r.mean_params if len(r.mean_params) == 2 else ("", "")
        w.writerow([r.problem_class, r.method, r.p, r.count, r.failed, _fmt(r.mean_ratio), _fmt(r.median_ratio),
                    _fmt(r.std_ratio), _fmt(kappa), _fmt(q)])
    return buf.getvalue()


def ratio_difference(records: Sequence[ResultRecord]) -> dict[tuple[str, str, int], float | None]:
    """Mean ratio of each heuristic variant minus mean vanilla ratio, per (class, p).

    Keys are ``(problem_class, heuristic_method, p)``; a value of ``None``
    marks a cell where either side has no successful rows.
    """
    means: dict[tuple[str, str, int], float] = {}
    for row in summarize(records):
        if row.count:
            means[(row.problem_class, row.method, row.p)] = row.mean_ratio
    classes = sorted({r.problem_class for r in records})
    ps = sorted({r.p for r in records})
    out: dict[tuple[str, str, int], float | None] = {}
    for cls in classes:
        for method in ("heuristic_mean", "heuristic_median"):
            if not any(r.method == method and r.problem_class == cls for r in records):
                continue
            for p in ps:
                a, b = means.get((cls, method, p)), means.get((cls, "vanilla_qaoa", p))
                out[(cls, method, p)] = None if a is None or b is None else a - b
    return out


def difference_csv(diff: dict) -> str:
    lines = ["problem_class,method,p,mean_ratio_difference"]
    for (cls, method, p), v in sorted(diff.items()):
        lines.append(f"{cls},{method},{p},{'' if v is None else repr(v)}")
    return "\n".join(lines) + "\n"


def run_bench_phase(config: ExperimentConfig, curves: dict[str, BezierGapCurve], curve_dir=None) -> list[ResultRecord]:
    t0 = time.perf_counter()
    records = run_benchmark(config, curves)
    out = config.out_path
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(records_csv(records))
    (out / "summary.csv").write_text(summary_csv(summarize(records)))
    (out / "ratio_difference.csv").write_text(difference_csv(ratio_difference(records)))
    inputs = sorted(Path(curve_dir).glob("curve_*.json")) if curve_dir else []
    _write_manifest(out / "bench_manifest.json", config, inputs, time.perf_counter() - t0,
                    row_times={f"{r.instance_id}/{r.method}/{r.p}": r.wall_time for r in records})
    return records


def _write_manifest(path: Path, config: ExperimentConfig, inputs, elapsed: float, row_times=None) -> None:
    h = hashlib.sha256()
    for f in inputs:
        h.update(Path(f).read_bytes())
    doc = {
        "software": "gapsched",
        "version": __version__,
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "inputs": [os.path.basename(f) for f in inputs],
        "inputs_sha256": h.hexdigest(),
        "wall_time_s": elapsed,
    }
    if row_times:
        doc["row_wall_time_s"] = row_times
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    return repr(float(v))


def _parse(s: str):
    return float(s) if s else None
