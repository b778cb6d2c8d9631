"""Seeded Monte Carlo replications of the compound estimation experiments.

A scenario fixes n, a signal design and a list of estimators. Each
replication draws the mean vector and one noise vector from a Philox stream
seeded with ``base_seed ^ rep``, then runs every estimator on the same X.
"""
import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from gmleb.estimators import KINDS, EstimatorSpec, run_estimator

SIGNALS = ("binary", "binary_perturbed", "gaussian")
RECORD_HEADER = ["scenario", "estimator", "rep", "total_sq_error", "wall_time_ms", "seed"]
AGGREGATE_HEADER = ["scenario", "estimator", "mean_total_sq_error", "se", "replications"]


class ScenarioError(ValueError):
    """Invalid scenario description; the message starts with the field path."""


@dataclass(frozen=True)
class Signal:
    kind: str
    k: int = 0
    mu: float = 0.0
    sigma2: float = 1.0
    half_width: float = 0.2

    @property
    def label(self):
        if self.kind == "gaussian":
            return f"σ²={self.sigma2:g} μ={self.mu:g}"
        tag = f"k={self.k} μ={self.mu:g}"
        if self.kind == "binary_perturbed":
            tag += f" ±{self.half_width:g}"
        return tag


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    n: int
    signal: Signal
    estimators: tuple
    replications: int = 100
    base_seed: int = 0

    def __post_init__(self):
        s = self.signal
        if self.n < 1:
            raise ScenarioError(f"n: must be >= 1, got {self.n}")
        if s.kind not in SIGNALS:
            raise ScenarioError(f"signal.kind: unknown signal {s.kind!r}")
        if s.kind != "gaussian" and not 0 <= s.k <= self.n:
            raise ScenarioError(f"signal.k: must lie in [0, n={self.n}], got {s.k}")
        if s.kind == "gaussian" and not s.sigma2 > 0:
            raise ScenarioError(f"signal.sigma2: must be positive, got {s.sigma2}")
        if self.replications < 1:
            raise ScenarioError(f"replications: must be >= 1, got {self.replications}")

    def with_seed(self, seed):
        return ScenarioConfig(self.id, self.n, self.signal, self.estimators,
                              self.replications, seed)


@dataclass(frozen=True)
class SimulationRecord:
    scenario: str
    estimator: str
    rep: int
    total_sq_error: float
    wall_time_ms: float
    seed: int
    skipped: str = ""


@dataclass(frozen=True)
class AggregateRow:
    scenario: str
    estimator: str
    mean: float
    se: float
    replications: int


def rep_seed(base_seed, rep):
    return (int(base_seed) ^ int(rep)) & 0xFFFFFFFFFFFFFFFF


def rep_rng(base_seed, rep):
    return np.random.Generator(np.random.Philox(rep_seed(base_seed, rep)))


def _draw_truth(sc, rng):
    s = sc.signal
    if s.kind == "gaussian":
        return s.mu + math.sqrt(s.sigma2) * rng.standard_normal(sc.n)
    theta = np.zeros(sc.n)
    theta[:s.k] = s.mu
    if s.kind == "binary_perturbed":
        theta += rng.uniform(-s.half_width, s.half_width, sc.n)
    return theta


def generate_truth(scenario, rep):
    """Mean vector of replication ``rep``; nonzero binary entries come first."""
    return _draw_truth(scenario, rep_rng(scenario.base_seed, rep))


def draw_replication(scenario, rep):
    rng = rep_rng(scenario.base_seed, rep)
    theta = _draw_truth(scenario, rng)
    X = theta + rng.standard_normal(scenario.n)
    return theta, X


def run_replication(scenario, rep):
    theta, X = draw_replication(scenario, rep)
    seed = rep_seed(scenario.base_seed, rep)
    out = []
    for spec in scenario.estimators:
        t0 = time.perf_counter()
        try:
            res = run_estimator(spec, X, theta)
        except ValueError as exc:
            out.append(SimulationRecord(scenario.id, spec.label, rep, math.nan, 0.0, seed,
                                        skipped=str(exc)))
            continue
        ms = 1000.0 * (time.perf_counter() - t0)
        d = res.estimates - theta
        out.append(SimulationRecord(scenario.id, spec.label, rep, float(d @ d), ms, seed))
    return out


def _run_chunk(args):
    scenario, reps = args
    return [r for rep in reps for r in run_replication(scenario, rep)]


def default_workers():
    raw = os.environ.get("GMLEB_THREADS")
    if raw:
        return max(1, int(raw))
    return 1


def run_scenario(scenario, workers=None):
    """All replications of one scenario, ordered by (estimator, rep)."""
    workers = default_workers() if workers is None else workers
    reps = range(scenario.replications)
    if workers <= 1 or scenario.replications == 1:
        recs = _run_chunk((scenario, reps))
    else:
        chunks = [(scenario, reps[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = [r for part in pool.map(_run_chunk, chunks) for r in part]
    order = {spec.label: i for i, spec in enumerate(scenario.estimators)}
    return sorted(recs, key=lambda r: (order[r.estimator], r.rep))


def aggregate(records):
    """Mean and Monte Carlo standard error of total squared error per (scenario, estimator)."""
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for r in records:
        groups.setdefault((r.scenario, r.estimator), []).append(r)
    rows = []
    for (sid, est), recs in groups.items():
        vals = np.array([r.total_sq_error for r in sorted(recs, key=lambda r: r.rep)
                         if not r.skipped])
        if vals.size == 0:
            rows.append(AggregateRow(sid, est, math.nan, math.nan, 0))
            continue
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        rows.append(AggregateRow(sid, est, float(vals.mean()), se, int(vals.size)))
    return rows


# -- scenario files -----------------------------------------------------------

def _req(obj, key, path):
    if key not in obj:
        raise ScenarioError(f"{path}.{key}: missing required field" if path else
                            f"{key}: missing required field")
    return obj[key]


def _num(val, path, kind=float):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {val!r}")
    if kind is int:
        if float(val) != int(val):
            raise ScenarioError(f"{path}: expected an integer, got {val!r}")
        return int(val)
    if not math.isfinite(val):
        raise ScenarioError(f"{path}: must be finite")
    return float(val)


def parse_estimator(obj, path):
    if isinstance(obj, str):
        obj = {"kind": obj}
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an estimator name or object")
    kind = _req(obj, "kind", path)
    if kind not in KINDS:
        raise ScenarioError(f"{path}.kind: unknown estimator {kind!r}")
    allowed = {"kind", "q", "grid", "stop", "iterations", "kappa", "target"}
    extra = set(obj) - allowed
    if extra:
        raise ScenarioError(f"{path}.{sorted(extra)[0]}: unknown field")
    kw = {k: v for k, v in obj.items() if k != "kind"}
    if "q" in kw:
        kw["q"] = _num(kw["q"], f"{path}.q")
    if "iterations" in kw:
        kw["iterations"] = _num(kw["iterations"], f"{path}.iterations", int)
    if "kappa" in kw:
        kw["kappa"] = _num(kw["kappa"], f"{path}.kappa")
    try:
        return EstimatorSpec(kind, **kw)
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def parse_signal(obj, path):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    kind = _req(obj, "kind", path)
    if kind not in SIGNALS:
        raise ScenarioError(f"{path}.kind: unknown signal {kind!r}")
    if kind == "gaussian":
        allowed = {"kind", "mu", "sigma2"}
    elif kind == "binary_perturbed":
        allowed = {"kind", "k", "mu", "half_width"}
    else:
        allowed = {"kind", "k", "mu"}
    extra = set(obj) - allowed
    if extra:
        raise ScenarioError(f"{path}.{sorted(extra)[0]}: not a field of {kind} signals")
    kw = {"kind": kind, "mu": _num(_req(obj, "mu", path), f"{path}.mu")}
    if kind == "gaussian":
        kw["sigma2"] = _num(_req(obj, "sigma2", path), f"{path}.sigma2")
    else:
        kw["k"] = _num(_req(obj, "k", path), f"{path}.k", int)
        if "half_width" in obj:
            kw["half_width"] = _num(obj["half_width"], f"{path}.half_width")
    return Signal(**kw)


def parse_scenarios(doc):
    """Scenario list from a parsed JSON document.

    Accepts one scenario object or ``{"scenarios": [...]}``; top-level ``n``,
    ``replications``, ``base_seed`` and ``estimators`` act as defaults.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("(root): expected a JSON object")
    if "scenarios" in doc:
        items = doc["scenarios"]
        if not isinstance(items, list) or not items:
            raise ScenarioError("scenarios: expected a nonempty list")
        defaults = {k: v for k, v in doc.items() if k != "scenarios"}
        base = "scenarios"
    else:
        items, defaults, base = [doc], {}, None
    out = []
    seen = set()
    for i, item in enumerate(items):
        path = f"{base}[{i}]" if base else ""
        if not isinstance(item, dict):
            raise ScenarioError(f"{path or '(root)'}: expected an object")
        merged = {**defaults, **item}
        p = (lambda key: f"{path}.{key}" if path else key)
        allowed = {"id", "n", "signal", "estimators", "replications", "base_seed"}
        extra = set(merged) - allowed
        if extra:
            raise ScenarioError(f"{p(sorted(extra)[0])}: unknown field")
        for key in ("n", "signal", "estimators"):
            if key not in merged:
                raise ScenarioError(f"{p(key)}: missing required field")
        n = _num(merged["n"], p("n"), int)
        signal = parse_signal(merged["signal"], p("signal"))
        ests = merged["estimators"]
        if not isinstance(ests, list) or not ests:
            raise ScenarioError(f"{p('estimators')}: expected a nonempty list")
        specs = tuple(parse_estimator(e, f"{p('estimators')}[{j}]") for j, e in enumerate(ests))
        labels = [s.label for s in specs]
        if len(set(labels)) != len(labels):
            raise ScenarioError(f"{p('estimators')}: duplicate estimator {labels}")
        reps = _num(merged.get("replications", 100), p("replications"), int)
        seed = _num(merged.get("base_seed", 0), p("base_seed"), int)
        sid = merged.get("id", f"s{i}")
        if not isinstance(sid, str) or not sid:
            raise ScenarioError(f"{p('id')}: expected a nonempty string")
        if sid in seen:
            raise ScenarioError(f"{p('id')}: duplicate scenario id {sid!r}")
        seen.add(sid)
        try:
            out.append(ScenarioConfig(sid, n, signal, specs, reps, seed))
        except ScenarioError as exc:
            raise ScenarioError(f"{path + '.' if path else ''}{exc}") from None
    return out


def load_scenarios(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"(root): invalid JSON: {exc}") from None
    return parse_scenarios(doc)


def bundled_scenario_path(name):
    here = os.path.join(os.path.dirname(__file__), "scenarios")
    return os.path.join(here, name if name.endswith(".json") else name + ".json")


# -- output -------------------------------------------------------------------

def _fmt(x):
    return "nan" if math.isnan(x) else repr(float(x))


def write_records(records, path, timing=False):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_HEADER)
        for r in records:
            ms = _fmt(r.wall_time_ms) if timing else "0"
            w.writerow([r.scenario, r.estimator, r.rep, _fmt(r.total_sq_error), ms, r.seed])


def write_aggregate(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        for r in rows:
            w.writerow([r.scenario, r.estimator, _fmt(r.mean), _fmt(r.se), r.replications])


def markdown_table(rows, scenarios):
    """Estimators as rows, scenarios as columns, 6 significant digits."""
    cols = [s.id for s in scenarios]
    heads = {s.id: f"n={s.n} {s.signal.label}" for s in scenarios}
    ests = []
    for r in rows:
        if r.estimator not in ests:
            ests.append(r.estimator)
    cell = {(r.scenario, r.estimator): r for r in rows}
    lines = ["| estimator | " + " | ".join(heads[c] for c in cols) + " |",
             "|---|" + "---:|" * len(cols)]
    for e in ests:
        vals = []
        for c in cols:
            r = cell.get((c, e))
            if r is None or math.isnan(r.mean):
                vals.append("")
            else:
                vals.append(f"{r.mean:.6g} ({r.se:.6g})")
        lines.append(f"| {e} | " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"


@dataclass
class SimulationRun:
    scenarios: list
    records: list = field(default_factory=list)
    rows: list = field(default_factory=list)


def simulate(scenarios, seed=None, workers=None):
    if seed is not None:
        scenarios = [s.with_seed(seed) for s in scenarios]
    run = SimulationRun(list(scenarios))
    for sc in run.scenarios:
        run.records.extend(run_scenario(sc, workers))
    run.rows = aggregate(run.records)
    return run
