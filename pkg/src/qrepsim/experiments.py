"""Scenario documents, seed sweeps, metrics frames and their CSV form.

A scenario names a topology, a traffic model, the strategies to compare and
the seeds to run. Every (strategy, seed) pair runs in a fresh
``NetworkSimulation`` on the same pregenerated request list for that seed,
so rows pair up across strategies.
"""

from __future__ import annotations

import copy
import csv
import io
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import jsonschema
import numpy as np
import yaml

from .des import RngStream
from .entmath import distill_bbpssw, pcs_x_predict, pcs_xz_predict, swap_fidelity
from .errors import ConfigError, QrepsimError, RunError
from .netmodel import TOPOLOGY_PRESETS, Topology, dump_topology, load_topology
from .oracle import PcsCircuitConfig, simulate_distill, simulate_pcs, simulate_swap
from .protocols import NetworkSimulation, PhysicsConfig, Request, StrategyConfig, route

REQUESTS_SCHEMA = "#qrepsim-requests,v1"
AGGREGATES_SCHEMA = "#qrepsim-aggregates,v1"
INSTANCES_SCHEMA = "#qrepsim-instances,v1"
PCS_SCHEMA = "#qrepsim-pcs,v1"

REQUEST_COLUMNS = [
    "strategy", "seed", "request_id", "src", "dst", "arrival_ns", "pairs_requested",
    "completed_ns", "censored", "time_to_serve_ns", "attempts", "fidelities",
]
AGGREGATE_COLUMNS = ["strategy", "seed", "index", "request_id", "ma_time_to_serve_ns", "ma_fidelity"]
INSTANCE_COLUMNS = ["strategy", "seed", "requests", "events", "trace_sha256", "audit_checks", "oversubscriptions", "leaks"]

_STRATEGY_SCHEMA = {
    "type": "object",
    "required": ["name", "kind"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "kind": {"enum": ["ODO", "UCP", "ACP"]},
        "background_slots_per_node": {"type": "integer", "minimum": 0},
        "acp_ewma_alpha": {"type": "number", "minimum": 0, "maximum": 1},
        "acp_window_ns": {"type": "integer", "minimum": 1},
        "distill_threshold": {"type": ["number", "null"], "minimum": 0.25, "maximum": 1},
    },
}
_PAIR_ITEM = {
    "type": "array",
    "minItems": 3,
    "maxItems": 3,
    "items": [{"type": "string"}, {"type": "string"}, {"type": "number", "minimum": 0}],
}
_PHASE_SCHEMA = {
    "type": "object",
    "required": ["start_ns"],
    "additionalProperties": False,
    "properties": {
        "start_ns": {"type": "integer", "minimum": 0},
        "pairs": {"type": "array", "items": _PAIR_ITEM},
        "uniform": {
            "type": "object",
            "required": ["weight"],
            "additionalProperties": False,
            "properties": {
                "weight": {"type": "number", "exclusiveMinimum": 0},
                "max_hops": {"type": "integer", "minimum": 1},
            },
        },
    },
}
SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["name", "kind"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "kind": {"enum": ["network", "pcs_validation"]},
        "topology": {"type": "object"},
        "physics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source_fidelity": {"type": "number", "minimum": 0.25, "maximum": 1},
                "eviction_fidelity": {"type": "number", "minimum": 0.25, "maximum": 1},
                "hold_timeout_ns": {"type": "integer", "minimum": 1},
                "audit": {"type": "boolean"},
            },
        },
        "strategies": {"type": "array", "minItems": 1, "items": _STRATEGY_SCHEMA},
        "baseline": {"type": "string"},
        "traffic": {
            "type": "object",
            "required": ["rate_per_s", "phases"],
            "additionalProperties": False,
            "properties": {
                "rate_per_s": {"type": "number", "exclusiveMinimum": 0},
                "pairs_requested": {"type": "integer", "minimum": 1},
                "min_fidelity": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "phases": {"type": "array", "minItems": 1, "items": _PHASE_SCHEMA},
            },
        },
        "duration_ns": {"type": "integer", "minimum": 1},
        "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "metrics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"moving_average_window": {"type": "integer", "minimum": 1}},
        },
        "pcs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid_step": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.75},
                "recursion_channel_fidelity": {"type": "number", "minimum": 0.25, "maximum": 1},
                "gate_noise": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
            },
        },
    },
}

NETWORK_DEFAULTS: dict[str, Any] = {
    "physics": {"source_fidelity": 0.95, "eviction_fidelity": 0.3, "hold_timeout_ns": 50_000_000, "audit": False},
    "seeds": [1],
    "metrics": {"moving_average_window": 50},
}
STRATEGY_DEFAULTS = {
    "background_slots_per_node": 0,
    "acp_ewma_alpha": 0.3,
    "acp_window_ns": 1_000_000_000,
    "distill_threshold": None,
}
PCS_DEFAULTS = {"grid_step": 0.05, "recursion_channel_fidelity": 0.9, "gate_noise": [0.001, 0.005, 0.01]}


# -- scenario documents ------------------------------------------------------


@dataclass(frozen=True)
class TrafficPhase:
    start_ns: int
    pairs: tuple[tuple[str, str, float], ...]


@dataclass(frozen=True)
class TrafficSpec:
    rate_per_s: float
    phases: tuple[TrafficPhase, ...]
    pairs_requested: int = 1
    min_fidelity: float | None = None


@dataclass
class Scenario:
    name: str
    kind: str
    doc: dict
    topology: Topology | None = None
    strategies: list[StrategyConfig] = field(default_factory=list)
    baseline: str | None = None
    traffic: TrafficSpec | None = None
    duration_ns: int = 0
    seeds: list[int] = field(default_factory=list)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    ma_window: int = 50

    def strategy(self, label: str) -> StrategyConfig:
        for s in self.strategies:
            if s.label == label:
                return s
        raise KeyError(label)


def preset_names() -> list[str]:
    files = resources.files("qrepsim.presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".yaml"))


def preset_doc(name: str) -> dict:
    if name not in preset_names():
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {preset_names()}")
    text = resources.files("qrepsim.presets").joinpath(f"{name}.yaml").read_text()
    return yaml.safe_load(text)


def read_scenario_doc(ref: str | os.PathLike) -> dict:
    """Load a scenario document from a file path or a shipped preset name."""
    path = Path(ref)
    if path.exists():
        try:
            doc = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError("", f"not valid YAML: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("", "scenario document must be a mapping")
        return doc
    if str(ref) in preset_names():
        return preset_doc(str(ref))
    raise ConfigError("", f"no scenario file or preset named {str(ref)!r}")


def apply_overrides(doc: Mapping[str, Any], overrides: Iterable[str]) -> dict:
    """Return a copy of ``doc`` with ``dotted.path=value`` assignments applied.

    Values are parsed as YAML scalars or flow collections; numeric path parts
    index into lists.
    """
    doc = copy.deepcopy(dict(doc))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(key, f"cannot parse value {raw!r}") from exc
        node: Any = doc
        for i, part in enumerate(parts):
            last = i == len(parts) - 1
            if isinstance(node, list):
                if not part.isdigit() or int(part) >= len(node):
                    raise ConfigError(key, f"bad list index {part!r}")
                idx: Any = int(part)
            elif isinstance(node, dict):
                idx = part
                if not last and idx not in node:
                    node[idx] = {}
            else:
                raise ConfigError(key, f"{'.'.join(parts[:i])} is not a container")
            if last:
                node[idx] = value
            else:
                node = node[idx]
    return doc


def _deep_merge(base: dict, top: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_topology_doc(ref: Mapping[str, Any]) -> dict:
    """Expand ``{preset: name, ...}`` into a topology document; other keys overlay it."""
    ref = dict(ref)
    name = ref.pop("preset", None)
    if name is None:
        return ref
    if name not in TOPOLOGY_PRESETS:
        raise ConfigError("topology/preset", f"unknown topology preset {name!r}; choose from {sorted(TOPOLOGY_PRESETS)}")
    return _deep_merge(TOPOLOGY_PRESETS[name], ref)


def _nested_config(prefix: str, fn):
    try:
        return fn()
    except ConfigError as exc:
        raise ConfigError(f"{prefix}/{exc.path}".rstrip("/"), exc.reason) from exc


def load_scenario(doc: Mapping[str, Any], overrides: Iterable[str] = ()) -> Scenario:
    """Validate a scenario document (after overrides) and build a ``Scenario``.

    Raises:
        ConfigError: with the offending path and reason.
    """
    doc = apply_overrides(doc, overrides)
    errors = sorted(jsonschema.Draft7Validator(SCENARIO_SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError("/".join(str(p) for p in e.absolute_path), e.message)
    if doc["kind"] == "pcs_validation":
        doc = _deep_merge({"pcs": PCS_DEFAULTS}, doc)
        return Scenario(doc["name"], "pcs_validation", doc)

    for key in ("topology", "strategies", "traffic", "duration_ns"):
        if key not in doc:
            raise ConfigError(key, "required for network scenarios")
    doc = _deep_merge(NETWORK_DEFAULTS, doc)
    doc["strategies"] = [{**STRATEGY_DEFAULTS, **s} for s in doc["strategies"]]
    doc["traffic"] = {"pairs_requested": 1, "min_fidelity": None, **doc["traffic"]}

    topo = _nested_config("topology", lambda: load_topology(resolve_topology_doc(doc["topology"])))
    strategies = []
    names = set()
    for i, sd in enumerate(doc["strategies"]):
        if sd["name"] in names:
            raise ConfigError(f"strategies/{i}/name", f"duplicate strategy name {sd['name']!r}")
        names.add(sd["name"])
        strategies.append(StrategyConfig(**sd))
    baseline = doc.setdefault("baseline", strategies[0].label)
    if baseline not in names:
        raise ConfigError("baseline", f"{baseline!r} is not one of the strategies")
    if len(set(doc["seeds"])) != len(doc["seeds"]):
        raise ConfigError("seeds", "seeds must be distinct")

    node_ids = set(topo.node_ids())
    phases = []
    starts = [p["start_ns"] for p in doc["traffic"]["phases"]]
    if starts[0] != 0 or starts != sorted(set(starts)):
        raise ConfigError("traffic/phases", "phases must start at 0 and strictly increase")
    for i, ph in enumerate(doc["traffic"]["phases"]):
        pairs = []
        for j, (a, b, w) in enumerate(ph.get("pairs", [])):
            if a not in node_ids or b not in node_ids or a == b:
                raise ConfigError(f"traffic/phases/{i}/pairs/{j}", f"bad endpoint pair {a!r}, {b!r}")
            pairs.append((a, b, float(w)))
        if "uniform" in ph:
            pairs.extend(_uniform_pairs(topo, ph["uniform"]["weight"], ph["uniform"].get("max_hops")))
        if not pairs or sum(w for _, _, w in pairs) <= 0:
            raise ConfigError(f"traffic/phases/{i}", "phase has no positive-weight pairs")
        phases.append(TrafficPhase(ph["start_ns"], tuple(pairs)))
    tr = doc["traffic"]
    traffic = TrafficSpec(float(tr["rate_per_s"]), tuple(phases), tr["pairs_requested"], tr["min_fidelity"])
    return Scenario(
        name=doc["name"],
        kind="network",
        doc=doc,
        topology=topo,
        strategies=strategies,
        baseline=baseline,
        traffic=traffic,
        duration_ns=doc["duration_ns"],
        seeds=list(doc["seeds"]),
        physics=PhysicsConfig(**doc["physics"]),
        ma_window=doc["metrics"]["moving_average_window"],
    )


def dump_scenario(s: Scenario) -> str:
    """Normalized YAML of the scenario with every default filled in."""
    return yaml.safe_dump(s.doc, sort_keys=True, default_flow_style=False)


def _uniform_pairs(topo: Topology, weight: float, max_hops: int | None) -> list[tuple[str, str, float]]:
    ids = topo.node_ids()
    cands = []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if max_hops is None or len(route(topo, a, b)) - 1 <= max_hops:
                cands.append((a, b))
    return [(a, b, weight / len(cands)) for a, b in cands]


def generate_requests(traffic: TrafficSpec, duration_ns: int, seed: int) -> list[Request]:
    """Poisson arrivals over ``[0, duration_ns]``; endpoints drawn from the active phase."""
    rng = RngStream(seed, "traffic")
    mean_gap_ns = 1e9 / traffic.rate_per_s
    tables = []
    for ph in traffic.phases:
        cum = np.cumsum([w for _, _, w in ph.pairs])
        tables.append((ph.start_ns, ph.pairs, cum / cum[-1]))
    out = []
    t = 0.0
    while True:
        t += rng.exponential(1.0) * mean_gap_ns
        arrival = int(round(t))
        if arrival > duration_ns:
            break
        _, pairs, cdf = next(tb for tb in reversed(tables) if tb[0] <= arrival)
        k = min(int(np.searchsorted(cdf, rng.uniform(), side="right")), len(pairs) - 1)
        a, b, _ = pairs[k]
        out.append(Request(len(out), a, b, arrival, traffic.pairs_requested, traffic.min_fidelity))
    return out


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    strategy: str
    seed: int
    request_id: int
    src: str
    dst: str
    arrival_ns: int
    pairs_requested: int
    completed_ns: int | None
    attempts: int
    fidelities: tuple[float, ...]

    @property
    def censored(self) -> bool:
        return self.completed_ns is None

    @property
    def time_to_serve_ns(self) -> int | None:
        return None if self.completed_ns is None else self.completed_ns - self.arrival_ns


@dataclass(frozen=True)
class InstanceInfo:
    strategy: str
    seed: int
    requests: int
    events: int
    trace_sha256: str
    audit_checks: int
    oversubscriptions: int
    leaks: int


@dataclass(frozen=True)
class AggregateRow:
    strategy: str
    seed: int
    index: int
    request_id: int
    ma_time_to_serve_ns: float
    ma_fidelity: float


@dataclass
class MetricsFrame:
    rows: list[MetricsRow]
    instances: list[InstanceInfo] = field(default_factory=list)
    ma_window: int = 50

    def strategies(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.rows:
            seen.setdefault(r.strategy, None)
        for i in self.instances:
            seen.setdefault(i.strategy, None)
        return list(seen)

    def select(self, strategy: str, seed: int | None = None) -> list[MetricsRow]:
        return [r for r in self.rows if r.strategy == strategy and (seed is None or r.seed == seed)]

    def aggregates(self) -> list[AggregateRow]:
        """Trailing moving averages over completed requests in arrival order, per (strategy, seed)."""
        out = []
        groups: dict[tuple[str, int], list[MetricsRow]] = {}
        for r in self.rows:
            if not r.censored:
                groups.setdefault((r.strategy, r.seed), []).append(r)
        for (strategy, seed), rows in groups.items():
            rows.sort(key=lambda r: (r.arrival_ns, r.request_id))
            tts = [float(r.time_to_serve_ns) for r in rows]
            fid = [math.fsum(r.fidelities) / len(r.fidelities) for r in rows]
            for i, r in enumerate(rows):
                lo = max(0, i + 1 - self.ma_window)
                n = i + 1 - lo
                out.append(AggregateRow(strategy, seed, i, r.request_id, math.fsum(tts[lo : i + 1]) / n, math.fsum(fid[lo : i + 1]) / n))
        return out

    def per_seed_mean_tts(self, strategy: str) -> dict[int, float]:
        out = {}
        for seed in sorted({r.seed for r in self.rows if r.strategy == strategy}):
            done = [r.time_to_serve_ns for r in self.select(strategy, seed) if not r.censored]
            out[seed] = statistics.fmean(done) if done else math.inf
        return out

    def audit_clean(self) -> bool:
        return all(i.oversubscriptions == 0 and i.leaks == 0 for i in self.instances)


def run_instance(scenario: Scenario, strategy: StrategyConfig, seed: int, *, record_trace: bool = False):
    """Run one (strategy, seed) instance.

    Returns:
        ``(rows, info, sim)``; ``sim`` is the finished ``NetworkSimulation``.
    """
    requests = generate_requests(scenario.traffic, scenario.duration_ns, seed)
    try:
        sim = NetworkSimulation(scenario.topology, strategy, requests, seed, scenario.physics, record_trace=record_trace)
        res = sim.run(scenario.duration_ns)
    except QrepsimError as exc:
        raise RunError(strategy.label, seed, exc) from exc
    rows = [
        MetricsRow(
            strategy.label,
            seed,
            rec.request.id,
            rec.request.src,
            rec.request.dst,
            rec.request.arrival,
            rec.request.pairs_requested,
            rec.completed_at,
            rec.attempts,
            tuple(rec.fidelities),
        )
        for rec in res.records
    ]
    info = InstanceInfo(
        strategy.label, seed, len(rows), res.events, res.trace_digest,
        res.audit.checks, res.audit.oversubscriptions, res.audit.leaks,
    )
    return rows, info, sim


def _run_task(args):
    scenario, idx, seed = args
    rows, info, _ = run_instance(scenario, scenario.strategies[idx], seed)
    return idx, seed, rows, info


def run_scenario(scenario: Scenario, workers: int = 1, seed_order: Iterable[int] | None = None) -> MetricsFrame:
    """Run every (strategy, seed) instance and merge in canonical order.

    Args:
        scenario: a loaded network scenario.
        workers: process count; 1 runs inline.
        seed_order: execution order of seeds (the merged result does not
            depend on it).
    """
    if scenario.kind != "network":
        raise ConfigError("kind", "run_scenario needs a network scenario; pcs_validation runs through write_outputs")
    seeds = list(seed_order) if seed_order is not None else list(scenario.seeds)
    tasks = [(scenario, i, s) for s in seeds for i in range(len(scenario.strategies))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))
    rows = [row for r in results for row in r[2]]
    return MetricsFrame(rows, [r[3] for r in results], scenario.ma_window)


# -- summaries ---------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    requests: int
    completed: int
    censored: int
    mean_tts_ns: float
    median_tts_ns: float
    p95_tts_ns: float
    mean_fidelity: float
    rel_delta_mean_tts: float
    delta_mean_fidelity: float
    all_censored: bool


def summarize(frame: MetricsFrame, baseline: str | None = None) -> list[SummaryRow]:
    """Per-strategy time-to-serve and fidelity statistics, with deltas against ``baseline``.

    Time-to-serve statistics use completed rows only; censored rows are
    counted separately. A strategy with no completed row is flagged and its
    statistics are NaN.
    """
    if not frame.rows:
        raise ValueError("cannot summarize an empty frame")
    base = {}
    for strategy in frame.strategies():
        rows = frame.select(strategy)
        done = [r for r in rows if not r.censored]
        tts = np.array([r.time_to_serve_ns for r in done], dtype=float)
        fids = [f for r in done for f in r.fidelities]
        nan = float("nan")
        base[strategy] = dict(
            strategy=strategy,
            requests=len(rows),
            completed=len(done),
            censored=len(rows) - len(done),
            mean_tts_ns=float(tts.mean()) if len(tts) else nan,
            median_tts_ns=float(np.median(tts)) if len(tts) else nan,
            p95_tts_ns=float(np.percentile(tts, 95)) if len(tts) else nan,
            mean_fidelity=math.fsum(fids) / len(fids) if fids else nan,
            all_censored=not done,
        )
    ref = base.get(baseline) if baseline else None
    out = []
    for s, d in base.items():
        if ref is None or ref["all_censored"] or d["all_censored"]:
            rel, dfid = float("nan"), float("nan")
        else:
            rel = (d["mean_tts_ns"] - ref["mean_tts_ns"]) / ref["mean_tts_ns"]
            dfid = d["mean_fidelity"] - ref["mean_fidelity"]
        out.append(SummaryRow(rel_delta_mean_tts=rel, delta_mean_fidelity=dfid, **d))
    return out


def format_summary(rows: list[SummaryRow], baseline: str | None, scenario_name: str = "") -> str:
    lines = [f"scenario: {scenario_name}", f"baseline: {baseline}", ""]
    head = f"{'strategy':<16}{'reqs':>7}{'done':>7}{'cens':>6}{'mean_ms':>10}{'median_ms':>11}{'p95_ms':>10}{'mean_F':>9}{'d_tts':>9}{'d_F':>9}"
    lines.append(head)
    for r in rows:
        lines.append(
            f"{r.strategy:<16}{r.requests:>7}{r.completed:>7}{r.censored:>6}"
            f"{r.mean_tts_ns / 1e6:>10.4f}{r.median_tts_ns / 1e6:>11.4f}{r.p95_tts_ns / 1e6:>10.4f}"
            f"{r.mean_fidelity:>9.4f}{r.rel_delta_mean_tts:>+9.1%}{r.delta_mean_fidelity:>+9.4f}"
            + ("  ALL CENSORED" if r.all_censored else "")
        )
    return "\n".join(lines) + "\n"


# -- CSV ---------------------------------------------------------------------


def _csv_text(schema: str, columns: list[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema.split(","))
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def requests_csv(frame: MetricsFrame) -> str:
    def row(r: MetricsRow) -> list:
        return [
            r.strategy, r.seed, r.request_id, r.src, r.dst, r.arrival_ns, r.pairs_requested,
            "" if r.censored else r.completed_ns, int(r.censored),
            "" if r.censored else r.time_to_serve_ns, r.attempts,
            ";".join(repr(f) for f in r.fidelities),
        ]

    return _csv_text(REQUESTS_SCHEMA, REQUEST_COLUMNS, (row(r) for r in frame.rows))


def aggregates_csv(frame: MetricsFrame) -> str:
    rows = ([a.strategy, a.seed, a.index, a.request_id, repr(a.ma_time_to_serve_ns), repr(a.ma_fidelity)] for a in frame.aggregates())
    return _csv_text(AGGREGATES_SCHEMA, AGGREGATE_COLUMNS, rows)


def instances_csv(frame: MetricsFrame) -> str:
    return _csv_text(INSTANCES_SCHEMA, INSTANCE_COLUMNS, ([getattr(i, c) for c in INSTANCE_COLUMNS] for i in frame.instances))


def _read_table(text: str, schema: str, columns: list[str]) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if first != schema.split(","):
        raise ValueError(f"expected schema row {schema!r}, got {first!r}")
    if next(reader, None) != columns:
        raise ValueError("unexpected column header")
    return [dict(zip(columns, rec)) for rec in reader]


def parse_requests_csv(text: str, instances_text: str | None = None, ma_window: int = 50) -> MetricsFrame:
    """Inverse of ``requests_csv`` (and optionally ``instances_csv``)."""
    rows = []
    for d in _read_table(text, REQUESTS_SCHEMA, REQUEST_COLUMNS):
        rows.append(
            MetricsRow(
                d["strategy"], int(d["seed"]), int(d["request_id"]), d["src"], d["dst"], int(d["arrival_ns"]),
                int(d["pairs_requested"]), None if d["censored"] == "1" else int(d["completed_ns"]),
                int(d["attempts"]), tuple(float(x) for x in d["fidelities"].split(";") if x),
            )
        )
    instances = []
    if instances_text is not None:
        for d in _read_table(instances_text, INSTANCES_SCHEMA, INSTANCE_COLUMNS):
            ints = {k: int(v) for k, v in d.items() if k not in ("strategy", "trace_sha256")}
            instances.append(InstanceInfo(strategy=d["strategy"], trace_sha256=d["trace_sha256"], **ints))
    return MetricsFrame(rows, instances, ma_window)


# -- analytic vs exact -------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_deviation: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


@dataclass(frozen=True)
class PcsRow:
    study: str
    variant: str
    recursion_level: int
    gate_noise: float
    channel_fidelity: float
    postselect_prob: float
    output_fidelity: float
    analytic_postselect_prob: float
    analytic_output_fidelity: float


def fidelity_grid(step: float = 0.05) -> list[float]:
    n = int(round(0.75 / step))
    return [0.25 + 0.75 * i / n for i in range(n + 1)]


def pcs_rows(grid_step: float = 0.05, recursion_fidelity: float = 0.9, gate_noise: Iterable[float] = (0.001, 0.005, 0.01)) -> list[PcsRow]:
    """Exact PCS numbers: the analytic grid for both variants plus the recursion study."""
    nan = float("nan")
    rows = []
    for variant, fn in (("X_only", pcs_x_predict), ("X_and_Z", pcs_xz_predict)):
        for f in fidelity_grid(grid_step):
            exact = simulate_pcs(PcsCircuitConfig(variant, 0, 0.0, f))
            ana = fn(f)
            rows.append(PcsRow("grid", variant, 0, 0.0, f, exact.postselect_prob, exact.output_fidelity, ana.postselect_prob, ana.output_fidelity))
    for p in gate_noise:
        for level in (0, 1, 2):
            exact = simulate_pcs(PcsCircuitConfig("X_only", level, p, recursion_fidelity))
            rows.append(PcsRow("recursion", "X_only", level, p, recursion_fidelity, exact.postselect_prob, exact.output_fidelity, nan, nan))
    return rows


def pcs_csv(rows: list[PcsRow]) -> str:
    cols = list(PcsRow.__dataclass_fields__)
    return _csv_text(PCS_SCHEMA, cols, ([repr(v) if isinstance(v, float) else v for v in asdict(r).values()] for r in rows))


def oracle_checks(grid_step: float = 0.05, n_random: int = 50, seed: int = 0) -> list[CheckResult]:
    """Analytic formulas against exact circuit simulation."""
    checks = []
    grid = fidelity_grid(grid_step)
    for variant, fn in (("X_only", pcs_x_predict), ("X_and_Z", pcs_xz_predict)):
        dc = df = 0.0
        for f in grid:
            exact = simulate_pcs(PcsCircuitConfig(variant, 0, 0.0, f))
            ana = fn(f)
            dc = max(dc, abs(exact.postselect_prob - ana.postselect_prob))
            df = max(df, abs(exact.output_fidelity - ana.output_fidelity))
        checks.append(CheckResult(f"pcs {variant} postselect_prob", dc, 1e-10, len(grid)))
        checks.append(CheckResult(f"pcs {variant} output_fidelity", df, 1e-10, len(grid)))
    rng = RngStream(seed, "oracle-check")
    ds = dp = dd = 0.0
    for _ in range(n_random):
        f1 = 0.25 + 0.75 * rng.uniform()
        f2 = 0.25 + 0.75 * rng.uniform()
        ds = max(ds, abs(simulate_swap(f1, f2) - swap_fidelity(f1, f2)))
        ex = simulate_distill(f1, f2)
        an = distill_bbpssw(f1, f2)
        dp = max(dp, abs(ex.success_prob - an.success_prob))
        dd = max(dd, abs(ex.out_fidelity - an.out_fidelity))
    checks.append(CheckResult("swap fidelity", ds, 1e-12, n_random))
    checks.append(CheckResult("distill success_prob", dp, 1e-12, n_random))
    checks.append(CheckResult("distill out_fidelity", dd, 1e-12, n_random))
    return checks


# -- output directory --------------------------------------------------------


def write_outputs(scenario: Scenario, out_dir: str | os.PathLike, workers: int = 1) -> Path:
    """Run ``scenario`` and write its artifacts into a new directory.

    Raises:
        FileExistsError: ``out_dir`` already exists.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=False)
    (out / "scenario.yaml").write_text(dump_scenario(scenario))
    if scenario.kind == "pcs_validation":
        pcs = scenario.doc["pcs"]
        rows = pcs_rows(pcs["grid_step"], pcs["recursion_channel_fidelity"], pcs["gate_noise"])
        (out / "pcs.csv").write_text(pcs_csv(rows))
        checks = oracle_checks(pcs["grid_step"])
        (out / "summary.txt").write_text(format_checks(checks))
        return out
    (out / "topology.yaml").write_text(yaml.safe_dump(dump_topology(scenario.topology), sort_keys=True))
    frame = run_scenario(scenario, workers=workers)
    (out / "requests.csv").write_text(requests_csv(frame))
    (out / "aggregates.csv").write_text(aggregates_csv(frame))
    (out / "instances.csv").write_text(instances_csv(frame))
    (out / "summary.txt").write_text(format_summary(summarize(frame, scenario.baseline), scenario.baseline, scenario.name))
    return out


def format_checks(checks: list[CheckResult]) -> str:
    lines = [f"{'check':<34}{'cases':>6}{'max_dev':>12}{'tol':>9}  result"]
    for c in checks:
        lines.append(f"{c.name:<34}{c.cases:>6}{c.max_deviation:>12.3e}{c.tolerance:>9.0e}  {'PASS' if c.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"
