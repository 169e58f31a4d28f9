"""Static network description and the link-level physical model.

Topology documents are nested mappings (YAML or JSON on disk). A document
either lists ``nodes``, ``qchannels`` and ``cchannels`` explicitly or names a
``generator`` (``line`` or ``as``); ``load_topology`` expands and validates
both forms, and ``dump_topology`` writes the fully explicit normalized form.
"""

from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping

import jsonschema
import yaml

from .des import RngStream
from .entmath import CarParams, car_model, coexistence_fidelity, werner_decohere
from .errors import ConfigError, DomainError

LIGHT_NS_PER_KM = 5000.0

NODE_DEFAULTS = {
    "memory_count": 8,
    "memory_coherence_time_ns": 1_000_000_000,
    "swap_success_prob": 1.0,
    "gate_time_ns": 1_000,
}
QCHANNEL_DEFAULTS = {
    "length_km": 10.0,
    "attenuation_db_per_km": 0.2,
    "attempt_period_ns": 10_000,
    "detector_efficiency": 0.9,
    "dark_count_rate_per_ns": 0.0,
    "coexistence": None,
}

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_NODE_SCHEMA = {
    "type": "object",
    "required": ["id"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "memory_count": _POS_INT,
        "memory_coherence_time_ns": {"type": "number", "exclusiveMinimum": 0},
        "swap_success_prob": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "gate_time_ns": {"type": "integer", "minimum": 0},
    },
}
_ENDPOINTS = {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}
_CAR_SCHEMA = {
    "type": ["object", "null"],
    "required": ["alpha_s", "alpha_i", "mu_c"],
    "additionalProperties": False,
    "properties": {k: _NUM for k in ("alpha_s", "alpha_i", "mu_c", "mu_sn", "mu_in", "d_s", "d_i")},
}
_QCH_SCHEMA = {
    "type": "object",
    "required": ["endpoints"],
    "additionalProperties": False,
    "properties": {
        "endpoints": _ENDPOINTS,
        "length_km": {"type": "number", "exclusiveMinimum": 0},
        "attenuation_db_per_km": {"type": "number", "minimum": 0},
        "attempt_period_ns": {"type": "integer", "minimum": 1},
        "detector_efficiency": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "dark_count_rate_per_ns": {"type": "number", "minimum": 0},
        "coexistence": _CAR_SCHEMA,
    },
}
_CCH_SCHEMA = {
    "type": "object",
    "required": ["endpoints"],
    "additionalProperties": False,
    "properties": {"endpoints": _ENDPOINTS, "delay_ns": {"type": "integer", "minimum": 1}},
}
TOPOLOGY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "light_ns_per_km": {"type": "number", "exclusiveMinimum": 0},
        "defaults": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "node": {"type": "object"},
                "qchannel": {"type": "object"},
            },
        },
        "generator": {
            "type": "object",
            "required": ["type", "n"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["line", "as"]},
                "n": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "length_km": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "nodes": {"type": "array", "items": _NODE_SCHEMA},
        "qchannels": {"type": "array", "items": _QCH_SCHEMA},
        "cchannels": {"type": "array", "items": _CCH_SCHEMA},
    },
}


def edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    memory_count: int = NODE_DEFAULTS["memory_count"]
    memory_coherence_time_ns: float = NODE_DEFAULTS["memory_coherence_time_ns"]
    swap_success_prob: float = NODE_DEFAULTS["swap_success_prob"]
    gate_time_ns: int = NODE_DEFAULTS["gate_time_ns"]


@dataclass(frozen=True)
class QuantumChannel:
    endpoints: tuple[str, str]
    length_km: float = QCHANNEL_DEFAULTS["length_km"]
    attenuation_db_per_km: float = QCHANNEL_DEFAULTS["attenuation_db_per_km"]
    attempt_period_ns: int = QCHANNEL_DEFAULTS["attempt_period_ns"]
    detector_efficiency: float = QCHANNEL_DEFAULTS["detector_efficiency"]
    # Kept for the record only; dark counts reach the model through ``coexistence``.
    dark_count_rate_per_ns: float = 0.0
    coexistence: CarParams | None = None

    @property
    def key(self) -> tuple[str, str]:
        return edge_key(*self.endpoints)


@dataclass(frozen=True)
class ClassicalChannel:
    endpoints: tuple[str, str]
    delay_ns: int

    @property
    def key(self) -> tuple[str, str]:
        return edge_key(*self.endpoints)


@dataclass
class Topology:
    nodes: list[NodeSpec]
    qchannels: list[QuantumChannel]
    cchannels: list[ClassicalChannel]
    name: str = ""
    light_ns_per_km: float = LIGHT_NS_PER_KM
    adjacency: dict[str, list[str]] = field(init=False, repr=False)

    def __post_init__(self):
        self._node = {n.id: n for n in self.nodes}
        self._qch = {c.key: c for c in self.qchannels}
        self._cch = {c.key: c for c in self.cchannels}
        adj: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        for a, b in self._qch:
            adj[a].add(b)
            adj[b].add(a)
        self.adjacency = {k: sorted(v) for k, v in adj.items()}

    def node(self, node_id: str) -> NodeSpec:
        return self._node[node_id]

    def qchannel(self, a: str, b: str) -> QuantumChannel:
        return self._qch[edge_key(a, b)]

    def cchannel(self, a: str, b: str) -> ClassicalChannel:
        return self._cch[edge_key(a, b)]

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def edges(self) -> list[tuple[str, str]]:
        return sorted(self._qch)

    def degree(self, node_id: str) -> int:
        return len(self.adjacency[node_id])


@dataclass
class WernerPair:
    """A live entangled pair between two memories.

    ``origin`` records how the pair came to be: ``("link", tcoh)``,
    ``("swap", left, right, tcoh)`` or ``("distill", kept, other, tcoh)``;
    ``replay_fidelity`` rebuilds ``fidelity_at_creation`` from it.
    """

    id: int
    endpoints: tuple[str, str]
    fidelity_at_creation: float
    created_at: int
    tcoh: float
    slot_kind: str = "od"
    origin: tuple = ()

    def fidelity(self, now: int) -> float:
        return werner_decohere(self.fidelity_at_creation, now - self.created_at, self.tcoh)


def link_success_prob(ch: QuantumChannel) -> float:
    """Heralding probability of one attempt on a midpoint-BSM link."""
    eta = ch.detector_efficiency
    return eta * eta * 10.0 ** (-ch.attenuation_db_per_km * ch.length_km / 20.0) * 0.5


def link_fidelity(ch: QuantumChannel, source_fidelity: float) -> float:
    if ch.coexistence is None:
        return source_fidelity
    return coexistence_fidelity(source_fidelity, car_model(ch.coexistence))


def herald_delay_ns(topo: Topology, ch: QuantumChannel) -> int:
    """Emission to herald: photons reach the midpoint, the outcome travels back."""
    return topo.cchannel(*ch.endpoints).delay_ns


def expected_visibility(ch: QuantumChannel) -> float:
    """Two-photon fringe visibility implied by the link's CAR, ``(CAR - 1) / (CAR + 1)``."""
    if ch.coexistence is None:
        return 1.0
    car = car_model(ch.coexistence)
    return (car - 1.0) / (car + 1.0)


def _error_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path)


def _expand_generator(doc: Mapping[str, Any]) -> dict:
    gen = doc["generator"]
    n = gen["n"]
    length = gen.get("length_km", doc.get("defaults", {}).get("qchannel", {}).get("length_km", QCHANNEL_DEFAULTS["length_km"]))
    ids = [f"n{i}" for i in range(n)]
    if gen["type"] == "line":
        edges = [(ids[i], ids[i + 1]) for i in range(n - 1)]
    else:
        edges = [(ids[a], ids[b]) for a, b in preferential_attachment_edges(n, gen.get("seed", 0))]
    return {
        "name": doc.get("name", ""),
        "light_ns_per_km": doc.get("light_ns_per_km", LIGHT_NS_PER_KM),
        "defaults": doc.get("defaults", {}),
        "nodes": [{"id": i} for i in ids],
        "qchannels": [{"endpoints": [a, b], "length_km": length} for a, b in edges],
        "cchannels": [{"endpoints": [a, b]} for a, b in edges],
    }


def load_topology(doc: Mapping[str, Any]) -> Topology:
    """Validate a topology document and build a ``Topology``.

    Raises:
        ConfigError: with the offending path and reason.
    """
    doc = copy.deepcopy(dict(doc))
    validator = jsonschema.Draft7Validator(TOPOLOGY_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(_error_path(errors[0]), errors[0].message)
    if "generator" in doc:
        if any(k in doc for k in ("nodes", "qchannels", "cchannels")):
            raise ConfigError("generator", "use either a generator or explicit lists, not both")
        doc = _expand_generator(doc)
    for key in ("nodes", "qchannels"):
        if not doc.get(key):
            raise ConfigError(key, "must be a nonempty list")

    defaults = doc.get("defaults", {})
    node_def = {**NODE_DEFAULTS, **defaults.get("node", {})}
    qch_def = {**QCHANNEL_DEFAULTS, **defaults.get("qchannel", {})}
    light = float(doc.get("light_ns_per_km", LIGHT_NS_PER_KM))

    nodes = []
    seen = set()
    for i, nd in enumerate(doc["nodes"]):
        if nd["id"] in seen:
            raise ConfigError(f"nodes/{i}/id", f"duplicate node id {nd['id']!r}")
        seen.add(nd["id"])
        merged = {**node_def, **nd}
        unknown = set(merged) - set(NODE_DEFAULTS) - {"id"}
        if unknown:
            raise ConfigError(f"nodes/{i}", f"unknown fields {sorted(unknown)}")
        nodes.append(NodeSpec(**merged))

    def endpoints(path: str, ep: list[str]) -> tuple[str, str]:
        a, b = ep
        for x in (a, b):
            if x not in seen:
                raise ConfigError(path, f"unknown node {x!r}")
        if a == b:
            raise ConfigError(path, "self-loop")
        return (a, b)

    qchannels = []
    qkeys = set()
    for i, qd in enumerate(doc["qchannels"]):
        merged = {**qch_def, **qd}
        ep = endpoints(f"qchannels/{i}/endpoints", merged.pop("endpoints"))
        if edge_key(*ep) in qkeys:
            raise ConfigError(f"qchannels/{i}", f"duplicate channel {ep[0]}-{ep[1]}")
        qkeys.add(edge_key(*ep))
        car = merged.pop("coexistence")
        try:
            car = CarParams(**car) if car else None
            ch = QuantumChannel(endpoints=ep, coexistence=car, **merged)
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"qchannels/{i}", str(exc)) from exc
        qchannels.append(ch)

    length_of = {c.key: c.length_km for c in qchannels}
    cchannels = []
    ckeys = set()
    for i, cd in enumerate(doc.get("cchannels", [])):
        ep = endpoints(f"cchannels/{i}/endpoints", cd["endpoints"])
        key = edge_key(*ep)
        if key in ckeys:
            raise ConfigError(f"cchannels/{i}", f"duplicate channel {ep[0]}-{ep[1]}")
        ckeys.add(key)
        delay = cd.get("delay_ns")
        if delay is None:
            if key not in length_of:
                raise ConfigError(f"cchannels/{i}", "delay_ns required when no quantum channel runs alongside")
            delay = max(1, round(length_of[key] * light))
        cchannels.append(ClassicalChannel(ep, int(delay)))

    for i, ch in enumerate(qchannels):
        if ch.key not in ckeys:
            raise ConfigError(f"qchannels/{i}", f"quantum channel {ch.key[0]}-{ch.key[1]} has no classical channel")

    topo = Topology(nodes, qchannels, cchannels, name=doc.get("name", ""), light_ns_per_km=light)
    if not is_connected(topo):
        raise ConfigError("qchannels", "graph is disconnected")
    return topo


def is_connected(topo: Topology) -> bool:
    ids = topo.node_ids()
    seen = {ids[0]}
    todo = deque([ids[0]])
    while todo:
        u = todo.popleft()
        for v in topo.adjacency[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return len(seen) == len(ids)


def dump_topology(topo: Topology) -> dict:
    """Fully explicit, normalized document; ``load_topology`` of it is lossless."""

    def qch(c: QuantumChannel) -> dict:
        d = asdict(c)
        d["endpoints"] = list(c.endpoints)
        d["coexistence"] = asdict(c.coexistence) if c.coexistence else None
        return d

    return {
        "name": topo.name,
        "light_ns_per_km": topo.light_ns_per_km,
        "nodes": [asdict(n) for n in topo.nodes],
        "qchannels": [qch(c) for c in topo.qchannels],
        "cchannels": [{"endpoints": list(c.endpoints), "delay_ns": c.delay_ns} for c in topo.cchannels],
    }


def dumps_topology(topo: Topology) -> str:
    return yaml.safe_dump(dump_topology(topo), sort_keys=True, default_flow_style=False)


def preferential_attachment_edges(n: int, seed: int, m: int = 2) -> list[tuple[int, int]]:
    """Scale-free graph: each arriving node links to ``m`` existing nodes, chosen by degree.

    Starts from a single edge (0, 1); node ``k`` attaches to ``min(m, k)``
    distinct targets.
    """
    if n < 2:
        raise DomainError("need at least 2 nodes")
    rng = RngStream(seed, "topology:preferential-attachment")
    edges = [(0, 1)]
    # every edge contributes both endpoints, so uniform picks are degree-weighted
    stubs = [0, 1]
    for k in range(2, n):
        targets: list[int] = []
        while len(targets) < min(m, k):
            t = stubs[rng.integers(len(stubs))]
            if t not in targets:
                targets.append(t)
        for t in targets:
            edges.append((t, k))
            stubs.extend((t, k))
    return edges


def generate_as_topology(n: int, seed: int, **defaults: Any) -> Topology:
    """Synthetic autonomous-system-like topology (preferential attachment, 2 edges per node)."""
    if n < 2:
        raise DomainError("need at least 2 nodes")
    doc = {"name": f"as_{n}", "generator": {"type": "as", "n": n, "seed": seed}}
    if defaults:
        doc["defaults"] = defaults
    return load_topology(doc)


def line_topology(n: int, **defaults: Any) -> Topology:
    doc = {"name": f"line_{n}", "generator": {"type": "line", "n": n}}
    if defaults:
        doc["defaults"] = defaults
    return load_topology(doc)


# Project defaults, not measured hardware values.
TOPOLOGY_PRESETS: dict[str, dict] = {
    "two_node_arqnet": {
        "name": "two_node_arqnet",
        "defaults": {
            "node": {"memory_count": 4, "memory_coherence_time_ns": 100_000_000, "gate_time_ns": 1_000},
            "qchannel": {"attempt_period_ns": 20_000, "detector_efficiency": 0.9},
        },
        "nodes": [{"id": "bldg360"}, {"id": "bldg440"}],
        "qchannels": [
            {
                "endpoints": ["bldg360", "bldg440"],
                "length_km": 4.38,
                "attenuation_db_per_km": 0.25,
                # 1 ns coincidence window; Raman noise sized for CAR ~4.3 (visibility ~0.62)
                "coexistence": {
                    "alpha_s": 0.2,
                    "alpha_i": 0.2,
                    "mu_c": 0.005,
                    "mu_sn": 0.034,
                    "mu_in": 0.034,
                    "d_s": 1.0e-7,
                    "d_i": 1.0e-7,
                },
            }
        ],
        "cchannels": [{"endpoints": ["bldg360", "bldg440"]}],
    },
    "line_20": {
        "name": "line_20",
        "defaults": {
            "node": {"memory_count": 8, "memory_coherence_time_ns": 500_000_000, "gate_time_ns": 10_000},
            "qchannel": {"attempt_period_ns": 100_000, "attenuation_db_per_km": 0.2, "detector_efficiency": 0.5},
        },
        "generator": {"type": "line", "n": 20, "length_km": 20.0},
    },
    "as_200": {
        "name": "as_200",
        "defaults": {
            "node": {"memory_count": 8, "memory_coherence_time_ns": 500_000_000, "gate_time_ns": 10_000},
            "qchannel": {"attempt_period_ns": 100_000, "attenuation_db_per_km": 0.2, "detector_efficiency": 0.5},
        },
        "generator": {"type": "as", "n": 200, "seed": 2025, "length_km": 20.0},
    },
}


def topology_preset(name: str) -> Topology:
    if name not in TOPOLOGY_PRESETS:
        raise ConfigError("preset", f"unknown topology preset {name!r}; choose from {sorted(TOPOLOGY_PRESETS)}")
    return load_topology(TOPOLOGY_PRESETS[name])


def memory_pairs(pairs: Iterable[WernerPair], node: str) -> int:
    return sum((p.endpoints[0] == node) + (p.endpoints[1] == node) for p in pairs)
