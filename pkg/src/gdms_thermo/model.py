"""Rational graph-directed Markov systems: parsing, representation, validation.

A system is a directed multigraph whose edges carry finite sets of rational
maps.  Each (map, edge) pair is a *generator*; generators are numbered in
document order and every other module addresses them by that index.

Document format (JSON)::

    {"vertices": ["v1", "v2"],
     "edges": [{"id": "e1", "from": "v1", "to": "v2",
                "maps": [{"num": [[re, im], ...], "den": [[re, im], ...]}]}]}

Coefficients are ascending by power; ``den`` defaults to ``[[1, 0]]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import SystemParseError
from .poly import RationalMap, compose, mobius_matrix

DEFAULT_MAX_LOOP_LEN = 6
LOXODROMIC_TOL = 1e-9


@dataclass(frozen=True)
class Edge:
    index: int
    name: str
    source: int
    target: int


@dataclass(frozen=True)
class Generator:
    """One element ``(g, e)`` of the generator index set."""

    index: int
    edge: int
    map_slot: int
    source: int
    target: int
    map: RationalMap

    @property
    def degree(self) -> int:
        return self.map.degree


@dataclass(frozen=True, eq=False)
class GdmsSystem:
    """Immutable finitely generated rational GDMS."""

    vertices: tuple
    edges: tuple
    maps: tuple  # maps[e] is the tuple of RationalMaps on edge e

    def __post_init__(self):
        names = list(self.vertices)
        if not names:
            raise ValueError("a system needs at least one vertex")
        if len(set(names)) != len(names):
            raise ValueError("vertex names must be unique")
        if len(self.maps) != len(self.edges):
            raise ValueError("one map list per edge required")
        for e, gamma in zip(self.edges, self.maps):
            if not (0 <= e.source < len(names) and 0 <= e.target < len(names)):
                raise ValueError(f"edge {e.name!r} references an unknown vertex")
            if not gamma:
                raise ValueError(f"edge {e.name!r} carries no maps")
            keys = [_map_key(g) for g in gamma]
            if len(set(keys)) != len(keys):
                raise ValueError(f"edge {e.name!r} carries duplicate maps")

    @cached_property
    def generators(self) -> tuple:
        gens = []
        for e, gamma in zip(self.edges, self.maps):
            for slot, g in enumerate(gamma):
                gens.append(Generator(len(gens), e.index, slot, e.source, e.target, g))
        return tuple(gens)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([g.degree for g in self.generators], dtype=float)

    @cached_property
    def sources(self) -> np.ndarray:
        return np.array([g.source for g in self.generators], dtype=int)

    @cached_property
    def targets(self) -> np.ndarray:
        return np.array([g.target for g in self.generators], dtype=int)

    def vertex_index(self, vertex) -> int:
        """Accept a vertex name or index and return the index."""
        if isinstance(vertex, (int, np.integer)):
            if not 0 <= vertex < self.n_vertices:
                raise IndexError(f"vertex index {vertex} out of range")
            return int(vertex)
        try:
            return self.vertices.index(vertex)
        except ValueError:
            raise KeyError(f"unknown vertex {vertex!r}") from None

    def generator_label(self, alpha: int) -> str:
        gen = self.generators[alpha]
        return f"{self.edges[gen.edge].name}:{gen.map_slot}"

    def word_label(self, word) -> str:
        return "-".join(self.generator_label(a) for a in word)

    def word_map(self, word) -> RationalMap:
        """``g_xi = g_{xi_n} o ... o g_{xi_1}``."""
        g = self.generators[word[0]].map
        for a in word[1:]:
            g = compose(self.generators[a].map, g)
        return g

    def to_document(self) -> dict:
        edges = []
        for e, gamma in zip(self.edges, self.maps):
            edges.append(
                {
                    "id": e.name,
                    "from": self.vertices[e.source],
                    "to": self.vertices[e.target],
                    "maps": [
                        {"num": _coeff_pairs(g.num.coeffs), "den": _coeff_pairs(g.den.coeffs)}
                        for g in gamma
                    ],
                }
            )
        return {"vertices": list(self.vertices), "edges": edges}

    def digest(self) -> str:
        canon = json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _coeff_pairs(coeffs):
    return [[c.real, c.imag] for c in coeffs]


def _map_key(g):
    return (g.num.coeffs, g.den.coeffs)


# --------------------------------------------------------------------------
# parsing


def _coeff_list(raw, where):
    if not isinstance(raw, list) or not raw:
        raise SystemParseError(f"{where}: expected a nonempty list of [re, im] pairs")
    out = []
    for k, pair in enumerate(raw):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise SystemParseError(f"{where}[{k}]: expected [re, im] numbers")
        if not all(math.isfinite(x) for x in pair):
            raise SystemParseError(f"{where}[{k}]: non-finite coefficient")
        out.append(complex(pair[0], pair[1]))
    return out


def parse_system(document) -> GdmsSystem:
    """Build a validated :class:`GdmsSystem` from JSON text or a decoded dict."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SystemParseError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(document, dict):
        raise SystemParseError("document must be a JSON object")
    unknown = set(document) - {"vertices", "edges"}
    if unknown:
        raise SystemParseError(f"unknown top-level keys: {sorted(unknown)}")

    vertices = document.get("vertices")
    if not isinstance(vertices, list) or not vertices or not all(isinstance(v, str) for v in vertices):
        raise SystemParseError("'vertices' must be a nonempty list of strings")
    if len(set(vertices)) != len(vertices):
        raise SystemParseError("vertex names must be unique")
    vindex = {v: i for i, v in enumerate(vertices)}

    raw_edges = document.get("edges")
    if not isinstance(raw_edges, list) or not raw_edges:
        raise SystemParseError("'edges' must be a nonempty list")
    edges, maps, seen = [], [], set()
    for k, raw in enumerate(raw_edges):
        where = f"edges[{k}]"
        if not isinstance(raw, dict):
            raise SystemParseError(f"{where}: expected an object")
        missing = {"id", "from", "to", "maps"} - set(raw)
        if missing:
            raise SystemParseError(f"{where}: missing keys {sorted(missing)}")
        extra = set(raw) - {"id", "from", "to", "maps"}
        if extra:
            raise SystemParseError(f"{where}: unknown keys {sorted(extra)}")
        name = raw["id"]
        if not isinstance(name, str) or name in seen:
            raise SystemParseError(f"{where}: edge id must be a unique string")
        seen.add(name)
        for key in ("from", "to"):
            if raw[key] not in vindex:
                raise SystemParseError(f"{where}: unknown vertex {raw[key]!r}")
        raw_maps = raw["maps"]
        if not isinstance(raw_maps, list) or not raw_maps:
            raise SystemParseError(f"{where}: empty map list (Gamma_e must be nonempty)")
        gamma = []
        for m, rm in enumerate(raw_maps):
            mwhere = f"{where}.maps[{m}]"
            if not isinstance(rm, dict) or "num" not in rm or set(rm) - {"num", "den"}:
                raise SystemParseError(f"{mwhere}: expected an object with 'num' and optional 'den'")
            num = _coeff_list(rm["num"], f"{mwhere}.num")
            den = _coeff_list(rm.get("den", [[1, 0]]), f"{mwhere}.den")
            if all(c == 0 for c in den):
                raise SystemParseError(f"{mwhere}: zero denominator polynomial")
            try:
                g = RationalMap(num, den)
            except ValueError as exc:
                raise SystemParseError(f"{mwhere}: {exc}") from None
            if any(_map_key(g) == _map_key(h) for h in gamma):
                raise SystemParseError(f"{mwhere}: duplicate map on edge {name!r}")
            gamma.append(g)
        edges.append(Edge(k, name, vindex[raw["from"]], vindex[raw["to"]]))
        maps.append(tuple(gamma))
    return GdmsSystem(tuple(vertices), tuple(edges), tuple(maps))


def load_system(path) -> GdmsSystem:
    text = Path(path).read_text()
    return parse_system(text)


def serialize_system(system: GdmsSystem) -> str:
    return json.dumps(system.to_document(), indent=2)


def build_system(vertices, edges) -> GdmsSystem:
    """Convenience constructor.

    ``edges`` is a list of ``(source, target, [RationalMap, ...])`` with
    vertex names; edge ids are generated as ``e1, e2, ...``.
    """
    vindex = {v: i for i, v in enumerate(vertices)}
    es, ms = [], []
    for k, (src, dst, gamma) in enumerate(edges):
        es.append(Edge(k, f"e{k + 1}", vindex[src], vindex[dst]))
        ms.append(tuple(gamma))
    return GdmsSystem(tuple(vertices), tuple(es), tuple(ms))


# --------------------------------------------------------------------------
# graph structure


def adjacency_counts(system: GdmsSystem) -> np.ndarray:
    """``A[i, j]`` = number of edges from vertex i to vertex j."""
    A = np.zeros((system.n_vertices, system.n_vertices), dtype=np.int64)
    for e in system.edges:
        A[e.source, e.target] += 1
    return A


def generator_counts(system: GdmsSystem) -> np.ndarray:
    """Like :func:`adjacency_counts` but counting generators (maps), not edges."""
    A = np.zeros((system.n_vertices, system.n_vertices), dtype=np.int64)
    np.add.at(A, (system.sources, system.targets), 1)
    return A


def _reachable(adj, start):
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return seen


def check_irreducible(system: GdmsSystem) -> bool:
    """True iff the edge graph is strongly connected."""
    A = adjacency_counts(system) > 0
    n = system.n_vertices
    return len(_reachable(A, 0)) == n and len(_reachable(A.T, 0)) == n


def graph_period(system: GdmsSystem) -> int:
    """gcd of the cycle lengths of an irreducible graph (1 = aperiodic)."""
    A = adjacency_counts(system) > 0
    level = {0: 0}
    queue = [0]
    for i in queue:
        for j in np.flatnonzero(A[i]):
            j = int(j)
            if j not in level:
                level[j] = level[i] + 1
                queue.append(j)
    period = 0
    for e in system.edges:
        if e.source in level and e.target in level:
            period = math.gcd(period, level[e.source] + 1 - level[e.target])
    return max(period, 1)


def path_reachability(system: GdmsSystem, start: int, max_len: int) -> np.ndarray:
    """``R[k, i]`` is True iff some admissible word of length k leads from ``start`` to ``i``."""
    A = (generator_counts(system) > 0).astype(np.int64)
    R = np.zeros((max_len + 1, system.n_vertices), dtype=bool)
    R[0, start] = True
    for k in range(1, max_len + 1):
        R[k] = (R[k - 1].astype(np.int64) @ A) > 0
    return R


# --------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class LoopReport:
    word: tuple
    trace_sq: complex
    loxodromic: bool


@dataclass
class SystemDiagnostics:
    irreducible: bool
    has_degree_ge2: bool
    mobius_loop_report: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def _loop_words(system, length, allowed):
    """Admissible loops of the given length using only ``allowed`` generators,
    one representative per cyclic rotation class."""
    by_source = {}
    for a in allowed:
        by_source.setdefault(system.generators[a].source, []).append(a)
    seen = set()
    for first in allowed:
        stack = [(first,)]
        while stack:
            word = stack.pop()
            end = system.generators[word[-1]].target
            if len(word) == length:
                if end == system.generators[word[0]].source:
                    canon = min(word[k:] + word[:k] for k in range(length))
                    if canon not in seen:
                        seen.add(canon)
                        yield canon
                continue
            for a in reversed(by_source.get(end, [])):
                stack.append(word + (a,))


def is_loxodromic(matrix: np.ndarray, tol=LOXODROMIC_TOL) -> tuple:
    """Return ``(trace^2, loxodromic)`` for a Mobius matrix normalised to det 1."""
    det = np.linalg.det(matrix)
    normed = matrix / np.sqrt(det)
    tr2 = complex(np.trace(normed) ** 2)
    in_segment = abs(tr2.imag) <= tol and -tol <= tr2.real <= 4 + tol
    return tr2, not in_segment


def check_loxodromic_loops(system: GdmsSystem, max_loop_len=DEFAULT_MAX_LOOP_LEN) -> list:
    """Classify every degree-one loop word up to ``max_loop_len``.

    A loop whose composed Mobius map is not loxodromic violates a necessary
    condition for expansion along fibres.  Loops containing a generator of
    degree >= 2 are never reported.
    """
    if max_loop_len < 1:
        raise ValueError("max_loop_len must be >= 1")
    allowed = [g.index for g in system.generators if g.degree == 1]
    report = []
    for length in range(1, max_loop_len + 1):
        for word in _loop_words(system, length, allowed):
            m = np.eye(2, dtype=complex)
            for a in word:
                m = mobius_matrix(system.generators[a].map) @ m
            tr2, lox = is_loxodromic(m)
            report.append(LoopReport(word, tr2, lox))
    return report


def diagnose(system: GdmsSystem, max_loop_len=DEFAULT_MAX_LOOP_LEN) -> SystemDiagnostics:
    diag = SystemDiagnostics(
        irreducible=check_irreducible(system),
        has_degree_ge2=bool(np.any(system.degrees >= 2)),
        mobius_loop_report=check_loxodromic_loops(system, max_loop_len),
    )
    if not diag.irreducible:
        diag.warnings.append("graph is not strongly connected (system is not irreducible)")
    if not diag.has_degree_ge2:
        diag.warnings.append("every generator has degree 1")
    bad = [r for r in diag.mobius_loop_report if not r.loxodromic]
    if bad:
        diag.warnings.append(
            f"{len(bad)} Mobius loop(s) are not loxodromic; the system cannot be expanding along fibres"
        )
    return diag

